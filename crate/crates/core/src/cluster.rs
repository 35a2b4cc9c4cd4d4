//! Growth of a one-dimensional cluster chain by probabilistic CPHASE
//! attachment, and small explicit state-vector checks of the cluster states
//! and the recovery after a failed attachment.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::geometry::sample_rng;
use crate::{Error, Result};

/// Largest chain handled by the explicit state-vector checks.
pub const MAX_CHECK_QUBITS: usize = 10;

/// Mean length change per attachment attempt: +1 with probability P,
/// −2 otherwise.
pub fn expected_growth(p: f64) -> f64 {
    3.0 * p - 2.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthRun {
    pub p_success: f64,
    pub ops: usize,
    pub initial: usize,
    /// Chain length after each attempt; `lengths[0]` is the initial length.
    pub lengths: Vec<usize>,
    pub successes: usize,
    /// Failures at length ≤ 2 that restarted from a single qubit.
    pub resets: usize,
    pub seed: u64,
}

impl GrowthRun {
    pub fn final_length(&self) -> usize {
        *self.lengths.last().unwrap_or(&self.initial)
    }

    /// Per-attempt length changes.
    pub fn increments(&self) -> impl Iterator<Item = i64> + '_ {
        self.lengths.windows(2).map(|w| w[1] as i64 - w[0] as i64)
    }

    pub fn mean_growth(&self) -> f64 {
        (self.final_length() as f64 - self.initial as f64) / self.ops as f64
    }

    /// Binomial standard error of the mean growth, 3√(P(1 − P)/m).
    pub fn standard_error(&self) -> f64 {
        3.0 * (self.p_success * (1.0 - self.p_success) / self.ops as f64).sqrt()
    }

    pub fn summary(&self) -> GrowthSummary {
        let mean = self.mean_growth();
        let stderr = self.standard_error();
        GrowthSummary {
            p_success: self.p_success,
            ops: self.ops,
            mean_growth: mean,
            expected_growth: expected_growth(self.p_success),
            standard_error: stderr,
            ci_low: mean - 1.96 * stderr,
            ci_high: mean + 1.96 * stderr,
            final_length: self.final_length(),
            resets: self.resets,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthSummary {
    pub p_success: f64,
    pub ops: usize,
    pub mean_growth: f64,
    pub expected_growth: f64,
    pub standard_error: f64,
    /// 95 % confidence interval of the mean growth.
    pub ci_low: f64,
    pub ci_high: f64,
    pub final_length: usize,
    pub resets: usize,
}

/// Attempts `m` attachments to a chain of `initial` qubits. A success adds
/// one qubit; a failure costs two (the failed qubit's neighbour is measured
/// away); a failure at length ≤ 2 restarts from one fresh qubit.
pub fn grow_chain(p: f64, m: usize, initial: usize, seed: u64) -> Result<GrowthRun> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("success probability {p} outside [0, 1]")));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("at least one attachment attempt is required".into()));
    }
    if initial == 0 {
        return Err(Error::InvalidParameter("initial chain length must be >= 1".into()));
    }
    let mut rng = sample_rng(seed, 0);
    let mut lengths = Vec::with_capacity(m + 1);
    lengths.push(initial);
    let mut len = initial;
    let (mut successes, mut resets) = (0, 0);
    for _ in 0..m {
        if rng.random_bool(p) {
            len += 1;
            successes += 1;
        } else if len <= 2 {
            len = 1;
            resets += 1;
        } else {
            len -= 2;
        }
        lengths.push(len);
    }
    Ok(GrowthRun { p_success: p, ops: m, initial, lengths, successes, resets, seed })
}

fn bit(index: usize, qubit: usize, n: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}

/// |+⟩^⊗n.
pub fn plus_state(n: usize) -> DVector<f64> {
    let d = 1 << n;
    DVector::from_element(d, 1.0 / (d as f64).sqrt())
}

/// Applies CPHASE between qubits `a` and `b` (0-based, qubit 0 most
/// significant).
pub fn apply_cphase(psi: &mut DVector<f64>, a: usize, b: usize, n: usize) {
    for (k, v) in psi.iter_mut().enumerate() {
        if bit(k, a, n) == 1 && bit(k, b, n) == 1 {
            *v = -*v;
        }
    }
}

/// |Ψₙ⟩: nearest-neighbour CPHASE chain on |+⟩^⊗n.
pub fn cluster_state(n: usize) -> DVector<f64> {
    let mut psi = plus_state(n);
    for i in 1..n {
        apply_cphase(&mut psi, i - 1, i, n);
    }
    psi
}

/// Largest ‖Kᵢψ − ψ‖ over the stabilisers Kᵢ = Z_{i−1} Xᵢ Z_{i+1}.
pub fn stabilizer_residual(psi: &DVector<f64>, n: usize) -> f64 {
    (0..n)
        .map(|i| {
            let mut out = DVector::zeros(psi.len());
            for k in 0..psi.len() {
                let mut sign = 1.0;
                if i > 0 && bit(k, i - 1, n) == 1 {
                    sign = -sign;
                }
                if i + 1 < n && bit(k, i + 1, n) == 1 {
                    sign = -sign;
                }
                out[k ^ (1 << (n - 1 - i))] = sign * psi[k];
            }
            (out - psi).norm()
        })
        .fold(0.0, f64::max)
}

/// Splits an n-qubit state on its last qubit: ψ = Σᵢ |aᵢ⟩|i⟩.
fn split_last(psi: &DVector<f64>) -> [DVector<f64>; 2] {
    let half = psi.len() / 2;
    [DVector::from_fn(half, |k, _| psi[2 * k]), DVector::from_fn(half, |k, _| psi[2 * k + 1])]
}

fn kron(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(a.len() * b.len(), |k, _| a[k / b.len()] * b[k % b.len()])
}

/// Amplitude error of the branch decomposition
/// |Ψₙ⟩ = 2^{-1/2} Σᵢ |φᵢ⟩|i⟩(|0⟩|+⟩ + (−1)ⁱ|1⟩|−⟩), with |φᵢ⟩ the
/// √2-scaled branches of |Ψₙ₋₂⟩ on its last qubit.
pub fn decomposition_residual(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidParameter("the branch decomposition needs n >= 3".into()));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let zero = DVector::from_vec(vec![1.0, 0.0]);
    let one = DVector::from_vec(vec![0.0, 1.0]);
    let plus = DVector::from_vec(vec![s, s]);
    let minus = DVector::from_vec(vec![s, -s]);
    let branches = split_last(&cluster_state(n - 2)).map(|a| a * 2f64.sqrt());
    let tail = |sign: f64| (kron(&zero, &plus) + kron(&one, &minus) * sign) * s;
    let built = kron(&kron(&branches[0], &zero), &tail(1.0)) * s + kron(&kron(&branches[1], &one), &tail(-1.0)) * s;
    Ok((built - cluster_state(n)).amax())
}

fn density(psi: &DVector<f64>) -> DMatrix<f64> {
    psi * psi.transpose()
}

/// Traces out the last `k` qubits.
fn trace_last(rho: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let m = 1 << k;
    let d = rho.nrows() / m;
    DMatrix::from_fn(d, d, |i, j| (0..m).map(|t| rho[(i * m + t, j * m + t)]).sum())
}

/// Attempts to attach a qubit to |Ψₙ⟩ and fails: the end qubit is dephased,
/// leaving a mixed state. Measuring qubit n − 1 in the computational basis
/// and applying Z to qubit n − 2 on outcome 1 must return |Ψₙ₋₂⟩; returns
/// the largest density-matrix error over both outcomes.
pub fn recovery_residual(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidParameter("recovery needs n >= 3".into()));
    }
    let d = 1 << n;
    let psi = cluster_state(n);
    let mut rho = density(&psi);
    // dephase qubit n: drop coherences between its |0⟩ and |1⟩
    for i in 0..d {
        for j in 0..d {
            if bit(i, n - 1, n) != bit(j, n - 1, n) {
                rho[(i, j)] = 0.0;
            }
        }
    }
    let target = density(&cluster_state(n - 2));
    let mut worst: f64 = 0.0;
    for outcome in 0..2 {
        let keep = |k: usize| bit(k, n - 2, n) == outcome;
        let mut post = DMatrix::from_fn(d, d, |i, j| if keep(i) && keep(j) { rho[(i, j)] } else { 0.0 });
        let p = post.trace();
        post /= p;
        if outcome == 1 {
            for i in 0..d {
                for j in 0..d {
                    let s = if bit(i, n - 3, n) == 1 { -1.0 } else { 1.0 } * if bit(j, n - 3, n) == 1 { -1.0 } else { 1.0 };
                    post[(i, j)] *= s;
                }
            }
        }
        let reduced = trace_last(&post, 2);
        worst = worst.max((reduced - &target).amax());
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClusterCheck {
    pub n: usize,
    pub stabilizer_residual: f64,
    /// None for n = 2, where the branch decomposition is empty.
    pub decomposition_residual: Option<f64>,
    pub recovery_residual: Option<f64>,
}

impl ClusterCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.stabilizer_residual <= tol
            && self.decomposition_residual.is_none_or(|r| r <= tol)
            && self.recovery_residual.is_none_or(|r| r <= tol)
    }
}

pub fn verify_cluster_state_small(n: usize) -> Result<ClusterCheck> {
    if !(2..=MAX_CHECK_QUBITS).contains(&n) {
        return Err(Error::InvalidParameter(format!("cluster check needs 2 <= n <= {MAX_CHECK_QUBITS}, got {n}")));
    }
    let psi = cluster_state(n);
    Ok(ClusterCheck {
        n,
        stabilizer_residual: stabilizer_residual(&psi, n),
        decomposition_residual: if n >= 3 { Some(decomposition_residual(n)?) } else { None },
        recovery_residual: if n >= 3 { Some(recovery_residual(n)?) } else { None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn growth_rate_cases() {
        assert_eq!(expected_growth(1.0), 1.0);
        assert!(expected_growth(2.0 / 3.0).abs() < 1e-15);
        assert_eq!(expected_growth(0.0), -2.0);
    }

    #[test]
    fn certain_success_adds_one_per_op() {
        let run = grow_chain(1.0, 10, 4, 0).unwrap();
        assert_eq!(run.final_length(), 14);
        assert!(run.increments().all(|d| d == 1));
    }

    #[test]
    fn failures_floor_at_one_qubit() {
        let run = grow_chain(0.0, 5, 5, 0).unwrap();
        assert_eq!(run.lengths, vec![5, 3, 1, 1, 1, 1]);
        assert_eq!(run.resets, 3);
    }

    #[test]
    fn growth_mean_within_binomial_error() {
        for p in [0.5, 2.0 / 3.0, 0.75, 0.9] {
            let m = 10_000;
            let run = grow_chain(p, m, 3 * m, 11).unwrap();
            assert_eq!(run.resets, 0);
            let dev = (run.mean_growth() - expected_growth(p)).abs();
            assert!(dev < 3.0 * run.standard_error(), "P = {p}: {} vs {}", run.mean_growth(), expected_growth(p));
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(grow_chain(1.5, 10, 1, 0).is_err());
        assert!(grow_chain(0.5, 0, 1, 0).is_err());
        assert!(verify_cluster_state_small(1).is_err());
    }

    #[test]
    fn two_qubit_cluster() {
        // (|0+⟩ + |1−⟩)/√2
        let expected = DVector::from_vec(vec![0.5, 0.5, 0.5, -0.5]);
        assert!((cluster_state(2) - expected).amax() < 1e-15);
    }

    #[test]
    fn four_qubit_cluster_amplitudes() {
        // (−1)^{number of adjacent 11 pairs} / 4
        let psi = cluster_state(4);
        for k in 0..16usize {
            let pairs = (0..3).filter(|&i| (k >> (3 - i)) & 1 == 1 && (k >> (2 - i)) & 1 == 1).count();
            let amp = if pairs % 2 == 0 { 0.25 } else { -0.25 };
            assert!((psi[k] - amp).abs() < 1e-15);
        }
    }

    #[test]
    fn small_clusters_verify() {
        for n in 2..=5 {
            let check = verify_cluster_state_small(n).unwrap();
            assert!(check.passes(1e-10), "{check:?}");
        }
    }

    #[test]
    fn recovery_without_correction_fails() {
        // skipping the Z correction on outcome 1 leaves a different state
        let n = 4;
        let psi = cluster_state(n);
        let target = cluster_state(n - 2);
        let d = 1 << n;
        let post = DVector::from_fn(d, |k, _| if bit(k, n - 2, n) == 1 { psi[k] } else { 0.0 });
        let reduced = trace_last(&density(&(post.clone() / post.norm())), 2);
        assert!((reduced - density(&target)).amax() > 0.1);
    }

    proptest! {
        #[test]
        fn increments_are_plus_one_or_minus_two(p in 0.0f64..=1.0, seed in any::<u64>()) {
            let run = grow_chain(p, 200, 1000, seed).unwrap();
            prop_assert!(run.increments().all(|d| d == 1 || d == -2));
            prop_assert_eq!(run.successes + run.increments().filter(|d| *d == -2).count(), 200);
        }

        #[test]
        fn runs_are_seed_deterministic(p in 0.0f64..=1.0, seed in any::<u64>()) {
            prop_assert_eq!(grow_chain(p, 100, 3, seed).unwrap(), grow_chain(p, 100, 3, seed).unwrap());
        }
    }
}
