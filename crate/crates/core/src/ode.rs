//! Dormand–Prince 5(4) integrator for complex systems y' = f(t, y), with
//! adaptive step control and 4th-order continuous output.

use std::ops::ControlFlow;

use num_complex::Complex64;

use crate::{Error, Result};

type C = Complex64;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-9, atol: 1e-12, h_init: None, h_max: f64::INFINITY, max_steps: 5_000_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub evaluations: usize,
    pub accepted: usize,
    pub rejected: usize,
}

/// Continuous extension over one accepted step.
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub t0: f64,
    pub t1: f64,
    rcont: [Vec<C>; 5],
}

impl DenseStep {
    pub fn dim(&self) -> usize {
        self.rcont[0].len()
    }

    /// Interpolated solution at `t` ∈ [t0, t1].
    pub fn eval_into(&self, t: f64, out: &mut [C]) {
        let h = self.t1 - self.t0;
        let theta = if h == 0.0 { 1.0 } else { (t - self.t0) / h };
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        for i in 0..out.len() {
            out[i] = r1[i] + (r2[i] + (r3[i] + (r4[i] + r5[i] * theta1) * theta) * theta1) * theta;
        }
    }

    pub fn eval(&self, t: f64) -> Vec<C> {
        let mut out = vec![C::new(0.0, 0.0); self.dim()];
        self.eval_into(t, &mut out);
        out
    }

    /// State at the end of the step.
    pub fn end(&self) -> Vec<C> {
        self.eval(self.t1)
    }
}

fn error_norm(y: &[C], y_new: &[C], err: &[C], rtol: f64, atol: f64) -> f64 {
    let n = y.len().max(1) as f64;
    let s: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| {
            let sc = atol + rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

fn initial_step<F: FnMut(f64, &[C], &mut [C])>(f: &mut F, t: f64, y: &[C], f0: &[C], span: f64, opts: &OdeOptions) -> f64 {
    let sc: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.norm()).collect();
    let n = y.len().max(1) as f64;
    let d0 = (y.iter().zip(&sc).map(|(v, s)| (v.norm() / s).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().zip(&sc).map(|(v, s)| (v.norm() / s).powi(2)).sum::<f64>() / n).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span.abs()).min(opts.h_max);
    let y1: Vec<C> = y.iter().zip(f0).map(|(a, b)| a + b * h0).collect();
    let mut f1 = vec![C::new(0.0, 0.0); y.len()];
    f(t + h0, &y1, &mut f1);
    let d2 = (f1.iter().zip(f0).zip(&sc).map(|((a, b), s)| ((a - b).norm() / s).powi(2)).sum::<f64>() / n).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(span.abs()).min(opts.h_max)
}

/// Integrates from `t0` to `t_end`, leaving the final state in `y`.
///
/// `observer` is called after every accepted step with its continuous
/// extension and may stop the integration early by returning
/// `ControlFlow::Break`. Returns the time reached.
pub fn integrate<F, O>(f: F, t0: f64, y: &mut Vec<C>, t_end: f64, opts: &OdeOptions, observer: O) -> Result<(f64, Stats)>
where
    F: FnMut(f64, &[C], &mut [C]),
    O: FnMut(&DenseStep) -> ControlFlow<()>,
{
    integrate_projected(f, |_: &mut [C]| false, t0, y, t_end, opts, observer)
}

/// As [`integrate`], with a projection applied to the state after every
/// accepted step. The projection returns `true` when it changed the state,
/// in which case the derivative at the step end is recomputed.
pub fn integrate_projected<F, P, O>(
    mut f: F,
    mut project: P,
    t0: f64,
    y: &mut Vec<C>,
    t_end: f64,
    opts: &OdeOptions,
    mut observer: O,
) -> Result<(f64, Stats)>
where
    F: FnMut(f64, &[C], &mut [C]),
    P: FnMut(&mut [C]) -> bool,
    O: FnMut(&DenseStep) -> ControlFlow<()>,
{
    let n = y.len();
    let mut stats = Stats::default();
    if t_end <= t0 {
        return Ok((t0, stats));
    }
    let zero = C::new(0.0, 0.0);
    let mut k: [Vec<C>; 7] = std::array::from_fn(|_| vec![zero; n]);
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut err = vec![zero; n];
    let mut dense = DenseStep { t0, t1: t0, rcont: std::array::from_fn(|_| vec![zero; n]) };

    let mut t = t0;
    f(t, y, &mut k[0]);
    stats.evaluations += 1;
    let mut h = match opts.h_init {
        Some(h) => h.min(t_end - t0),
        None => {
            stats.evaluations += 1;
            let k0 = k[0].clone();
            initial_step(&mut f, t, y, &k0, t_end - t0, opts)
        }
    };
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integration { t, reason: format!("exceeded {} steps", opts.max_steps) });
        }
        if h.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Integration { t, reason: format!("step size underflow (h = {h:e})") });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        for i in 0..n {
            tmp[i] = y[i] + k[0][i] * (h * A21);
        }
        f(t + C2 * h, &tmp, &mut k[1]);
        for i in 0..n {
            tmp[i] = y[i] + (k[0][i] * A31 + k[1][i] * A32) * h;
        }
        f(t + C3 * h, &tmp, &mut k[2]);
        for i in 0..n {
            tmp[i] = y[i] + (k[0][i] * A41 + k[1][i] * A42 + k[2][i] * A43) * h;
        }
        f(t + C4 * h, &tmp, &mut k[3]);
        for i in 0..n {
            tmp[i] = y[i] + (k[0][i] * A51 + k[1][i] * A52 + k[2][i] * A53 + k[3][i] * A54) * h;
        }
        f(t + C5 * h, &tmp, &mut k[4]);
        for i in 0..n {
            tmp[i] = y[i] + (k[0][i] * A61 + k[1][i] * A62 + k[2][i] * A63 + k[3][i] * A64 + k[4][i] * A65) * h;
        }
        f(t + h, &tmp, &mut k[5]);
        for i in 0..n {
            y_new[i] = y[i] + (k[0][i] * A71 + k[2][i] * A73 + k[3][i] * A74 + k[4][i] * A75 + k[5][i] * A76) * h;
        }
        f(t + h, &y_new, &mut k[6]);
        stats.evaluations += 6;

        for i in 0..n {
            err[i] = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * h;
        }
        let e = error_norm(y, &y_new, &err, opts.rtol, opts.atol);
        if !e.is_finite() {
            return Err(Error::Integration { t, reason: "non-finite state".into() });
        }

        // PI step-size controller as in DOPRI5.
        let fac11 = e.powf(0.2 - 0.04 * 0.75);
        let mut fac = fac11 / fac_old.powf(0.04);
        fac = (fac / 0.9).clamp(1.0 / 10.0, 1.0 / 0.2);
        let h_new = h / fac;

        if e <= 1.0 {
            fac_old = e.max(1e-4);
            stats.accepted += 1;
            for i in 0..n {
                let ydiff = y_new[i] - y[i];
                let bspl = k[0][i] * h - ydiff;
                dense.rcont[0][i] = y[i];
                dense.rcont[1][i] = ydiff;
                dense.rcont[2][i] = bspl;
                dense.rcont[3][i] = ydiff - k[6][i] * h - bspl;
                dense.rcont[4][i] =
                    (k[0][i] * D1 + k[2][i] * D3 + k[3][i] * D4 + k[4][i] * D5 + k[5][i] * D6 + k[6][i] * D7) * h;
            }
            dense.t0 = t;
            dense.t1 = if last { t_end } else { t + h };
            t = dense.t1;
            y.copy_from_slice(&y_new);
            if project(y) {
                f(t, y, &mut k[0]);
                stats.evaluations += 1;
            } else {
                k.swap(0, 6);
            }
            let flow = observer(&dense);
            if last || flow.is_break() {
                return Ok((t, stats));
            }
            let mut h_next = h_new.min(opts.h_max);
            if last_rejected {
                h_next = h_next.min(h);
            }
            last_rejected = false;
            h = h_next;
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h /= (fac11 / 0.9).min(1.0 / 0.2);
        }
    }
}
