//! Small dense eigen-solvers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

type C = Complex64;

/// Eigenvectors with a condition number above this are reported as
/// (numerically) defective.
pub const DEFECTIVE_CONDITION: f64 = 1e8;

/// Eigenpairs of a Hermitian matrix, ascending in eigenvalue.
pub fn hermitian_eigen(m: &DMatrix<C>) -> (Vec<f64>, DMatrix<C>) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Eigenpairs of a real symmetric matrix, descending in eigenvalue.
pub fn symmetric_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub struct GeneralEigen {
    pub values: Vec<C>,
    /// Unit-norm right eigenvectors as columns.
    pub right: DMatrix<C>,
    /// Rows of the inverse of `right`: ⟨Lₖ|Rⱼ⟩ = δₖⱼ.
    pub left: DMatrix<C>,
    pub condition: f64,
}

impl GeneralEigen {
    pub fn defective(&self) -> bool {
        !self.condition.is_finite() || self.condition > DEFECTIVE_CONDITION
    }
}

/// Eigen-decomposition of a general complex matrix: eigenvalues from the
/// Schur form, eigenvectors by shifted inverse iteration. Vectors belonging
/// to (nearly) coincident eigenvalues are orthogonalised against each other
/// so that a diagonalisable degenerate block still yields a full basis.
pub fn general_eigen(m: &DMatrix<C>) -> GeneralEigen {
    let n = m.nrows();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    if n == 1 {
        let one = DMatrix::from_element(1, 1, C::new(1.0, 0.0));
        return GeneralEigen { values: vec![m[(0, 0)]], right: one.clone(), left: one, condition: 1.0 };
    }
    let values: Vec<C> = {
        m.clone()
            .schur()
            .eigenvalues()
            .map(|v| v.iter().copied().collect())
            .unwrap_or_else(|| m.diagonal().iter().copied().collect())
    };
    let mut right = DMatrix::<C>::zeros(n, n);
    for k in 0..n {
        let cluster: Vec<usize> = (0..k).filter(|&j| (values[j] - values[k]).norm() < 1e-7 * scale).collect();
        let v = inverse_iteration(m, values[k], scale, k, &cluster.iter().map(|&j| right.column(j).into_owned()).collect::<Vec<_>>());
        right.set_column(k, &v);
    }
    let residual = (0..n)
        .map(|k| (m * right.column(k) - right.column(k) * values[k]).norm())
        .fold(0.0, f64::max);
    let (left, mut condition) = match right.clone().try_inverse() {
        Some(inv) => {
            let cond = right.norm() * inv.norm() / n as f64;
            (inv, cond)
        }
        None => (right.adjoint(), f64::INFINITY),
    };
    if residual > 1e-8 * scale {
        // orthogonalisation inside a cluster could not produce an eigenvector
        condition = f64::INFINITY;
    }
    GeneralEigen { values, right, left, condition }
}

fn inverse_iteration(m: &DMatrix<C>, lambda: C, scale: f64, seed: usize, against: &[DVector<C>]) -> DVector<C> {
    let n = m.nrows();
    let shift = lambda + C::new(1e-13 * scale, 1e-13 * scale);
    let a = m - DMatrix::<C>::identity(n, n) * shift;
    let lu = a.lu();
    // Deterministic, non-symmetric start vector so that no eigenvector is
    // accidentally orthogonal to it.
    let mut v = DVector::from_fn(n, |i, _| {
        let x = (i * 7 + seed * 13 + 1) as f64;
        C::new((0.37 * x).sin() + 1.1, (0.91 * x).cos())
    });
    for _ in 0..4 {
        project_out(&mut v, against);
        let norm = v.norm();
        if norm == 0.0 {
            break;
        }
        v /= C::from(norm);
        match lu.solve(&v) {
            Some(w) if w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => v = w,
            _ => break,
        }
    }
    project_out(&mut v, against);
    let norm = v.norm();
    if norm > 0.0 {
        v /= C::from(norm);
    }
    // Fix the global phase: largest component real and positive.
    let (imax, _) = v.iter().enumerate().fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 + 1e-12 { (i, z.norm()) } else { acc });
    let ph = v[imax].conj() / v[imax].norm().max(f64::MIN_POSITIVE);
    v * ph
}

fn project_out(v: &mut DVector<C>, against: &[DVector<C>]) {
    for u in against {
        let c = u.dotc(v);
        *v -= u * c;
    }
}
