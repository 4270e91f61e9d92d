//! Small dense linear-algebra helpers shared by the model modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative cutoff below which eigenvalues are treated as zero.
pub const PINV_CUTOFF: f64 = 1e-12;

/// Default relative rank tolerance for Vandermonde-type matrices.
pub const RANK_TOL: f64 = 1e-10;

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        if n == 0 {
            return SymEigen {
                values: DVector::zeros(0),
                vectors: DMatrix::zeros(0, 0),
            };
        }
        let eig = symmetrize(m).symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(n, n);
        for (j, &i) in order.iter().enumerate() {
            vectors.set_column(j, &eig.eigenvectors.column(i));
        }
        SymEigen { values, vectors }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// U diag(f(λ)) Uᵀ.
    pub fn apply_filter<F: Fn(f64) -> f64>(&self, f: F) -> DMatrix<f64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let w = f(self.values[j]);
            scaled.column_mut(j).scale_mut(w);
        }
        symmetrize(&(&scaled * self.vectors.transpose()))
    }
}

/// (A + Aᵀ)/2.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Numerical rank from singular values relative to the largest one.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Thin QR of a full-column-rank matrix. Prefix columns of Q span prefix columns of V.
pub fn orthonormalize(v: &DMatrix<f64>, tol: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, m) = v.shape();
    if m == 0 {
        return Ok((DMatrix::zeros(n, 0), DMatrix::zeros(0, 0)));
    }
    let rank = numerical_rank(v, tol);
    if rank < m {
        return Err(Error::NotUnisolvent { rank, required: m });
    }
    let qr = v.clone().qr();
    Ok((qr.q(), qr.r()))
}

/// Orthonormal basis of the orthogonal complement of span(Q), Q with orthonormal columns.
pub fn complement_basis(q: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = q.shape();
    if m == 0 {
        return DMatrix::identity(n, n);
    }
    if m >= n {
        return DMatrix::zeros(n, 0);
    }
    let mut aug = DMatrix::zeros(n, m + n);
    aug.view_mut((0, 0), (n, m)).copy_from(q);
    aug.view_mut((0, m), (n, n)).fill_with_identity();
    let full = aug.qr().q();
    full.columns(m, n - m).into_owned()
}

/// Moore-Penrose inverse of a symmetric matrix with relative eigenvalue cutoff.
pub fn pinv_sym(m: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    let eig = SymEigen::new(m);
    let thresh = cutoff * eig.max_abs();
    eig.apply_filter(|l| if l.abs() > thresh { 1.0 / l } else { 0.0 })
}

/// Least-squares slope of ln(y) against ln(x).
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let k = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// k log-spaced values from a to b inclusive.
pub fn logspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..k)
        .map(|i| (la + (lb - la) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        let e = SymEigen::new(&m);
        assert!((e.values[0] - 5.0).abs() < 1e-12);
        assert!((e.values[2] - 1.0).abs() < 1e-12);
        let back = e.apply_filter(|l| l);
        assert!(max_abs(&(back - m)) < 1e-12);
    }

    #[test]
    fn complement_is_orthogonal() {
        let v = DMatrix::from_fn(6, 2, |i, j| (i as f64).powi(j as i32));
        let (q, _) = orthonormalize(&v, RANK_TOL).unwrap();
        let c = complement_basis(&q);
        assert_eq!(c.ncols(), 4);
        assert!(max_abs(&(q.transpose() * &c)) < 1e-12);
        assert!(max_abs(&(c.transpose() * &c - DMatrix::identity(4, 4))) < 1e-12);
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let v = DMatrix::from_fn(5, 2, |i, _| i as f64);
        assert!(matches!(
            orthonormalize(&v, RANK_TOL),
            Err(Error::NotUnisolvent { rank: 1, required: 2 })
        ));
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((loglog_slope(&x, &y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pinv_of_projector() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let pi = pinv_sym(&p, PINV_CUTOFF);
        assert!(max_abs(&(pi - &p)) < 1e-12);
    }
}
