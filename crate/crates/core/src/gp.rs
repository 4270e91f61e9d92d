//! Plain Gaussian-process regression, its smoother and selection criteria.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{cross_matrix, kernel_matrix, Kernel};
use crate::linalg::SymEigen;
use crate::polybasis::Design;
use crate::spm::{clip_variance, SmootherMatrix};

/// θ = (ε, γ, σ²) plus an optional nugget ν added to the unit-gain kernel matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparameters {
    pub epsilon: f64,
    pub gamma: f64,
    pub sigma2: f64,
    pub nugget: f64,
}

impl GpHyperparameters {
    pub fn new(epsilon: f64, gamma: f64, sigma2: f64) -> Self {
        GpHyperparameters {
            epsilon,
            gamma,
            sigma2,
            nugget: 0.0,
        }
    }

    pub fn with_nugget(self, nugget: f64) -> Self {
        GpHyperparameters { nugget, ..self }
    }

    /// Kernel with this ε and γ.
    pub fn apply(&self, shape: &Kernel) -> Kernel {
        shape.with_epsilon(self.epsilon).with_gamma(self.gamma)
    }

    /// Diagonal loading relative to the unit-gain matrix: σ²/γ + ν.
    pub fn ridge(&self) -> f64 {
        self.sigma2 / self.gamma + self.nugget
    }

    /// Noise variance seen by the data once the nugget is folded in.
    pub fn effective_noise(&self) -> f64 {
        self.sigma2 + self.gamma * self.nugget
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !(self.sigma2 >= 0.0) || !(self.nugget >= 0.0) {
            return Err(Error::InvalidInput(
                "need gamma > 0, sigma2 >= 0 and nugget >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriterionKind {
    LooMse,
    LooNll,
    Sure,
    Nlml,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    pub kind: CriterionKind,
    pub value: f64,
}

fn factor(kernel: &Kernel, x: &Design, diag: f64) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let mut c = kernel_matrix(kernel, x);
    for i in 0..x.n() {
        c[(i, i)] += diag;
    }
    c.clone().cholesky().ok_or_else(|| Error::IllConditioned {
        min_eigenvalue: SymEigen::new(&c).min(),
    })
}

/// Posterior mean and latent variance at the query points.
pub fn gp_posterior(
    kernel: &Kernel,
    x: &Design,
    y: &DVector<f64>,
    sigma2: f64,
    query: &Design,
) -> Result<(DVector<f64>, DVector<f64>)> {
    gp_posterior_with_nugget(kernel, x, y, sigma2, 0.0, query)
}

/// As [`gp_posterior`] with nugget ν: K + (σ² + γν)I is factored.
pub fn gp_posterior_with_nugget(
    kernel: &Kernel,
    x: &Design,
    y: &DVector<f64>,
    sigma2: f64,
    nugget: f64,
    query: &Design,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if y.len() != x.n() {
        return Err(Error::InvalidInput("y length differs from design size".into()));
    }
    let chol = factor(kernel, x, sigma2 + kernel.gamma * nugget)?;
    let kx = cross_matrix(kernel, query, x);
    let mean = &kx * chol.solve(y);
    let w = chol.solve(&kx.transpose());
    let mut var = DVector::zeros(query.n());
    for i in 0..query.n() {
        let p = query.point(i);
        let kxx = kernel.eval(p, p);
        let qf = kx.row(i).transpose().dot(&w.column(i));
        var[i] = clip_variance(kxx - qf, kxx.abs().max(qf.abs()).max(1.0), i)?;
    }
    Ok((mean, var))
}

/// Eigendecomposition of the unit-gain kernel matrix at a fixed ε, reused over γ.
#[derive(Debug, Clone)]
pub struct SpectralCache {
    pub eig: SymEigen,
}

impl SpectralCache {
    pub fn new(kernel: &Kernel, x: &Design) -> Self {
        SpectralCache {
            eig: SymEigen::new(&kernel_matrix(&kernel.with_gamma(1.0), x)),
        }
    }

    pub fn n(&self) -> usize {
        self.eig.values.len()
    }

    /// Eigenvalues clipped at zero (descending).
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eig.values.iter().map(|v| v.max(0.0)).collect()
    }

    /// Fails when K̃ + ridge·I is not safely positive definite in double precision.
    pub fn check(&self, ridge: f64) -> Result<()> {
        let n = self.n() as f64;
        let lmax = self.eig.values.iter().copied().fold(0.0, f64::max);
        let lmin = self.eig.min() + ridge;
        if lmin <= 10.0 * n * f64::EPSILON * lmax {
            return Err(Error::IllConditioned { min_eigenvalue: lmin });
        }
        Ok(())
    }

    fn filter(&self, ridge: f64) -> Vec<f64> {
        self.eig
            .values
            .iter()
            .map(|&l| {
                let l = l.max(0.0);
                l / (l + ridge)
            })
            .collect()
    }

    /// Σ λ/(λ + ridge) without the conditioning check.
    pub fn dof_for_ridge(&self, ridge: f64) -> f64 {
        self.filter(ridge).iter().sum()
    }

    pub fn dof(&self, theta: &GpHyperparameters) -> Result<f64> {
        theta.validate()?;
        self.check(theta.ridge())?;
        Ok(self.dof_for_ridge(theta.ridge()))
    }

    pub fn smoother(&self, theta: &GpHyperparameters) -> Result<SmootherMatrix> {
        theta.validate()?;
        let ridge = theta.ridge();
        self.check(ridge)?;
        let w = self.filter(ridge);
        let m = self.eig.apply_filter(|l| {
            let l = l.max(0.0);
            l / (l + ridge)
        });
        Ok(SmootherMatrix::with_eigenvalues(m, w))
    }
}

/// M = K(K + (σ²/γ)I)⁻¹ for the kernel at θ.
pub fn gp_smoother(shape: &Kernel, x: &Design, theta: &GpHyperparameters) -> Result<SmootherMatrix> {
    SpectralCache::new(&shape.with_epsilon(theta.epsilon), x).smoother(theta)
}

pub fn dof(m: &SmootherMatrix) -> f64 {
    m.trace
}

/// Fast leave-one-out squared error from the smoother.
pub fn loo_mse(m: &SmootherMatrix, y: &DVector<f64>) -> Result<CriterionValue> {
    let n = y.len();
    let r = y - m.apply(y);
    let mut s = 0.0;
    for i in 0..n {
        let mii = m.matrix[(i, i)];
        if mii >= 1.0 - 1e-10 {
            return Err(Error::InterpolatingSmoother { index: i, diag: mii });
        }
        s += (r[i] / (1.0 - mii)).powi(2);
    }
    Ok(CriterionValue {
        kind: CriterionKind::LooMse,
        value: s / n as f64,
    })
}

/// Fast leave-one-out negative log predictive density; `noise` is the observation variance.
pub fn loo_nll(m: &SmootherMatrix, y: &DVector<f64>, noise: f64) -> Result<CriterionValue> {
    let n = y.len();
    let r = y - m.apply(y);
    let mut s = 0.0;
    for i in 0..n {
        let one_minus = 1.0 - m.matrix[(i, i)];
        if !(noise > 0.0) || !(one_minus > 1e-10) {
            return Err(Error::DegenerateVariance { index: i });
        }
        let var = noise / one_minus;
        let resid = r[i] / one_minus;
        s += 0.5 * (2.0 * PI * var).ln() + 0.5 * resid * resid / var;
    }
    Ok(CriterionValue {
        kind: CriterionKind::LooNll,
        value: s / n as f64,
    })
}

/// Stein's unbiased risk estimate.
pub fn sure(m: &SmootherMatrix, y: &DVector<f64>, sigma2: f64) -> CriterionValue {
    let n = y.len() as f64;
    let r = y - m.apply(y);
    CriterionValue {
        kind: CriterionKind::Sure,
        value: -sigma2 + r.norm_squared() / n + 2.0 * sigma2 * m.trace / n,
    }
}

/// Negative log marginal likelihood with the full inverse in the quadratic form.
pub fn nlml(shape: &Kernel, x: &Design, y: &DVector<f64>, theta: &GpHyperparameters) -> Result<CriterionValue> {
    theta.validate()?;
    let kernel = theta.apply(shape);
    let chol = factor(&kernel, x, theta.effective_noise())?;
    let n = y.len() as f64;
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let quad = y.dot(&chol.solve(y));
    Ok(CriterionValue {
        kind: CriterionKind::Nlml,
        value: 0.5 * (n * (2.0 * PI).ln() + logdet) + 0.5 * quad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use crate::linalg::max_abs;
    use crate::spm::{spm_fit, SemiParametricModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64, n: usize) -> (Design, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
        (Design::univariate(&x).unwrap(), y)
    }

    #[test]
    fn posterior_limits() {
        let (x, y) = setup(1, 6);
        let k = Kernel::gaussian(2.0, 1.5);
        let q = Design::univariate(&[0.25, 0.6, 30.0]).unwrap();
        let (m, v) = gp_posterior(&k, &x, &y, 1e12, &q).unwrap();
        assert!(m.amax() < 1e-10);
        assert!((v.add_scalar(-1.5)).amax() < 1e-9);
        let (_, v) = gp_posterior(&k, &x, &y, 0.01, &q).unwrap();
        assert!((v[2] - 1.5).abs() < 1e-8);
    }

    #[test]
    fn posterior_matches_spm_path() {
        let (x, y) = setup(2, 7);
        let k = Kernel::matern(2.5, 3.0, 0.8).unwrap();
        let q = Design::univariate(&[0.1, 0.5, 0.77]).unwrap();
        let (m, v) = gp_posterior(&k, &x, &y, 0.05, &q).unwrap();
        let fit = spm_fit(&SemiParametricModel::nonparametric(k, 1), &x, &y, 0.05).unwrap();
        assert!((fit.mean(&q).unwrap() - m).amax() < 1e-10);
        assert!((fit.variance(&q).unwrap() - v).amax() < 1e-10);
    }

    #[test]
    fn smoother_limits_and_trace() {
        let (x, _) = setup(3, 8);
        let shape = Kernel::gaussian(1.0, 1.0);
        let tiny = gp_smoother(&shape, &x, &GpHyperparameters::new(3.0, 1.0, 1e-12)).unwrap();
        assert!((tiny.trace - 8.0).abs() < 1e-3, "{}", tiny.trace);
        let big = gp_smoother(&shape, &x, &GpHyperparameters::new(1.0, 1.0, 1e12)).unwrap();
        assert!(max_abs(&big.matrix) < 1e-10);
        let theta = GpHyperparameters::new(1.0, 20.0, 0.1);
        let m = gp_smoother(&shape, &x, &theta).unwrap();
        let lam = SymEigen::new(&kernel_matrix(&shape, &x)).values;
        let df: f64 = lam.iter().map(|l| l.max(0.0) / (l.max(0.0) + 0.1 / 20.0)).sum();
        assert!((dof(&m) - df).abs() < 1e-8);
        for e in m.spectrum() {
            assert!((-1e-9..=1.0 + 1e-9).contains(&e));
        }
    }

    #[test]
    fn dof_is_monotone_in_gamma() {
        let (x, _) = setup(4, 8);
        let cache = SpectralCache::new(&Kernel::exponential(0.5, 1.0), &x);
        let mut prev = 0.0;
        for g in crate::linalg::logspace(1e-3, 1e6, 30) {
            let d = cache.dof(&GpHyperparameters::new(0.5, g, 0.01)).unwrap();
            assert!(d >= prev);
            prev = d;
        }
    }

    #[test]
    fn criteria_trivial_cases() {
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let zero = SmootherMatrix::new(DMatrix::zeros(3, 3));
        let ms = y.norm_squared() / 3.0;
        assert!((loo_mse(&zero, &y).unwrap().value - ms).abs() < 1e-15);
        assert!((sure(&zero, &y, 0.2).value - (ms - 0.2)).abs() < 1e-15);
        let eye = SmootherMatrix::identity(3);
        assert!((sure(&eye, &y, 0.2).value - 0.2).abs() < 1e-15);
        assert!(matches!(loo_mse(&eye, &y), Err(Error::InterpolatingSmoother { .. })));
        assert!(matches!(loo_nll(&eye, &y, 0.2), Err(Error::DegenerateVariance { .. })));
    }

    #[test]
    fn loo_nll_scaling() {
        let (x, y) = setup(5, 9);
        let m = gp_smoother(&Kernel::gaussian(1.0, 1.0), &x, &GpHyperparameters::new(2.0, 1.0, 0.1)).unwrap();
        let c: f64 = 3.7;
        let a = loo_nll(&m, &y, 0.1).unwrap().value;
        let b = loo_nll(&m, &(&y * c.sqrt()), 0.1 * c).unwrap().value;
        assert!((b - a - 0.5 * c.ln()).abs() < 1e-12);
    }

    #[test]
    fn nlml_scalar_and_permutation() {
        let x = Design::univariate(&[0.3]).unwrap();
        let y = DVector::from_vec(vec![0.7]);
        let theta = GpHyperparameters::new(1.0, 2.0, 0.5);
        let v = nlml(&Kernel::gaussian(1.0, 1.0), &x, &y, &theta).unwrap().value;
        let expect = 0.5 * (2.0 * PI * 2.5).ln() + 0.49 / 5.0;
        assert!((v - expect).abs() < 1e-14);

        let (x, y) = setup(6, 6);
        let perm = [3, 0, 5, 1, 4, 2];
        let xp = Design::univariate(&perm.iter().map(|&i| x.point(i)[0]).collect::<Vec<_>>()).unwrap();
        let yp = DVector::from_fn(6, |i, _| y[perm[i]]);
        let k = Kernel::matern(1.5, 1.0, 1.0).unwrap();
        let theta = GpHyperparameters::new(2.0, 1.0, 0.1);
        let a = nlml(&k, &x, &y, &theta).unwrap().value;
        let b = nlml(&k, &xp, &yp, &theta).unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn nlml_diverges_along_flat_path() {
        let (x, y) = setup(7, 8);
        let vals: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
            .iter()
            .map(|&e: &f64| {
                let theta = GpHyperparameters::new(e, e.powi(-3), 0.01);
                nlml(&Kernel::gaussian(1.0, 1.0), &x, &y, &theta).unwrap().value
            })
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
    }

    #[test]
    fn ill_conditioning_is_reported() {
        let (x, y) = setup(8, 8);
        let theta = GpHyperparameters::new(0.01, 1.0, 0.0);
        assert!(matches!(
            gp_smoother(&Kernel::gaussian(1.0, 1.0), &x, &theta),
            Err(Error::IllConditioned { .. })
        ));
        let q = Design::univariate(&[0.5]).unwrap();
        let res = gp_posterior(&Kernel::gaussian(0.001, 1.0), &x, &y, 0.0, &q);
        assert!(matches!(res, Err(Error::IllConditioned { .. })));
    }
}
