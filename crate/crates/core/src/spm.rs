//! Semi-parametric models ⟨l, 𝒱⟩: saddle-point inference and smoother matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{cross_matrix, kernel_matrix, Kernel};
use crate::linalg::{complement_basis, orthonormalize, pinv_sym, symmetrize, SymEigen, PINV_CUTOFF, RANK_TOL};
use crate::polybasis::{enumerate_monomials, monomial_matrix, AffineMap, Design, MultiIndex};

/// A polynomial Σ c_α x^α used as an explicit basis function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<(MultiIndex, f64)>,
}

impl Polynomial {
    pub fn monomial(a: MultiIndex) -> Self {
        Polynomial {
            terms: vec![(a, 1.0)],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(a, c)| c * a.eval(x)).sum()
    }
}

/// Parametric part of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Basis {
    /// All monomials of degree ≤ s, or nothing.
    Degree(Option<usize>),
    Explicit(Vec<Polynomial>),
}

impl Basis {
    /// Monomials of degree < k.
    pub fn below(k: usize) -> Self {
        Basis::Degree(k.checked_sub(1))
    }

    pub fn len(&self, d: usize) -> usize {
        match self {
            Basis::Degree(None) => 0,
            Basis::Degree(Some(s)) => crate::polybasis::count_poly_dim(*s as i64, d),
            Basis::Explicit(v) => v.len(),
        }
    }

    pub fn is_empty(&self, d: usize) -> bool {
        self.len(d) == 0
    }

    /// Affine map applied before evaluation (only for complete monomial sets).
    pub fn map_for(&self, x: &Design) -> AffineMap {
        match self {
            Basis::Degree(_) => AffineMap::fit(x),
            Basis::Explicit(_) => AffineMap::identity(x.d()),
        }
    }

    pub fn matrix(&self, x: &Design, map: &AffineMap) -> DMatrix<f64> {
        match self {
            Basis::Degree(None) => DMatrix::zeros(x.n(), 0),
            Basis::Degree(Some(s)) => monomial_matrix(x, &enumerate_monomials(*s, x.d()), map),
            Basis::Explicit(v) => {
                DMatrix::from_fn(x.n(), v.len(), |i, j| v[j].eval(x.point(i)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiParametricModel {
    pub kernel: Kernel,
    pub basis: Basis,
    pub d: usize,
}

impl SemiParametricModel {
    pub fn new(kernel: Kernel, basis: Basis, d: usize) -> Self {
        SemiParametricModel { kernel, basis, d }
    }

    /// Plain GP: no parametric part.
    pub fn nonparametric(kernel: Kernel, d: usize) -> Self {
        SemiParametricModel::new(kernel, Basis::Degree(None), d)
    }

    /// Polynomial regression of degree ≤ s.
    pub fn polynomial(s: usize, d: usize) -> Self {
        SemiParametricModel::new(Kernel::zero(), Basis::Degree(Some(s)), d)
    }

    pub fn basis_len(&self) -> usize {
        self.basis.len(self.d)
    }

    /// Same basis, kernel multiplied by c.
    pub fn scaled(&self, c: f64) -> Self {
        SemiParametricModel {
            kernel: self.kernel.scaled(c),
            ..self.clone()
        }
    }

    fn check_dim(&self, x: &Design) -> Result<()> {
        if x.d() != self.d {
            return Err(Error::InvalidInput(format!(
                "design has dimension {}, model expects {}",
                x.d(),
                self.d
            )));
        }
        Ok(())
    }
}

/// ⟨(-1)^r ‖x-y‖^{2r-1}, monomials of degree < r⟩.
pub fn polyharmonic_spm(r: u32, d: usize) -> SemiParametricModel {
    SemiParametricModel::new(Kernel::polyharmonic(r), Basis::below(r as usize), d)
}

/// Symmetric n×n smoother with its trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherMatrix {
    pub matrix: DMatrix<f64>,
    pub trace: f64,
    pub eigenvalues: Option<Vec<f64>>,
}

impl SmootherMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        let trace = matrix.trace();
        SmootherMatrix {
            matrix,
            trace,
            eigenvalues: None,
        }
    }

    pub fn with_eigenvalues(matrix: DMatrix<f64>, eigenvalues: Vec<f64>) -> Self {
        let mut s = SmootherMatrix::new(matrix);
        s.eigenvalues = Some(eigenvalues);
        s
    }

    pub fn identity(n: usize) -> Self {
        SmootherMatrix::with_eigenvalues(DMatrix::identity(n, n), vec![1.0; n])
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.matrix * y
    }

    pub fn spectrum(&self) -> Vec<f64> {
        match &self.eigenvalues {
            Some(e) => e.clone(),
            None => SymEigen::new(&self.matrix).values.iter().copied().collect(),
        }
    }
}

/// (I - QQᵀ) L (I - QQᵀ).
pub fn project_out_basis(l: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let p = DMatrix::identity(n, n) - q * q.transpose();
    crate::linalg::symmetrize(&(&p * l * &p))
}

/// Orthonormal factors of the basis matrix and its complement.
#[derive(Debug, Clone)]
struct BasisFactor {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    qc: DMatrix<f64>,
}

fn basis_factor(v: &DMatrix<f64>) -> Result<BasisFactor> {
    if v.ncols() > v.nrows() {
        return Err(Error::NotUnisolvent {
            rank: crate::linalg::numerical_rank(v, RANK_TOL),
            required: v.ncols(),
        });
    }
    let (q, r) = orthonormalize(v, RANK_TOL)?;
    let qc = complement_basis(&q);
    Ok(BasisFactor { q, r, qc })
}

/// Eigenvalues of L̃ on the complement of span(V) (descending).
pub fn projected_spectrum(model: &SemiParametricModel, x: &Design) -> Result<Vec<f64>> {
    model.check_dim(x)?;
    let map = model.basis.map_for(x);
    let bf = basis_factor(&model.basis.matrix(x, &map))?;
    let l = kernel_matrix(&model.kernel, x);
    let lc = bf.qc.transpose() * l * &bf.qc;
    Ok(SymEigen::new(&lc).values.iter().copied().collect())
}

/// Eigensystem of L̃ = Q_⊥ᵀ L Q_⊥, reusable across kernel scales and noise levels.
#[derive(Debug, Clone)]
pub struct ProjectedEigen {
    q: DMatrix<f64>,
    qc: DMatrix<f64>,
    eig: SymEigen,
}

impl ProjectedEigen {
    pub fn new(model: &SemiParametricModel, x: &Design) -> Result<Self> {
        model.check_dim(x)?;
        let map = model.basis.map_for(x);
        let bf = basis_factor(&model.basis.matrix(x, &map))?;
        let l = kernel_matrix(&model.kernel, x);
        let eig = SymEigen::new(&symmetrize(&(bf.qc.transpose() * l * &bf.qc)));
        Ok(Self { q: bf.q, qc: bf.qc, eig })
    }

    pub fn basis_len(&self) -> usize {
        self.q.ncols()
    }

    /// Eigenvalues with anything below RANK_TOL·max clipped to zero.
    pub fn clipped(&self) -> Vec<f64> {
        let cut = RANK_TOL * self.eig.max_abs();
        self.eig.values.iter().map(|&v| if v > cut { v } else { 0.0 }).collect()
    }

    /// Trace of the smoother of ⟨α l, 𝒱⟩ at noise σ².
    pub fn trace(&self, alpha: f64, sigma2: f64) -> f64 {
        self.basis_len() as f64
            + self
                .clipped()
                .iter()
                .map(|&mu| alpha * mu / (alpha * mu + sigma2))
                .sum::<f64>()
    }

    /// Supremum of the trace over α > 0.
    pub fn trace_sup(&self) -> f64 {
        self.basis_len() as f64 + self.clipped().iter().filter(|&&m| m > 0.0).count() as f64
    }

    /// Smoother of ⟨α l, 𝒱⟩ at noise σ² > 0.
    pub fn smoother(&self, alpha: f64, sigma2: f64) -> SmootherMatrix {
        let filt: Vec<f64> = self.clipped().iter().map(|&mu| alpha * mu / (alpha * mu + sigma2)).collect();
        let u = &self.qc * &self.eig.vectors;
        let mut scaled = u.clone();
        for (j, f) in filt.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*f);
        }
        let m = &self.q * self.q.transpose() + scaled * u.transpose();
        SmootherMatrix::new(symmetrize(&m))
    }
}

/// True iff L̃ is PSD up to tol relative to its largest eigenvalue magnitude.
pub fn cpd_check(model: &SemiParametricModel, x: &Design, tol: f64) -> Result<bool> {
    let spec = projected_spectrum(model, x)?;
    let scale = spec.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let min = spec.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(spec.is_empty() || min >= -tol * scale)
}

/// Reusable elimination of the bordered system [[L+σ²I, V],[Vᵀ, 0]].
#[derive(Debug, Clone)]
pub struct SaddleFactor {
    basis: BasisFactor,
    a: DMatrix<f64>,
    c_eig: SymEigen,
}

impl SaddleFactor {
    pub fn new(l: &DMatrix<f64>, v: &DMatrix<f64>, sigma2: f64) -> Result<Self> {
        let basis = basis_factor(v)?;
        let n = l.nrows();
        let a = l + DMatrix::identity(n, n) * sigma2;
        let c = basis.qc.transpose() * &a * &basis.qc;
        let c_eig = SymEigen::new(&c);
        let scale = c_eig.max_abs();
        if c_eig.values.iter().any(|v| v.abs() <= PINV_CUTOFF * scale) || (scale == 0.0 && c.nrows() > 0) {
            return Err(Error::SingularSystem);
        }
        Ok(SaddleFactor { basis, a, c_eig })
    }

    /// Solve [[A, V],[Vᵀ, 0]] (a; b) = (f; g) column-wise.
    pub fn solve(&self, f: &DMatrix<f64>, g: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let BasisFactor { q, r, qc } = &self.basis;
        let m = q.ncols();
        let k = f.ncols();
        let a_p = if m == 0 {
            DMatrix::zeros(f.nrows(), k)
        } else {
            let t = r
                .transpose()
                .solve_lower_triangular(g)
                .expect("triangular factor is nonsingular");
            q * t
        };
        let rhs = qc.transpose() * (f - &self.a * &a_p);
        let z = self.c_eig.vectors.transpose() * rhs;
        let z = DMatrix::from_fn(z.nrows(), k, |i, j| z[(i, j)] / self.c_eig.values[i]);
        let alpha = a_p + qc * (&self.c_eig.vectors * z);
        let beta = if m == 0 {
            DMatrix::zeros(0, k)
        } else {
            r.solve_upper_triangular(&(q.transpose() * (f - &self.a * &alpha)))
                .expect("triangular factor is nonsingular")
        };
        (alpha, beta)
    }
}

/// A fitted semi-parametric model.
#[derive(Debug, Clone)]
pub struct SpmFit {
    pub model: SemiParametricModel,
    pub design: Design,
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub sigma2: f64,
    pub map: AffineMap,
    pub saddle_factorization: SaddleFactor,
}

/// Fit ⟨l, 𝒱⟩ to (X, y) with noise variance σ² ≥ 0.
pub fn spm_fit(
    model: &SemiParametricModel,
    x: &Design,
    y: &DVector<f64>,
    sigma2: f64,
) -> Result<SpmFit> {
    model.check_dim(x)?;
    if y.len() != x.n() {
        return Err(Error::InvalidInput("y length differs from design size".into()));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidInput("sigma2 must be non-negative".into()));
    }
    let map = model.basis.map_for(x);
    let v = model.basis.matrix(x, &map);
    let l = kernel_matrix(&model.kernel, x);
    let factor = SaddleFactor::new(&l, &v, sigma2)?;
    let f = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
    let g = DMatrix::zeros(v.ncols(), 1);
    let (a, b) = factor.solve(&f, &g);
    Ok(SpmFit {
        model: model.clone(),
        design: x.clone(),
        alpha: a.column(0).into_owned(),
        beta: b.column(0).into_owned(),
        sigma2,
        map,
        saddle_factorization: factor,
    })
}

impl SpmFit {
    fn query_blocks(&self, query: &Design) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.model.check_dim(query)?;
        let kx = cross_matrix(&self.model.kernel, query, &self.design);
        let vx = self.model.basis.matrix(query, &self.map);
        Ok((kx, vx))
    }

    pub fn mean(&self, query: &Design) -> Result<DVector<f64>> {
        let (kx, vx) = self.query_blocks(query)?;
        Ok(kx * &self.alpha + vx * &self.beta)
    }

    pub fn fitted(&self) -> DVector<f64> {
        self.mean(&self.design).expect("design matches model")
    }

    /// Posterior variance of the latent function at each query point.
    pub fn variance(&self, query: &Design) -> Result<DVector<f64>> {
        let (kx, vx) = self.query_blocks(query)?;
        let f = kx.transpose();
        let g = vx.transpose();
        let (a, b) = self.saddle_factorization.solve(&f, &g);
        let mut out = DVector::zeros(query.n());
        for i in 0..query.n() {
            let p = query.point(i);
            let lxx = self.model.kernel.eval(p, p);
            let qf = f.column(i).dot(&a.column(i)) + g.column(i).dot(&b.column(i));
            out[i] = clip_variance(lxx - qf, lxx.abs().max(qf.abs()).max(1.0), i)?;
        }
        Ok(out)
    }

    /// ‖Vᵀα‖ relative to ‖α‖.
    pub fn constraint_residual(&self) -> f64 {
        let v = self.model.basis.matrix(&self.design, &self.map);
        let r = v.transpose() * &self.alpha;
        r.norm() / self.alpha.norm().max(f64::MIN_POSITIVE)
    }
}

pub(crate) fn clip_variance(v: f64, scale: f64, index: usize) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -1e-8 * scale {
        Ok(0.0)
    } else {
        Err(Error::NegativeVariance { index, value: v })
    }
}

pub fn spm_posterior_mean(
    model: &SemiParametricModel,
    x: &Design,
    y: &DVector<f64>,
    sigma2: f64,
    query: &Design,
) -> Result<DVector<f64>> {
    spm_fit(model, x, y, sigma2)?.mean(query)
}

pub fn spm_posterior_var(
    model: &SemiParametricModel,
    x: &Design,
    sigma2: f64,
    query: &Design,
) -> Result<DVector<f64>> {
    spm_fit(model, x, &DVector::zeros(x.n()), sigma2)?.variance(query)
}

/// M = QQᵀ + L̃(L̃ + σ²I)⁻¹ via the eigendecomposition of L̃ on the complement.
pub fn spm_smoother(model: &SemiParametricModel, x: &Design, sigma2: f64) -> Result<SmootherMatrix> {
    model.check_dim(x)?;
    let map = model.basis.map_for(x);
    let bf = basis_factor(&model.basis.matrix(x, &map))?;
    let l = kernel_matrix(&model.kernel, x);
    let lc = bf.qc.transpose() * l * &bf.qc;
    let eig = SymEigen::new(&lc);
    let thresh = PINV_CUTOFF * eig.max_abs();
    let filter = |mu: f64| {
        let mu = mu.max(0.0);
        if sigma2 == 0.0 {
            if mu > thresh {
                1.0
            } else {
                0.0
            }
        } else {
            mu / (mu + sigma2)
        }
    };
    let mut weights: Vec<f64> = vec![1.0; bf.q.ncols()];
    weights.extend(eig.values.iter().map(|&mu| filter(mu)));
    let inner = if lc.nrows() > 0 {
        let u = &bf.qc * &eig.vectors;
        let mut scaled = u.clone();
        for j in 0..scaled.ncols() {
            scaled.column_mut(j).scale_mut(filter(eig.values[j]));
        }
        scaled * u.transpose()
    } else {
        DMatrix::zeros(x.n(), x.n())
    };
    let m = &bf.q * bf.q.transpose() + inner;
    Ok(SmootherMatrix::with_eigenvalues(
        crate::linalg::symmetrize(&m),
        weights,
    ))
}

/// Leading coefficient B₀ of the Laurent expansion of ε(VVᵀ + ε(L + σ²I))⁻¹.
pub fn laurent_b0(l: &DMatrix<f64>, v: &DMatrix<f64>, sigma2: f64) -> Result<DMatrix<f64>> {
    let bf = basis_factor(v)?;
    let n = l.nrows();
    let a = l + DMatrix::identity(n, n) * sigma2;
    let c = bf.qc.transpose() * a * &bf.qc;
    let b0 = &bf.qc * pinv_sym(&c, PINV_CUTOFF) * bf.qc.transpose();
    Ok(crate::linalg::symmetrize(&b0))
}

/// Univariate smoothing spline of order p with penalty η.
pub fn smoothing_spline_fit(x: &Design, y: &DVector<f64>, p: u32, eta: f64) -> Result<SpmFit> {
    if x.d() != 1 {
        return Err(Error::InvalidInput("smoothing splines need univariate data".into()));
    }
    if x.n() <= p as usize {
        return Err(Error::DegenerateDesign(format!(
            "need more than {p} points, got {}",
            x.n()
        )));
    }
    if x.min_separation() == 0.0 {
        return Err(Error::DegenerateDesign("duplicate points".into()));
    }
    spm_fit(&polyharmonic_spm(p, 1), x, y, eta)
}
