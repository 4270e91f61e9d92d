//! Flat limits of scaled kernel families and numerical equivalence checks.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{gp_posterior, GpHyperparameters, SpectralCache};
use crate::kernels::{distance_power_matrix, kernel_matrix, schur_kernel, wronskian, Kernel, Regularity};
use crate::linalg::{loglog_slope, max_abs, numerical_rank, SymEigen, PINV_CUTOFF, RANK_TOL};
use crate::polybasis::{count_poly_dim, monomial_matrix, monomials_of_degree, vandermonde_rescaled, AffineMap, Design};
use crate::spm::{
    polyharmonic_spm, spm_fit, spm_smoother, Basis, ProjectedEigen, SemiParametricModel, SmootherMatrix,
};

/// k_ε with gain γ(ε) = γ₀ ε^{-p}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledKernelFamily {
    pub base: Kernel,
    pub p: u32,
    pub gamma0: f64,
}

impl ScaledKernelFamily {
    pub fn new(base: Kernel, p: u32, gamma0: f64) -> Self {
        ScaledKernelFamily { base, p, gamma0 }
    }

    pub fn gamma(&self, eps: f64) -> f64 {
        self.gamma0 * eps.powi(-(self.p as i32))
    }

    pub fn at(&self, eps: f64) -> Kernel {
        self.base.with_epsilon(eps).with_gamma(self.gamma(eps))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitKind {
    /// Penalized degree-m block over unpenalized monomials of degree < m.
    PenalizedPolynomial { m: usize },
    /// Least squares on monomials of degree ≤ max_degree.
    UnpenalizedPolynomial { max_degree: usize },
    /// Polyharmonic smoothing of order r.
    SplineRegression { r: u32 },
    /// Smoother tends to the identity.
    Interpolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCase {
    pub kind: LimitKind,
    pub equivalent_model: SemiParametricModel,
    /// Equivalence holds only up to a rescaling of the kernel.
    pub scale_free: bool,
}

impl LimitCase {
    /// Noise level at which the equivalent model must be fitted.
    pub fn model_sigma2(&self, sigma2: f64) -> f64 {
        if self.kind == LimitKind::Interpolation {
            0.0
        } else {
            sigma2
        }
    }
}

fn half_degree(p: u32) -> usize {
    if p.is_multiple_of(2) {
        p as usize / 2
    } else {
        (p as usize).div_ceil(2)
    }
}

fn interpolates(r: Regularity, p: u32, d: usize, n: usize) -> bool {
    let beyond = matches!(r, Regularity::Finite(r) if p > 2 * r - 1);
    beyond || count_poly_dim(half_degree(p) as i64 - 1, d) >= n
}

fn interpolation_model(r: Regularity, d: usize, n: usize) -> SemiParametricModel {
    if let Regularity::Finite(r) = r {
        if count_poly_dim(r as i64 - 1, d) < n {
            return polyharmonic_spm(r, d);
        }
    }
    let mut k = 0;
    while count_poly_dim(k as i64, d) < n {
        k += 1;
    }
    SemiParametricModel::polynomial(k, d)
}

/// Case table for the flat limit of a family with regularity r and exponent p on n points.
pub fn classify_limit(r: Regularity, p: u32, d: usize, n: usize) -> LimitCase {
    let l = half_degree(p);
    if interpolates(r, p, d, n) {
        return LimitCase {
            kind: LimitKind::Interpolation,
            equivalent_model: interpolation_model(r, d, n),
            scale_free: false,
        };
    }
    let spline = matches!(r, Regularity::Finite(r) if p == 2 * r - 1);
    if spline {
        let r = r.finite().unwrap_or(1);
        LimitCase {
            kind: LimitKind::SplineRegression { r },
            equivalent_model: polyharmonic_spm(r, d),
            scale_free: true,
        }
    } else if p.is_multiple_of(2) {
        LimitCase {
            kind: LimitKind::PenalizedPolynomial { m: l },
            equivalent_model: SemiParametricModel::new(
                Kernel::polynomial(l as u32),
                Basis::below(l),
                d,
            ),
            scale_free: true,
        }
    } else {
        LimitCase {
            kind: LimitKind::UnpenalizedPolynomial { max_degree: l - 1 },
            equivalent_model: SemiParametricModel::polynomial(l - 1, d),
            scale_free: false,
        }
    }
}

/// Limit model with the exact kernel scale for this family.
///
/// The penalized kernel is γ₀ Σ W̄_m(α,β) x^α y^β and the spline kernel is
/// γ₀ |f_{2r-1}| (-1)^r ‖x-y‖^{2r-1}.
pub fn limit_model(family: &ScaledKernelFamily, x: &Design) -> Result<LimitCase> {
    let r = family.base.regularity()?;
    let mut case = classify_limit(r, family.p, x.d(), x.n());
    match case.kind {
        LimitKind::PenalizedPolynomial { m } => {
            let w = wronskian(&family.base, m, x.d())?;
            let k = schur_kernel(&w, m)?.scaled(family.gamma0);
            case.equivalent_model.kernel = k;
            case.scale_free = false;
        }
        LimitKind::SplineRegression { r } => {
            let f = family.base.radial_series(2 * r as usize - 1)?.odd_coeff.unwrap_or(0.0);
            let signed = if r % 2 == 0 { f } else { -f };
            if !(signed > 0.0) {
                return Err(Error::InvalidInput(
                    "leading odd coefficient has the wrong sign for a CPD limit".into(),
                ));
            }
            case.equivalent_model = case.equivalent_model.scaled(family.gamma0 * signed);
            case.scale_free = false;
        }
        _ => {}
    }
    Ok(case)
}

/// Limiting smoother M₀ = A + BΓBᵀ of the family on X.
pub fn limiting_smoother(family: &ScaledKernelFamily, x: &Design, sigma2: f64) -> Result<SmootherMatrix> {
    let (n, d, p) = (x.n(), x.d(), family.p);
    let r = family.base.regularity()?;
    if interpolates(r, p, d, n) {
        return Ok(SmootherMatrix::identity(n));
    }
    let l = half_degree(p);
    let below = count_poly_dim(l as i64 - 1, d);
    let (vb, _) = vandermonde_rescaled(x, l);
    let rank = numerical_rank(&vb.assembled.columns(0, below).into_owned(), RANK_TOL);
    if rank < below {
        return Err(Error::NotUnisolvent { rank, required: below });
    }
    let q = vb.q_below(l);
    let a = &q * q.transpose();
    let perp = DMatrix::identity(n, n) - &a;
    let spline = matches!(r, Regularity::Finite(rr) if p == 2 * rr - 1);
    let penalty = if spline {
        let rr = r.finite().unwrap_or(1);
        let f = family.base.radial_series(2 * rr as usize - 1)?.odd_coeff.unwrap_or(0.0);
        distance_power_matrix(x, (2 * rr - 1) as f64) * f
    } else if p % 2 == 0 {
        let w = wronskian(&family.base, l, d)?;
        let wbar = crate::kernels::wronskian_schur(&w, l)?;
        let vl = monomial_matrix(x, &monomials_of_degree(l, d), &AffineMap::identity(d));
        &vl * wbar * vl.transpose()
    } else {
        return Ok(SmootherMatrix::new(a));
    };
    let pl = crate::linalg::symmetrize(&(&perp * penalty * &perp));
    let eig = SymEigen::new(&pl);
    let thresh = PINV_CUTOFF * eig.max_abs();
    let gamma0 = family.gamma0;
    let filtered = eig.apply_filter(|lam| {
        if lam > thresh {
            gamma0 * lam / (gamma0 * lam + sigma2)
        } else {
            0.0
        }
    });
    Ok(SmootherMatrix::new(crate::linalg::symmetrize(&(a + filtered))))
}

/// Outcome of a randomized prediction-equivalence check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredEquivReport {
    pub trials: usize,
    pub max_mean_deviation: f64,
    pub max_var_deviation: f64,
    pub max_smoother_deviation: f64,
    pub tol: f64,
    pub seed: u64,
    pub equivalent: bool,
}

/// Compare predictions of two models on random data, noise levels and query points.
pub fn check_pred_equiv(
    a: &SemiParametricModel,
    b: &SemiParametricModel,
    x: &Design,
    num_trials: usize,
    tol: f64,
    seed: u64,
) -> Result<PredEquivReport> {
    if a.basis_len() != b.basis_len() {
        return Err(Error::IncomparableModels(a.basis_len(), b.basis_len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, d) = (x.n(), x.d());
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in x.points() {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let (mut dm, mut dv, mut ds) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..num_trials {
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sigma2 = 10f64.powf(rng.random_range(-3.0..0.0));
        let q: Vec<f64> = (0..d).map(|k| rng.random_range(lo[k]..=hi[k])).collect();
        let query = Design::new(q, 1, d)?;
        let fa = spm_fit(a, x, &y, sigma2)?;
        let fb = spm_fit(b, x, &y, sigma2)?;
        dm = dm.max((fa.mean(&query)? - fb.mean(&query)?).amax());
        dv = dv.max((fa.variance(&query)? - fb.variance(&query)?).amax());
        ds = ds.max(max_abs(&(spm_smoother(a, x, sigma2)?.matrix - spm_smoother(b, x, sigma2)?.matrix)));
        let aug = x.concat(&query)?;
        ds = ds.max(max_abs(
            &(spm_smoother(a, &aug, sigma2)?.matrix - spm_smoother(b, &aug, sigma2)?.matrix),
        ));
    }
    Ok(PredEquivReport {
        trials: num_trials,
        max_mean_deviation: dm,
        max_var_deviation: dv,
        max_smoother_deviation: ds,
        tol,
        seed,
        equivalent: dm <= tol && dv <= tol && ds <= tol,
    })
}

/// Find α with tr M_{⟨α l_B, 𝒱_B⟩} = tr(target), by bisection on log α.
///
/// When the target trace is outside the reachable range the α minimizing the
/// Frobenius deviation is returned instead.
pub fn match_scale_to_smoother(
    target: &SmootherMatrix,
    b: &SemiParametricModel,
    x: &Design,
    sigma2: f64,
) -> Result<(f64, SmootherMatrix)> {
    if sigma2 <= 0.0 {
        return Err(Error::InvalidInput("scale matching needs sigma2 > 0".into()));
    }
    let pe = ProjectedEigen::new(b, x)?;
    let m0 = pe.basis_len() as f64;
    let goal = target.trace;
    if pe.trace_sup() <= m0 {
        let m = pe.smoother(1.0, sigma2);
        return Err(Error::NotProportional {
            deviation: max_abs(&(m.matrix - &target.matrix)),
        });
    }
    let log_alpha = if goal > m0 && goal < pe.trace_sup() {
        let trace = |la: f64| pe.trace(10f64.powf(la), sigma2);
        let (mut lo, mut hi) = (-12.0_f64, 12.0_f64);
        while trace(lo) > goal && lo > -300.0 {
            lo -= 12.0;
        }
        while trace(hi) < goal && hi < 300.0 {
            hi += 12.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if trace(mid) < goal {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 {
                break;
            }
        }
        0.5 * (lo + hi)
    } else {
        let dev = |la: f64| (pe.smoother(10f64.powf(la), sigma2).matrix - &target.matrix).norm();
        let grid: Vec<f64> = (0..=48).map(|k| -12.0 + 0.5 * k as f64).collect();
        let best = grid
            .iter()
            .copied()
            .min_by(|a, b| dev(*a).total_cmp(&dev(*b)))
            .unwrap_or(0.0);
        golden_min(dev, best - 0.5, best + 0.5, 1e-10)
    };
    let alpha = 10f64.powf(log_alpha);
    Ok((alpha, pe.smoother(alpha, sigma2)))
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Scale α such that ⟨l_A, 𝒱_A⟩ and ⟨α l_B, 𝒱_B⟩ have matching smoothers on X.
pub fn match_scale(
    a: &SemiParametricModel,
    b: &SemiParametricModel,
    x: &Design,
    sigma2: f64,
    tol: f64,
) -> Result<f64> {
    let target = spm_smoother(a, x, sigma2)?;
    let (alpha, m) = match_scale_to_smoother(&target, b, x, sigma2)?;
    let deviation = max_abs(&(m.matrix - target.matrix));
    if deviation > tol {
        return Err(Error::NotProportional { deviation });
    }
    Ok(alpha)
}

/// Deviation between the family and its limit model at one ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonDeviation {
    pub epsilon: f64,
    pub gamma: f64,
    pub mean_deviation: f64,
    pub var_deviation: f64,
    pub smoother_deviation: f64,
    /// Scale applied to the limit kernel (1 when not scale-free).
    pub alpha: f64,
    pub gp_dof: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub case: LimitKind,
    pub points: Vec<EpsilonDeviation>,
    pub dropped: Vec<(f64, String)>,
    pub mean_slope: f64,
    pub var_slope: f64,
    pub smoother_slope: f64,
    pub tol: f64,
    pub pass: bool,
}

impl EquivalenceReport {
    pub fn final_mean_deviation(&self) -> f64 {
        self.points.last().map_or(f64::NAN, |p| p.mean_deviation)
    }
}

/// Options for [`convergence_study`].
#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub sigma2: f64,
    pub tol: f64,
    /// Target to compare against; defaults to the classified limit model.
    pub target: Option<LimitCase>,
}

/// Track deviation of the family from its limit model over a decreasing ε grid.
pub fn convergence_study(
    family: &ScaledKernelFamily,
    x: &Design,
    query: &Design,
    eps_grid: &[f64],
    ys: &[DVector<f64>],
    opts: &StudyOptions,
) -> Result<EquivalenceReport> {
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("eps grid must be strictly decreasing".into()));
    }
    let r = family.base.regularity()?;
    let case = match &opts.target {
        Some(c) => c.clone(),
        None => classify_limit(r, family.p, x.d(), x.n()),
    };
    let sigma2 = opts.sigma2;
    let model_sigma2 = case.model_sigma2(sigma2);

    let results: Vec<std::result::Result<EpsilonDeviation, (f64, Error)>> = eps_grid
        .par_iter()
        .map(|&eps| {
            let wrap = |e: Error| (eps, e);
            let kernel = family.at(eps);
            let theta = GpHyperparameters::new(eps, kernel.gamma, sigma2);
            let cache = SpectralCache::new(&kernel, x);
            let m_gp = cache.smoother(&theta).map_err(wrap)?;
            let (alpha, model) = if case.scale_free {
                let (alpha, _) =
                    match_scale_to_smoother(&m_gp, &case.equivalent_model, x, model_sigma2).map_err(wrap)?;
                (alpha, case.equivalent_model.scaled(alpha))
            } else {
                (1.0, case.equivalent_model.clone())
            };
            let m_lim = spm_smoother(&model, x, model_sigma2).map_err(wrap)?;
            let (mut dm, mut dv) = (0.0_f64, 0.0_f64);
            for y in ys {
                let (gm, gv) = gp_posterior(&kernel, x, y, sigma2, query).map_err(wrap)?;
                let fit = spm_fit(&model, x, y, model_sigma2).map_err(wrap)?;
                dm = dm.max((gm - fit.mean(query).map_err(wrap)?).amax());
                dv = dv.max((gv - fit.variance(query).map_err(wrap)?).amax());
            }
            Ok(EpsilonDeviation {
                epsilon: eps,
                gamma: kernel.gamma,
                mean_deviation: dm,
                var_deviation: dv,
                smoother_deviation: max_abs(&(m_gp.matrix - m_lim.matrix)),
                alpha,
                gp_dof: m_gp.trace,
            })
        })
        .collect();

    let mut points = Vec::new();
    let mut dropped = Vec::new();
    for r in results {
        match r {
            Ok(p) => points.push(p),
            Err((eps, e)) => dropped.push((eps, e.to_string())),
        }
    }
    if points.len() < 3 {
        return Err(Error::InsufficientGrid { usable: points.len() });
    }
    let eps: Vec<f64> = points.iter().map(|p| p.epsilon).collect();
    let slope = |f: fn(&EpsilonDeviation) -> f64| {
        loglog_slope(&eps, &points.iter().map(f).collect::<Vec<_>>())
    };
    let mean_slope = slope(|p| p.mean_deviation);
    let var_slope = slope(|p| p.var_deviation);
    let smoother_slope = slope(|p| p.smoother_deviation);
    let decreasing = points
        .windows(2)
        .all(|w| w[1].mean_deviation < w[0].mean_deviation);
    let final_dev = points.last().map_or(f64::INFINITY, |p| p.mean_deviation);
    let pass = decreasing && mean_slope >= 0.8 && final_dev <= opts.tol;
    Ok(EquivalenceReport {
        case: case.kind,
        points,
        dropped,
        mean_slope,
        var_slope,
        smoother_slope,
        tol: opts.tol,
        pass,
    })
}

/// Predicted valuation of the i-th largest eigenvalue (univariate).
pub fn predicted_valuations(r: Regularity, n: usize) -> Vec<u32> {
    (0..n as u32)
        .map(|i| match r {
            Regularity::Finite(r) if i + 1 > r => 2 * r - 1,
            _ => 2 * i,
        })
        .collect()
}

/// Log-log slopes of the sorted eigenvalues of K_ε over the ε grid.
pub fn eigenvalue_valuations(kernel: &Kernel, x: &Design, eps_grid: &[f64]) -> Vec<f64> {
    let spectra: Vec<Vec<f64>> = eps_grid
        .iter()
        .map(|&e| {
            let k = kernel_matrix(&kernel.with_epsilon(e).with_gamma(1.0), x);
            SymEigen::new(&k).values.iter().map(|v| v.abs()).collect()
        })
        .collect();
    (0..x.n())
        .map(|i| {
            let vals: Vec<f64> = spectra.iter().map(|s| s[i]).collect();
            loglog_slope(eps_grid, &vals)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub gamma: f64,
    pub at_a: f64,
    pub at_b: f64,
    pub status: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveAnchor {
    pub degree: usize,
    pub at_a: f64,
    pub at_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionCurve {
    pub points: Vec<CurvePoint>,
    pub anchors: Vec<CurveAnchor>,
}

/// Predictions at two points as γ sweeps the grid, with least-squares polynomial anchors.
#[allow(clippy::too_many_arguments)]
pub fn prediction_curve(
    shape: &Kernel,
    x: &Design,
    y: &DVector<f64>,
    sigma2: f64,
    eps: f64,
    gamma_grid: &[f64],
    xa: &[f64],
    xb: &[f64],
) -> Result<PredictionCurve> {
    if gamma_grid.iter().any(|&g| g <= 0.0) || gamma_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("gamma grid must be positive and ascending".into()));
    }
    let mut q = xa.to_vec();
    q.extend_from_slice(xb);
    let query = Design::new(q, 2, x.d())?;
    let points = gamma_grid
        .par_iter()
        .map(|&g| {
            let k = shape.with_epsilon(eps).with_gamma(g);
            match gp_posterior(&k, x, y, sigma2, &query) {
                Ok((m, _)) => CurvePoint {
                    gamma: g,
                    at_a: m[0],
                    at_b: m[1],
                    status: None,
                },
                Err(e) => CurvePoint {
                    gamma: g,
                    at_a: f64::NAN,
                    at_b: f64::NAN,
                    status: Some(e.code().to_string()),
                },
            }
        })
        .collect();
    let mut anchors = Vec::new();
    let mut k = 0;
    while count_poly_dim(k as i64, x.d()) < x.n() && k <= 8 {
        if let Ok(fit) = spm_fit(&SemiParametricModel::polynomial(k, x.d()), x, y, 1.0) {
            let m = fit.mean(&query)?;
            anchors.push(CurveAnchor {
                degree: k,
                at_a: m[0],
                at_b: m[1],
            });
        }
        k += 1;
    }
    Ok(PredictionCurve { points, anchors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::gp_smoother;

    fn design(seed: u64, n: usize, d: usize) -> Design {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Design::new((0..n * d).map(|_| rng.random::<f64>()).collect(), n, d).unwrap()
    }

    #[test]
    fn case_table_examples() {
        let c = classify_limit(Regularity::Finite(1), 1, 1, 8);
        assert_eq!(c.kind, LimitKind::SplineRegression { r: 1 });
        assert_eq!(c.equivalent_model, polyharmonic_spm(1, 1));
        let c = classify_limit(Regularity::Finite(3), 5, 2, 20);
        assert_eq!(c.equivalent_model, polyharmonic_spm(3, 2));
        let c = classify_limit(Regularity::Infinite, 4, 2, 20);
        assert_eq!(c.kind, LimitKind::PenalizedPolynomial { m: 2 });
        assert_eq!(c.equivalent_model.kernel, Kernel::polynomial(2));
        assert_eq!(c.equivalent_model.basis, Basis::Degree(Some(1)));
        let c = classify_limit(Regularity::Infinite, 3, 1, 8);
        assert_eq!(c.kind, LimitKind::UnpenalizedPolynomial { max_degree: 1 });
        assert_eq!(classify_limit(Regularity::Finite(1), 2, 1, 8).kind, LimitKind::Interpolation);
        assert_eq!(classify_limit(Regularity::Infinite, 15, 1, 8).kind, LimitKind::Interpolation);
        assert_eq!(
            classify_limit(Regularity::Infinite, 13, 1, 8).kind,
            LimitKind::UnpenalizedPolynomial { max_degree: 6 }
        );
        assert_eq!(classify_limit(Regularity::Infinite, 0, 1, 8).kind, LimitKind::PenalizedPolynomial { m: 0 });
    }

    #[test]
    fn case_table_is_exhaustive() {
        for r in [Regularity::Finite(1), Regularity::Finite(2), Regularity::Finite(3), Regularity::Infinite] {
            for p in 0..=7 {
                for d in 1..=2 {
                    let n = 12;
                    let c = classify_limit(r, p, d, n);
                    let x = design(p as u64 + 10 * d as u64, n, d);
                    let basis_deg = match &c.equivalent_model.basis {
                        Basis::Degree(Some(s)) => *s,
                        _ => 0,
                    };
                    assert!(crate::polybasis::unisolvency_rank(&x, basis_deg, 1e-10).1);
                }
            }
        }
    }

    #[test]
    fn limiting_smoother_structure() {
        let x = design(1, 8, 1);
        let fam = ScaledKernelFamily::new(Kernel::gaussian(1.0, 1.0), 3, 1.0);
        let m = limiting_smoother(&fam, &x, 0.01).unwrap();
        assert!((m.trace - 2.0).abs() < 1e-10);
        let fam = ScaledKernelFamily::new(Kernel::gaussian(1.0, 1.0), 15, 1.0);
        assert_eq!(limiting_smoother(&fam, &x, 0.01).unwrap().matrix, DMatrix::identity(8, 8));
        for (k, p) in [(Kernel::gaussian(1.0, 1.0), 4), (Kernel::matern(1.5, 1.0, 1.0).unwrap(), 3)] {
            let fam = ScaledKernelFamily::new(k, p, 0.7);
            let m = limiting_smoother(&fam, &x, 0.05).unwrap();
            for e in m.spectrum() {
                assert!((-1e-9..=1.0 + 1e-9).contains(&e));
            }
            let exact = limit_model(&fam, &x).unwrap();
            let via_spm = spm_smoother(&exact.equivalent_model, &x, 0.05).unwrap();
            assert!(max_abs(&(via_spm.matrix - &m.matrix)) < 1e-8);
        }
    }

    #[test]
    fn limiting_smoother_is_approached() {
        let x = design(2, 8, 1);
        for (k, p) in [(Kernel::gaussian(1.0, 1.0), 2), (Kernel::exponential(1.0, 1.0), 1)] {
            let fam = ScaledKernelFamily::new(k.clone(), p, 1.0);
            let m0 = limiting_smoother(&fam, &x, 0.1).unwrap();
            let devs: Vec<f64> = [0.1, 0.05, 0.025]
                .iter()
                .map(|&e| {
                    let theta = GpHyperparameters::new(e, fam.gamma(e), 0.1);
                    max_abs(&(gp_smoother(&k, &x, &theta).unwrap().matrix - &m0.matrix))
                })
                .collect();
            for w in devs.windows(2) {
                let ratio = w[0] / w[1];
                assert!(ratio >= 1.3, "{devs:?}");
            }
        }
    }

    #[test]
    fn equivalence_examples() {
        let x = design(3, 9, 1);
        let l = polyharmonic_spm(1, 1);
        let v = crate::polybasis::MultiIndex::zero(1);
        let absorbed = SemiParametricModel::new(
            Kernel::sum(vec![
                Kernel::polyharmonic(1),
                Kernel::monomial_form(vec![v], DMatrix::from_element(1, 1, 3.0)),
            ]),
            Basis::Degree(Some(0)),
            1,
        );
        assert!(check_pred_equiv(&l, &absorbed, &x, 5, 1e-8, 1).unwrap().equivalent);
        let doubled = l.scaled(2.0);
        assert!(!check_pred_equiv(&l, &doubled, &x, 5, 1e-8, 1).unwrap().equivalent);
        let alpha = match_scale(&doubled, &l, &x, 0.1, 1e-8).unwrap();
        assert!((alpha - 2.0).abs() < 1e-6);
        assert!(matches!(
            check_pred_equiv(&l, &SemiParametricModel::polynomial(1, 1), &x, 1, 1e-8, 1),
            Err(Error::IncomparableModels(1, 2))
        ));
    }

    #[test]
    fn unrelated_kernels_are_not_proportional() {
        let x = design(4, 8, 1);
        let a = SemiParametricModel::nonparametric(Kernel::polynomial(1), 1);
        let b = SemiParametricModel::nonparametric(Kernel::polynomial(2), 1);
        assert!(matches!(match_scale(&a, &b, &x, 0.1, 1e-6), Err(Error::NotProportional { .. })));
    }

    #[test]
    fn valuations_table() {
        assert_eq!(predicted_valuations(Regularity::Finite(2), 5), vec![0, 2, 3, 3, 3]);
        assert_eq!(predicted_valuations(Regularity::Infinite, 3), vec![0, 2, 4]);
    }

    #[test]
    fn curve_endpoints() {
        let x = design(5, 6, 1);
        let y = DVector::from_fn(6, |i, _| x.point(i)[0] + 0.1);
        let grid = crate::linalg::logspace(1e-12, 1e8, 11);
        let c = prediction_curve(&Kernel::gaussian(1.0, 1.0), &x, &y, 1e-4, 3.0, &grid, &[0.3], &[0.6]).unwrap();
        assert!(c.points[0].at_a.abs() < 1e-6 && c.points[0].at_b.abs() < 1e-6);
        assert_eq!(c.anchors.len(), 5);
    }
}
