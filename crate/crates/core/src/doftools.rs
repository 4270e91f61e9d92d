//! Isofreedom curves and matched flat-limit approximations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::SpectralCache;
use crate::kernels::{schur_kernel, wronskian, Kernel, Regularity};
use crate::linalg::loglog_slope;
use crate::polybasis::{count_poly_dim, Design};
use crate::spm::{polyharmonic_spm, ProjectedEigen, spm_smoother, Basis, SemiParametricModel};

/// A point (ε, γ) on an isofreedom curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsofreedomPoint {
    pub epsilon: f64,
    pub gamma: f64,
    pub dof_achieved: f64,
    pub residual: f64,
}

fn filter_sum(eigs: &[f64], g: f64, sigma2: f64) -> f64 {
    eigs.iter().map(|&l| g * l / (g * l + sigma2)).sum()
}

/// Solve Σ gλ/(gλ + σ²) = target for g > 0 by bisection on log g.
pub fn solve_gain(eigs: &[f64], sigma2: f64, target: f64) -> Result<f64> {
    let pos: Vec<f64> = eigs.iter().copied().filter(|&l| l > 0.0).collect();
    let supremum = pos.len() as f64;
    if !(target > 0.0) || target >= supremum || !(sigma2 > 0.0) {
        return Err(Error::UnreachableDof { target, supremum });
    }
    let (mut lo, mut hi) = (1e-12_f64.ln(), 1e12_f64.ln());
    let step = 1e6_f64.ln();
    while filter_sum(&pos, lo.exp(), sigma2) > target {
        lo -= step;
    }
    while filter_sum(&pos, hi.exp(), sigma2) < target {
        hi += step;
        if hi > 700.0 {
            return Err(Error::UnreachableDof { target, supremum });
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        let v = filter_sum(&pos, mid.exp(), sigma2);
        if v < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * mid.abs().max(1.0) {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// γ giving the GP smoother at ε exactly m degrees of freedom.
pub fn isofreedom_gamma(shape: &Kernel, x: &Design, sigma2: f64, eps: f64, m: f64) -> Result<IsofreedomPoint> {
    let cache = SpectralCache::new(&shape.with_epsilon(eps), x);
    let eigs = cache.eigenvalues();
    let gamma = solve_gain(&eigs, sigma2, m)?;
    let dof = filter_sum(&eigs, gamma, sigma2);
    Ok(IsofreedomPoint {
        epsilon: eps,
        gamma,
        dof_achieved: dof,
        residual: (dof - m).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsofreedomCurve {
    pub target: f64,
    pub points: Vec<IsofreedomPoint>,
    /// Slope of log γ against log ε over the smaller half of the grid.
    pub slope: f64,
}

/// Isofreedom curve for dof m over a decreasing ε grid.
pub fn isofreedom_curve(shape: &Kernel, x: &Design, sigma2: f64, m: f64, eps_grid: &[f64]) -> Result<IsofreedomCurve> {
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("eps grid must be strictly decreasing".into()));
    }
    let points = eps_grid
        .par_iter()
        .map(|&e| isofreedom_gamma(shape, x, sigma2, e, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(IsofreedomCurve {
        target: m,
        slope: tail_slope(&points),
        points,
    })
}

/// Log-log slope of γ against ε over the last ⌈half⌉ of the points.
pub fn tail_slope(points: &[IsofreedomPoint]) -> f64 {
    let start = points.len() / 2;
    let tail = &points[start..];
    let eps: Vec<f64> = tail.iter().map(|p| p.epsilon).collect();
    let gam: Vec<f64> = tail.iter().map(|p| p.gamma).collect();
    loglog_slope(&eps, &gam)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchedKind {
    /// Unpenalized monomials of degree < k.
    Polynomial { below: usize },
    /// Penalized degree-k block over monomials of degree < k.
    PenalizedBlock { k: usize },
    /// Polyharmonic spline of order r.
    Spline { r: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedSource {
    pub kernel: Kernel,
    pub epsilon: f64,
    pub gamma: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedApproximation {
    pub source: MatchedSource,
    pub kind: MatchedKind,
    pub target: SemiParametricModel,
    /// Gain applied to the target kernel (1 for pure polynomial targets).
    pub gain: f64,
    pub source_dof: f64,
    pub achieved_dof: f64,
}

fn tuned(base: SemiParametricModel, x: &Design, sigma2: f64, m: f64) -> Result<(SemiParametricModel, f64)> {
    let fixed = base.basis_len() as f64;
    let mus = ProjectedEigen::new(&base, x)?.clipped();
    let g = solve_gain(&mus, sigma2, m - fixed)?;
    Ok((base.scaled(g), g))
}

/// Flat-limit model with the same degrees of freedom as the GP at (ε, γ, σ²).
pub fn matched_approximation(shape: &Kernel, eps: f64, gamma: f64, sigma2: f64, x: &Design) -> Result<MatchedApproximation> {
    let (n, d) = (x.n(), x.d());
    let cache = SpectralCache::new(&shape.with_epsilon(eps), x);
    let m = cache.dof_for_ridge(sigma2 / gamma);
    if m >= n as f64 - 1e-9 {
        return Err(Error::UnreachableDof {
            target: m,
            supremum: n as f64,
        });
    }
    let r = shape.regularity()?;
    let spline_floor = match r {
        Regularity::Finite(r) => Some((r, count_poly_dim(r as i64 - 1, d) as f64)),
        Regularity::Infinite => None,
    };
    let (kind, target, gain) = match spline_floor {
        Some((r, floor)) if m > floor + 1e-9 => {
            let (t, g) = tuned(polyharmonic_spm(r, d), x, sigma2, m)?;
            (MatchedKind::Spline { r }, t, g)
        }
        _ => {
            let mut k = 0usize;
            while count_poly_dim(k as i64, d) as f64 <= m {
                k += 1;
            }
            let floor = count_poly_dim(k as i64 - 1, d) as f64;
            if m - floor <= 1e-9 {
                (
                    MatchedKind::Polynomial { below: k },
                    SemiParametricModel::new(Kernel::zero(), Basis::below(k), d),
                    1.0,
                )
            } else {
                let w = wronskian(&shape.with_epsilon(1.0).with_gamma(1.0), k, d)?;
                let base = SemiParametricModel::new(schur_kernel(&w, k)?, Basis::below(k), d);
                let (t, g) = tuned(base, x, sigma2, m)?;
                (MatchedKind::PenalizedBlock { k }, t, g)
            }
        }
    };
    let achieved_dof = spm_smoother(&target, x, sigma2)?.trace;
    Ok(MatchedApproximation {
        source: MatchedSource {
            kernel: shape.with_epsilon(eps).with_gamma(gamma),
            epsilon: eps,
            gamma,
            sigma2,
        },
        kind,
        target,
        gain,
        source_dof: m,
        achieved_dof,
    })
}
