//! Kernel families, radial Taylor series and Wronskian matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymEigen;
use crate::polybasis::{count_poly_dim, dist, enumerate_monomials, Design, MultiIndex};

/// Differentiability class of a kernel at coincident points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regularity {
    Finite(u32),
    Infinite,
}

impl Regularity {
    /// True if r > k.
    pub fn exceeds(self, k: usize) -> bool {
        match self {
            Regularity::Finite(r) => r as usize > k,
            Regularity::Infinite => true,
        }
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            Regularity::Finite(r) => Some(r),
            Regularity::Infinite => None,
        }
    }

    pub fn min(self, other: Regularity) -> Regularity {
        match (self, other) {
            (Regularity::Finite(a), Regularity::Finite(b)) => Regularity::Finite(a.min(b)),
            (Regularity::Finite(a), _) | (_, Regularity::Finite(a)) => Regularity::Finite(a),
            _ => Regularity::Infinite,
        }
    }
}

impl std::fmt::Display for Regularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regularity::Finite(r) => write!(f, "{r}"),
            Regularity::Infinite => write!(f, "inf"),
        }
    }
}

/// User-supplied radial profile ψ(t) = Σ f_{2j} t^{2j} + f_odd |t|^{2r-1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomRadial {
    pub even_coeffs: Vec<f64>,
    pub odd_coeff: Option<f64>,
    pub regularity: Option<Regularity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    Gaussian,
    Exponential,
    /// Matérn with ν = k + 1/2, k ∈ {0, 1, 2, 3}.
    Matern(u32),
    /// (-1)^r ‖x-y‖^{2r-1}
    PolyharmonicRadial(u32),
    /// (xᵀy)^m
    Polynomial(u32),
    Zero,
    Custom(CustomRadial),
    /// Finite-rank form Σ W(α,β) x^α y^β.
    MonomialForm {
        monomials: Vec<MultiIndex>,
        weights: DMatrix<f64>,
    },
    Sum(Vec<Kernel>),
}

/// κ(x, y) = γ ψ(ε ‖x - y‖) for radial families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub family: Family,
    pub epsilon: f64,
    pub gamma: f64,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn matern_poly(k: u32) -> Vec<f64> {
    // e^{-s} Σ p_i s^i with s = sqrt(2ν) t
    let mut p = vec![0.0; k as usize + 1];
    for i in 0..=k {
        let c = factorial(k) / factorial(2 * k) * factorial(k + i)
            / (factorial(i) * factorial(k - i))
            * 2f64.powi((k - i) as i32);
        p[(k - i) as usize] = c;
    }
    p
}

impl Kernel {
    pub fn new(family: Family, epsilon: f64, gamma: f64) -> Self {
        Kernel {
            family,
            epsilon,
            gamma,
        }
    }

    pub fn gaussian(epsilon: f64, gamma: f64) -> Self {
        Kernel::new(Family::Gaussian, epsilon, gamma)
    }

    pub fn exponential(epsilon: f64, gamma: f64) -> Self {
        Kernel::new(Family::Exponential, epsilon, gamma)
    }

    /// Half-integer Matérn kernel; ν must be one of 0.5, 1.5, 2.5, 3.5.
    pub fn matern(nu: f64, epsilon: f64, gamma: f64) -> Result<Self> {
        let k = nu - 0.5;
        if !(0.0..=3.0).contains(&k) || k.fract() != 0.0 {
            return Err(Error::InvalidInput(format!(
                "Matérn smoothness {nu} is not one of 1/2, 3/2, 5/2, 7/2"
            )));
        }
        Ok(Kernel::new(Family::Matern(k as u32), epsilon, gamma))
    }

    pub fn polyharmonic(r: u32) -> Self {
        Kernel::new(Family::PolyharmonicRadial(r), 1.0, 1.0)
    }

    pub fn polynomial(m: u32) -> Self {
        Kernel::new(Family::Polynomial(m), 1.0, 1.0)
    }

    pub fn zero() -> Self {
        Kernel::new(Family::Zero, 1.0, 1.0)
    }

    pub fn monomial_form(monomials: Vec<MultiIndex>, weights: DMatrix<f64>) -> Self {
        Kernel::new(Family::MonomialForm { monomials, weights }, 1.0, 1.0)
    }

    pub fn sum(parts: Vec<Kernel>) -> Self {
        Kernel::new(Family::Sum(parts), 1.0, 1.0)
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Kernel {
            gamma,
            ..self.clone()
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Kernel {
            epsilon,
            ..self.clone()
        }
    }

    /// Same kernel multiplied by c.
    pub fn scaled(&self, c: f64) -> Self {
        self.with_gamma(self.gamma * c)
    }

    pub fn is_zero(&self) -> bool {
        match &self.family {
            Family::Zero => true,
            Family::Sum(parts) => parts.iter().all(Kernel::is_zero),
            _ => self.gamma == 0.0,
        }
    }

    /// Stationary positive-definite radial families that have a radial series.
    pub fn is_radial(&self) -> bool {
        matches!(
            self.family,
            Family::Gaussian | Family::Exponential | Family::Matern(_) | Family::Custom(_)
        )
    }

    /// Radial profile ψ(t) at unit scale, for radial families.
    pub fn psi(&self, t: f64) -> f64 {
        let t = t.abs();
        match &self.family {
            Family::Gaussian => (-t * t).exp(),
            Family::Exponential => (-t).exp(),
            Family::Matern(k) => {
                let s = (2.0 * *k as f64 + 1.0).sqrt() * t;
                let p = matern_poly(*k);
                let poly = p.iter().rev().fold(0.0, |acc, c| acc * s + c);
                (-s).exp() * poly
            }
            Family::PolyharmonicRadial(r) => {
                let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                sign * t.powi(2 * *r as i32 - 1)
            }
            Family::Custom(c) => {
                let t2 = t * t;
                let even = c.even_coeffs.iter().rev().fold(0.0, |acc, f| acc * t2 + f);
                let odd = match (c.odd_coeff, c.regularity) {
                    (Some(f), Some(Regularity::Finite(r))) => f * t.powi(2 * r as i32 - 1),
                    _ => 0.0,
                };
                even + odd
            }
            _ => f64::NAN,
        }
    }

    fn base(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.family {
            Family::Zero => 0.0,
            Family::Polynomial(m) => {
                let ip: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                ip.powi(*m as i32)
            }
            Family::MonomialForm { monomials, weights } => {
                let vx: Vec<f64> = monomials.iter().map(|a| a.eval(x)).collect();
                let vy: Vec<f64> = monomials.iter().map(|a| a.eval(y)).collect();
                let mut s = 0.0;
                for i in 0..vx.len() {
                    for j in 0..vy.len() {
                        s += weights[(i, j)] * vx[i] * vy[j];
                    }
                }
                s
            }
            Family::Sum(parts) => parts.iter().map(|k| k.eval(x, y)).sum(),
            _ => self.psi(self.epsilon * dist(x, y)),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.gamma * self.base(x, y)
    }

    pub fn regularity(&self) -> Result<Regularity> {
        Ok(match &self.family {
            Family::Gaussian => Regularity::Infinite,
            Family::Exponential => Regularity::Finite(1),
            Family::Matern(k) => Regularity::Finite(k + 1),
            Family::PolyharmonicRadial(r) => Regularity::Finite(*r),
            Family::Polynomial(_) | Family::Zero | Family::MonomialForm { .. } => {
                Regularity::Infinite
            }
            Family::Custom(c) => c.regularity.ok_or(Error::UnknownRegularity)?,
            Family::Sum(parts) => {
                let mut r = Regularity::Infinite;
                for p in parts {
                    r = r.min(p.regularity()?);
                }
                r
            }
        })
    }

    /// Taylor coefficients of ψ at 0 up to the given order.
    pub fn radial_series(&self, order: usize) -> Result<RadialSeries> {
        if !self.is_radial() {
            return Err(Error::NotRadial);
        }
        let reg = self.regularity()?;
        let max_even = match reg {
            Regularity::Finite(r) => {
                let max = 2 * r as usize - 1;
                if order > max {
                    return Err(Error::SeriesTruncation { order, max });
                }
                order.min(max - 1)
            }
            Regularity::Infinite => order,
        };
        let n_even = max_even / 2 + 1;
        let (even, odd_full): (Vec<f64>, Option<f64>) = match &self.family {
            Family::Gaussian => (
                (0..n_even)
                    .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } / factorial(j as u32))
                    .collect(),
                None,
            ),
            Family::Exponential => (vec![1.0], Some(-1.0)),
            Family::Matern(k) => {
                let p = matern_poly(*k);
                let c = |j: usize| -> f64 {
                    (0..=j.min(*k as usize))
                        .map(|i| {
                            let sign = if (j - i).is_multiple_of(2) { 1.0 } else { -1.0 };
                            p[i] * sign / factorial((j - i) as u32)
                        })
                        .sum()
                };
                let root = (2.0 * *k as f64 + 1.0).sqrt();
                let odd_j = 2 * *k as usize + 1;
                (
                    (0..=*k as usize)
                        .map(|j| c(2 * j) * root.powi(2 * j as i32))
                        .collect(),
                    Some(c(odd_j) * root.powi(odd_j as i32)),
                )
            }
            Family::Custom(c) => (c.even_coeffs.clone(), c.odd_coeff),
            _ => unreachable!(),
        };
        let mut even_coeffs: Vec<f64> = even.into_iter().take(n_even).collect();
        even_coeffs.resize(n_even, 0.0);
        let odd_coeff = match reg {
            Regularity::Finite(r) if order >= 2 * r as usize - 1 => odd_full,
            _ => None,
        };
        Ok(RadialSeries {
            even_coeffs,
            odd_coeff,
            truncation_order: order,
        })
    }
}

/// Even Taylor coefficients of ψ and the leading odd coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSeries {
    pub even_coeffs: Vec<f64>,
    pub odd_coeff: Option<f64>,
    pub truncation_order: usize,
}

impl RadialSeries {
    /// f_j for j ≤ truncation order (zero where absent).
    pub fn coeff(&self, j: usize) -> f64 {
        if j.is_multiple_of(2) {
            self.even_coeffs.get(j / 2).copied().unwrap_or(0.0)
        } else if j + 1 == 2 * self.even_coeffs.len() {
            self.odd_coeff.unwrap_or(0.0)
        } else {
            0.0
        }
    }
}

pub fn kernel_matrix(kernel: &Kernel, x: &Design) -> DMatrix<f64> {
    let n = x.n();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(x.point(i), x.point(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cross-covariance matrix with rows indexed by `query` and columns by `x`.
pub fn cross_matrix(kernel: &Kernel, query: &Design, x: &Design) -> DMatrix<f64> {
    DMatrix::from_fn(query.n(), x.n(), |i, j| kernel.eval(query.point(i), x.point(j)))
}

/// D[i, j] = ‖x_i - x_j‖^q.
pub fn distance_power_matrix(x: &Design, q: f64) -> DMatrix<f64> {
    let n = x.n();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            dist(x.point(i), x.point(j)).powf(q)
        }
    })
}

/// W[α, β] = ∂^{α,β} k(0, 0) / (α! β!) over monomials of degree ≤ k.
#[derive(Debug, Clone, PartialEq)]
pub struct WronskianMatrix {
    pub order: usize,
    pub d: usize,
    pub indices: Vec<MultiIndex>,
    pub matrix: DMatrix<f64>,
}

fn binom_u128(n: u32, k: u32) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Exact integer factor of the coefficient of x^α y^β in ‖x-y‖^{2j}, or None if it vanishes.
fn radial_monomial_factor(a: &MultiIndex, b: &MultiIndex) -> Option<(usize, i128)> {
    let mut j = 0u32;
    let mut multinom: u128 = 1;
    let mut sign = 1i128;
    for (&ai, &bi) in a.exponents.iter().zip(&b.exponents) {
        let s = ai + bi;
        if s % 2 == 1 {
            return None;
        }
        let kappa = s / 2;
        j += kappa;
        multinom *= binom_u128(j, kappa);
        multinom *= binom_u128(s, ai);
        if bi % 2 == 1 {
            sign = -sign;
        }
    }
    Some((j as usize, sign * multinom as i128))
}

/// Gaussian Wronskian entry from Gaussian moments.
pub fn gaussian_wronskian_entry(a: &MultiIndex, b: &MultiIndex) -> f64 {
    let mut w = 1.0;
    for (&ai, &bi) in a.exponents.iter().zip(&b.exponents) {
        let s = ai + bi;
        if s % 2 == 1 {
            return 0.0;
        }
        let dfact: f64 = (1..s).rev().step_by(2).map(|v| v as f64).product();
        let half = (s / 2) as i32;
        let sign = if (half + bi as i32) % 2 == 0 { 1.0 } else { -1.0 };
        w *= sign * dfact * 2f64.powi(half) / (factorial(ai) * factorial(bi));
    }
    w
}

/// Wronskian of the unit-scale kernel ψ(‖x-y‖) over monomials of degree ≤ k in d variables.
pub fn wronskian(kernel: &Kernel, k: usize, d: usize) -> Result<WronskianMatrix> {
    if !kernel.is_radial() {
        return Err(Error::NotRadial);
    }
    let reg = kernel.regularity()?;
    if !reg.exceeds(k) {
        let max = reg.finite().map_or(0, |r| 2 * r as usize - 1);
        return Err(Error::SeriesTruncation { order: 2 * k, max });
    }
    let indices = enumerate_monomials(k, d);
    let p = indices.len();
    let mut matrix = DMatrix::zeros(p, p);
    if matches!(kernel.family, Family::Gaussian) {
        for i in 0..p {
            for j in 0..p {
                matrix[(i, j)] = gaussian_wronskian_entry(&indices[i], &indices[j]);
            }
        }
    } else {
        let series = kernel.radial_series(2 * k)?;
        for i in 0..p {
            for j in 0..p {
                if let Some((jj, factor)) = radial_monomial_factor(&indices[i], &indices[j]) {
                    matrix[(i, j)] = series.coeff(2 * jj) * factor as f64;
                }
            }
        }
    }
    Ok(WronskianMatrix {
        order: k,
        d,
        indices,
        matrix,
    })
}

/// Same as [`wronskian`] but always through the radial series.
pub fn wronskian_from_series(kernel: &Kernel, k: usize, d: usize) -> Result<WronskianMatrix> {
    let indices = enumerate_monomials(k, d);
    let series = kernel.radial_series(2 * k)?;
    let p = indices.len();
    let matrix = DMatrix::from_fn(p, p, |i, j| {
        radial_monomial_factor(&indices[i], &indices[j])
            .map_or(0.0, |(jj, f)| series.coeff(2 * jj) * f as f64)
    });
    Ok(WronskianMatrix {
        order: k,
        d,
        indices,
        matrix,
    })
}

/// Schur complement W̄_l of the leading block W_{≤l-1} in W_{≤l}.
pub fn wronskian_schur(w: &WronskianMatrix, l: usize) -> Result<DMatrix<f64>> {
    if l > w.order {
        return Err(Error::InvalidInput(format!(
            "Schur degree {l} exceeds Wronskian order {}",
            w.order
        )));
    }
    let lo = count_poly_dim(l as i64 - 1, w.d);
    let hi = count_poly_dim(l as i64, w.d);
    let c = w.matrix.view((lo, lo), (hi - lo, hi - lo)).into_owned();
    if l == 0 {
        return Ok(c);
    }
    let a = w.matrix.view((0, 0), (lo, lo)).into_owned();
    let b = w.matrix.view((0, lo), (lo, hi - lo)).into_owned();
    let eig = SymEigen::new(&a);
    let (mx, mn) = (eig.values[0], eig.min());
    let condition = if mn > 0.0 { mx / mn } else { f64::INFINITY };
    if condition > 1e12 {
        return Err(Error::SingularWronskianBlock { condition });
    }
    let chol = a
        .cholesky()
        .ok_or(Error::SingularWronskianBlock { condition })?;
    let s = c - b.transpose() * chol.solve(&b);
    Ok(crate::linalg::symmetrize(&s))
}

/// Σ_{|α|=|β|=l} W̄_l(α,β) x^α y^β as a finite-rank kernel.
pub fn schur_kernel(w: &WronskianMatrix, l: usize) -> Result<Kernel> {
    let s = wronskian_schur(w, l)?;
    let lo = count_poly_dim(l as i64 - 1, w.d);
    let hi = count_poly_dim(l as i64, w.d);
    Ok(Kernel::monomial_form(w.indices[lo..hi].to_vec(), s))
}
