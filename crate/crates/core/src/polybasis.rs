//! Multivariate monomials in graded-lex order and blocked Vandermonde matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, RANK_TOL};

/// Exponent vector of a monomial x^α.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    pub exponents: Vec<u32>,
}

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex { exponents }
    }

    pub fn zero(d: usize) -> Self {
        MultiIndex { exponents: vec![0; d] }
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// α! = Π α_i!
    pub fn factorial(&self) -> f64 {
        self.exponents
            .iter()
            .map(|&a| (1..=a).map(|i| i as f64).product::<f64>())
            .product()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x)
            .map(|(&a, &xi)| xi.powi(a as i32))
            .product()
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// H_{k,d}: number of monomials of degree exactly k in d variables.
pub fn count_monomials(k: usize, d: usize) -> usize {
    binomial((k + d - 1) as u64, (d - 1) as u64) as usize
}

/// P_{k,d}: dimension of polynomials of degree ≤ k; zero for k = -1.
pub fn count_poly_dim(k: i64, d: usize) -> usize {
    if k < 0 {
        return 0;
    }
    binomial(k as u64 + d as u64, d as u64) as usize
}

/// Monomials of degree exactly k, lexicographically descending in the exponents.
pub fn monomials_of_degree(k: usize, d: usize) -> Vec<MultiIndex> {
    fn rec(rem: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if slots == 1 {
            prefix.push(rem);
            out.push(MultiIndex::new(prefix.clone()));
            prefix.pop();
            return;
        }
        for a in (0..=rem).rev() {
            prefix.push(a);
            rec(rem - a, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::with_capacity(count_monomials(k, d));
    rec(k as u32, d, &mut Vec::with_capacity(d), &mut out);
    out
}

/// All monomials of degree ≤ k in graded-lex order.
pub fn enumerate_monomials(k: usize, d: usize) -> Vec<MultiIndex> {
    (0..=k).flat_map(|i| monomials_of_degree(i, d)).collect()
}

/// Monomials of degree < k (empty for k = 0).
pub fn monomials_below(k: usize, d: usize) -> Vec<MultiIndex> {
    if k == 0 {
        Vec::new()
    } else {
        enumerate_monomials(k - 1, d)
    }
}

/// n points in d dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl Design {
    pub fn new(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput("design needs n >= 1 and d >= 1".into()));
        }
        if data.len() != n * d {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                n * d,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Design { data, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("ragged point list".into()));
        }
        Design::new(rows.concat(), rows.len(), d)
    }

    pub fn univariate(x: &[f64]) -> Result<Self> {
        Design::new(x.to_vec(), x.len(), 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.d)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.data)
    }

    /// Concatenate with another design of the same dimension.
    pub fn concat(&self, other: &Design) -> Result<Design> {
        if other.d != self.d {
            return Err(Error::InvalidInput("dimension mismatch".into()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Design::new(data, self.n + other.n, self.d)
    }

    /// Smallest pairwise distance (infinite for a single point).
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.n {
            for j in i + 1..self.n {
                best = best.min(dist(self.point(i), self.point(j)));
            }
        }
        best
    }
}

pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Per-coordinate affine map sending the bounding box of a design to [-1, 1]^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl AffineMap {
    pub fn identity(d: usize) -> Self {
        AffineMap {
            shift: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    pub fn fit(x: &Design) -> Self {
        let d = x.d();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in x.points() {
            for k in 0..d {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let mut shift = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for k in 0..d {
            let half = 0.5 * (hi[k] - lo[k]);
            shift[k] = 0.5 * (hi[k] + lo[k]);
            if half > 0.0 {
                scale[k] = 1.0 / half;
            }
        }
        AffineMap { shift, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| (v - self.shift[k]) * self.scale[k])
            .collect()
    }
}

/// Evaluate the monomials at every point (n × |basis|).
pub fn monomial_matrix(x: &Design, basis: &[MultiIndex], map: &AffineMap) -> DMatrix<f64> {
    let mut v = DMatrix::zeros(x.n(), basis.len());
    for (i, p) in x.points().enumerate() {
        let z = map.apply(p);
        for (j, a) in basis.iter().enumerate() {
            v[(i, j)] = a.eval(&z);
        }
    }
    v
}

/// Vandermonde matrix with its degree blocks and blocked orthonormalization.
#[derive(Debug, Clone)]
pub struct VandermondeBlocks {
    pub degree: usize,
    pub indices: Vec<MultiIndex>,
    pub blocks: Vec<DMatrix<f64>>,
    pub assembled: DMatrix<f64>,
    pub orthonormal_blocks: Vec<DMatrix<f64>>,
    pub q: DMatrix<f64>,
    pub triangular_factor: DMatrix<f64>,
}

impl VandermondeBlocks {
    /// Column range of degree block i inside the assembled matrix.
    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        let d = self.indices.first().map_or(1, |a| a.dim());
        count_poly_dim(i as i64 - 1, d)..count_poly_dim(i as i64, d)
    }

    /// Q_{<l}: orthonormal columns spanning degrees below l.
    pub fn q_below(&self, l: usize) -> DMatrix<f64> {
        let d = self.indices[0].dim();
        let cols = count_poly_dim(l as i64 - 1, d).min(self.q.ncols());
        self.q.columns(0, cols).into_owned()
    }
}

fn blocked(x: &Design, k: usize, map: &AffineMap) -> VandermondeBlocks {
    let d = x.d();
    let indices = enumerate_monomials(k, d);
    let assembled = monomial_matrix(x, &indices, map);
    let mut blocks = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let lo = count_poly_dim(i as i64 - 1, d);
        blocks.push(assembled.columns(lo, count_monomials(i, d)).into_owned());
    }
    let qr = assembled.clone().qr();
    let q = qr.q();
    let triangular_factor = qr.r();
    let mut orthonormal_blocks = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let lo = count_poly_dim(i as i64 - 1, d).min(q.ncols());
        let hi = count_poly_dim(i as i64, d).min(q.ncols());
        orthonormal_blocks.push(q.columns(lo, hi - lo).into_owned());
    }
    VandermondeBlocks {
        degree: k,
        indices,
        blocks,
        assembled,
        orthonormal_blocks,
        q,
        triangular_factor,
    }
}

/// Raw Vandermonde matrix V_{≤k}(X) with entries x_i^α.
pub fn vandermonde(x: &Design, k: usize) -> VandermondeBlocks {
    blocked(x, k, &AffineMap::identity(x.d()))
}

/// Same as [`vandermonde`] after mapping the design into [-1, 1]^d.
/// The column spans of every prefix are unchanged by the map.
pub fn vandermonde_rescaled(x: &Design, k: usize) -> (VandermondeBlocks, AffineMap) {
    let map = AffineMap::fit(x);
    (blocked(x, k, &map), map)
}

/// Numerical rank of V_{≤k}(X) and whether it equals P_{k,d}.
pub fn unisolvency_rank(x: &Design, k: usize, tol: f64) -> (usize, bool) {
    let map = AffineMap::fit(x);
    let v = monomial_matrix(x, &enumerate_monomials(k, x.d()), &map);
    let rank = numerical_rank(&v, tol);
    (rank, rank == v.ncols())
}

/// [`unisolvency_rank`] at the default tolerance.
pub fn is_unisolvent(x: &Design, k: usize) -> bool {
    unisolvency_rank(x, k, RANK_TOL).1
}
