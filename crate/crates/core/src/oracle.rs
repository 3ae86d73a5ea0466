//! Brute-force cross-checks, kept deliberately naive and independent of the
//! fast paths: dense assembly of truncations, LU determinants of `I + λA`,
//! and the literal nested sums over closed index chains.

use num_complex::Complex64;

use crate::bundle::BundleSymbol;
use crate::error::{Error, Result};
use crate::lattice::LatticeKernel;
use crate::linalg::{lu_determinant, CMatrix};

/// Largest truncation side `(2R+1)ⁿ` the dense oracle will assemble.
pub const MAX_ASSEMBLY_SIDE: u128 = 20_000;
/// Largest number of chains `(2R+1)^{n·m}` the literal cycle sum will visit.
pub const MAX_LITERAL_CHAINS: u128 = 10_000_000;

/// Lexicographic bijection between `0..(2R+1)ⁿ` and the box `|·|_∞ ≤ R`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncationIndexMap {
    dim: usize,
    cutoff: i64,
    points: Vec<Vec<i64>>,
}

impl TruncationIndexMap {
    pub fn new(dim: usize, cutoff: i64) -> Result<Self> {
        if cutoff < 1 {
            return Err(Error::Parameter(format!("cutoff must be at least 1, got {cutoff}")));
        }
        let side = 2 * cutoff as u128 + 1;
        let count = side.checked_pow(dim as u32).unwrap_or(u128::MAX);
        if count > MAX_ASSEMBLY_SIDE {
            return Err(Error::Feasibility { what: format!("truncation of Z^{dim} at R = {cutoff}"), count, limit: MAX_ASSEMBLY_SIDE });
        }
        // odometer over coordinates, last coordinate fastest
        let mut points = Vec::with_capacity(count as usize);
        let mut current = vec![-cutoff; dim];
        loop {
            points.push(current.clone());
            let mut axis = dim;
            loop {
                if axis == 0 {
                    return Ok(Self { dim, cutoff, points });
                }
                axis -= 1;
                if current[axis] < cutoff {
                    current[axis] += 1;
                    break;
                }
                current[axis] = -cutoff;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, idx: usize) -> &[i64] {
        &self.points[idx]
    }

    pub fn index(&self, p: &[i64]) -> Option<usize> {
        self.points.iter().position(|q| q == p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> i64 {
        self.cutoff
    }
}

/// Dense matrix of the truncation, entry `(row(i), col(j)) = K(i, j)`.
pub fn assemble_truncation(k: &LatticeKernel, cutoff: i64) -> Result<CMatrix> {
    let map = TruncationIndexMap::new(k.dim(), cutoff)?;
    let n = map.len();
    let mut data = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            data.push(k.eval(map.point(row), map.point(col))?);
        }
    }
    CMatrix::new(n, n, data)
}

/// `det(I + λ·m)` by LU.
pub fn direct_determinant(m: &CMatrix, lambda: Complex64) -> Result<Complex64> {
    lu_determinant(&m.identity_plus_scaled(lambda)?)
}

/// `Σ_{j₀,…,j_{m-1}} K(j₀,j₁)·K(j₁,j₂)⋯K(j_{m-1},j₀)` over the box, visited literally.
pub fn literal_cycle_sum(k: &LatticeKernel, m: usize, cutoff: i64) -> Result<Complex64> {
    if m < 1 {
        return Err(Error::Parameter("chain length must be at least 1".into()));
    }
    if cutoff < 1 {
        return Err(Error::Parameter(format!("cutoff must be at least 1, got {cutoff}")));
    }
    let side = 2 * cutoff as u128 + 1;
    let chains = side.checked_pow((k.dim() * m) as u32).unwrap_or(u128::MAX);
    if chains > MAX_LITERAL_CHAINS {
        return Err(Error::Feasibility { what: format!("literal cycle sum of length {m} at R = {cutoff}"), count: chains, limit: MAX_LITERAL_CHAINS });
    }
    let map = TruncationIndexMap::new(k.dim(), cutoff)?;
    let n = map.len();
    let mut chain = vec![0usize; m];
    let mut total = Complex64::new(0.0, 0.0);
    loop {
        let mut prod = Complex64::new(1.0, 0.0);
        for s in 0..m {
            let next = chain[(s + 1) % m];
            prod *= k.eval(map.point(chain[s]), map.point(next))?;
        }
        total += prod;
        let mut pos = m;
        loop {
            if pos == 0 {
                return Ok(total);
            }
            pos -= 1;
            chain[pos] += 1;
            if chain[pos] < n {
                break;
            }
            chain[pos] = 0;
        }
    }
}

/// Symbol of `Aᵐ` as the literal multi-index sum
/// `σ(r_m, r_0, ξ) = Σ_{r_1..r_{m-1}} σ_A(r_1, r_0, ξ)·σ_A(r_2, r_1, ξ)⋯σ_A(r_m, r_{m-1}, ξ)`.
pub fn literal_bundle_power(a: &BundleSymbol, m: usize) -> Result<BundleSymbol> {
    if m < 1 {
        return Err(Error::Parameter("power must be at least 1".into()));
    }
    let d = a.fiber_dim();
    let inner = m - 1;
    let count = (d as u128).checked_pow(inner as u32).unwrap_or(u128::MAX);
    if count > MAX_LITERAL_CHAINS {
        return Err(Error::Feasibility { what: format!("literal bundle power {m}"), count, limit: MAX_LITERAL_CHAINS });
    }
    BundleSymbol::new(format!("{}^{m}", a.label()), d, a.dual().clone(), |r_m, r_0, xi| {
        let side = a.dual().dim(xi);
        let mut total = vec![Complex64::new(0.0, 0.0); side * side];
        let mut mids = vec![0usize; inner];
        loop {
            let mut idx = Vec::with_capacity(m + 1);
            idx.push(r_0);
            idx.extend_from_slice(&mids);
            idx.push(r_m);
            // running product, factors multiplied on the right in increasing j
            let mut prod: Vec<Complex64> = a.sigma(idx[1], idx[0], xi).as_slice().to_vec();
            for j in 2..=m {
                let f = a.sigma(idx[j], idx[j - 1], xi);
                let mut next = vec![Complex64::new(0.0, 0.0); side * side];
                for p in 0..side {
                    for q in 0..side {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for t in 0..side {
                            acc += prod[p * side + t] * f.get(t, q);
                        }
                        next[p * side + q] = acc;
                    }
                }
                prod = next;
            }
            for (t, v) in total.iter_mut().zip(&prod) {
                *t += v;
            }
            let mut pos = inner;
            loop {
                if pos == 0 {
                    return CMatrix::new(side, side, total).expect("finite");
                }
                pos -= 1;
                mids[pos] += 1;
                if mids[pos] < d {
                    break;
                }
                mids[pos] = 0;
            }
        }
    })
}
