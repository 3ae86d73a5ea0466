//! Symbols of G-invariant operators on homogeneous vector bundles.
//!
//! A left-invariant operator on sections with fiber `ℂ^{d_τ}` has a symbol
//! `σ(i, r, ξ) ∈ ℂ^{d_ξ×d_ξ}` for fiber indices `i, r` and each retained
//! block `ξ` of the dual object. Composition follows
//!
//! ```text
//! σ_{BA}(i, s, ξ) = Σ_r σ_B(r, s, ξ) · σ_A(i, r, ξ)
//! ```
//!
//! Flattening a symbol at `ξ` places `σ(i, r, ξ)` in block-row `r`, block-column
//! `i` of a `(d_τ·d_ξ)`-square matrix `S_ξ`. With this layout composition is
//! the matrix product: `S_ξ(BA) = S_ξ(B)·S_ξ(A)`. For `d_τ = 2`:
//!
//! ```text
//! S_ξ = [ σ(0,0,ξ)  σ(1,0,ξ) ]
//!       [ σ(0,1,ξ)  σ(1,1,ξ) ]
//! ```
//!
//! Indices are 0-based in this API.

use std::collections::BTreeSet;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{mat_mul, mat_power_trace, CMatrix};
use crate::plemelj::{plemelj_series, DetResult};

/// Finite list of dual-object blocks `(ξ, d_ξ)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualObject {
    blocks: Vec<(String, usize)>,
    label: String,
}

impl DualObject {
    pub fn new(label: impl Into<String>, blocks: Vec<(String, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (id, d) in &blocks {
            if !seen.insert(id.as_str()) {
                return Err(Error::Model(format!("duplicate dual block `{id}`")));
            }
            if *d == 0 {
                return Err(Error::Model(format!("dual block `{id}` has dimension 0")));
            }
        }
        Ok(Self { blocks, label: label.into() })
    }

    pub fn blocks(&self) -> &[(String, usize)] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.blocks.iter().position(|(x, _)| x == id).ok_or_else(|| Error::Lookup(id.to_string()))
    }

    pub fn dim(&self, idx: usize) -> usize {
        self.blocks[idx].1
    }
}

/// Vector-valued symbol `σ(i, r, ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleSymbol {
    fiber_dim: usize,
    dual: DualObject,
    // indexed [(xi * fiber_dim + i) * fiber_dim + r]
    sigma: Vec<CMatrix>,
    label: String,
}

impl BundleSymbol {
    /// Builds `σ` from `f(i, r, ξ-index)`; each value must be `d_ξ`-square.
    pub fn new(
        label: impl Into<String>,
        fiber_dim: usize,
        dual: DualObject,
        mut f: impl FnMut(usize, usize, usize) -> CMatrix,
    ) -> Result<Self> {
        if fiber_dim == 0 {
            return Err(Error::Shape("fiber dimension must be positive".into()));
        }
        let mut sigma = Vec::with_capacity(dual.len() * fiber_dim * fiber_dim);
        for xi in 0..dual.len() {
            let d = dual.dim(xi);
            for i in 0..fiber_dim {
                for r in 0..fiber_dim {
                    let m = f(i, r, xi);
                    if m.rows() != d || m.cols() != d {
                        return Err(Error::Shape(format!(
                            "sigma({i}, {r}, {}) is {}x{}, expected {d}x{d}",
                            dual.blocks[xi].0,
                            m.rows(),
                            m.cols()
                        )));
                    }
                    sigma.push(m);
                }
            }
        }
        Ok(Self { fiber_dim, dual, sigma, label: label.into() })
    }

    pub fn zero(fiber_dim: usize, dual: DualObject) -> Result<Self> {
        let dims: Vec<usize> = dual.blocks.iter().map(|b| b.1).collect();
        Self::new("zero", fiber_dim, dual, |_, _, xi| CMatrix::zeros(dims[xi], dims[xi]))
    }

    /// `σ(i, r, ξ) = δ_{ir} I_{d_ξ}`.
    pub fn identity(fiber_dim: usize, dual: DualObject) -> Result<Self> {
        let dims: Vec<usize> = dual.blocks.iter().map(|b| b.1).collect();
        Self::new("identity", fiber_dim, dual, |i, r, xi| {
            if i == r {
                CMatrix::identity(dims[xi])
            } else {
                CMatrix::zeros(dims[xi], dims[xi])
            }
        })
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn dual(&self) -> &DualObject {
        &self.dual
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sigma(&self, i: usize, r: usize, xi: usize) -> &CMatrix {
        &self.sigma[(xi * self.fiber_dim + i) * self.fiber_dim + r]
    }
}

/// Symbol of `B∘A`: `σ_{BA}(i, s, ξ) = Σ_r σ_B(r, s, ξ)·σ_A(i, r, ξ)`.
pub fn bundle_compose(b: &BundleSymbol, a: &BundleSymbol) -> Result<BundleSymbol> {
    if a.fiber_dim != b.fiber_dim {
        return Err(Error::Shape(format!("fiber dimensions differ: {} vs {}", b.fiber_dim, a.fiber_dim)));
    }
    if a.dual != b.dual {
        return Err(Error::Shape("symbols are defined over different dual objects".into()));
    }
    let d = a.fiber_dim;
    let mut sigma = Vec::with_capacity(a.sigma.len());
    for xi in 0..a.dual.len() {
        let side = a.dual.dim(xi);
        for i in 0..d {
            for s in 0..d {
                let mut acc = CMatrix::zeros(side, side);
                for r in 0..d {
                    acc = acc.add(&mat_mul(b.sigma(r, s, xi), a.sigma(i, r, xi))?)?;
                }
                sigma.push(acc);
            }
        }
    }
    Ok(BundleSymbol { fiber_dim: d, dual: a.dual.clone(), sigma, label: format!("{}*{}", b.label, a.label) })
}

/// Symbol of `Aᵐ` by iterated composition `A^{k+1} = A∘Aᵏ`.
pub fn bundle_power(a: &BundleSymbol, m: usize) -> Result<BundleSymbol> {
    if m < 1 {
        return Err(Error::Parameter("power must be at least 1".into()));
    }
    let mut power = a.clone();
    for _ in 1..m {
        power = bundle_compose(a, &power)?;
    }
    power.label = format!("{}^{m}", a.label);
    Ok(power)
}

/// `Tr(A) = Σ_ξ Σ_i d_ξ·Tr(σ(i, i, ξ))`.
pub fn bundle_trace(a: &BundleSymbol) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for xi in 0..a.dual.len() {
        let d_xi = a.dual.dim(xi) as f64;
        for i in 0..a.fiber_dim {
            sum += a.sigma(i, i, xi).trace().expect("square") * d_xi;
        }
    }
    sum
}

fn flatten_at(a: &BundleSymbol, xi: usize) -> CMatrix {
    let side = a.dual.dim(xi);
    let n = a.fiber_dim * side;
    CMatrix::from_fn(n, n, |row, col| {
        let (r, p) = (row / side, row % side);
        let (i, q) = (col / side, col % side);
        a.sigma(i, r, xi).get(p, q)
    })
    .expect("symbol entries are finite")
}

/// The `(d_τ·d_ξ)`-square matrix `S_ξ` with block `(r, i)` equal to `σ(i, r, ξ)`.
pub fn flatten_symbol(a: &BundleSymbol, xi: &str) -> Result<CMatrix> {
    Ok(flatten_at(a, a.dual.index_of(xi)?))
}

/// `Det(I + λA)` with `Tr(Aᵐ) = Σ_ξ d_ξ·Tr(S_ξᵐ)`.
pub fn bundle_determinant(a: &BundleSymbol, lambda: Complex64, order: usize, tol: f64) -> Result<DetResult> {
    if order < 1 {
        return Err(Error::Parameter("series order must be at least 1".into()));
    }
    let flats: Vec<(f64, CMatrix)> = (0..a.dual.len()).map(|xi| (a.dual.dim(xi) as f64, flatten_at(a, xi))).collect();
    let traces = (1..=order).map(|m| {
        let mut sum = Complex64::new(0.0, 0.0);
        for (d_xi, s) in &flats {
            sum += mat_power_trace(s, m)? * *d_xi;
        }
        Ok(sum)
    });
    plemelj_series(traces, lambda, order, tol, a.dual.len())
}
