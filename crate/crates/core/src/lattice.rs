//! Operators on ℓᵖ(ℤⁿ) given by a discrete kernel `K(j, m) = ⟨T e_m, e_j⟩`.
//!
//! All sums run over the ∞-norm box `|·|_∞ ≤ R`, enumerated lexicographically
//! with the first coordinate most significant.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::plemelj::{plemelj_series, DetResult};
use crate::sparse::SparseRows;

/// A point of ℤⁿ.
pub type Point = Vec<i64>;

type EvalFn = dyn Fn(&[i64], &[i64]) -> Complex64 + Send + Sync;
type PatternFn = dyn Fn(i64) -> Vec<(Point, Point)> + Send + Sync;

/// Largest box side count `(2R+1)ⁿ` accepted by the enumerators.
const MAX_BOX_POINTS: u128 = 1 << 26;

/// A complex kernel on ℤⁿ×ℤⁿ given as an evaluation rule.
///
/// An optional sparsity pattern lists, for a cutoff `R`, every position in the
/// box where the kernel may be nonzero. Kernels without a pattern are
/// enumerated densely.
#[derive(Clone)]
pub struct LatticeKernel {
    dim: usize,
    label: String,
    declared_support: Option<i64>,
    eval: Arc<EvalFn>,
    pattern: Option<Arc<PatternFn>>,
}

impl fmt::Debug for LatticeKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeKernel")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("declared_support", &self.declared_support)
            .field("sparse", &self.pattern.is_some())
            .finish()
    }
}

impl LatticeKernel {
    pub fn from_fn(
        dim: usize,
        label: impl Into<String>,
        f: impl Fn(&[i64], &[i64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        assert!(dim >= 1, "lattice dimension must be positive");
        Self { dim, label: label.into(), declared_support: None, eval: Arc::new(f), pattern: None }
    }

    /// Declares that the kernel vanishes outside the box of radius `r0`.
    pub fn with_support(mut self, r0: i64) -> Self {
        self.declared_support = Some(r0);
        self
    }

    /// Attaches a sparsity pattern; it must cover every nonzero inside the box.
    pub fn with_pattern(mut self, pattern: impl Fn(i64) -> Vec<(Point, Point)> + Send + Sync + 'static) -> Self {
        self.pattern = Some(Arc::new(pattern));
        self
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_fn(dim, "zero", |_, _| Complex64::new(0.0, 0.0))
            .with_support(0)
            .with_pattern(|_| Vec::new())
    }

    /// `K(j, m) = δ_{jm} f(j)`.
    pub fn diagonal(
        dim: usize,
        label: impl Into<String>,
        f: impl Fn(&[i64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        let f = Arc::new(f);
        let g = f.clone();
        Self::from_fn(dim, label, move |j, m| if j == m { g(j) } else { Complex64::new(0.0, 0.0) })
            .with_pattern(move |r| box_points(dim, r).map(|p| (p.clone(), p)).collect())
    }

    /// Kernel vanishing unless `|j - m|_∞ ≤ width`.
    pub fn banded(
        dim: usize,
        label: impl Into<String>,
        width: i64,
        f: impl Fn(&[i64], &[i64]) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self::from_fn(dim, label, move |j, m| {
            if linf_dist(j, m) <= width {
                f(j, m)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .with_pattern(move |r| {
            let mut out = Vec::new();
            for j in box_points(dim, r) {
                for off in box_points(dim, width) {
                    let m: Point = j.iter().zip(&off).map(|(a, b)| a + b).collect();
                    if linf(&m) <= r {
                        out.push((j.clone(), m));
                    }
                }
            }
            out
        })
    }

    /// Explicit finite list of entries; repeated positions are summed.
    pub fn table(dim: usize, label: impl Into<String>, entries: Vec<(Point, Point, Complex64)>) -> Result<Self> {
        let mut map: BTreeMap<(Point, Point), Complex64> = BTreeMap::new();
        for (j, m, v) in entries {
            if j.len() != dim || m.len() != dim {
                return Err(Error::Shape(format!("table entry ({j:?}, {m:?}) is not in Z^{dim}")));
            }
            if !v.is_finite() {
                return Err(Error::Evaluation { index: fmt_index(&j, &m) });
            }
            *map.entry((j, m)).or_insert(Complex64::new(0.0, 0.0)) += v;
        }
        let support = map.keys().map(|(j, m)| linf(j).max(linf(m))).max().unwrap_or(0);
        let map = Arc::new(map);
        let lookup = map.clone();
        Ok(Self::from_fn(dim, label, move |j, m| {
            lookup.get(&(j.to_vec(), m.to_vec())).copied().unwrap_or(Complex64::new(0.0, 0.0))
        })
        .with_support(support)
        .with_pattern(move |r| map.keys().filter(|(j, m)| linf(j) <= r && linf(m) <= r).cloned().collect()))
    }

    /// `K(j, m) = u(j)·v(m)` for finitely supported `u`, `v`.
    pub fn rank_one(
        dim: usize,
        label: impl Into<String>,
        u: &[(Point, Complex64)],
        v: &[(Point, Complex64)],
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(u.len() * v.len());
        for (j, a) in u {
            for (m, b) in v {
                entries.push((j.clone(), m.clone(), a * b));
            }
        }
        Self::table(dim, label, entries)
    }

    /// Trace-class matrix with infinite Poincaré norm on ℓ²(ℤ):
    /// `a_{1k} = 1/k` for `k ≥ 1`, `a_{jj} = 1/j²` and zero elsewhere.
    ///
    /// With `two_sided` the diagonal runs over all `j ≠ 0`; otherwise over `j ≥ 1`.
    pub fn harmonic_row(two_sided: bool) -> Self {
        let label = if two_sided { "harmonic_row_two_sided" } else { "harmonic_row" };
        Self::from_fn(1, label, move |j, m| {
            let (j, m) = (j[0], m[0]);
            if j == 1 && m >= 1 {
                Complex64::new(1.0 / m as f64, 0.0)
            } else if j == m && j != 0 && (two_sided || j >= 1) {
                Complex64::new(1.0 / (j as f64 * j as f64), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .with_pattern(move |r| {
            let mut out: Vec<(Point, Point)> = (1..=r).map(|k| (vec![1], vec![k])).collect();
            let start = if two_sided { -r } else { 1 };
            out.extend((start..=r).filter(|&j| j != 0 && j != 1).map(|j| (vec![j], vec![j])));
            out
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn declared_support(&self) -> Option<i64> {
        self.declared_support
    }

    /// Raw evaluation without a finiteness check.
    pub fn eval_raw(&self, j: &[i64], m: &[i64]) -> Complex64 {
        (self.eval)(j, m)
    }

    /// Evaluates `K(j, m)`, rejecting non-finite values.
    pub fn eval(&self, j: &[i64], m: &[i64]) -> Result<Complex64> {
        let v = (self.eval)(j, m);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation { index: fmt_index(j, m) })
        }
    }

    /// Nonzero entries inside the box as `(row, col, value)` with lexicographic
    /// box indices, sorted by `(row, col)`.
    pub fn nonzeros(&self, cutoff: i64) -> Result<Vec<(usize, usize, Complex64)>> {
        let side = box_len(self.dim, cutoff)?;
        let mut out = Vec::new();
        match &self.pattern {
            Some(pattern) => {
                let mut positions: Vec<(usize, usize, Point, Point)> = pattern(cutoff)
                    .into_iter()
                    .filter(|(j, m)| linf(j) <= cutoff && linf(m) <= cutoff)
                    .map(|(j, m)| (lex_index(&j, cutoff), lex_index(&m, cutoff), j, m))
                    .collect();
                positions.sort_by_key(|p| (p.0, p.1));
                positions.dedup_by_key(|p| (p.0, p.1));
                for (row, col, j, m) in positions {
                    let v = self.eval(&j, &m)?;
                    if v != Complex64::new(0.0, 0.0) {
                        out.push((row, col, v));
                    }
                }
            }
            None => {
                let points: Vec<Point> = box_points(self.dim, cutoff).collect();
                debug_assert_eq!(points.len(), side);
                for (row, j) in points.iter().enumerate() {
                    for (col, m) in points.iter().enumerate() {
                        let v = self.eval(j, m)?;
                        if v != Complex64::new(0.0, 0.0) {
                            out.push((row, col, v));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Spot-checks the declared support on points just outside it.
    pub fn check_declared_support(&self, samples: i64) -> Result<bool> {
        let Some(r0) = self.declared_support else { return Ok(true) };
        let inside = vec![0i64; self.dim];
        for s in 1..=samples {
            let mut outside = vec![0i64; self.dim];
            outside[(s as usize) % self.dim] = r0 + s;
            let neg: Point = outside.iter().map(|x| -x).collect();
            for (j, m) in [(&outside, &inside), (&inside, &outside), (&neg, &inside), (&inside, &neg)] {
                if self.eval(j, m)? != Complex64::new(0.0, 0.0) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

pub(crate) fn fmt_index(j: &[i64], m: &[i64]) -> String {
    format!("K({j:?}, {m:?})")
}

pub(crate) fn linf(p: &[i64]) -> i64 {
    p.iter().map(|x| x.abs()).max().unwrap_or(0)
}

fn linf_dist(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

/// Number of points `(2R+1)ⁿ` in the box, guarded against overflow.
pub(crate) fn box_len(dim: usize, cutoff: i64) -> Result<usize> {
    if cutoff < 0 {
        return Err(Error::Parameter(format!("cutoff must be nonnegative, got {cutoff}")));
    }
    let side = 2 * cutoff as u128 + 1;
    let mut count: u128 = 1;
    for _ in 0..dim {
        count = count.saturating_mul(side);
    }
    if count > MAX_BOX_POINTS {
        return Err(Error::Feasibility { what: format!("box of radius {cutoff} in Z^{dim}"), count, limit: MAX_BOX_POINTS });
    }
    Ok(count as usize)
}

/// Lexicographic index of `p` in the box of radius `cutoff`.
pub(crate) fn lex_index(p: &[i64], cutoff: i64) -> usize {
    let side = (2 * cutoff + 1) as usize;
    p.iter().fold(0usize, |acc, &x| acc * side + (x + cutoff) as usize)
}

/// Points of the box `|·|_∞ ≤ cutoff` in lexicographic order.
pub fn box_points(dim: usize, cutoff: i64) -> impl Iterator<Item = Point> {
    let side = (2 * cutoff + 1).max(0) as usize;
    let total = side.checked_pow(dim as u32).unwrap_or(usize::MAX);
    (0..total).map(move |mut idx| {
        let mut p = vec![0i64; dim];
        for slot in p.iter_mut().rev() {
            *slot = (idx % side) as i64 - cutoff;
            idx /= side;
        }
        p
    })
}

fn check_cutoff(cutoff: i64) -> Result<()> {
    if cutoff < 1 {
        Err(Error::Parameter(format!("cutoff must be at least 1, got {cutoff}")))
    } else {
        Ok(())
    }
}

/// Partial sum `Σ_{|j|≤R} (Σ_{|m|≤R} |K(j,m)|ᵖ)^{1/p}` of the discrete
/// nuclearity condition. Nondecreasing in `R`.
pub fn nuclear_norm_estimate(k: &LatticeKernel, p: f64, cutoff: i64) -> Result<f64> {
    check_cutoff(cutoff)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Parameter(format!("p must lie in [1, inf), got {p}")));
    }
    let entries = k.nonzeros(cutoff)?;
    let mut total = 0.0;
    let mut i = 0;
    while i < entries.len() {
        let row = entries[i].0;
        let mut row_sum = 0.0;
        while i < entries.len() && entries[i].0 == row {
            row_sum += entries[i].2.norm().powf(p);
            i += 1;
        }
        total += row_sum.powf(1.0 / p);
    }
    Ok(total)
}

/// `Σ_{|n|≤R} K(n, n)` in index-ascending order.
pub fn lattice_trace(k: &LatticeKernel, cutoff: i64) -> Result<Complex64> {
    check_cutoff(cutoff)?;
    box_len(k.dim, cutoff)?;
    let mut sum = Complex64::new(0.0, 0.0);
    match &k.pattern {
        Some(_) => {
            for (row, col, v) in k.nonzeros(cutoff)? {
                if row == col {
                    sum += v;
                }
            }
        }
        None => {
            for p in box_points(k.dim, cutoff) {
                sum += k.eval(&p, &p)?;
            }
        }
    }
    Ok(sum)
}

/// Iterator over `Tr(T¹), Tr(T²), …` of the box truncation of a kernel.
///
/// Each step multiplies the running power by the truncation once.
pub struct TracePowers {
    base: SparseRows,
    power: Option<SparseRows>,
}

impl TracePowers {
    pub fn new(k: &LatticeKernel, cutoff: i64) -> Result<Self> {
        check_cutoff(cutoff)?;
        let n = box_len(k.dim, cutoff)?;
        let base = SparseRows::from_sorted_triplets(n, &k.nonzeros(cutoff)?);
        Ok(Self { base, power: None })
    }
}

impl Iterator for TracePowers {
    type Item = Result<Complex64>;

    fn next(&mut self) -> Option<Self::Item> {
        let next = match &self.power {
            None => self.base.clone(),
            Some(p) => p.mul(&self.base),
        };
        let tr = next.trace();
        self.power = Some(next);
        Some(Ok(tr))
    }
}

/// `Tr(Tᵐ)` of the box truncation, the sum over closed index chains
/// `j₀ → j₁ → … → j_m = j₀` of `∏ K(j_{s-1}, j_s)`.
pub fn cycle_trace(k: &LatticeKernel, m: usize, cutoff: i64) -> Result<Complex64> {
    if m < 1 {
        return Err(Error::Parameter("power must be at least 1".into()));
    }
    TracePowers::new(k, cutoff)?.nth(m - 1).expect("trace power iterator is infinite")
}

/// `Det(I + λT)` of the box truncation by the Plemelj–Smithies series.
pub fn lattice_determinant(
    k: &LatticeKernel,
    lambda: Complex64,
    order: usize,
    cutoff: i64,
    tol: f64,
) -> Result<DetResult> {
    if order < 1 {
        return Err(Error::Parameter("series order must be at least 1".into()));
    }
    check_cutoff(cutoff)?;
    let norm = nuclear_norm_estimate(k, 1.0, cutoff)?;
    if lambda.norm() * norm >= 1.0 {
        log::warn!(
            "{}: |lambda| * nuclear norm = {:.3} >= 1, series convergence is not guaranteed",
            k.label,
            lambda.norm() * norm
        );
    }
    plemelj_series(TracePowers::new(k, cutoff)?, lambda, order, tol, cutoff as usize)
}
