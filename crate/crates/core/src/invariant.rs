//! Operators that preserve every subspace `H_ℓ` of an orthogonal decomposition.
//!
//! Such an operator is described by its block symbol `σ_T(ℓ) ∈ ℂ^{d_ℓ×d_ℓ}`,
//! and `Tr(Tᵐ) = Σ_ℓ Tr(σ_T(ℓ)ᵐ)`. Functions of an elliptic operator are the
//! special case of 1×1 blocks repeated by multiplicity, described here by a
//! [`SpectralModel`].

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{mat_mul, mat_power_trace, CMatrix};
use crate::plemelj::{plemelj_series, DetResult};

/// Block symbol `ℓ ↦ σ_T(ℓ)` for `ℓ = 0..=L`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSymbol {
    blocks: Vec<CMatrix>,
    label: String,
}

impl BlockSymbol {
    pub fn new(label: impl Into<String>, blocks: Vec<CMatrix>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Shape("block symbol needs at least one block".into()));
        }
        for (l, b) in blocks.iter().enumerate() {
            if !b.is_square() || b.rows() == 0 {
                return Err(Error::Shape(format!("block[{l}] is {}x{}, expected a nonempty square", b.rows(), b.cols())));
            }
        }
        Ok(Self { blocks, label: label.into() })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn block(&self, l: usize) -> &CMatrix {
        &self.blocks[l]
    }

    /// Truncation index `L`.
    pub fn truncation(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(CMatrix::rows).collect()
    }

    /// Offset of each block's coordinates in the assembled space.
    pub fn offsets(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .scan(0, |acc, b| {
                let start = *acc;
                *acc += b.rows();
                Some(start)
            })
            .collect()
    }

    /// The symbol of `Tᵐ`, blocks raised to the `m`-th power.
    pub fn power(&self, m: usize) -> Result<Self> {
        if m < 1 {
            return Err(Error::Parameter("power must be at least 1".into()));
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| (1..m).try_fold(b.clone(), |acc, _| mat_mul(&acc, b)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks, label: format!("{}^{m}", self.label) })
    }
}

/// `Tr(T) = Σ_ℓ Tr(σ_T(ℓ))`.
pub fn block_trace(s: &BlockSymbol) -> Complex64 {
    s.blocks.iter().map(|b| b.trace().expect("blocks are square")).sum()
}

/// `Tr(Tᵐ) = Σ_ℓ Tr(σ_T(ℓ)ᵐ)`.
pub fn block_power_trace(s: &BlockSymbol, m: usize) -> Result<Complex64> {
    let mut sum = Complex64::new(0.0, 0.0);
    for b in &s.blocks {
        sum += mat_power_trace(b, m)?;
    }
    Ok(sum)
}

/// `Det(I + λT)` for an invariant operator, via its block traces.
pub fn invariant_determinant(s: &BlockSymbol, lambda: Complex64, order: usize, tol: f64) -> Result<DetResult> {
    if order < 1 {
        return Err(Error::Parameter("series order must be at least 1".into()));
    }
    plemelj_series((1..=order).map(|m| block_power_trace(s, m)), lambda, order, tol, s.truncation())
}

/// Spectrum of a positive elliptic operator `E`: eigenvalues `λ_j ≥ 0` with
/// multiplicities `d_j`, and the order `ν` of `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    eigenvalues: Vec<f64>,
    multiplicities: Vec<u64>,
    nu: f64,
    label: String,
}

impl SpectralModel {
    pub fn new(label: impl Into<String>, eigenvalues: Vec<f64>, multiplicities: Vec<u64>, nu: f64) -> Result<Self> {
        if eigenvalues.len() != multiplicities.len() {
            return Err(Error::Model(format!(
                "{} eigenvalues but {} multiplicities",
                eigenvalues.len(),
                multiplicities.len()
            )));
        }
        if eigenvalues.is_empty() {
            return Err(Error::Model("spectrum is empty".into()));
        }
        if let Some(j) = eigenvalues.iter().position(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::Model(format!("eigenvalue {j} is {}, E must be positive", eigenvalues[j])));
        }
        if let Some(j) = multiplicities.iter().position(|&d| d == 0) {
            return Err(Error::Model(format!("multiplicity {j} is zero")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Model(format!("order nu must be positive, got {nu}")));
        }
        Ok(Self { eigenvalues, multiplicities, nu, label: label.into() })
    }

    /// Laplacian on the circle ℝ/ℤ: `λ_k = 4π²k²`, `d_0 = 1`, `d_k = 2`.
    pub fn circle(levels: usize) -> Self {
        let eig = (0..=levels).map(|k| 4.0 * std::f64::consts::PI.powi(2) * (k * k) as f64).collect();
        let mult = (0..=levels).map(|k| if k == 0 { 1 } else { 2 }).collect();
        Self { eigenvalues: eig, multiplicities: mult, nu: 2.0, label: "circle".into() }
    }

    /// Laplacian on the flat torus (ℝ/ℤ)²: `λ = 4π²N` for every `N = a² + b²`,
    /// with multiplicity the number of lattice points on that circle.
    pub fn torus2(levels: usize) -> Self {
        let (norms, counts) = two_square_levels(levels + 1);
        let eig = norms.iter().map(|&n| 4.0 * std::f64::consts::PI.powi(2) * n as f64).collect();
        Self { eigenvalues: eig, multiplicities: counts, nu: 2.0, label: "torus2".into() }
    }

    /// Laplacian on the round sphere S²: `λ_j = j(j+1)`, `d_j = 2j+1`.
    pub fn sphere2(levels: usize) -> Self {
        let eig = (0..=levels).map(|j| (j * (j + 1)) as f64).collect();
        let mult = (0..=levels).map(|j| 2 * j as u64 + 1).collect();
        Self { eigenvalues: eig, multiplicities: mult, nu: 2.0, label: "sphere2".into() }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn multiplicities(&self) -> &[u64] {
        &self.multiplicities
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Largest retained index `J`.
    pub fn truncation(&self) -> usize {
        self.eigenvalues.len() - 1
    }

    /// `Tr(Aᵐ) = Σ_j d_j (1+λ_j)^{-αm/ν}` for `A = (I+E)^{-α/ν}`.
    pub fn trace_power(&self, alpha: f64, m: usize) -> f64 {
        let exponent = -alpha * m as f64 / self.nu;
        self.eigenvalues
            .iter()
            .zip(&self.multiplicities)
            .map(|(l, &d)| d as f64 * (1.0 + l).powf(exponent))
            .sum()
    }
}

/// First `count` values `N = a² + b²` (with `a, b ∈ ℤ`) and their representation counts.
fn two_square_levels(count: usize) -> (Vec<u64>, Vec<u64>) {
    let mut bound: u64 = (count as u64 * 2).max(16);
    loop {
        let mut r2 = vec![0u64; bound as usize + 1];
        let side = (bound as f64).sqrt() as i64 + 1;
        for a in -side..=side {
            for b in -side..=side {
                let n = (a * a + b * b) as u64;
                if n <= bound {
                    r2[n as usize] += 1;
                }
            }
        }
        let levels: Vec<(u64, u64)> =
            r2.iter().enumerate().filter(|(_, &c)| c > 0).map(|(n, &c)| (n as u64, c)).take(count).collect();
        if levels.len() == count {
            return levels.into_iter().unzip();
        }
        bound *= 2;
    }
}

/// Convergence diagnostic for the trace series of `(I+E)^{-α/ν}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailCheck {
    /// Share of `Σ_{j≤J} d_j(1+λ_j)^{-α/ν}` contributed by `J/2 < j ≤ J`.
    pub ratio: f64,
    pub convergent: bool,
}

/// Tail share below which the spectral sum is flagged convergent.
pub const WEYL_TAIL_THRESHOLD: f64 = 0.05;

pub fn weyl_tail_check(sp: &SpectralModel, alpha: f64, levels: usize) -> Result<TailCheck> {
    if levels < 10 {
        return Err(Error::Parameter(format!("tail check needs J >= 10, got {levels}")));
    }
    if levels > sp.truncation() {
        return Err(Error::Parameter(format!("J = {levels} exceeds the model's {} levels", sp.truncation())));
    }
    let exponent = -alpha / sp.nu;
    let mut total = 0.0;
    let mut tail = 0.0;
    for j in 0..=levels {
        let t = sp.multiplicities[j] as f64 * (1.0 + sp.eigenvalues[j]).powf(exponent);
        total += t;
        if j > levels / 2 {
            tail += t;
        }
    }
    let ratio = if total == 0.0 { 0.0 } else { tail / total };
    Ok(TailCheck { ratio, convergent: ratio < WEYL_TAIL_THRESHOLD })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifoldDet {
    pub det: DetResult,
    /// Present when the model retains at least ten levels.
    pub tail: Option<TailCheck>,
}

/// `Det(I + λ(I+E)^{-α/ν})` from the eigenvalue/multiplicity sequence of `E`.
///
/// `manifold_dim`, when given, is only used to warn about `α ≤ n`.
pub fn manifold_determinant(
    sp: &SpectralModel,
    alpha: f64,
    lambda: Complex64,
    order: usize,
    tol: f64,
    manifold_dim: Option<usize>,
) -> Result<ManifoldDet> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!("alpha must be positive, got {alpha}")));
    }
    if order < 1 {
        return Err(Error::Parameter("series order must be at least 1".into()));
    }
    if let Some(n) = manifold_dim {
        if alpha <= n as f64 {
            log::warn!("{}: alpha = {alpha} <= n = {n}, (I+E)^(-alpha/nu) is not trace class", sp.label);
        }
    }
    let traces = (1..=order).map(|m| Ok(Complex64::new(sp.trace_power(alpha, m), 0.0)));
    let det = plemelj_series(traces, lambda, order, tol, sp.truncation())?;
    let tail = if sp.truncation() >= 10 { Some(weyl_tail_check(sp, alpha, sp.truncation())?) } else { None };
    Ok(ManifoldDet { det, tail })
}

/// Symbol of `(I+E)^{-α/ν}` as 1×1 blocks, one per eigenvalue and copy.
pub fn spectral_block_symbol(sp: &SpectralModel, alpha: f64) -> Result<BlockSymbol> {
    let mut blocks = Vec::new();
    for (l, &d) in sp.eigenvalues.iter().zip(&sp.multiplicities) {
        let v = Complex64::new((1.0 + l).powf(-alpha / sp.nu), 0.0);
        for _ in 0..d {
            blocks.push(CMatrix::from_diagonal(&[v]));
        }
    }
    BlockSymbol::new(format!("{}_blocks", sp.label), blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::lu_determinant;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn m2(a: [[(f64, f64); 2]; 2]) -> CMatrix {
        CMatrix::from_rows(a.iter().map(|r| r.iter().map(|&(x, y)| c(x, y)).collect()).collect()).unwrap()
    }

    #[test]
    fn traces_of_simple_symbols() {
        let zero = BlockSymbol::new("z", vec![CMatrix::zeros(2, 2), CMatrix::zeros(1, 1)]).unwrap();
        assert_eq!(block_trace(&zero), c(0.0, 0.0));
        let ids = BlockSymbol::new("id", (1..=3).map(CMatrix::identity).collect()).unwrap();
        assert_eq!(ids.truncation(), 2);
        assert_eq!(block_trace(&ids), c(6.0, 0.0));
        assert_eq!(ids.offsets(), vec![0, 1, 3]);

        let diag = BlockSymbol::new(
            "d",
            vec![CMatrix::from_diagonal(&[c(0.5, 0.0), c(-0.2, 0.1)]), CMatrix::from_diagonal(&[c(0.3, 0.0)])],
        )
        .unwrap();
        let want = c(0.25, 0.0) + c(-0.2, 0.1).powu(2) + c(0.09, 0.0);
        assert!((block_power_trace(&diag, 2).unwrap() - want).norm() < 1e-15);

        let nil = BlockSymbol::new("n", vec![m2([[(0.0, 0.0), (1.0, 0.0)], [(0.0, 0.0), (0.0, 0.0)]])]).unwrap();
        for m in 2..5 {
            assert_eq!(block_power_trace(&nil, m).unwrap(), c(0.0, 0.0));
        }
    }

    #[test]
    fn rejects_non_square_blocks() {
        let err = BlockSymbol::new("bad", vec![CMatrix::identity(2), CMatrix::zeros(2, 3)]).unwrap_err();
        assert!(err.to_string().contains("block[1]"));
    }

    #[test]
    fn determinant_examples() {
        let zero = BlockSymbol::new("z", vec![CMatrix::zeros(3, 3)]).unwrap();
        assert_eq!(invariant_determinant(&zero, c(0.7, 0.0), 10, 1e-12).unwrap().value, c(1.0, 0.0));

        let mu = c(0.4, -0.1);
        let one = BlockSymbol::new("one", vec![CMatrix::from_diagonal(&[mu])]).unwrap();
        let lambda = c(1.0, 0.5);
        let r = invariant_determinant(&one, lambda, 80, 1e-15).unwrap();
        assert!((r.value - (1.0 + lambda * mu)).norm() < 1e-10);

        let s = BlockSymbol::new(
            "pair",
            vec![m2([[(0.2, 0.0), (0.1, 0.0)], [(0.0, 0.0), (0.3, 0.0)]]), CMatrix::from_diagonal(&[c(0.05, 0.0)])],
        )
        .unwrap();
        let r = invariant_determinant(&s, c(1.0, 0.0), 40, 1e-300).unwrap();
        let oracle: Complex64 = s
            .blocks()
            .iter()
            .map(|b| lu_determinant(&b.identity_plus_scaled(c(1.0, 0.0)).unwrap()).unwrap())
            .product();
        assert!((oracle - c(1.638, 0.0)).norm() < 1e-12);
        assert!((r.value - oracle).norm() < 1e-9);
        assert_eq!(r.cutoff_used, 1);
    }

    #[test]
    fn powered_symbol_matches_power_trace() {
        let s = BlockSymbol::new(
            "s",
            vec![m2([[(0.2, 0.3), (0.1, -0.4)], [(0.5, 0.0), (-0.3, 0.2)]]), CMatrix::from_diagonal(&[c(0.7, -0.1)])],
        )
        .unwrap();
        for m in 1..6 {
            assert_eq!(block_trace(&s.power(m).unwrap()), block_power_trace(&s, m).unwrap());
        }
    }

    #[test]
    fn spectral_model_validation() {
        assert!(matches!(SpectralModel::new("neg", vec![0.0, -1.0], vec![1, 1], 2.0), Err(Error::Model(_))));
        assert!(matches!(SpectralModel::new("len", vec![0.0], vec![1, 1], 2.0), Err(Error::Model(_))));
        assert!(matches!(SpectralModel::new("d0", vec![0.0], vec![0], 2.0), Err(Error::Model(_))));
        assert!(matches!(SpectralModel::new("nu", vec![0.0], vec![1], 0.0), Err(Error::Model(_))));
    }

    #[test]
    fn single_zero_eigenvalue_is_scalar_one() {
        let sp = SpectralModel::new("pt", vec![0.0], vec![1], 2.0).unwrap();
        let lambda = c(0.3, 0.2);
        let r = manifold_determinant(&sp, 5.0, lambda, 60, 1e-15, None).unwrap();
        assert!((r.det.value - (1.0 + lambda)).norm() < 1e-12);
        assert!(r.tail.is_none());
        assert!(manifold_determinant(&sp, 0.0, lambda, 10, 1e-12, None).is_err());
    }

    #[test]
    fn builtin_spectra() {
        let circle = SpectralModel::circle(3);
        assert_eq!(circle.multiplicities(), &[1, 2, 2, 2]);
        assert!((circle.eigenvalues()[2] - 16.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);

        let sphere = SpectralModel::sphere2(3);
        assert_eq!(sphere.eigenvalues(), &[0.0, 2.0, 6.0, 12.0]);
        assert_eq!(sphere.multiplicities(), &[1, 3, 5, 7]);

        // lattice-point counts checked by direct enumeration
        let torus = SpectralModel::torus2(40);
        let scale = 4.0 * std::f64::consts::PI.powi(2);
        for (l, &d) in torus.eigenvalues().iter().zip(torus.multiplicities()) {
            let n = (l / scale).round() as i64;
            let mut count = 0;
            for a in -20i64..=20 {
                for b in -20i64..=20 {
                    if a * a + b * b == n {
                        count += 1;
                    }
                }
            }
            assert_eq!(count, d, "N = {n}");
        }
        let first: Vec<i64> = torus.eigenvalues().iter().take(6).map(|l| (l / scale).round() as i64).collect();
        assert_eq!(first, vec![0, 1, 2, 4, 5, 8]);
        assert_eq!(&torus.multiplicities()[..6], &[1, 4, 4, 4, 8, 4]);
    }

    #[test]
    fn sphere_trace_matches_direct_summation() {
        let sp = SpectralModel::sphere2(2000);
        let mut direct = 0.0;
        for j in 0..=2000u64 {
            direct += (2 * j + 1) as f64 / (1.0 + (j * (j + 1)) as f64).powf(1.5);
        }
        assert!((sp.trace_power(3.0, 1) - direct).abs() <= 1e-10 * direct);
    }

    #[test]
    fn tail_checks() {
        let circle = SpectralModel::circle(10_000);
        assert!(weyl_tail_check(&circle, 2.0, 10_000).unwrap().convergent);
        let slow = weyl_tail_check(&circle, 1.0, 10_000).unwrap();
        assert!(!slow.convergent);
        assert!(slow.ratio > 0.05);
        let pts = SpectralModel::new("pt", vec![0.0; 11], vec![1; 11], 2.0).unwrap();
        let single = SpectralModel::new("one", [0.0].into_iter().chain([1e300; 10]).collect(), vec![1; 11], 2.0).unwrap();
        assert!(weyl_tail_check(&pts, 1.0, 10).unwrap().ratio > 0.0);
        assert_eq!(weyl_tail_check(&single, 20.0, 10).unwrap().ratio, 0.0);
        assert!(weyl_tail_check(&circle, 2.0, 5).is_err());
    }

    #[test]
    fn unit_multiplicity_model_matches_block_symbol() {
        let sp = SpectralModel::new("u", vec![0.0, 1.5, 3.0, 7.25, 12.0], vec![1; 5], 2.0).unwrap();
        let blocks = spectral_block_symbol(&sp, 3.0).unwrap();
        let lambda = c(0.3, -0.1);
        let a = manifold_determinant(&sp, 3.0, lambda, 30, 1e-14, None).unwrap().det;
        let b = invariant_determinant(&blocks, lambda, 30, 1e-14).unwrap();
        assert!((a.value - b.value).norm() <= 1e-12 * a.value.norm());
    }
}
