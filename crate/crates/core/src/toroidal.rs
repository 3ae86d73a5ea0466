//! Toroidal quantization of symbols `σ(x, k)` on 𝕋ⁿ×ℤⁿ.
//!
//! The torus is `[0, 1)ⁿ` with Fourier transform
//! `φ̂(k) = ∫ e^{-2πi x·k} φ(x) dx`, and an operator with symbol `σ` acts as
//! `Tf(x) = Σ_k e^{2πi x·k} σ(x, k) f̂(k)`. In Fourier coordinates it is the
//! matrix `A_{jk} = σ̂(j - k, k)`, where `σ̂` transforms in `x` only.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{box_len, box_points, lattice_determinant, lex_index, linf, LatticeKernel, Point};
use crate::plemelj::DetResult;

/// Largest number of symbol evaluations one matrix or coefficient may request.
pub const MAX_SYMBOL_SAMPLES: u128 = 1 << 26;

type SymbolFn = dyn Fn(&[f64], &[i64]) -> Complex64 + Send + Sync;

/// A symbol `σ(x, k)` with declared order `ν`, sampled on an `N_xⁿ` grid.
#[derive(Clone)]
pub struct ToroidalSymbol {
    dim: usize,
    order: f64,
    eval: Arc<SymbolFn>,
    x_grid: usize,
    label: String,
    x_independent: bool,
}

impl fmt::Debug for ToroidalSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToroidalSymbol")
            .field("dim", &self.dim)
            .field("order", &self.order)
            .field("x_grid", &self.x_grid)
            .field("label", &self.label)
            .field("x_independent", &self.x_independent)
            .finish()
    }
}

/// Grid size used when none is given: `4·(2R+1)` rounded up to a power of two.
pub fn default_x_grid(cutoff: i64) -> usize {
    (4 * (2 * cutoff.max(0) as usize + 1)).next_power_of_two()
}

fn euclid(k: &[i64]) -> f64 {
    k.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

fn phase(x: &[f64], theta: &[i64]) -> Complex64 {
    let dot: f64 = x.iter().zip(theta).map(|(a, &b)| a * b as f64).sum();
    Complex64::from_polar(1.0, TAU * dot)
}

impl ToroidalSymbol {
    pub fn from_fn(
        dim: usize,
        order: f64,
        x_grid: usize,
        label: impl Into<String>,
        f: impl Fn(&[f64], &[i64]) -> Complex64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("torus dimension must be positive".into()));
        }
        if x_grid == 0 {
            return Err(Error::Parameter("x_grid must be positive".into()));
        }
        Ok(Self { dim, order, eval: Arc::new(f), x_grid, label: label.into(), x_independent: false })
    }

    /// Marks the symbol as constant in `x`; checked when the matrix is built.
    pub fn declare_x_independent(mut self) -> Self {
        self.x_independent = true;
        self
    }

    pub fn with_x_grid(mut self, x_grid: usize) -> Self {
        self.x_grid = x_grid.max(1);
        self
    }

    /// `c·(1 + |k|²)^{ν/2}`.
    pub fn power_decay(dim: usize, coeff: Complex64, order: f64, x_grid: usize) -> Result<Self> {
        Ok(Self::from_fn(dim, order, x_grid, "power_decay", move |_, k| {
            coeff * (1.0 + euclid(k).powi(2)).powf(order / 2.0)
        })?
        .declare_x_independent())
    }

    /// `(1 + |k|)^{-n}`, of every order `≥ -n`.
    pub fn sharpness(dim: usize, x_grid: usize) -> Result<Self> {
        let n = dim as i32;
        Ok(Self::from_fn(dim, -(dim as f64), x_grid, "sharpness", move |_, k| {
            Complex64::new((1.0 + euclid(k)).powi(-n), 0.0)
        })?
        .declare_x_independent())
    }

    /// `Σ_θ c_θ e^{2πi x·θ} · (1 + |k|²)^{ν/2}`.
    pub fn modulated(dim: usize, modes: Vec<(Point, Complex64)>, order: f64, x_grid: usize) -> Result<Self> {
        if modes.iter().any(|(t, _)| t.len() != dim) {
            return Err(Error::Shape(format!("modulation modes must lie in Z^{dim}")));
        }
        Self::from_fn(dim, order, x_grid, "modulated", move |x, k| {
            let poly: Complex64 = modes.iter().map(|(theta, c)| c * phase(x, theta)).sum();
            poly * (1.0 + euclid(k).powi(2)).powf(order / 2.0)
        })
    }

    /// Symbol given by its Fourier coefficients `σ̂(l, k)`; missing entries are zero.
    pub fn custom_table(dim: usize, entries: Vec<(Point, Point, Complex64)>, order: f64, x_grid: usize) -> Result<Self> {
        let mut by_k: BTreeMap<Point, Vec<(Point, Complex64)>> = BTreeMap::new();
        for (l, k, c) in entries {
            if l.len() != dim || k.len() != dim {
                return Err(Error::Shape(format!("table entry ({l:?}, {k:?}) is not in Z^{dim} x Z^{dim}")));
            }
            by_k.entry(k).or_default().push((l, c));
        }
        Self::from_fn(dim, order, x_grid, "custom_table", move |x, k| {
            by_k.get(k).map_or(Complex64::new(0.0, 0.0), |modes| modes.iter().map(|(l, c)| c * phase(x, l)).sum())
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn x_grid(&self) -> usize {
        self.x_grid
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_x_independent(&self) -> bool {
        self.x_independent
    }

    pub fn eval(&self, x: &[f64], k: &[i64]) -> Complex64 {
        (self.eval)(x, k)
    }

    fn sample(&self, x: &[f64], k: &[i64]) -> Result<Complex64> {
        let v = self.eval(x, k);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation { index: format!("sigma({x:?}, {k:?})") })
        }
    }

    fn check_alias(&self, l_max: i64) -> Result<()> {
        if 2 * l_max.unsigned_abs() as usize >= self.x_grid {
            Err(Error::Aliasing { index: l_max, grid: self.x_grid })
        } else {
            Ok(())
        }
    }

    /// Refuses work needing more than [`MAX_SYMBOL_SAMPLES`] evaluations for `columns` values of `k`.
    fn check_samples(&self, columns: usize) -> Result<()> {
        let count = (self.x_grid as u128).saturating_pow(self.dim as u32).saturating_mul(columns as u128);
        if count > MAX_SYMBOL_SAMPLES {
            return Err(Error::Feasibility {
                what: format!("{} symbol samples on a {}^{} grid", self.label, self.x_grid, self.dim),
                count,
                limit: MAX_SYMBOL_SAMPLES,
            });
        }
        Ok(())
    }

    /// All grid points `g / N_x` in lexicographic order.
    fn grid_points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let n = self.x_grid as i64;
        let half = n / 2;
        // box_points enumerates -half..=half; shift into 0..n and skip the overflow row
        box_points(self.dim, half).filter(move |p| p.iter().all(|&c| c + half < n)).map(move |p| {
            p.iter().map(|&c| (c + half) as f64 / n as f64).collect()
        })
    }

    /// Samples of `σ(·, k)` on the grid, with the DFT applied in place.
    fn fourier_slice(&self, k: &[i64], planner: &mut FftPlanner<f64>) -> Result<Vec<Complex64>> {
        let n = self.x_grid;
        let mut data = Vec::with_capacity(n.pow(self.dim as u32));
        for x in self.grid_points() {
            data.push(self.sample(&x, k)?);
        }
        let fft = planner.plan_fft_forward(n);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for start in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    for (t, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + inner + t * stride];
                    }
                    fft.process(&mut line);
                    for (t, v) in line.iter().enumerate() {
                        data[start + inner + t * stride] = *v;
                    }
                }
            }
        }
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
        Ok(data)
    }

    fn slice_index(&self, l: &[i64]) -> usize {
        let n = self.x_grid as i64;
        l.iter().fold(0usize, |acc, &c| acc * self.x_grid + c.rem_euclid(n) as usize)
    }
}

/// `σ̂(l, k) ≈ N_x⁻ⁿ Σ_g σ(g/N_x, k) e^{-2πi l·g/N_x}` by direct quadrature.
///
/// Rejects `|l|_∞ ≥ N_x/2`, where the coefficient would alias.
pub fn symbol_fourier_coeff(s: &ToroidalSymbol, l: &[i64], k: &[i64]) -> Result<Complex64> {
    if l.len() != s.dim || k.len() != s.dim {
        return Err(Error::Shape(format!("indices must lie in Z^{}", s.dim)));
    }
    s.check_alias(linf(l))?;
    s.check_samples(1)?;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut count = 0usize;
    for x in s.grid_points() {
        sum += s.sample(&x, k)? * phase(&x, l).conj();
        count += 1;
    }
    Ok(sum / count as f64)
}

/// The matrix `A_{jk} = σ̂(j - k, k)` restricted to the box `|j|, |k| ≤ R`.
pub fn toroidal_matrix(s: &ToroidalSymbol, cutoff: i64) -> Result<LatticeKernel> {
    if cutoff < 1 {
        return Err(Error::Parameter(format!("cutoff must be at least 1, got {cutoff}")));
    }
    s.check_alias(2 * cutoff)?;
    let side = box_len(s.dim, cutoff)?;
    s.check_samples(side)?;
    let points: Vec<Point> = box_points(s.dim, cutoff).collect();
    let mut planner = FftPlanner::new();
    let mut table = vec![Complex64::new(0.0, 0.0); side * side];
    let zero = Complex64::new(0.0, 0.0);
    for (col, k) in points.iter().enumerate() {
        let slice = s.fourier_slice(k, &mut planner)?;
        let scale = slice[0].norm().max(1.0);
        for (row, j) in points.iter().enumerate() {
            let l: Point = j.iter().zip(k).map(|(a, b)| a - b).collect();
            let v = slice[s.slice_index(&l)];
            if s.x_independent && row != col {
                if v.norm() > 1e-12 * scale {
                    return Err(Error::Model(format!(
                        "{} is declared x-independent but sigma_hat({l:?}, {k:?}) = {v}",
                        s.label
                    )));
                }
                continue;
            }
            table[row * side + col] = v;
        }
    }
    let nonzero: Vec<(Point, Point)> = (0..side * side)
        .filter(|&idx| table[idx] != zero)
        .map(|idx| (points[idx / side].clone(), points[idx % side].clone()))
        .collect();
    let table = Arc::new(table);
    Ok(LatticeKernel::from_fn(s.dim, s.label.clone(), move |j, k| {
        if linf(j) <= cutoff && linf(k) <= cutoff {
            table[lex_index(j, cutoff) * side + lex_index(k, cutoff)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
    .with_support(cutoff)
    .with_pattern(move |r| {
        nonzero.iter().filter(|(j, k)| linf(j) <= r && linf(k) <= r).cloned().collect()
    }))
}

/// `Tf(x) = Σ_k e^{2πi x·k} σ(x, k) f̂(k)` for finitely many Fourier coefficients.
pub fn apply_symbol(s: &ToroidalSymbol, f_hat: &[(Point, Complex64)], x: &[f64]) -> Complex64 {
    f_hat.iter().map(|(k, c)| phase(x, k) * s.eval(x, k) * c).sum()
}

/// Poincaré-algebra norm `Σ_{|j|,|k|≤R} |K(j, k)|`.
pub fn poincare_norm(k: &LatticeKernel, cutoff: i64) -> Result<f64> {
    if cutoff < 1 {
        return Err(Error::Parameter(format!("cutoff must be at least 1, got {cutoff}")));
    }
    Ok(k.nonzeros(cutoff)?.iter().map(|e| e.2.norm()).sum())
}

/// Schur-test bound `(sup_k Σ_j |a_jk|)^{1/p} · (sup_j Σ_k |a_jk|)^{1-1/p}` over the box.
pub fn schur_bound(k: &LatticeKernel, p: f64, cutoff: i64) -> Result<f64> {
    if cutoff < 1 {
        return Err(Error::Parameter(format!("cutoff must be at least 1, got {cutoff}")));
    }
    if p.is_nan() || p < 1.0 {
        return Err(Error::Parameter(format!("p must lie in [1, inf], got {p}")));
    }
    let side = box_len(k.dim(), cutoff)?;
    let mut col_sums = vec![0.0f64; side];
    let mut row_sums = vec![0.0f64; side];
    for (row, col, v) in k.nonzeros(cutoff)? {
        col_sums[col] += v.norm();
        row_sums[row] += v.norm();
    }
    let max_col = col_sums.iter().copied().fold(0.0, f64::max);
    let max_row = row_sums.iter().copied().fold(0.0, f64::max);
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    Ok(max_col.powf(inv_p) * max_row.powf(1.0 - inv_p))
}

/// `Det(I + λT)` for the toroidal quantization of `s`, truncated to the box of radius `R`.
pub fn toroidal_determinant(
    s: &ToroidalSymbol,
    lambda: Complex64,
    order: usize,
    cutoff: i64,
    tol: f64,
) -> Result<DetResult> {
    if s.order >= -(s.dim as f64) {
        log::warn!(
            "{}: declared order {} is not below -n = -{}; the operator need not be in the Poincare algebra",
            s.label,
            s.order,
            s.dim
        );
    }
    lattice_determinant(&toroidal_matrix(s, cutoff)?, lambda, order, cutoff, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "converging")]
    Converging,
    #[serde(rename = "diverging/inconclusive")]
    DivergingOrInconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Converging => "converging",
            Verdict::DivergingOrInconclusive => "diverging/inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormProfile {
    /// `(R, ‖A_R‖)` pairs in ascending `R`.
    pub points: Vec<(i64, f64)>,
    pub verdict: Verdict,
}

impl NormProfile {
    pub fn increments(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| w[1].1 - w[0].1).collect()
    }
}

/// Successive increments must shrink by this factor for a converging verdict.
const GEOMETRIC_DECAY: f64 = 0.9;

/// Classifies a nondecreasing sequence of partial norms.
pub fn classify_profile(points: &[(i64, f64)]) -> Verdict {
    let incs: Vec<f64> = points.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let scale = points.last().map_or(1.0, |p| p.1.abs().max(1.0));
    let negligible = |d: f64| d.abs() <= 1e-12 * scale;
    if incs.is_empty() {
        return Verdict::DivergingOrInconclusive;
    }
    if incs.iter().all(|&d| negligible(d)) {
        return Verdict::Converging;
    }
    if incs.len() < 2 {
        return Verdict::DivergingOrInconclusive;
    }
    let decaying = incs.windows(2).all(|w| negligible(w[1]) || w[1] <= GEOMETRIC_DECAY * w[0]);
    if decaying {
        Verdict::Converging
    } else {
        Verdict::DivergingOrInconclusive
    }
}

/// Poincaré norms of the truncations at each cutoff, with a growth verdict.
pub fn norm_growth_profile(s: &ToroidalSymbol, cutoffs: &[i64]) -> Result<NormProfile> {
    if cutoffs.is_empty() {
        return Err(Error::Parameter("norm profile needs at least one cutoff".into()));
    }
    if cutoffs.windows(2).any(|w| w[1] <= w[0]) || cutoffs[0] < 1 {
        return Err(Error::Parameter("cutoffs must be positive and strictly ascending".into()));
    }
    let largest = *cutoffs.last().expect("nonempty");
    let kernel = toroidal_matrix(s, largest)?;
    let points = cutoffs
        .iter()
        .map(|&r| poincare_norm(&kernel, r).map(|n| (r, n)))
        .collect::<Result<Vec<_>>>()?;
    let verdict = classify_profile(&points);
    Ok(NormProfile { points, verdict })
}
