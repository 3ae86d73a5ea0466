//! JSON operator specification files.
//!
//! A file holds one object whose `kind` selects the representation:
//!
//! ```json
//! {"kind": "lattice_kernel", "family": "diagonal", "dim": 1, "entries": [[0, 1.0, 0.0]]}
//! ```
//!
//! Complex numbers are `[re, im]` pairs. Lattice points are written inline as
//! the leading integers of an entry row, so a diagonal entry in ℤ² reads
//! `[j1, j2, re, im]`. Unknown fields are rejected. Bundle fiber indices
//! `i`, `r` are 1-based in the file.

use std::collections::BTreeSet;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Point;

/// Optional descriptive fields shared by every kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Declared order ν; only used for warnings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<f64>,
    /// Manifold dimension n; only used for warnings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifold_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorSpec {
    LatticeKernel(LatticeSpec),
    ToroidalSymbol(ToroidalSpec),
    BlockSymbol(BlockSpec),
    SpectralModel(SpectralSpec),
    BundleSymbol(BundleSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalDecay {
    pub coeff: [f64; 2],
    pub exponent: f64,
    /// Restrict to points with every coordinate ≥ 1.
    #[serde(default)]
    pub one_sided: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LatticeSpec {
    Diagonal(DiagonalSpec),
    RankOne(RankOneSpec),
    Banded(BandedSpec),
    Table(TableSpec),
}

/// `K(j, j)` from explicit `[j.., re, im]` rows, or `c·|j|_∞^{-p}` for `j ≠ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagonalSpec {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DiagonalDecay>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

/// `K(j, m) = u(j)·v(m)` with `[j.., re, im]` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankOneSpec {
    pub dim: usize,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

/// `K(j, m) = c_{j-m}·(1+|m|_∞)^{-decay}` with `[offset.., re, im]` rows,
/// cut to `|j|, |m| ≤ support` when given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandedSpec {
    pub dim: usize,
    pub bands: Vec<Vec<f64>>,
    #[serde(default)]
    pub decay: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

/// Explicit `[j.., m.., re, im]` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub dim: usize,
    pub entries: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ToroidalSpec {
    PowerDecay(PowerDecaySpec),
    Sharpness(SharpnessSpec),
    Modulated(ModulatedSpec),
    CustomTable(CustomTableSpec),
}

/// `c·(1+|k|²)^{ν/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerDecaySpec {
    pub dim: usize,
    #[serde(default = "unit")]
    pub coeff: [f64; 2],
    pub order: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

/// `(1+|k|)^{-n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharpnessSpec {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

/// `Σ_θ c_θ e^{2πi x·θ}·(1+|k|²)^{ν/2}` with `[θ.., re, im]` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulatedSpec {
    pub dim: usize,
    pub modes: Vec<Vec<f64>>,
    pub order: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

/// Fourier coefficients `σ̂(l, k)` as `[l.., k.., re, im]` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomTableSpec {
    pub dim: usize,
    pub entries: Vec<Vec<f64>>,
    pub order: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

fn unit() -> [f64; 2] {
    [1.0, 0.0]
}

/// Square blocks as rows of `[re, im]`; `dims`, when present, must match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub blocks: Vec<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinSpectrum {
    Circle,
    Torus2,
    Sphere2,
}

/// Either a builtin spectrum with `levels` retained, or a `[λ_j, d_j]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinSpectrum>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 2]>>,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualEntry {
    pub id: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaEntry {
    pub i: usize,
    pub r: usize,
    pub xi: String,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

/// Bundle symbol; `(i, r, ξ)` records not listed are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSpec {
    pub fiber_dim: usize,
    pub dual: Vec<DualEntry>,
    pub sigma: Vec<SigmaEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

impl OperatorSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            OperatorSpec::LatticeKernel(_) => "lattice_kernel",
            OperatorSpec::ToroidalSymbol(_) => "toroidal_symbol",
            OperatorSpec::BlockSymbol(_) => "block_symbol",
            OperatorSpec::SpectralModel(_) => "spectral_model",
            OperatorSpec::BundleSymbol(_) => "bundle_symbol",
        }
    }

    pub fn meta(&self) -> Option<&Meta> {
        match self {
            OperatorSpec::LatticeKernel(l) => match l {
                LatticeSpec::Diagonal(s) => s.meta.as_ref(),
                LatticeSpec::RankOne(s) => s.meta.as_ref(),
                LatticeSpec::Banded(s) => s.meta.as_ref(),
                LatticeSpec::Table(s) => s.meta.as_ref(),
            },
            OperatorSpec::ToroidalSymbol(t) => match t {
                ToroidalSpec::PowerDecay(s) => s.meta.as_ref(),
                ToroidalSpec::Sharpness(s) => s.meta.as_ref(),
                ToroidalSpec::Modulated(s) => s.meta.as_ref(),
                ToroidalSpec::CustomTable(s) => s.meta.as_ref(),
            },
            OperatorSpec::BlockSymbol(b) => b.meta.as_ref(),
            OperatorSpec::SpectralModel(s) => s.meta.as_ref(),
            OperatorSpec::BundleSymbol(b) => b.meta.as_ref(),
        }
    }

    /// Label from `meta.label`, else the kind.
    pub fn label(&self) -> String {
        self.meta().and_then(|m| m.label.clone()).unwrap_or_else(|| self.kind().to_string())
    }

    /// Semantic checks beyond what the JSON schema enforces.
    pub fn validate(&self) -> Result<()> {
        if let Some(meta) = self.meta() {
            if let Some(order) = meta.order {
                finite("meta.order", order)?;
            }
        }
        match self {
            OperatorSpec::LatticeKernel(l) => validate_lattice(l),
            OperatorSpec::ToroidalSymbol(t) => validate_toroidal(t),
            OperatorSpec::BlockSymbol(b) => validate_blocks(b),
            OperatorSpec::SpectralModel(s) => validate_spectral(s),
            OperatorSpec::BundleSymbol(b) => validate_bundle(b),
        }
    }
}

fn finite(field: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, "must be finite"))
    }
}

fn positive_dim(dim: usize) -> Result<()> {
    if (1..=4).contains(&dim) {
        Ok(())
    } else {
        Err(Error::validation("dim", format!("must be between 1 and 4, got {dim}")))
    }
}

/// Splits a row `[p_1..p_{points·dim}, re, im]` into integer points and a value.
pub(crate) fn split_row(field: &str, row: &[f64], dim: usize, points: usize) -> Result<(Vec<Point>, Complex64)> {
    let want = dim * points + 2;
    if row.len() != want {
        return Err(Error::validation(field, format!("expected {want} numbers, got {}", row.len())));
    }
    let mut pts = Vec::with_capacity(points);
    for p in 0..points {
        let mut pt = Vec::with_capacity(dim);
        for &x in &row[p * dim..(p + 1) * dim] {
            if !(x.is_finite() && x.fract() == 0.0 && x.abs() <= 1e9) {
                return Err(Error::validation(field, format!("lattice coordinate {x} is not a moderate integer")));
            }
            pt.push(x as i64);
        }
        pts.push(pt);
    }
    let (re, im) = (row[want - 2], row[want - 1]);
    if !(re.is_finite() && im.is_finite()) {
        return Err(Error::validation(field, "value must be finite"));
    }
    Ok((pts, Complex64::new(re, im)))
}

fn check_rows(name: &str, rows: &[Vec<f64>], dim: usize, points: usize) -> Result<()> {
    for (idx, row) in rows.iter().enumerate() {
        split_row(&format!("{name}[{idx}]"), row, dim, points)?;
    }
    Ok(())
}

fn validate_lattice(l: &LatticeSpec) -> Result<()> {
    match l {
        LatticeSpec::Diagonal(DiagonalSpec { dim, entries, decay, .. }) => {
            positive_dim(*dim)?;
            match (entries, decay) {
                (Some(rows), None) => check_rows("entries", rows, *dim, 1),
                (None, Some(d)) => {
                    finite("decay.coeff", d.coeff[0])?;
                    finite("decay.coeff", d.coeff[1])?;
                    finite("decay.exponent", d.exponent)
                }
                _ => Err(Error::validation("entries", "give exactly one of `entries` or `decay`")),
            }
        }
        LatticeSpec::RankOne(RankOneSpec { dim, u, v, .. }) => {
            positive_dim(*dim)?;
            check_rows("u", u, *dim, 1)?;
            check_rows("v", v, *dim, 1)
        }
        LatticeSpec::Banded(BandedSpec { dim, bands, decay, support, .. }) => {
            positive_dim(*dim)?;
            check_rows("bands", bands, *dim, 1)?;
            if !(decay.is_finite() && *decay >= 0.0) {
                return Err(Error::validation("decay", "must be finite and nonnegative"));
            }
            if support.is_some_and(|s| s < 0) {
                return Err(Error::validation("support", "must be nonnegative"));
            }
            Ok(())
        }
        LatticeSpec::Table(TableSpec { dim, entries, .. }) => {
            positive_dim(*dim)?;
            check_rows("entries", entries, *dim, 2)
        }
    }
}

fn validate_grid(x_grid: &Option<usize>) -> Result<()> {
    match x_grid {
        Some(0) => Err(Error::validation("x_grid", "must be positive")),
        Some(g) if *g > 1 << 16 => Err(Error::validation("x_grid", "must be at most 65536")),
        _ => Ok(()),
    }
}

fn validate_toroidal(t: &ToroidalSpec) -> Result<()> {
    match t {
        ToroidalSpec::PowerDecay(PowerDecaySpec { dim, coeff, order, x_grid, .. }) => {
            positive_dim(*dim)?;
            finite("coeff", coeff[0])?;
            finite("coeff", coeff[1])?;
            finite("order", *order)?;
            validate_grid(x_grid)
        }
        ToroidalSpec::Sharpness(SharpnessSpec { dim, x_grid, .. }) => {
            positive_dim(*dim)?;
            validate_grid(x_grid)
        }
        ToroidalSpec::Modulated(ModulatedSpec { dim, modes, order, x_grid, .. }) => {
            positive_dim(*dim)?;
            check_rows("modes", modes, *dim, 1)?;
            finite("order", *order)?;
            validate_grid(x_grid)
        }
        ToroidalSpec::CustomTable(CustomTableSpec { dim, entries, order, x_grid, .. }) => {
            positive_dim(*dim)?;
            check_rows("entries", entries, *dim, 2)?;
            finite("order", *order)?;
            validate_grid(x_grid)
        }
    }
}

pub(crate) fn matrix_from_rows(field: &str, rows: &[Vec<[f64; 2]>]) -> Result<crate::linalg::CMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::validation(field, "matrix is empty"));
    }
    let mut data = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::validation(field, format!("row {i} has {} entries, matrix must be {n}x{n}", row.len())));
        }
        for z in row {
            if !(z[0].is_finite() && z[1].is_finite()) {
                return Err(Error::validation(field, format!("row {i} has a non-finite entry")));
            }
            data.push(Complex64::new(z[0], z[1]));
        }
    }
    crate::linalg::CMatrix::new(n, n, data)
}

fn validate_blocks(b: &BlockSpec) -> Result<()> {
    if b.blocks.is_empty() {
        return Err(Error::validation("blocks", "at least one block is required"));
    }
    if let Some(dims) = &b.dims {
        if dims.len() != b.blocks.len() {
            return Err(Error::validation("dims", format!("{} dims for {} blocks", dims.len(), b.blocks.len())));
        }
    }
    for (l, rows) in b.blocks.iter().enumerate() {
        let field = format!("block[{l}]");
        matrix_from_rows(&field, rows)?;
        if let Some(dims) = &b.dims {
            if dims[l] != rows.len() {
                return Err(Error::validation(field, format!("side {} does not match dims[{l}] = {}", rows.len(), dims[l])));
            }
        }
    }
    Ok(())
}

/// Largest spectral truncation accepted from a file.
pub const MAX_SPECTRAL_LEVELS: usize = 1_000_000;

fn validate_spectral(s: &SpectralSpec) -> Result<()> {
    if !(s.alpha.is_finite() && s.alpha > 0.0) {
        return Err(Error::validation("alpha", "must be positive"));
    }
    if let Some(nu) = s.nu {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::validation("nu", "must be positive"));
        }
    }
    match (&s.builtin, &s.table) {
        (Some(_), None) if s.nu.is_some_and(|nu| nu != 2.0) => {
            Err(Error::validation("nu", "builtin spectra are Laplacians of order 2"))
        }
        (Some(_), None) => match s.levels {
            Some(l) if l <= MAX_SPECTRAL_LEVELS => Ok(()),
            Some(_) => Err(Error::validation("levels", format!("must be at most {MAX_SPECTRAL_LEVELS}"))),
            None => Err(Error::validation("levels", "required with `builtin`")),
        },
        (None, Some(table)) => {
            if s.levels.is_some() {
                return Err(Error::validation("levels", "only allowed with `builtin`"));
            }
            if s.nu.is_none() {
                return Err(Error::validation("nu", "required with `table`"));
            }
            if table.is_empty() {
                return Err(Error::validation("table", "must not be empty"));
            }
            for (j, [lam, d]) in table.iter().enumerate() {
                if !(lam.is_finite() && *lam >= 0.0) {
                    return Err(Error::validation(format!("table[{j}]"), "eigenvalue must be finite and nonnegative"));
                }
                if !(d.fract() == 0.0 && *d >= 1.0 && *d <= 1e12) {
                    return Err(Error::validation(format!("table[{j}]"), "multiplicity must be a positive integer"));
                }
            }
            Ok(())
        }
        _ => Err(Error::validation("builtin", "give exactly one of `builtin` or `table`")),
    }
}

fn validate_bundle(b: &BundleSpec) -> Result<()> {
    if !(1..=64).contains(&b.fiber_dim) {
        return Err(Error::validation("fiber_dim", "must be between 1 and 64"));
    }
    if b.dual.is_empty() {
        return Err(Error::validation("dual", "at least one block is required"));
    }
    let mut ids = BTreeSet::new();
    for (k, e) in b.dual.iter().enumerate() {
        if !ids.insert(e.id.as_str()) {
            return Err(Error::validation(format!("dual[{k}]"), format!("duplicate id `{}`", e.id)));
        }
        if !(1..=64).contains(&e.dim) {
            return Err(Error::validation(format!("dual[{k}]"), "dim must be between 1 and 64"));
        }
    }
    let mut seen = BTreeSet::new();
    for (k, s) in b.sigma.iter().enumerate() {
        let field = format!("sigma[{k}]");
        if !(1..=b.fiber_dim).contains(&s.i) || !(1..=b.fiber_dim).contains(&s.r) {
            return Err(Error::validation(field, format!("fiber indices must lie in 1..={}", b.fiber_dim)));
        }
        let Some(entry) = b.dual.iter().find(|e| e.id == s.xi) else {
            return Err(Error::validation(field, format!("unknown dual block `{}`", s.xi)));
        };
        if !seen.insert((s.i, s.r, s.xi.as_str())) {
            return Err(Error::validation(field, "duplicate (i, r, xi) record"));
        }
        let m = matrix_from_rows(&field, &s.matrix)?;
        if m.rows() != entry.dim {
            return Err(Error::validation(field, format!("matrix side {} does not match dim {} of `{}`", m.rows(), entry.dim, s.xi)));
        }
    }
    Ok(())
}

/// Parses and validates a specification from JSON text.
pub fn parse_spec_str(text: &str) -> Result<OperatorSpec> {
    let spec: OperatorSpec = serde_json::from_str(text).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => {
                let full = e.to_string();
                let msg = full.rsplit_once(" at line ").map_or(full.as_str(), |(m, _)| m).to_string();
                let field = if msg.starts_with("unknown variant") {
                    if msg.contains("`lattice_kernel`") { "kind" } else { "family" }.to_string()
                } else {
                    msg.split('`').nth(1).unwrap_or("<root>").to_string()
                };
                Error::Validation { field, message: msg }
            }
            _ => Error::Parse { line: e.line(), column: e.column(), message: e.to_string() },
        }
    })?;
    spec.validate()?;
    Ok(spec)
}

/// Parses and validates a specification from bytes, which must be UTF-8.
pub fn parse_spec_bytes(bytes: &[u8]) -> Result<OperatorSpec> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse { line: 0, column: 0, message: e.to_string() })?;
    parse_spec_str(text)
}

pub fn parse_spec(path: impl AsRef<Path>) -> Result<OperatorSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_spec_str(&text)
}

/// Serializes a specification back to JSON.
pub fn emit_spec(spec: &OperatorSpec) -> String {
    serde_json::to_string_pretty(spec).expect("specs serialize")
}
