//! Operators built from [`OperatorSpec`] files, with one entry point per
//! computation so callers need not match on the representation.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::bundle::{bundle_compose, bundle_determinant, bundle_trace, flatten_symbol, BundleSymbol, DualObject};
use crate::error::{Error, Result};
use crate::invariant::{
    block_power_trace, block_trace, invariant_determinant, manifold_determinant, BlockSymbol, SpectralModel, TailCheck,
};
use crate::lattice::{lattice_determinant, lattice_trace, linf, LatticeKernel, Point, TracePowers};
use crate::linalg::CMatrix;
use crate::oracle::{assemble_truncation, direct_determinant};
use crate::plemelj::{DetResult, TraceSequence};
use crate::spec::{
    matrix_from_rows, split_row, BuiltinSpectrum, LatticeSpec, OperatorSpec, SpectralSpec, ToroidalSpec,
};
use crate::toroidal::{
    classify_profile, default_x_grid, norm_growth_profile, poincare_norm, toroidal_determinant, toroidal_matrix,
    NormProfile, ToroidalSymbol,
};

#[derive(Debug, Clone)]
pub enum Operator {
    Lattice(LatticeKernel),
    Toroidal(ToroidalSymbol),
    Blocks(BlockSymbol),
    Spectral { model: SpectralModel, alpha: f64, manifold_dim: Option<usize> },
    Bundle(BundleSymbol),
}

/// Series determinant plus the spectral tail diagnostic when one applies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesDet {
    pub det: DetResult,
    pub tail: Option<TailCheck>,
}

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn point_rows(name: &str, rows: &[Vec<f64>], dim: usize) -> Result<Vec<(Point, Complex64)>> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| split_row(&format!("{name}[{i}]"), r, dim, 1).map(|(mut p, v)| (p.remove(0), v)))
        .collect()
}

fn pair_rows(name: &str, rows: &[Vec<f64>], dim: usize) -> Result<Vec<(Point, Point, Complex64)>> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            split_row(&format!("{name}[{i}]"), r, dim, 2).map(|(mut p, v)| {
                let m = p.pop().expect("two points");
                (p.pop().expect("two points"), m, v)
            })
        })
        .collect()
}

impl Operator {
    /// Builds the operator described by `spec`. `cutoff` picks the default
    /// x-grid of toroidal symbols and is ignored otherwise.
    pub fn build(spec: &OperatorSpec, cutoff: i64) -> Result<Self> {
        spec.validate()?;
        let label = spec.label();
        Ok(match spec {
            OperatorSpec::LatticeKernel(l) => Operator::Lattice(build_lattice(l, label)?),
            OperatorSpec::ToroidalSymbol(t) => Operator::Toroidal(build_toroidal(t, cutoff)?),
            OperatorSpec::BlockSymbol(b) => {
                let blocks = b
                    .blocks
                    .iter()
                    .enumerate()
                    .map(|(l, rows)| matrix_from_rows(&format!("block[{l}]"), rows))
                    .collect::<Result<Vec<_>>>()?;
                Operator::Blocks(BlockSymbol::new(label, blocks)?)
            }
            OperatorSpec::SpectralModel(s) => build_spectral(s, spec.meta().and_then(|m| m.manifold_dim), label)?,
            OperatorSpec::BundleSymbol(b) => {
                let dual = DualObject::new(
                    format!("{label}_dual"),
                    b.dual.iter().map(|e| (e.id.clone(), e.dim)).collect(),
                )?;
                let mut given: BTreeMap<(usize, usize, usize), CMatrix> = BTreeMap::new();
                for (k, s) in b.sigma.iter().enumerate() {
                    let xi = dual.index_of(&s.xi)?;
                    given.insert((s.i - 1, s.r - 1, xi), matrix_from_rows(&format!("sigma[{k}]"), &s.matrix)?);
                }
                let dims: Vec<usize> = b.dual.iter().map(|e| e.dim).collect();
                Operator::Bundle(BundleSymbol::new(label, b.fiber_dim, dual, |i, r, xi| {
                    given.remove(&(i, r, xi)).unwrap_or_else(|| CMatrix::zeros(dims[xi], dims[xi]))
                })?)
            }
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Operator::Lattice(_) => "lattice_kernel",
            Operator::Toroidal(_) => "toroidal_symbol",
            Operator::Blocks(_) => "block_symbol",
            Operator::Spectral { .. } => "spectral_model",
            Operator::Bundle(_) => "bundle_symbol",
        }
    }

    /// `Det(I + λT)` by the trace series. `cutoff` is the lattice box radius
    /// and is ignored by block, spectral and bundle operators.
    pub fn series_determinant(&self, lambda: Complex64, order: usize, cutoff: i64, tol: f64) -> Result<SeriesDet> {
        let det = match self {
            Operator::Lattice(k) => lattice_determinant(k, lambda, order, cutoff, tol)?,
            Operator::Toroidal(s) => toroidal_determinant(s, lambda, order, cutoff, tol)?,
            Operator::Blocks(b) => invariant_determinant(b, lambda, order, tol)?,
            Operator::Spectral { model, alpha, manifold_dim } => {
                let md = manifold_determinant(model, *alpha, lambda, order, tol, *manifold_dim)?;
                return Ok(SeriesDet { det: md.det, tail: md.tail });
            }
            Operator::Bundle(a) => bundle_determinant(a, lambda, order, tol)?,
        };
        Ok(SeriesDet { det, tail: None })
    }

    /// `Det(I + λT)` of the same truncation without the series.
    pub fn oracle_determinant(&self, lambda: Complex64, cutoff: i64) -> Result<Complex64> {
        match self {
            Operator::Lattice(k) => direct_determinant(&assemble_truncation(k, cutoff)?, lambda),
            Operator::Toroidal(s) => direct_determinant(&assemble_truncation(&toroidal_matrix(s, cutoff)?, cutoff)?, lambda),
            Operator::Blocks(b) => b.blocks().iter().try_fold(Complex64::new(1.0, 0.0), |acc, m| {
                direct_determinant(m, lambda).map(|d| acc * d)
            }),
            Operator::Spectral { model, alpha, .. } => {
                // exp of a sum of logs equals the product exactly, without overflow of d_j-th powers
                let mut log = c0();
                for (&l, &d) in model.eigenvalues().iter().zip(model.multiplicities()) {
                    let mu = (1.0 + l).powf(-alpha / model.nu());
                    log += d as f64 * (Complex64::new(1.0, 0.0) + lambda * mu).ln();
                }
                Ok(log.exp())
            }
            Operator::Bundle(a) => {
                let mut det = Complex64::new(1.0, 0.0);
                for (id, d) in a.dual().blocks() {
                    det *= direct_determinant(&flatten_symbol(a, id)?, lambda)?.powu(*d as u32);
                }
                Ok(det)
            }
        }
    }

    /// `Tr(T)` from the representation's own trace formula.
    pub fn series_trace(&self, cutoff: i64) -> Result<Complex64> {
        match self {
            Operator::Lattice(k) => lattice_trace(k, cutoff),
            Operator::Toroidal(s) => lattice_trace(&toroidal_matrix(s, cutoff)?, cutoff),
            Operator::Blocks(b) => Ok(block_trace(b)),
            Operator::Spectral { model, alpha, .. } => Ok(Complex64::new(model.trace_power(*alpha, 1), 0.0)),
            Operator::Bundle(a) => Ok(bundle_trace(a)),
        }
    }

    /// `Tr(T)` from an explicitly assembled matrix.
    pub fn oracle_trace(&self, cutoff: i64) -> Result<Complex64> {
        match self {
            Operator::Lattice(k) => assemble_truncation(k, cutoff)?.trace(),
            Operator::Toroidal(s) => assemble_truncation(&toroidal_matrix(s, cutoff)?, cutoff)?.trace(),
            Operator::Blocks(b) => CMatrix::block_diagonal(b.blocks())?.trace(),
            Operator::Spectral { model, alpha, .. } => {
                let exponent = -alpha / model.nu();
                let sum = model
                    .eigenvalues()
                    .iter()
                    .zip(model.multiplicities())
                    .map(|(&l, &d)| d as f64 * (1.0 + l).powf(exponent))
                    .sum::<f64>();
                Ok(Complex64::new(sum, 0.0))
            }
            Operator::Bundle(a) => {
                let mut sum = c0();
                for (id, d) in a.dual().blocks() {
                    sum += *d as f64 * flatten_symbol(a, id)?.trace()?;
                }
                Ok(sum)
            }
        }
    }

    /// `Tr(T¹), …, Tr(Tᴹ)`.
    pub fn trace_powers(&self, order: usize, cutoff: i64) -> Result<TraceSequence> {
        let traces = match self {
            Operator::Lattice(k) => TracePowers::new(k, cutoff)?.take(order).collect::<Result<Vec<_>>>()?,
            Operator::Toroidal(s) => {
                TracePowers::new(&toroidal_matrix(s, cutoff)?, cutoff)?.take(order).collect::<Result<Vec<_>>>()?
            }
            Operator::Blocks(b) => (1..=order).map(|m| block_power_trace(b, m)).collect::<Result<Vec<_>>>()?,
            Operator::Spectral { model, alpha, .. } => {
                (1..=order).map(|m| Complex64::new(model.trace_power(*alpha, m), 0.0)).collect()
            }
            Operator::Bundle(a) => {
                let mut out = Vec::with_capacity(order);
                let mut p = a.clone();
                for m in 1..=order {
                    out.push(bundle_trace(&p));
                    if m < order {
                        p = bundle_compose(a, &p)?;
                    }
                }
                out
            }
        };
        Ok(TraceSequence { traces, norm_hint: None, label: self.label().to_string() })
    }

    /// Poincaré norms of the truncations at ascending cutoffs.
    pub fn norm_profile(&self, cutoffs: &[i64]) -> Result<NormProfile> {
        match self {
            Operator::Toroidal(s) => norm_growth_profile(s, cutoffs),
            Operator::Lattice(k) => {
                if cutoffs.is_empty() || cutoffs.windows(2).any(|w| w[1] <= w[0]) || cutoffs[0] < 0 {
                    return Err(Error::Parameter("cutoffs must be nonnegative and strictly ascending".into()));
                }
                let points =
                    cutoffs.iter().map(|&r| poincare_norm(k, r).map(|n| (r, n))).collect::<Result<Vec<_>>>()?;
                let verdict = classify_profile(&points);
                Ok(NormProfile { points, verdict })
            }
            _ => Err(Error::Parameter(format!("norm profiles need a lattice or toroidal operator, got {}", self.kind()))),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Operator::Lattice(k) => k.label(),
            Operator::Toroidal(s) => s.label(),
            Operator::Blocks(b) => b.label(),
            Operator::Spectral { model, .. } => model.label(),
            Operator::Bundle(a) => a.label(),
        }
    }
}

fn build_lattice(l: &LatticeSpec, label: String) -> Result<LatticeKernel> {
    match l {
        LatticeSpec::Diagonal(d) => match (&d.entries, &d.decay) {
            (Some(rows), _) => {
                let entries = point_rows("entries", rows, d.dim)?.into_iter().map(|(p, v)| (p.clone(), p, v)).collect();
                LatticeKernel::table(d.dim, label, entries)
            }
            (None, Some(rule)) => {
                let c = Complex64::new(rule.coeff[0], rule.coeff[1]);
                let (p, one_sided) = (rule.exponent, rule.one_sided);
                Ok(LatticeKernel::diagonal(d.dim, label, move |j| {
                    let n = linf(j);
                    if n == 0 || (one_sided && j.iter().any(|&x| x < 1)) {
                        c0()
                    } else {
                        c * (n as f64).powf(-p)
                    }
                }))
            }
            (None, None) => Err(Error::validation("entries", "give exactly one of `entries` or `decay`")),
        },
        LatticeSpec::RankOne(r) => {
            LatticeKernel::rank_one(r.dim, label, &point_rows("u", &r.u, r.dim)?, &point_rows("v", &r.v, r.dim)?)
        }
        LatticeSpec::Banded(b) => {
            let mut bands: BTreeMap<Point, Complex64> = BTreeMap::new();
            for (off, v) in point_rows("bands", &b.bands, b.dim)? {
                *bands.entry(off).or_insert_with(c0) += v;
            }
            let width = bands.keys().map(|p| linf(p)).max().unwrap_or(0);
            let (decay, support) = (b.decay, b.support);
            let k = LatticeKernel::banded(b.dim, label, width, move |j, m| {
                if support.is_some_and(|s| linf(j) > s || linf(m) > s) {
                    return c0();
                }
                let off: Point = j.iter().zip(m).map(|(a, b)| a - b).collect();
                bands.get(&off).map_or_else(c0, |c| c * (1.0 + linf(m) as f64).powf(-decay))
            });
            Ok(match support {
                Some(s) => k.with_support(s),
                None => k,
            })
        }
        LatticeSpec::Table(t) => LatticeKernel::table(t.dim, label, pair_rows("entries", &t.entries, t.dim)?),
    }
}

fn build_toroidal(t: &ToroidalSpec, cutoff: i64) -> Result<ToroidalSymbol> {
    let grid = |g: &Option<usize>| g.unwrap_or_else(|| default_x_grid(cutoff.max(0)));
    match t {
        ToroidalSpec::PowerDecay(s) => {
            ToroidalSymbol::power_decay(s.dim, Complex64::new(s.coeff[0], s.coeff[1]), s.order, grid(&s.x_grid))
        }
        ToroidalSpec::Sharpness(s) => ToroidalSymbol::sharpness(s.dim, grid(&s.x_grid)),
        ToroidalSpec::Modulated(s) => {
            ToroidalSymbol::modulated(s.dim, point_rows("modes", &s.modes, s.dim)?, s.order, grid(&s.x_grid))
        }
        ToroidalSpec::CustomTable(s) => {
            ToroidalSymbol::custom_table(s.dim, pair_rows("entries", &s.entries, s.dim)?, s.order, grid(&s.x_grid))
        }
    }
}

fn build_spectral(s: &SpectralSpec, manifold_dim: Option<usize>, label: String) -> Result<Operator> {
    let (model, default_dim) = match (&s.builtin, &s.table) {
        (Some(b), _) => {
            let levels = s.levels.ok_or_else(|| Error::validation("levels", "required with `builtin`"))?;
            match b {
                BuiltinSpectrum::Circle => (SpectralModel::circle(levels), Some(1)),
                BuiltinSpectrum::Torus2 => (SpectralModel::torus2(levels), Some(2)),
                BuiltinSpectrum::Sphere2 => (SpectralModel::sphere2(levels), Some(2)),
            }
        }
        (None, Some(table)) => {
            let nu = s.nu.ok_or_else(|| Error::validation("nu", "required with `table`"))?;
            let model = SpectralModel::new(
                label,
                table.iter().map(|p| p[0]).collect(),
                table.iter().map(|p| p[1] as u64).collect(),
                nu,
            )?;
            (model, None)
        }
        (None, None) => return Err(Error::validation("builtin", "give exactly one of `builtin` or `table`")),
    };
    Ok(Operator::Spectral { model, alpha: s.alpha, manifold_dim: manifold_dim.or(default_dim) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_spec_str;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn build(text: &str) -> Operator {
        Operator::build(&parse_spec_str(text).unwrap(), 8).unwrap()
    }

    fn assert_series_matches_oracle(op: &Operator, lambda: Complex64, cutoff: i64) {
        let s = op.series_determinant(lambda, 40, cutoff, 1e-14).unwrap();
        let o = op.oracle_determinant(lambda, cutoff).unwrap();
        assert!((s.det.value - o).norm() <= 1e-10 * o.norm().max(1.0), "{}: {} vs {o}", op.kind(), s.det.value);
        let (ts, to) = (op.series_trace(cutoff).unwrap(), op.oracle_trace(cutoff).unwrap());
        assert!((ts - to).norm() <= 1e-10 * to.norm().max(1.0), "{}: trace {ts} vs {to}", op.kind());
    }

    #[test]
    fn every_family_agrees_with_its_oracle() {
        let specs = [
            r#"{"kind":"lattice_kernel","family":"diagonal","dim":1,"entries":[[0,0.5,0],[2,-0.25,0.1]]}"#,
            r#"{"kind":"lattice_kernel","family":"diagonal","dim":2,"decay":{"coeff":[0.3,0],"exponent":3}}"#,
            r#"{"kind":"lattice_kernel","family":"rank_one","dim":1,"u":[[0,1,0],[1,0.5,0]],"v":[[0,0.2,0],[-1,0,0.3]]}"#,
            r#"{"kind":"lattice_kernel","family":"banded","dim":1,"bands":[[0,0.5,0],[1,0.1,0],[-1,0,0.1]],"decay":2}"#,
            r#"{"kind":"lattice_kernel","family":"table","dim":1,"entries":[[0,1,0.3,0],[1,0,0.2,0],[1,1,0.1,0.1]]}"#,
            r#"{"kind":"toroidal_symbol","family":"power_decay","dim":1,"coeff":[0.8,0],"order":-2}"#,
            r#"{"kind":"toroidal_symbol","family":"modulated","dim":1,"modes":[[0,1,0],[1,0.25,0],[-1,0.25,0]],"order":-3}"#,
            r#"{"kind":"toroidal_symbol","family":"custom_table","dim":1,"entries":[[0,0,0.5,0],[1,-1,0.1,0]],"order":-2}"#,
            r#"{"kind":"block_symbol","blocks":[[[[0.5,0]]],[[[0.1,0],[0.2,0]],[[0,0.1],[0.3,0]]]]}"#,
            r#"{"kind":"spectral_model","builtin":"sphere2","levels":200,"alpha":3}"#,
            r#"{"kind":"spectral_model","table":[[0,1],[2,3],[6,5]],"alpha":2,"nu":2}"#,
            r#"{"kind":"bundle_symbol","fiber_dim":2,"dual":[{"id":"a","dim":1},{"id":"b","dim":2}],
               "sigma":[{"i":1,"r":1,"xi":"a","matrix":[[[0.3,0]]]},
                        {"i":2,"r":1,"xi":"b","matrix":[[[0.1,0],[0,0]],[[0,0.2],[0.1,0]]]}]}"#,
        ];
        for text in specs {
            assert_series_matches_oracle(&build(text), c(0.3, -0.1), 4);
        }
    }

    #[test]
    fn bundle_file_indices_are_one_based() {
        let op = build(
            r#"{"kind":"bundle_symbol","fiber_dim":2,"dual":[{"id":"a","dim":1}],
                "sigma":[{"i":1,"r":2,"xi":"a","matrix":[[[7,0]]]}]}"#,
        );
        let Operator::Bundle(a) = op else { panic!() };
        assert_eq!(a.sigma(0, 1, 0).get(0, 0), c(7.0, 0.0));
        assert_eq!(a.sigma(1, 0, 0).get(0, 0), c(0.0, 0.0));
    }

    #[test]
    fn trace_powers_start_at_the_first_power() {
        let op = build(r#"{"kind":"block_symbol","blocks":[[[[0.5,0]]],[[[0.25,0]]]]}"#);
        let seq = op.trace_powers(3, 0).unwrap();
        assert_eq!(seq.traces, vec![c(0.75, 0.0), c(0.3125, 0.0), c(0.140625, 0.0)]);
    }

    #[test]
    fn norm_profile_rejects_invariant_kinds() {
        let op = build(r#"{"kind":"block_symbol","blocks":[[[[0.5,0]]]]}"#);
        assert!(matches!(op.norm_profile(&[1, 2]), Err(Error::Parameter(_))));
    }

    #[test]
    fn oracle_refuses_oversized_boxes() {
        let op = build(r#"{"kind":"lattice_kernel","family":"diagonal","dim":3,"decay":{"coeff":[1,0],"exponent":4}}"#);
        assert!(matches!(op.oracle_determinant(c(0.1, 0.0), 20), Err(Error::Feasibility { .. })));
    }
}
