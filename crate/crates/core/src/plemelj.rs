//! Plemelj–Smithies series evaluation.
//!
//! Every representation reduces its operator to the sequence `m ↦ Tr(Tᵐ)`;
//! the determinant is then
//!
//! ```text
//! Det(I + λT) = exp( Σ_{m≥1} (-1)^{m+1}/m · λᵐ · Tr(Tᵐ) )
//! ```
//!
//! The series is summed in log form and exponentiated once, so no complex
//! logarithm branch is ever chosen.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// A determinant value with the per-order series terms that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetResult {
    #[serde(serialize_with = "ser_complex")]
    pub value: Complex64,
    /// `terms[m-1] = (-1)^{m+1}/m · λᵐ · Tr(Tᵐ)`.
    #[serde(serialize_with = "ser_complex_vec")]
    pub terms: Vec<Complex64>,
    pub order_used: usize,
    pub cutoff_used: usize,
    #[serde(serialize_with = "ser_nonfinite_as_null")]
    pub tail_estimate: f64,
    pub converged: bool,
}

impl DetResult {
    pub fn log_sum(&self) -> Complex64 {
        self.terms.iter().sum()
    }
}

fn ser_complex<S: Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

fn ser_complex_vec<S: Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
    pairs.serialize(s)
}

fn ser_nonfinite_as_null<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_none()
    }
}

/// Anything that can report `Tr(Tᵐ)` for `m ≥ 1`.
pub trait TracePowerSource {
    fn trace_power(&self, m: usize) -> Result<Complex64>;

    /// Upper bound on a trace norm of `T`, if known.
    fn norm_hint(&self) -> Option<f64> {
        None
    }

    fn label(&self) -> &str {
        ""
    }
}

/// Trace-power source backed by a closure.
#[derive(Clone)]
pub struct FnTraceSource {
    f: Arc<dyn Fn(usize) -> Complex64 + Send + Sync>,
    norm_hint: Option<f64>,
    label: String,
}

impl FnTraceSource {
    pub fn new(label: impl Into<String>, f: impl Fn(usize) -> Complex64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), norm_hint: None, label: label.into() }
    }

    pub fn with_norm_hint(mut self, h: f64) -> Self {
        self.norm_hint = Some(h);
        self
    }

    /// `Tr(Tᵐ) = Σ μᵢᵐ` for a finite list of eigenvalues.
    pub fn from_eigenvalues(label: impl Into<String>, mu: Vec<Complex64>) -> Self {
        let hint = mu.iter().map(|z| z.norm()).sum();
        Self::new(label, move |m| mu.iter().map(|z| z.powu(m as u32)).sum()).with_norm_hint(hint)
    }
}

impl TracePowerSource for FnTraceSource {
    fn trace_power(&self, m: usize) -> Result<Complex64> {
        Ok((self.f)(m))
    }

    fn norm_hint(&self) -> Option<f64> {
        self.norm_hint
    }

    fn label(&self) -> &str {
        &self.label
    }
}

/// Precomputed `Tr(T¹), …, Tr(Tᴹ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSequence {
    pub traces: Vec<Complex64>,
    pub norm_hint: Option<f64>,
    pub label: String,
}

impl TracePowerSource for TraceSequence {
    fn trace_power(&self, m: usize) -> Result<Complex64> {
        self.traces
            .get(m.wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::Parameter(format!("trace power {m} not available (have 1..={})", self.traces.len())))
    }

    fn norm_hint(&self) -> Option<f64> {
        self.norm_hint
    }

    fn label(&self) -> &str {
        &self.label
    }
}

/// Number of consecutive negligible terms that ends the series early.
const EARLY_STOP_RUN: usize = 3;

/// Evaluates `Det(I + λT)` from a trace-power source.
///
/// Summation stops after `order` terms, or earlier once three consecutive
/// terms fall below `tol · max(1, |partial sum|)`.
pub fn plemelj_det(src: &dyn TracePowerSource, lambda: Complex64, order: usize, tol: f64) -> Result<DetResult> {
    if let Some(h) = src.norm_hint() {
        for m in 1..=order.min(4) {
            let t = src.trace_power(m)?;
            if t.norm() > h.powi(m as i32) * (1.0 + 1e-9) {
                log::warn!(
                    "{}: |Tr(T^{m})| = {:.3e} exceeds norm hint {h:.3e}^{m}",
                    src.label(),
                    t.norm()
                );
                break;
            }
        }
    }
    plemelj_series((1..=order).map(|m| src.trace_power(m)), lambda, order, tol, 0)
}

/// Series driver over a stream of trace powers `Tr(T¹), Tr(T²), …`.
///
/// `cutoff` is recorded verbatim in the result.
pub fn plemelj_series<I>(traces: I, lambda: Complex64, order: usize, tol: f64, cutoff: usize) -> Result<DetResult>
where
    I: IntoIterator<Item = Result<Complex64>>,
{
    if order < 1 {
        return Err(Error::Parameter("series order must be at least 1".into()));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    let mut terms = Vec::with_capacity(order.min(1024));
    let mut sum = Complex64::new(0.0, 0.0);
    let mut lambda_pow = Complex64::new(1.0, 0.0);
    let mut small_run = 0;
    for (idx, tr) in traces.into_iter().take(order).enumerate() {
        let m = idx + 1;
        let tr = tr?;
        if !tr.is_finite() {
            return Err(Error::Evaluation { index: format!("Tr(T^{m})") });
        }
        lambda_pow *= lambda;
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        let term = lambda_pow * tr * (sign / m as f64);
        sum += term;
        terms.push(term);
        if term.norm() < tol * sum.norm().max(1.0) {
            small_run += 1;
            if small_run == EARLY_STOP_RUN {
                break;
            }
        } else {
            small_run = 0;
        }
    }
    if terms.len() < order.min(EARLY_STOP_RUN) {
        return Err(Error::Parameter(format!("trace source ended after {} powers", terms.len())));
    }
    Ok(finish(terms, sum, tol, cutoff))
}

fn finish(terms: Vec<Complex64>, sum: Complex64, tol: f64, cutoff: usize) -> DetResult {
    let order_used = terms.len();
    let (last, ratio) = decay_rate(&terms);
    let (tail_estimate, geometric) = if ratio < 1.0 { (last * ratio / (1.0 - ratio), true) } else { (f64::INFINITY, false) };
    let converged = geometric && last <= tol * sum.norm().max(1.0);
    DetResult { value: sum.exp(), terms, order_used, cutoff_used: cutoff, tail_estimate, converged }
}

/// Effective `(|t_M|, ρ)` for the ratio test.
///
/// With `t_M`, `t_{M-1}` both nonzero this is `(|t_M|, |t_M/t_{M-1}|)`. Exact
/// zeros carry no decay information, so otherwise the per-step rate between
/// the last two nonzero terms is extrapolated to `M`.
fn decay_rate(terms: &[Complex64]) -> (f64, f64) {
    let m = terms.len();
    let mut nonzero = terms.iter().enumerate().rev().filter(|(_, t)| t.norm() > 0.0).map(|(i, t)| (i + 1, t.norm()));
    match (nonzero.next(), nonzero.next()) {
        (Some((p, ap)), Some((q, aq))) => {
            let rate = (ap / aq).powf(1.0 / (p - q) as f64);
            (ap * rate.powi((m - p) as i32), rate)
        }
        (Some((p, _)), None) if m - p >= EARLY_STOP_RUN => (0.0, 0.0),
        (None, None) if m >= EARLY_STOP_RUN => (0.0, 0.0),
        _ => (terms[m - 1].norm(), f64::INFINITY),
    }
}

/// Root-test estimate of the series' disc of convergence.
///
/// Returns `1 / max |Tr(Tᵐ)|^{1/m}` over `m ∈ {⌈M/2⌉, …, M}`, or infinity when
/// every sampled trace vanishes.
pub fn radius_estimate(src: &dyn TracePowerSource, order: usize) -> Result<f64> {
    if order < 3 {
        return Err(Error::Parameter("radius estimate needs order >= 3".into()));
    }
    let mut best = 0.0f64;
    for m in order.div_ceil(2)..=order {
        let t = src.trace_power(m)?;
        if !t.is_finite() {
            return Err(Error::Evaluation { index: format!("Tr(T^{m})") });
        }
        if t.norm() > 0.0 {
            // log form avoids overflow of large powers
            best = best.max((t.norm().ln() / m as f64).exp());
        }
    }
    Ok(if best == 0.0 { f64::INFINITY } else { 1.0 / best })
}
