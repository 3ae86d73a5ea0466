//! The `specdet` command line, as a library so it can be driven in-process.
//!
//! [`run`] takes the full argument vector and returns the exit code together
//! with everything that would be written to stdout and stderr.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};
use specdet_core::operator::{Operator, SeriesDet};
use specdet_core::plemelj::radius_estimate;
use specdet_core::spec::parse_spec;
use specdet_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "specdet", version, about = "Fredholm determinants and traces of operators given as JSON files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Det(I + λT) by the trace series, the direct oracle, or both.
    Det(Common),
    /// Tr(T) of the truncation.
    Trace(Common),
    /// Poincaré norms of truncations at cutoffs 1, 2, 4, … up to --cutoff.
    NormProfile(Common),
    /// Root-test estimate of the convergence radius in λ.
    Radius(Common),
    /// Series and oracle determinants side by side.
    Compare(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Operator specification file.
    #[arg(long)]
    input: PathBuf,
    /// Spectral parameter as RE,IM.
    #[arg(long, default_value = "0.1,0", value_parser = parse_lambda, allow_hyphen_values = true)]
    lambda: Complex64,
    /// Number of series terms M.
    #[arg(long, default_value_t = 30)]
    order: usize,
    /// Lattice box radius R.
    #[arg(long, default_value_t = 8)]
    cutoff: i64,
    /// Early-stop tolerance of the series.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Mode::Both)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = Output::Text)]
    output: Output,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Series,
    Oracle,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Output {
    Json,
    Text,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Parses `RE,IM` into a complex number; both parts must be finite.
pub fn parse_lambda(s: &str) -> Result<Complex64, String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected RE,IM, got `{s}`"))?;
    let part = |t: &str| -> Result<f64, String> {
        let x: f64 = t.trim().parse().map_err(|_| format!("`{}` is not a number", t.trim()))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(format!("`{}` is not finite", t.trim()))
        }
    };
    Ok(Complex64::new(part(re)?, part(im)?))
}

/// Runs the command line; `args` includes the program name.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let json_requested = wants_json(&args);
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return Outcome { code: EXIT_OK, stdout: e.to_string(), stderr: String::new() };
            }
            let stderr = if json_requested {
                let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
                format!("{}\n", json!({"error": {"code": EXIT_INPUT, "type": "usage", "message": first}}))
            } else {
                e.to_string()
            };
            return Outcome { code: EXIT_INPUT, stdout: String::new(), stderr };
        }
    };
    let (name, common) = match &cli.command {
        Command::Det(c) => ("det", c),
        Command::Trace(c) => ("trace", c),
        Command::NormProfile(c) => ("norm-profile", c),
        Command::Radius(c) => ("radius", c),
        Command::Compare(c) => ("compare", c),
    };
    match execute(name, common) {
        Ok((report, code)) => {
            let stdout = match common.output {
                Output::Json => format!("{}\n", serde_json::to_string_pretty(&report).expect("reports serialize")),
                Output::Text => render_text(&report),
            };
            Outcome { code, stdout, stderr: String::new() }
        }
        Err(e) => {
            let code = exit_code(&e);
            let stderr = match common.output {
                Output::Json => format!("{}\n", error_json(&e, code)),
                Output::Text => format!("error: {e}\n"),
            };
            Outcome { code, stdout: String::new(), stderr }
        }
    }
}

fn wants_json(args: &[OsString]) -> bool {
    args.windows(2).any(|w| w[0] == "--output" && w[1] == "json") || args.iter().any(|a| a == "--output=json")
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Feasibility { .. } => EXIT_INFEASIBLE,
        _ => EXIT_INPUT,
    }
}

fn error_json(e: &Error, code: i32) -> Value {
    let kind = match e {
        Error::Shape(_) => "shape",
        Error::Evaluation { .. } => "evaluation",
        Error::Parameter(_) => "parameter",
        Error::Aliasing { .. } => "aliasing",
        Error::Feasibility { .. } => "feasibility",
        Error::Lookup(_) => "lookup",
        Error::Model(_) => "model",
        Error::Parse { .. } => "parse",
        Error::Validation { .. } => "validation",
        Error::Io(_) => "io",
    };
    let mut body = json!({"code": code, "type": kind, "message": e.to_string()});
    match e {
        Error::Parse { line, column, .. } => {
            body["line"] = json!(line);
            body["column"] = json!(column);
        }
        Error::Validation { field, .. } => body["field"] = json!(field),
        _ => {}
    }
    json!({ "error": body })
}

fn cj(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn deviation(a: Complex64, b: Complex64) -> (f64, f64) {
    let abs = (a - b).norm();
    let rel = if b.norm() > 0.0 { abs / b.norm() } else { abs };
    (abs, rel)
}

fn execute(name: &str, c: &Common) -> specdet_core::Result<(Value, i32)> {
    if c.cutoff < 0 {
        return Err(Error::Parameter(format!("cutoff must be nonnegative, got {}", c.cutoff)));
    }
    if c.order < 1 {
        return Err(Error::Parameter("order must be at least 1".into()));
    }
    if !(c.tol.is_finite() && c.tol >= 0.0) {
        return Err(Error::Parameter(format!("tol must be finite and nonnegative, got {}", c.tol)));
    }
    let spec = parse_spec(&c.input)?;
    let op = Operator::build(&spec, c.cutoff)?;
    let mut report = json!({
        "command": name,
        "kind": op.kind(),
        "label": spec.label(),
    });
    let mut code = EXIT_OK;
    match name {
        "det" | "compare" => {
            let both = name == "compare" || c.mode == Mode::Both;
            let series = if both || c.mode == Mode::Series {
                Some(op.series_determinant(c.lambda, c.order, c.cutoff, c.tol)?)
            } else {
                None
            };
            let oracle =
                if both || c.mode == Mode::Oracle { Some(op.oracle_determinant(c.lambda, c.cutoff)?) } else { None };
            let dev = match (&series, oracle) {
                (Some(s), Some(o)) => Some(deviation(s.det.value, o)),
                _ => None,
            };
            if name == "det" && c.mode == Mode::Series && series.as_ref().is_some_and(|s| !s.det.converged) {
                code = EXIT_NOT_CONVERGED;
            }
            extend(&mut report, json!({
                "mode": if name == "compare" { "both" } else { mode_name(c.mode) },
                "lambda": cj(c.lambda),
                "order": c.order,
                "cutoff": c.cutoff,
                "tol": c.tol,
                "result": series.as_ref().map(|s: &SeriesDet| serde_json::to_value(&s.det).expect("serializes")),
                "oracle": oracle.map(cj),
                "abs_deviation": dev.map(|d| d.0),
                "rel_deviation": dev.map(|d| d.1),
                "weyl_tail": series.as_ref().and_then(|s| s.tail).map(|t| json!({"ratio": t.ratio, "convergent": t.convergent})),
            }));
        }
        "trace" => {
            let series = if c.mode != Mode::Oracle { Some(op.series_trace(c.cutoff)?) } else { None };
            let oracle = if c.mode != Mode::Series { Some(op.oracle_trace(c.cutoff)?) } else { None };
            let dev = series.zip(oracle).map(|(s, o)| deviation(s, o));
            extend(&mut report, json!({
                "mode": mode_name(c.mode),
                "cutoff": c.cutoff,
                "series": series.map(cj),
                "oracle": oracle.map(cj),
                "abs_deviation": dev.map(|d| d.0),
                "rel_deviation": dev.map(|d| d.1),
            }));
        }
        "norm-profile" => {
            let profile = op.norm_profile(&profile_cutoffs(c.cutoff))?;
            extend(&mut report, json!({
                "points": profile.points.iter().map(|(r, n)| json!([r, n])).collect::<Vec<_>>(),
                "increments": profile.increments(),
                "verdict": profile.verdict.to_string(),
            }));
        }
        "radius" => {
            let order = c.order.max(3);
            let seq = op.trace_powers(order, c.cutoff)?;
            let radius = radius_estimate(&seq, order)?;
            extend(&mut report, json!({
                "order": order,
                "cutoff": c.cutoff,
                "radius": if radius.is_finite() { json!(radius) } else { Value::Null },
                "unbounded": radius.is_infinite(),
                "lambda_inside": c.lambda.norm() < radius,
            }));
        }
        _ => unreachable!("subcommands are fixed"),
    }
    Ok((report, code))
}

/// `1, 2, 4, …` below `r`, then `r` itself.
fn profile_cutoffs(r: i64) -> Vec<i64> {
    let mut out: Vec<i64> = std::iter::successors(Some(1i64), |x| x.checked_mul(2)).take_while(|&x| x < r).collect();
    out.push(r.max(1));
    out
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Series => "series",
        Mode::Oracle => "oracle",
        Mode::Both => "both",
    }
}

fn extend(report: &mut Value, more: Value) {
    if let (Value::Object(a), Value::Object(b)) = (report, more) {
        a.extend(b);
    }
}

fn fmt_complex(v: &Value) -> String {
    match v.as_array().map(|a| (a[0].as_f64(), a[1].as_f64())) {
        Some((Some(re), Some(im))) => format!("{re:.12e} {:+.12e}i", im),
        _ => v.to_string(),
    }
}

fn render_text(report: &Value) -> String {
    let mut out = String::new();
    let Some(map) = report.as_object() else { return report.to_string() };
    for (key, v) in map {
        if v.is_null() {
            continue;
        }
        let shown = match (key.as_str(), v) {
            ("lambda" | "oracle" | "series", _) => fmt_complex(v),
            ("result", Value::Object(r)) => {
                let tail = r.get("tail_estimate").filter(|t| !t.is_null()).map_or("inf".to_string(), |t| t.to_string());
                format!(
                    "{} (terms {}, converged {}, tail {tail})",
                    fmt_complex(&r["value"]),
                    r["order_used"],
                    r["converged"]
                )
            }
            ("points", Value::Array(ps)) => {
                ps.iter().map(|p| format!("R={} {:.6}", p[0], p[1].as_f64().unwrap_or(f64::NAN))).collect::<Vec<_>>().join(", ")
            }
            (_, Value::String(s)) => s.clone(),
            _ => v.to_string(),
        };
        out.push_str(&format!("{key}: {shown}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_parsing() {
        assert_eq!(parse_lambda("0.1,0").unwrap(), Complex64::new(0.1, 0.0));
        assert_eq!(parse_lambda(" -2.5 , 1e-3 ").unwrap(), Complex64::new(-2.5, 1e-3));
        for bad in ["", "1", "1,", ",2", "a,b", "1,2,3", "inf,0", "0,NaN"] {
            assert!(parse_lambda(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn profile_cutoffs_double_up_to_r() {
        assert_eq!(profile_cutoffs(8), vec![1, 2, 4, 8]);
        assert_eq!(profile_cutoffs(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(profile_cutoffs(1), vec![1]);
        assert_eq!(profile_cutoffs(0), vec![1]);
    }

    #[test]
    fn usage_errors_exit_2() {
        let out = run(["specdet", "det"]);
        assert_eq!(out.code, EXIT_INPUT);
        let out = run(["specdet", "det", "--input", "x.json", "--output", "json", "--lambda", "oops"]);
        assert_eq!(out.code, EXIT_INPUT);
        let v: Value = serde_json::from_str(out.stderr.trim()).unwrap();
        assert_eq!(v["error"]["type"], "usage");
        assert_eq!(out.stderr.trim().lines().count(), 1);
    }

    #[test]
    fn help_exits_0() {
        let out = run(["specdet", "--help"]);
        assert_eq!(out.code, EXIT_OK);
        assert!(out.stdout.contains("norm-profile"));
    }
}
