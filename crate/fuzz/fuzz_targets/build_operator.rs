#![no_main]

use libfuzzer_sys::fuzz_target;
use num_complex::Complex64;
use specdet_core::operator::Operator;
use specdet_core::spec::parse_spec_bytes;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = parse_spec_bytes(data) else { return };
    let Ok(op) = Operator::build(&spec, 2) else { return };
    // keep each run cheap; errors are fine, panics are not
    let small = match &op {
        Operator::Blocks(b) => b.truncation() <= 64,
        Operator::Bundle(a) => a.fiber_dim() <= 4 && a.dual().len() <= 8,
        Operator::Spectral { model, .. } => model.truncation() <= 10_000,
        Operator::Lattice(k) => k.dim() <= 2,
        Operator::Toroidal(_) => true,
    };
    if small {
        let lambda = Complex64::new(0.1, 0.05);
        let _ = op.series_trace(2);
        let _ = op.series_determinant(lambda, 8, 2, 1e-10);
        let _ = op.oracle_determinant(lambda, 2);
    }
});
