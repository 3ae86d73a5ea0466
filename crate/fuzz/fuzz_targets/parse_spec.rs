#![no_main]

use libfuzzer_sys::fuzz_target;
use specdet_core::spec::{emit_spec, parse_spec_bytes, parse_spec_str};

fuzz_target!(|data: &[u8]| {
    if let Ok(spec) = parse_spec_bytes(data) {
        let again = parse_spec_str(&emit_spec(&spec)).expect("emitted spec must reparse");
        assert_eq!(again, spec);
    }
});
