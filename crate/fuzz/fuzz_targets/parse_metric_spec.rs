#![no_main]

use libfuzzer_sys::fuzz_target;
use nsdt_core::spec::parse_metric_spec;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(spec) = parse_metric_spec(s) {
            // accepted specs must round-trip
            let again = parse_metric_spec(&spec.to_json_pretty()).expect("re-parse");
            assert_eq!(spec, again);
        }
    }
});
