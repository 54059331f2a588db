#![no_main]

use libfuzzer_sys::fuzz_target;
use nsdt_core::fields::{Polynomial, TermSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(terms) = serde_json::from_slice::<Vec<TermSpec>>(data) else {
        return;
    };
    if let Ok(p) = Polynomial::from_specs(&terms) {
        let back = Polynomial::from_specs(&p.to_specs()).expect("canonical terms parse");
        assert_eq!(p, back);
    }
});
