#![no_main]

use galerkin::verify::exponents::{format_rational, parse_rational};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // must never panic; accepted literals round-trip exactly
        if let Ok(value) = parse_rational(text) {
            let shown = format_rational(&value);
            let again = parse_rational(&shown).expect("canonical form reparses");
            assert_eq!(value, again);
        }
    }
});
