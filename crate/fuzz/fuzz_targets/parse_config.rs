#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // parsing must never panic; accepted configs must round-trip through
    // their canonical serialization with a stable digest
    if let Ok(parsed) = galerkin::config::parse_config_bytes(data) {
        let text = serde_json::to_string(&parsed.raw).expect("configs serialize");
        let again =
            galerkin::config::parse_config_bytes(text.as_bytes()).expect("canonical form reparses");
        assert_eq!(parsed.raw, again.raw);
        assert_eq!(
            galerkin::config::config_digest(&parsed.raw),
            galerkin::config::config_digest(&again.raw)
        );
    }
});
