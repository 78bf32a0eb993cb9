#![no_main]

use libfuzzer_sys::fuzz_target;
use mortar_bddc::harness::ExperimentConfig;

// Experiment configs are untrusted input: parse, validate the coefficient
// descriptor, and round-trip through the serializer without panicking.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ExperimentConfig::from_json(text) {
            let _ = cfg.coefficient.validate();
            let _ = serde_json::to_string(&cfg);
        }
    }
});
