#![no_main]

use libfuzzer_sys::fuzz_target;

// Partition files are untrusted input: parsing plus validation must reject
// bad geometry with an error, never panic.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = mortar_bddc::geometry::load_partition(text);
    }
});
