#![no_main]

use libfuzzer_sys::fuzz_target;
use lzspa::transform::Lz78Spa;

fuzz_target!(|data: &[u8]| {
    // Model deserialization must reject malformed input, never panic.
    let _ = Lz78Spa::from_bytes(data);
});
