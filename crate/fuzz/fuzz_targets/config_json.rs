#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = lzspa_cli::parse_channel_json(data);
    let _ = lzspa_cli::parse_source_json(data);
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = lzspa_cli::parse_manifest(text);
    }
});
