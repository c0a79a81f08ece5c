#![no_main]

use libfuzzer_sys::fuzz_target;
use lzspa::codec::EncodedStream;
use lzspa::transform::Lz78Spa;

fuzz_target!(|data: &[u8]| {
    let Ok(stream) = EncodedStream::from_bytes(data) else {
        return;
    };
    // Cap the declared length so the harness cannot be made to allocate
    // gigabytes from a tiny input.
    if stream.len > 1 << 16 || stream.model_hash.is_some() {
        return;
    }
    if let Ok(mut model) = Lz78Spa::new_dirichlet(stream.alphabet, 0.5) {
        let _ = lzspa::codec::decode(&mut model, &stream, None);
    }
});
