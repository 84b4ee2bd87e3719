#![no_main]

use libfuzzer_sys::fuzz_target;

// PNG/JPEG bytes from disk are untrusted; decoding must never panic.
fuzz_target!(|data: &[u8]| {
    let _ = sealrestore::Image::decode(data);
});
