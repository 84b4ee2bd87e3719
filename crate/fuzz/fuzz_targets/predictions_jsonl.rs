#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = sealrestore::annot::parse_predictions_jsonl(data);
});
