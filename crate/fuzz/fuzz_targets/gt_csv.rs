#![no_main]

use libfuzzer_sys::fuzz_target;

// Ground-truth CSV parsing must return an error on malformed input, never
// panic.
fuzz_target!(|data: &[u8]| {
    let _ = sealrestore::annot::parse_ground_truth_csv(data);
});
