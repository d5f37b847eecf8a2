#![no_main]

use libfuzzer_sys::fuzz_target;
use vsr_harness::synth::remote::decode_response;

fuzz_target!(|data: &[u8]| {
    let _ = decode_response(data, "fuzz.png");
});
