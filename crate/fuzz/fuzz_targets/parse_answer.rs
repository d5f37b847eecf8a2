#![no_main]

use libfuzzer_sys::fuzz_target;
use vsr_harness::vlm::parse_answer;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = parse_answer(&text);
});
