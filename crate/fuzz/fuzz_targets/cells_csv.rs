#![no_main]

use libfuzzer_sys::fuzz_target;
use vsr_harness::evaluation::report::parse_cells_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_cells_csv(text);
    }
});
