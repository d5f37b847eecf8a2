#![no_main]

use libfuzzer_sys::fuzz_target;
use vsr_harness::runner::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = RunConfig::parse(text) {
            let _ = config.rows();
            let _ = config.hash();
        }
    }
});
