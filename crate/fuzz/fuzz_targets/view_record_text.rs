#![no_main]

use libfuzzer_sys::fuzz_target;
use vsr_harness::geometry::ViewRecord;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(record) = ViewRecord::parse_text(text) {
            assert!(record.azimuth_deg.is_finite());
        }
    }
});
