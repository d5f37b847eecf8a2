#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use vsr_harness::datasets::{parse_record, DatasetKind, FieldMap};

fuzz_target!(|data: &[u8]| {
    if let Ok(line) = std::str::from_utf8(data) {
        let fields = FieldMap::default();
        for kind in DatasetKind::ALL {
            let _ = parse_record(line, &fields, kind, None, Path::new("images"));
        }
    }
});
