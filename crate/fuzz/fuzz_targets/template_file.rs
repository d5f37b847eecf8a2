#![no_main]

use libfuzzer_sys::fuzz_target;
use vsr_harness::prompt::TemplateSet;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(set) = TemplateSet::parse(text) {
            let _ = set.validate();
            let _ = TemplateSet::parse(&set.to_toml()).expect("serialized set reparses");
        }
    }
});
