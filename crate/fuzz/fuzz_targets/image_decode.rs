#![no_main]

use libfuzzer_sys::fuzz_target;
use vsr_harness::image::Image;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = Image::decode(data, "fuzz.png") {
        assert!(img.width() > 0 && img.height() > 0);
    }
});
