#![no_main]

use libfuzzer_sys::fuzz_target;
use toda_gge::measures::MeasureHeader;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(h) = MeasureHeader::from_json(text) {
        assert!(h.h > 0.0 && h.n > 0);
        MeasureHeader::from_json(&h.to_json()).expect("round trip");
    }
});
