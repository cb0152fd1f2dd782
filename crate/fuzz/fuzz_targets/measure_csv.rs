#![no_main]

use libfuzzer_sys::fuzz_target;
use toda_gge::measures::GriddedMeasure;

// The first line is taken as the header JSON, the rest as the CSV body.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mu) = GriddedMeasure::from_csv(text) {
        assert!(mu.density().iter().all(|d| d.is_finite() && *d >= 0.0));
    }
    if let Some((header, body)) = text.split_once('\n') {
        let _ = GriddedMeasure::from_csv_with_header(body, header);
    }
});
