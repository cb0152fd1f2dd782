#![no_main]

use libfuzzer_sys::fuzz_target;
use toda_gge::gge::{samples_from_csv, samples_to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(states) = samples_from_csv(text) {
        // whatever parses must survive a round trip
        let again = samples_from_csv(&samples_to_csv(&states)).expect("round trip");
        assert_eq!(again.len(), states.len());
    }
});
