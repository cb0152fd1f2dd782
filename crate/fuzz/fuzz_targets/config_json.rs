#![no_main]

use libfuzzer_sys::fuzz_target;
use toda_gge::gge::{Potential, SamplerConfig};
use toda_gge::harness::{FlowConfig, HistConfig, IdentityConfig, LdpConfig, MinimizeConfig, SampleConfig};

fn probe<T: serde::de::DeserializeOwned>(text: &str) -> Option<T> {
    serde_json::from_str(text).ok()
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = probe::<FlowConfig>(text);
    let _ = probe::<HistConfig>(text);
    let _ = probe::<IdentityConfig>(text);
    let _ = probe::<LdpConfig>(text);
    let _ = probe::<MinimizeConfig>(text);
    if let Some(c) = probe::<SampleConfig>(text) {
        let _ = c.sampler.validate();
        let _ = c.potential.validate();
    }
    if let Some(c) = probe::<SamplerConfig>(text) {
        let _ = c.validate();
    }
    if let Some(p) = probe::<Potential>(text) {
        if p.validate().is_ok() {
            let _ = p.eval(0.0);
            let _ = p.grid_radius();
        }
    }
});
