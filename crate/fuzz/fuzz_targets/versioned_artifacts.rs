#![no_main]

use fl_core::dynamics::SurvivalTrace;
use fl_core::schema::{from_versioned_json, to_versioned_json};
use fl_core::spectral::SpectralReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = from_versioned_json::<SpectralReport>(text) {
        let once = to_versioned_json(&report);
        let back: SpectralReport = from_versioned_json(&once).expect("written reports parse");
        assert_eq!(to_versioned_json(&back), once);
    }
    if let Ok(trace) = from_versioned_json::<SurvivalTrace>(text) {
        let once = to_versioned_json(&trace);
        let back: SurvivalTrace = from_versioned_json(&once).expect("written traces parse");
        assert_eq!(to_versioned_json(&back), once);
    }
});
