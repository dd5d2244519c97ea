#![no_main]

use fl_core::schema::{parse_sigma_csv, sigma_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(rows) = parse_sigma_csv(text) else { return };
    let once = sigma_csv(&rows);
    let back = parse_sigma_csv(&once).expect("written tables parse");
    assert_eq!(back.len(), rows.len());
    assert_eq!(sigma_csv(&back), once);
});
