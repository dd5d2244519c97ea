#![no_main]

use fl_core::schema::parse_trace_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(trace) = parse_trace_csv(text) else { return };
    let once = trace.to_csv();
    let back = parse_trace_csv(&once).expect("written traces parse");
    assert_eq!(back.times.len(), trace.times.len());
    assert_eq!(back.to_csv(), once);
});
