#![no_main]

use fl_core::schema::ModelSpecDoc;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(doc) = ModelSpecDoc::parse(text) else { return };
    let _ = doc.input();
    // writing rounds to 12 digits once; after that the text is a fixed point
    let once = doc.to_json();
    let again = ModelSpecDoc::parse(&once).expect("written documents parse").to_json();
    assert_eq!(once, again);
});
