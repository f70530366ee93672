#![no_main]

use citest_cli::report::ReportDocument;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(doc) = ReportDocument::from_json(text) {
        let again = ReportDocument::from_json(&doc.to_json()).expect("re-parse");
        assert_eq!(again.to_json(), doc.to_json());
    }
});
