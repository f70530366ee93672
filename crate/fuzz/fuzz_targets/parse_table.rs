#![no_main]

use citest_cli::data::parse_table;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = parse_table(text) {
        for name in &table.headers {
            if let Ok(col) = table.numeric_column(name) {
                assert_eq!(col.len(), table.rows.len());
                assert!(col.iter().all(|v| v.is_finite()));
            }
        }
    }
});
