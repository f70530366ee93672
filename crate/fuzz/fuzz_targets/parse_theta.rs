#![no_main]

use citest_cli::config::parse_theta;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(theta) = parse_theta(text) {
            assert!(!theta.is_empty());
            assert!(theta.iter().all(|v| v.is_finite()));
        }
    }
});
