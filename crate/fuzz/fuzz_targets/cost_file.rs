#![no_main]

use cwcf::data::CostSchedule;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    if let Ok(c) = CostSchedule::parse(text, &names) {
        assert_eq!(c.len(), names.len());
        assert!(c.costs().iter().all(|v| v.is_finite() && *v >= 0.0));
    }
});
