#![no_main]

use cwcf::harness::RunReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(r) = RunReport::from_json(text) {
            let _ = RunReport::from_json(&r.to_json()).unwrap();
        }
    }
});
