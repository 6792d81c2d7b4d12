#![no_main]

use cwcf::data::{Dataset, HpcPredictions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let ds = Dataset::from_parts(
        vec![vec![0.0], vec![1.0], vec![2.0]],
        vec![0, 1, 0],
        vec!["x".into(), "y".into()],
        vec!["f".into()],
    )
    .unwrap();
    if let Ok(h) = HpcPredictions::parse(text, &ds) {
        for i in 0..ds.len() {
            assert!(h.predict(i) < ds.class_count());
        }
    }
});
