#![no_main]

use cwcf::data::{Dataset, Schema};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = Dataset::from_csv_reader(data, &Schema::default()) {
        assert!(ds.n_features() > 0);
        assert!(ds.class_count() >= 1);
        for i in 0..ds.len() {
            assert!(ds.sample(i).iter().all(|v| v.is_finite()));
            assert!(ds.label(i) < ds.class_count());
        }
    }
});
