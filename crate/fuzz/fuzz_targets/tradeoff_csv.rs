#![no_main]

use cwcf::harness::{convex_hull_select, read_tradeoff_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(points) = read_tradeoff_csv(data) {
        let hull = convex_hull_select(&points);
        assert!(hull.len() <= points.len());
        assert_eq!(hull.is_empty(), points.is_empty());
    }
});
