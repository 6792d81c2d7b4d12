#![no_main]

use cwcf::data::parse_index_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_index_list(text);
    }
});
