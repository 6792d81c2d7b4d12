#![no_main]

use cwcf::nn::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(c) = Checkpoint::decode(data) {
        let bytes = c.encode();
        assert_eq!(Checkpoint::decode(&bytes).unwrap().encode(), bytes);
    }
});
