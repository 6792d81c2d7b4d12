#![no_main]

use cwcf::harness::Config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = Config::parse(text) {
            let _ = cfg.hyperparameters().validate();
            let _ = cfg.data.split_spec();
        }
    }
});
