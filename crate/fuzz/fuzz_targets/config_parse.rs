#![no_main]

use cmc_cli::{JobConfig, Overrides};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = JobConfig::load(text, &Overrides::default()) {
            let _ = cfg.support_function();
            let _ = cfg.window_grid();
        }
    }
});
