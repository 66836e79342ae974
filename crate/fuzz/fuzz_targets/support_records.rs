#![no_main]

use cmc_cli::config::{parse_samples, SampleRecord};
use cmc_core::make_support_function;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    let n = 1 + (n % 3) as usize;
    if let Ok(records) = serde_json::from_slice::<Vec<SampleRecord>>(rest) {
        if let Ok(raw) = parse_samples(n, &records) {
            let _ = make_support_function(n, raw);
        }
    }
});
