#![no_main]

use cmc_cli::parse_surface_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(s) = parse_surface_csv(text) {
            let _ = s.to_graph(1.0);
        }
    }
});
