#![no_main]

use dpconverse_cli::parse_results_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(points) = parse_results_csv(text) {
        assert!(points.iter().all(|p| !p.rate_bits.is_nan() && !p.series.is_empty()));
    }
});
