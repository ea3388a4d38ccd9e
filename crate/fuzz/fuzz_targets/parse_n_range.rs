#![no_main]

use dpconverse_cli::parse_n_range;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ns) = parse_n_range(text) {
        assert!(ns.windows(2).all(|w| w[0] < w[1]));
        assert!(ns.iter().all(|&n| n >= 1));
    }
});
