#![no_main]

use dpconverse::channel::file::{parse_channel, to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(dmc) = parse_channel(text) {
        let back = parse_channel(&to_json(&dmc)).expect("serialized channel parses");
        assert_eq!(back.to_rows(), dmc.to_rows());
    }
});
