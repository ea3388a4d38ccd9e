#![no_main]

use dpconverse_cli::{ChannelSpec, QSelector};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // file: specs would touch the filesystem
    if text.starts_with("file:") {
        return;
    }
    if let Ok(spec) = text.parse::<ChannelSpec>() {
        if let Ok(dmc) = spec.build() {
            assert!(dmc.validate().is_ok());
        }
    }
    let _ = text.parse::<QSelector>();
});
