#![no_main]

use cinepipe_core::screenplay::{parse_verdict, SceneRecord};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(scene) = SceneRecord::parse(text) {
        let _ = scene.opening_view();
    }
    let _ = parse_verdict(text);
});
