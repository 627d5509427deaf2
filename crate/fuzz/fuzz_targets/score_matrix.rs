#![no_main]

use cinepipe_core::storyboard::{build_routing, ScoreMatrix, TieBreak};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = ScoreMatrix::load(text) {
        for policy in [TieBreak::ScenePreservation, TieBreak::DeclarationOrder] {
            let _ = build_routing(&m, policy);
        }
    }
});
