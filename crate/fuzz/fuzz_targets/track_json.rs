#![no_main]

use cinepipe_core::transition::{ingest_tracks, plan_transition, TransitionParams};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(tracks) = ingest_tracks(text) else { return };
    let again = ingest_tracks(&tracks.to_json()).expect("serialized tracks ingest");
    assert_eq!(again, tracks);
    let meta = tracks.meta();
    let window = meta.clip_a_len.min(meta.clip_b_len).saturating_sub(1).clamp(1, 30);
    let _ = plan_transition(&tracks, &TransitionParams { window, ..Default::default() });
});
