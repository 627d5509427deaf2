#![no_main]

use cinepipe_pipeline::RunRecord;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rec) = serde_json::from_slice::<RunRecord>(data) {
        let text = serde_json::to_string(&rec).expect("record serializes");
        let again: RunRecord = serde_json::from_str(&text).expect("serialized record parses");
        assert_eq!(again.run_id, rec.run_id);
        let _ = rec.is_paused();
    }
});
