#![no_main]

use cinepipe_core::eval::{
    aggregate_ratings, binary_accuracy, parse_jsonl, win_rate, BinaryLabel, RankingRecord, RatingRecord,
};
use cinepipe_core::taxonomy::parse_plan_jsonl;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = parse_jsonl::<RatingRecord>(text) {
        let _ = aggregate_ratings(&r);
    }
    if let Ok(l) = parse_jsonl::<BinaryLabel>(text) {
        let _ = binary_accuracy(&l);
    }
    if let Ok(r) = parse_jsonl::<RankingRecord>(text) {
        if let Ok(rates) = win_rate(&r) {
            let total: f64 = rates.values().sum();
            assert!((total - 100.0).abs() < 1e-6);
        }
    }
    let _ = parse_plan_jsonl(text);
});
