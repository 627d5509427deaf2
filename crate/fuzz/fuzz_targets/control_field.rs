#![no_main]

use cinepipe_core::transition::ControlField;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(field) = ControlField::from_json(text) {
        assert_eq!(ControlField::from_json(&field.to_json()).expect("round trip"), field);
    }
});
