#![no_main]

use cinepipe_core::clients::media::Clip;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(clip) = Clip::decode(data) {
        let again = Clip::decode(&clip.encode()).expect("encoded clip decodes");
        assert_eq!(again, clip);
    }
});
