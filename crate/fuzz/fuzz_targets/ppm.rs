#![no_main]

use cinepipe_core::clients::media::Image;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = Image::decode_ppm(data) {
        let again = Image::decode_ppm(&img.encode_ppm()).expect("encoded image decodes");
        assert_eq!(again, img);
    }
});
