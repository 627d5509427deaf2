#![no_main]

use cinepipe_core::clients::EndpointRegistry;
use cinepipe_pipeline::PipelineConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = PipelineConfig::parse(text);
    let _ = EndpointRegistry::load(text);
});
