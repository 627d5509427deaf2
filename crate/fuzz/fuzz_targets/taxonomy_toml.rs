#![no_main]

use cinepipe_core::taxonomy::{generate_plan, Taxonomy};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(tax) = Taxonomy::load(text) {
        let plan = generate_plan(32, &tax, 0).expect("a loaded taxonomy can be sampled");
        for s in &plan.entries {
            tax.validate(s).expect("sampled signals validate");
        }
    }
});
