#![no_main]

use libfuzzer_sys::fuzz_target;
use tbl::bench::{extended_registry, ExperimentConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = ExperimentConfig::parse(text) else { return };
    let _ = config.condition_kinds(&extended_registry());
    let _ = config.synthetic.planted(&extended_registry());
});
