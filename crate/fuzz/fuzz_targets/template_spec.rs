#![no_main]

use libfuzzer_sys::fuzz_target;
use tbl::bench::extended_registry;
use tbl::templates::{format_template_spec, parse_template_spec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let registry = extended_registry();
    let Ok(templates) = parse_template_spec(text, &registry) else { return };
    let again = parse_template_spec(&format_template_spec(&templates), &registry).expect("formatted spec parses");
    assert_eq!(again, templates);
});
