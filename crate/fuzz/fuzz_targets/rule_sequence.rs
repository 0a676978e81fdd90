#![no_main]

use libfuzzer_sys::fuzz_target;
use tbl::bench::extended_registry;
use tbl::rules::RuleSequence;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let registry = extended_registry();
    let Ok(sequence) = RuleSequence::parse_jsonl(text, &registry) else { return };
    let written = sequence.to_jsonl();
    let again = RuleSequence::parse_jsonl(&written, &registry).expect("written sequence parses");
    assert_eq!(again.to_jsonl(), written);
    let _ = sequence.to_text();
});
