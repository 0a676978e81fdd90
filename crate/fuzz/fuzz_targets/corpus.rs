#![no_main]

use libfuzzer_sys::fuzz_target;
use tbl::corpus::{Corpus, TagField};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(corpus) = Corpus::parse(text) else { return };
    let written = corpus.to_jsonl(TagField::Gold);
    let again = Corpus::parse(&written).expect("written corpus parses");
    assert_eq!(again.to_jsonl(TagField::Gold), written);
});
