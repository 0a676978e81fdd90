#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use tbl::corpus::{load_corpus, Corpus, Tag};
use tbl::rules::RuleSequence;
use tbl::templates::{parse_template_spec, ConditionRegistry, Template};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

pub fn tag(name: &str) -> Tag {
    Tag::new(name).unwrap()
}

pub fn homework() -> Corpus {
    load_corpus(data("homework.jsonl")).unwrap()
}

pub fn homework_rules() -> RuleSequence {
    RuleSequence::load(data("homework.rules.jsonl"), &ConditionRegistry::builtin()).unwrap()
}

pub fn homework_templates() -> Vec<Template> {
    let text = std::fs::read_to_string(data("homework.templates")).unwrap();
    parse_template_spec(&text, &ConditionRegistry::builtin()).unwrap()
}

pub fn working_tags(corpus: &Corpus) -> Vec<String> {
    corpus
        .utterances()
        .map(|u| u.working_tag().map_or("-".to_string(), |t| t.to_string()))
        .collect()
}

/// Builds a corpus from `(dialogue, speaker, tokens, gold)` rows.
pub fn corpus_from(rows: &[(&str, &str, &[&str], &str)]) -> Corpus {
    let text: String = rows
        .iter()
        .map(|(d, s, toks, t)| {
            serde_json::json!({"dialogue": d, "speaker": s, "tokens": toks, "tag": t}).to_string()
                + "\n"
        })
        .collect();
    Corpus::parse(&text).unwrap()
}

/// A 20-utterance synthetic training corpus with random working tags.
pub fn small_tagged_corpus(seed: u64) -> Corpus {
    use rand::{Rng, SeedableRng};
    use tbl::bench::{generate_synthetic, PlantedPattern, SyntheticSpec};

    let spec = SyntheticSpec {
        num_dialogues: 4,
        test_dialogues: 1,
        utterances_per_dialogue: 5,
        vocabulary_size: 10,
        tag_count: 3,
        min_tokens: 2,
        max_tokens: 4,
        planted_rules: serde_json::from_value::<Vec<PlantedPattern>>(serde_json::json!([
            {"conditions": [{"kind": "includes_word", "value": "w1"}], "target": "T1"},
            {"conditions": [{"kind": "previous_tag", "value": "T1"}], "target": "T2"},
        ]))
        .unwrap(),
        seed,
        ..SyntheticSpec::default()
    };
    let (mut corpus, _) = generate_synthetic(&spec, &ConditionRegistry::builtin()).unwrap();
    let tags: Vec<Tag> = corpus.tag_inventory().iter().cloned().collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let sites: Vec<_> = corpus.locations().collect();
    for (d, p) in sites {
        let pick = tags[rng.gen_range(0..tags.len())].clone();
        corpus.set_working_tag(d, p, pick).unwrap();
    }
    corpus
}
