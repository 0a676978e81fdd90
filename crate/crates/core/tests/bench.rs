mod common;

use tbl::bench::{
    extended_registry, generate_synthetic, run_on_corpora, run_scaling_experiment,
    ExperimentConfig, ModeSpec, RunStatus, SyntheticSpec,
};
use tbl::corpus::TagField;
use tbl::learner::{evaluate, tag, train, InitialTagPolicy, TrainConfig, TrainingMode};
use tbl::templates::{power_set_templates, ConditionKind, ConditionRegistry};
use tbl::Error;

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        conditions: vec![
            "includes_word".into(),
            "change_of_speaker".into(),
            "previous_tag".into(),
        ],
        min_n: 0,
        max_n: 3,
        modes: vec![ModeSpec::exhaustive(), ModeSpec::lazy(2), ModeSpec::lazy(6)],
        seeds: vec![0, 1, 2],
        synthetic: SyntheticSpec {
            num_dialogues: 12,
            test_dialogues: 6,
            ..SyntheticSpec::default()
        },
        ..ExperimentConfig::default()
    }
}

#[test]
fn generator_is_deterministic_and_seed_sensitive() {
    let registry = extended_registry();
    let spec = SyntheticSpec::default();
    let (a, at) = generate_synthetic(&spec, &registry).unwrap();
    let (b, bt) = generate_synthetic(&spec, &registry).unwrap();
    assert_eq!(a.to_jsonl(TagField::Gold), b.to_jsonl(TagField::Gold));
    assert_eq!(at.to_jsonl(TagField::Gold), bt.to_jsonl(TagField::Gold));
    assert_eq!((a.len(), at.len()), (500, 200));
    let (c, _) = generate_synthetic(&SyntheticSpec { seed: 7, ..spec }, &registry).unwrap();
    assert_ne!(a.to_jsonl(TagField::Gold), c.to_jsonl(TagField::Gold));
    assert!(!a.is_fully_tagged());
}

#[test]
fn unconditional_pattern_without_noise_labels_everything() {
    let spec: SyntheticSpec = serde_json::from_value(serde_json::json!({
        "planted_rules": [{"conditions": [], "target": "T3"}],
        "noise_rate": 0.0,
        "num_dialogues": 5,
        "test_dialogues": 2,
    }))
    .unwrap();
    let (train, test) = generate_synthetic(&spec, &extended_registry()).unwrap();
    for u in train.utterances().chain(test.utterances()) {
        assert_eq!(u.gold_tag().unwrap().as_str(), "T3");
    }
}

#[test]
fn bad_patterns_are_spec_errors() {
    for pattern in [
        serde_json::json!({"conditions": [{"kind": "includes_word", "value": "w999"}], "target": "T1"}),
        serde_json::json!({"conditions": [], "target": "T9"}),
        serde_json::json!({"conditions": [{"kind": "no_such_condition", "value": true}], "target": "T1"}),
    ] {
        let spec: SyntheticSpec =
            serde_json::from_value(serde_json::json!({ "planted_rules": [pattern] })).unwrap();
        let err = generate_synthetic(&spec, &extended_registry()).unwrap_err();
        assert!(
            matches!(err, Error::Spec(_) | Error::UnknownCondition(_)),
            "{err}"
        );
    }
}

#[test]
fn exhaustive_recovers_planted_patterns() {
    let registry = ConditionRegistry::builtin();
    let (mut train_corpus, mut test) =
        generate_synthetic(&SyntheticSpec::default(), &registry).unwrap();
    let kinds: Vec<ConditionKind> = registry.kinds().cloned().collect();
    let templates = power_set_templates(&kinds, 4).unwrap();
    let outcome = train(&mut train_corpus, &templates, &TrainConfig::exhaustive()).unwrap();
    tag(
        &mut test,
        &outcome.sequence,
        &outcome.sequence.metadata().replay_policy(),
    )
    .unwrap();
    let accuracy = evaluate(&test).unwrap();
    assert!(accuracy >= 0.90, "{accuracy}");
    // Regression baseline for the default corpus.
    assert!((accuracy - 0.96).abs() < 1e-9, "{accuracy}");
}

#[test]
fn scaling_report_shape_and_laws() {
    let config = small_config();
    let report = run_scaling_experiment(&config, &extended_registry()).unwrap();
    // 4 values of n, 3 modes, 3 seeds.
    assert_eq!(report.runs.len(), 4 * 3 * 3);

    let exhaustive: Vec<u64> = report
        .rows()
        .filter(|r| r.mode == TrainingMode::Exhaustive && r.seed == 0)
        .map(|r| r.candidates_generated_total.unwrap())
        .collect();
    assert_eq!(exhaustive.len(), 4);
    assert!(exhaustive.windows(2).all(|w| w[0] < w[1]), "{exhaustive:?}");

    for run in &report.runs {
        let row = &run.row;
        assert_eq!(row.status, RunStatus::Ok);
        assert_eq!(row.template_count, 1 << row.n_conditions);
        if row.mode == TrainingMode::Lazy {
            let r = row.samples_per_instance.unwrap() as u64;
            for record in &run.records {
                assert_eq!(record.candidates_generated, r * record.errors_before as u64);
            }
            let peer = report
                .rows()
                .find(|e| {
                    e.mode == TrainingMode::Exhaustive
                        && e.n_conditions == row.n_conditions
                        && e.seed == row.seed
                })
                .unwrap();
            assert!(row.peak_distinct_candidates <= peer.peak_distinct_candidates);
        }
    }

    // With no conditions the only rule is unconditional, so every mode
    // tags the test set with the majority training tag.
    let (train_corpus, test_corpus) =
        generate_synthetic(&config.synthetic, &extended_registry()).unwrap();
    let mut majority = train_corpus.clone();
    let tag0 =
        tbl::learner::initial_tag(&mut majority, &InitialTagPolicy::MostFrequentGold).unwrap();
    let share = test_corpus
        .utterances()
        .filter(|u| u.gold_tag() == Some(&tag0))
        .count() as f64
        / test_corpus.len() as f64;
    for row in report.rows().filter(|r| r.n_conditions == 0) {
        assert!((row.test_accuracy.unwrap() - share).abs() < 1e-12);
    }
}

#[test]
fn over_budget_exhaustive_runs_are_skipped() {
    let config = ExperimentConfig {
        exhaustive_budget: 50,
        modes: vec![ModeSpec::exhaustive()],
        seeds: vec![3],
        ..small_config()
    };
    let registry = extended_registry();
    let (train_corpus, test_corpus) = generate_synthetic(&config.synthetic, &registry).unwrap();
    let report = run_on_corpora(&config, &registry, &train_corpus, &test_corpus).unwrap();
    let skipped: Vec<_> = report
        .rows()
        .filter(|r| r.status == RunStatus::Skipped)
        .collect();
    assert!(!skipped.is_empty());
    for row in &skipped {
        assert!(row.candidates_generated_total.is_none() && row.test_accuracy.is_none());
    }
    let csv = report.to_csv().unwrap();
    assert!(csv.lines().next().unwrap().starts_with("n_conditions,"));
    assert!(csv.contains(",skipped,"), "{csv}");
}

#[test]
fn config_validation() {
    assert!(ExperimentConfig::parse(r#"{"max_n": 9}"#).is_err());
    assert!(ExperimentConfig::parse(r#"{"modes": [{"mode": "lazy"}]}"#).is_err());
    assert!(ExperimentConfig::parse(r#"{"seeds": []}"#).is_err());
    assert!(ExperimentConfig::parse(r#"{"colour": 1}"#).is_err());
    assert!(ExperimentConfig::parse(
        r#"{"conditions": ["includes_word", "includes_word"], "max_n": 2}"#
    )
    .is_err());
    let config = ExperimentConfig::parse("{}").unwrap();
    assert_eq!(config.conditions.len(), 8);
    assert_eq!(config.seeds.len(), 10);
}
