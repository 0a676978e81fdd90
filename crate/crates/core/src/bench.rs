//! Template-scaling experiments on synthetic corpora.
//!
//! For each `n`, the first `n` conditions of a list are combined into all
//! `2^n` templates, every configured trainer is run on a synthetic training
//! corpus, and the learned model is scored on a held-out corpus. Cost is
//! reported with machine-independent proxies: the number of candidate rules
//! generated over the whole run (time) and the largest number of distinct
//! candidates held in one iteration (memory). Wall-clock time is recorded
//! only on request since it breaks byte-for-byte reproducibility.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Dialogue, Site, Tag, Utterance};
use crate::error::{Error, Result};
use crate::learner::{
    evaluate, tag, train, InitialTagPolicy, IterationRecord, TrainConfig, TrainingMode,
};
use crate::rules::{apply_rule, exhaustive_candidate_count, Rule};
use crate::templates::{
    power_set_templates, BindingDomain, BoundCondition, Condition, ConditionKind,
    ConditionRegistry, Value, CHANGE_OF_SPEAKER, CURRENT_TAG, INCLUDES_WORD, PREVIOUS_TAG,
};

pub const FIRST_WORD: &str = "first_word";
pub const LAST_WORD: &str = "last_word";
pub const TAG_TWO_BACK: &str = "tag_two_back";
pub const INCLUDES_BIGRAM: &str = "includes_bigram";

/// The utterance starts with the word.
pub struct FirstWord;

impl Condition for FirstWord {
    fn name(&self) -> &str {
        FIRST_WORD
    }

    fn domain(&self) -> BindingDomain {
        BindingDomain::Token
    }

    fn bindings(&self, site: &Site<'_>) -> Vec<Value> {
        vec![Value::Token(site.utterance().tokens()[0].clone())]
    }

    fn holds(&self, site: &Site<'_>, value: &Value) -> bool {
        matches!(value, Value::Token(w) if *w == site.utterance().tokens()[0])
    }
}

/// The utterance ends with the word.
pub struct LastWord;

impl Condition for LastWord {
    fn name(&self) -> &str {
        LAST_WORD
    }

    fn domain(&self) -> BindingDomain {
        BindingDomain::Token
    }

    fn bindings(&self, site: &Site<'_>) -> Vec<Value> {
        let tokens = site.utterance().tokens();
        vec![Value::Token(tokens[tokens.len() - 1].clone())]
    }

    fn holds(&self, site: &Site<'_>, value: &Value) -> bool {
        let tokens = site.utterance().tokens();
        matches!(value, Value::Token(w) if *w == tokens[tokens.len() - 1])
    }
}

/// The working tag two utterances back.
pub struct TagTwoBack;

impl Condition for TagTwoBack {
    fn name(&self) -> &str {
        TAG_TWO_BACK
    }

    fn domain(&self) -> BindingDomain {
        BindingDomain::Tag
    }

    fn reads_neighbor_tags(&self) -> bool {
        true
    }

    fn bindings(&self, site: &Site<'_>) -> Vec<Value> {
        site.tag_back(2)
            .map(|t| Value::Tag(t.clone()))
            .into_iter()
            .collect()
    }

    fn holds(&self, site: &Site<'_>, value: &Value) -> bool {
        matches!(value, Value::Tag(t) if site.tag_back(2) == Some(t))
    }
}

/// The utterance contains two given words side by side. Binds many values
/// per utterance, so templates using it dominate exhaustive cost.
pub struct IncludesBigram;

impl Condition for IncludesBigram {
    fn name(&self) -> &str {
        INCLUDES_BIGRAM
    }

    fn domain(&self) -> BindingDomain {
        BindingDomain::TokenSequence
    }

    fn bindings(&self, site: &Site<'_>) -> Vec<Value> {
        let tokens = site.utterance().tokens();
        let mut values: Vec<Value> = Vec::new();
        for pair in tokens.windows(2) {
            let value = Value::Tokens(Arc::from(pair));
            if !values.contains(&value) {
                values.push(value);
            }
        }
        values
    }

    fn holds(&self, site: &Site<'_>, value: &Value) -> bool {
        match value {
            Value::Tokens(pattern) if pattern.len() == 2 => site
                .utterance()
                .tokens()
                .windows(2)
                .any(|pair| pair == &pattern[..]),
            _ => false,
        }
    }
}

/// Built-in kinds plus the four experiment kinds above.
pub fn extended_registry() -> ConditionRegistry {
    let mut registry = ConditionRegistry::builtin();
    for kind in [
        ConditionKind::new(FirstWord),
        ConditionKind::new(LastWord),
        ConditionKind::new(TagTwoBack),
        ConditionKind::new(IncludesBigram),
    ] {
        registry
            .register(kind)
            .expect("experiment names are distinct");
    }
    registry
}

/// The eight-condition list used by default. The word-pattern condition sits
/// in seventh place.
pub fn default_condition_names() -> Vec<String> {
    [
        CHANGE_OF_SPEAKER,
        INCLUDES_WORD,
        CURRENT_TAG,
        PREVIOUS_TAG,
        FIRST_WORD,
        TAG_TWO_BACK,
        INCLUDES_BIGRAM,
        LAST_WORD,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub kind: String,
    pub value: serde_json::Value,
}

/// A rule used to generate gold tags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedPattern {
    pub conditions: Vec<ConditionSpec>,
    pub target: String,
}

impl PlantedPattern {
    fn new(conditions: &[(&str, serde_json::Value)], target: &str) -> Self {
        PlantedPattern {
            conditions: conditions
                .iter()
                .map(|(kind, value)| ConditionSpec {
                    kind: kind.to_string(),
                    value: value.clone(),
                })
                .collect(),
            target: target.to_string(),
        }
    }
}

/// Parameters of the synthetic corpus generator.
///
/// Tokens are `w0..w{vocabulary_size-1}` and tags `T0..T{tag_count-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Training dialogues.
    pub num_dialogues: usize,
    pub test_dialogues: usize,
    pub utterances_per_dialogue: usize,
    pub vocabulary_size: usize,
    pub tag_count: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub speaker_count: usize,
    /// Probability that an utterance switches to a different speaker.
    pub speaker_change_rate: f64,
    /// Applied in order on top of an all-`T0` labelling.
    pub planted_rules: Vec<PlantedPattern>,
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_dialogues: 50,
            test_dialogues: 20,
            utterances_per_dialogue: 10,
            vocabulary_size: 40,
            tag_count: 5,
            min_tokens: 3,
            max_tokens: 7,
            speaker_count: 2,
            speaker_change_rate: 0.5,
            planted_rules: default_planted_rules(),
            noise_rate: 0.05,
            seed: 1998,
        }
    }
}

fn default_planted_rules() -> Vec<PlantedPattern> {
    use serde_json::json;
    vec![
        PlantedPattern::new(&[(INCLUDES_WORD, json!("w1"))], "T1"),
        PlantedPattern::new(
            &[
                (CHANGE_OF_SPEAKER, json!(true)),
                (INCLUDES_WORD, json!("w2")),
            ],
            "T2",
        ),
        PlantedPattern::new(
            &[(PREVIOUS_TAG, json!("T1")), (INCLUDES_WORD, json!("w3"))],
            "T3",
        ),
    ]
}

fn token_name(i: usize) -> String {
    format!("w{i}")
}

fn tag_name(i: usize) -> String {
    format!("T{i}")
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let counts = [
            ("num_dialogues", self.num_dialogues),
            ("test_dialogues", self.test_dialogues),
            ("utterances_per_dialogue", self.utterances_per_dialogue),
            ("vocabulary_size", self.vocabulary_size),
            ("tag_count", self.tag_count),
            ("min_tokens", self.min_tokens),
            ("speaker_count", self.speaker_count),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Spec(format!("{name} must be at least 1")));
        }
        if self.max_tokens < self.min_tokens {
            return Err(Error::Spec("max_tokens is below min_tokens".into()));
        }
        for (name, rate) in [
            ("noise_rate", self.noise_rate),
            ("speaker_change_rate", self.speaker_change_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Spec(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    /// Resolves planted patterns, rejecting tokens and tags the generator never emits.
    pub fn planted(&self, registry: &ConditionRegistry) -> Result<Vec<Rule>> {
        let known_token = |w: &str| {
            w.strip_prefix('w')
                .and_then(|i| i.parse::<usize>().ok())
                .is_some_and(|i| i < self.vocabulary_size && token_name(i) == w)
        };
        let known_tag = |t: &str| {
            t.strip_prefix('T')
                .and_then(|i| i.parse::<usize>().ok())
                .is_some_and(|i| i < self.tag_count && tag_name(i) == t)
        };
        self.planted_rules
            .iter()
            .map(|pattern| {
                let conditions = pattern
                    .conditions
                    .iter()
                    .map(|c| {
                        let kind = registry.get(&c.kind)?;
                        let value = Value::from_json(kind.domain(), &c.value)
                            .map_err(|e| Error::Spec(e.to_string()))?;
                        let in_range = match &value {
                            Value::Bool(_) => true,
                            Value::Token(w) => known_token(w),
                            Value::Tokens(ws) => ws.iter().all(|w| known_token(w)),
                            Value::Tag(t) => known_tag(t.as_str()),
                        };
                        if !in_range {
                            return Err(Error::Spec(format!(
                                "planted pattern value {value} is outside the generated vocabulary or tag set"
                            )));
                        }
                        BoundCondition::new(kind, value)
                    })
                    .collect::<Result<Vec<_>>>()?;
                if !known_tag(&pattern.target) {
                    return Err(Error::Spec(format!("planted target `{}` is not a generated tag", pattern.target)));
                }
                Rule::new(conditions, Tag::new(&pattern.target)?)
            })
            .collect()
    }
}

fn draw_dialogues(
    spec: &SyntheticSpec,
    prefix: &str,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Dialogue>> {
    let speakers: Vec<String> = (0..spec.speaker_count)
        .map(|i| ((b'A' + (i % 26) as u8) as char).to_string() + &"'".repeat(i / 26))
        .collect();
    let mut dialogues = Vec::with_capacity(count);
    for i in 0..count {
        let mut speaker = rng.gen_range(0..speakers.len());
        let mut utterances = Vec::with_capacity(spec.utterances_per_dialogue);
        for position in 0..spec.utterances_per_dialogue {
            if position > 0 && speakers.len() > 1 && rng.gen_bool(spec.speaker_change_rate) {
                speaker = (speaker + rng.gen_range(1..speakers.len())) % speakers.len();
            }
            let length = rng.gen_range(spec.min_tokens..=spec.max_tokens);
            let tokens: Vec<String> = (0..length)
                .map(|_| token_name(rng.gen_range(0..spec.vocabulary_size)))
                .collect();
            utterances.push(Utterance::new(&speakers[speaker], &tokens, None)?);
        }
        dialogues.push(Dialogue::new(&format!("{prefix}-{i:04}"), utterances)?);
    }
    Ok(dialogues)
}

fn label(
    dialogues: Vec<Dialogue>,
    planted: &[Rule],
    spec: &SyntheticSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Corpus> {
    let mut corpus = Corpus::new(dialogues)?;
    corpus.fill_working_tags(&Tag::new(&tag_name(0))?);
    for rule in planted {
        apply_rule(rule, &mut corpus)?;
    }
    corpus.promote_working_to_gold();
    for (d, p) in corpus.locations().collect::<Vec<_>>() {
        if spec.tag_count > 1 && rng.gen_bool(spec.noise_rate) {
            let gold = corpus
                .utterance(d, p)?
                .gold_tag()
                .expect("labelled")
                .clone();
            let current = gold.as_str()[1..]
                .parse::<usize>()
                .expect("generated tag name");
            let other = (current + rng.gen_range(1..spec.tag_count)) % spec.tag_count;
            corpus.set_gold_tag(d, p, Tag::new(&tag_name(other))?);
        }
    }
    corpus.clear_working_tags();
    // Rebuild so the inventory holds exactly the tags in use.
    Corpus::new(corpus.into_dialogues())
}

/// Draws a training and a test corpus from the same process. Deterministic in `spec.seed`.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    registry: &ConditionRegistry,
) -> Result<(Corpus, Corpus)> {
    spec.validate()?;
    let planted = spec.planted(registry)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let train_dialogues = draw_dialogues(spec, "train", spec.num_dialogues, &mut rng)?;
    let test_dialogues = draw_dialogues(spec, "test", spec.test_dialogues, &mut rng)?;
    let train = label(train_dialogues, &planted, spec, &mut rng)?;
    let test = label(test_dialogues, &planted, spec, &mut rng)?;
    Ok((train, test))
}

/// One trainer configuration in an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub mode: TrainingMode,
    /// Required for lazy mode; ignored otherwise.
    #[serde(default)]
    pub samples: Option<usize>,
}

impl ModeSpec {
    pub fn exhaustive() -> Self {
        ModeSpec {
            mode: TrainingMode::Exhaustive,
            samples: None,
        }
    }

    pub fn lazy(samples: usize) -> Self {
        ModeSpec {
            mode: TrainingMode::Lazy,
            samples: Some(samples),
        }
    }

    fn samples_per_instance(&self) -> Option<usize> {
        match self.mode {
            TrainingMode::Exhaustive => None,
            TrainingMode::Lazy => self.samples,
        }
    }
}

/// Experiment configuration, read from a single JSON object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Condition kind names; the first `n` are combined for each `n`.
    pub conditions: Vec<String>,
    pub min_n: usize,
    pub max_n: usize,
    pub modes: Vec<ModeSpec>,
    pub seeds: Vec<u64>,
    pub synthetic: SyntheticSpec,
    pub threshold: i64,
    /// Exhaustive runs whose first iteration would generate more candidate
    /// rules than this are skipped.
    pub exhaustive_budget: u64,
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            conditions: default_condition_names(),
            min_n: 0,
            max_n: 8,
            modes: vec![
                ModeSpec::exhaustive(),
                ModeSpec::lazy(1),
                ModeSpec::lazy(6),
                ModeSpec::lazy(16),
            ],
            seeds: (0..10).collect(),
            synthetic: SyntheticSpec::default(),
            threshold: 1,
            exhaustive_budget: 1_000_000,
            record_wall_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_n > self.max_n {
            return Err(Error::Argument("min_n exceeds max_n".into()));
        }
        if self.max_n > self.conditions.len() {
            return Err(Error::Argument(format!(
                "max_n = {} exceeds the {} listed conditions",
                self.max_n,
                self.conditions.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = self
            .conditions
            .iter()
            .find(|c| !seen.insert(c.to_lowercase()))
        {
            return Err(Error::DuplicateCondition(dup.clone()));
        }
        if self.max_n > 16 {
            return Err(Error::Argument("max_n above 16 is not supported".into()));
        }
        if self.modes.is_empty() || self.seeds.is_empty() {
            return Err(Error::Argument(
                "at least one mode and one seed are required".into(),
            ));
        }
        if let Some(m) = self
            .modes
            .iter()
            .find(|m| m.mode == TrainingMode::Lazy && m.samples.is_none())
        {
            return Err(Error::Argument(format!("lazy mode needs `samples`: {m:?}")));
        }
        if self.threshold < 1 {
            return Err(Error::Argument("threshold must be at least 1".into()));
        }
        self.synthetic.validate()
    }

    pub fn condition_kinds(&self, registry: &ConditionRegistry) -> Result<Vec<ConditionKind>> {
        self.conditions
            .iter()
            .map(|name| registry.get(name))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    /// Exhaustive run over the candidate budget; not trained.
    Skipped,
    /// Training stopped at the iteration cap.
    Capped,
}

/// One CSV row. Cost and accuracy fields are empty for skipped runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub n_conditions: usize,
    pub template_count: usize,
    pub mode: TrainingMode,
    pub samples_per_instance: Option<usize>,
    pub seed: u64,
    pub status: RunStatus,
    pub candidates_generated_total: Option<u64>,
    pub peak_distinct_candidates: Option<u64>,
    pub iterations: Option<usize>,
    pub wall_time_ms: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct BenchRun {
    pub row: BenchRow,
    /// Per-iteration trace; empty for skipped runs.
    pub records: Vec<IterationRecord>,
    /// Training-set utterance count.
    pub train_size: usize,
    pub initial_train_accuracy: Option<f64>,
    /// First-iteration candidate count, for exhaustive runs.
    pub projected_candidates: Option<u64>,
}

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub runs: Vec<BenchRun>,
}

impl BenchReport {
    pub fn rows(&self) -> impl Iterator<Item = &BenchRow> {
        self.runs.iter().map(|r| &r.row)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in self.rows() {
            writer.serialize(row)?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

/// First-iteration exhaustive candidate count after initial tagging.
pub fn projected_exhaustive_candidates(
    corpus: &Corpus,
    templates: &[crate::templates::Template],
    policy: &InitialTagPolicy,
) -> Result<u64> {
    let mut scratch = corpus.clone();
    crate::learner::initial_tag(&mut scratch, policy)?;
    scratch
        .error_locations()
        .into_iter()
        .map(|(d, p)| exhaustive_candidate_count(&scratch, d, p, templates))
        .sum()
}

/// Generates the synthetic corpora from `config` and runs every experiment.
pub fn run_scaling_experiment(
    config: &ExperimentConfig,
    registry: &ConditionRegistry,
) -> Result<BenchReport> {
    config.validate()?;
    let (train_corpus, test_corpus) = generate_synthetic(&config.synthetic, registry)?;
    run_on_corpora(config, registry, &train_corpus, &test_corpus)
}

struct Job {
    n: usize,
    mode: ModeSpec,
    /// `None` for exhaustive runs, which do not depend on the seed.
    seed: Option<u64>,
}

/// Runs every `(n, mode, seed)` combination on the given corpora.
///
/// Exhaustive training does not consume randomness, so it runs once per `n`
/// and its result is reported under every seed.
pub fn run_on_corpora(
    config: &ExperimentConfig,
    registry: &ConditionRegistry,
    train_corpus: &Corpus,
    test_corpus: &Corpus,
) -> Result<BenchReport> {
    config.validate()?;
    let kinds = config.condition_kinds(registry)?;
    let mut modes = config.modes.clone();
    modes.sort_by_key(|m| (m.mode, m.samples_per_instance()));
    modes.dedup();
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();

    let mut jobs = Vec::new();
    for n in config.min_n..=config.max_n {
        for &mode in &modes {
            match mode.mode {
                TrainingMode::Exhaustive => jobs.push(Job {
                    n,
                    mode,
                    seed: None,
                }),
                TrainingMode::Lazy => jobs.extend(seeds.iter().map(|&s| Job {
                    n,
                    mode,
                    seed: Some(s),
                })),
            }
        }
    }

    let results: Vec<Vec<BenchRun>> = jobs
        .par_iter()
        .map(|job| run_job(job, config, &kinds, &seeds, train_corpus, test_corpus))
        .collect::<Result<_>>()?;
    let mut runs: Vec<BenchRun> = results.into_iter().flatten().collect();
    runs.sort_by_key(|r| {
        (
            r.row.n_conditions,
            r.row.mode,
            r.row.samples_per_instance,
            r.row.seed,
        )
    });
    Ok(BenchReport { runs })
}

fn run_job(
    job: &Job,
    config: &ExperimentConfig,
    kinds: &[ConditionKind],
    seeds: &[u64],
    train_corpus: &Corpus,
    test_corpus: &Corpus,
) -> Result<Vec<BenchRun>> {
    let templates = power_set_templates(kinds, job.n)?;
    let policy = InitialTagPolicy::MostFrequentGold;
    let base_row = BenchRow {
        n_conditions: job.n,
        template_count: templates.len(),
        mode: job.mode.mode,
        samples_per_instance: job.mode.samples_per_instance(),
        seed: job.seed.unwrap_or(0),
        status: RunStatus::Ok,
        candidates_generated_total: None,
        peak_distinct_candidates: None,
        iterations: None,
        wall_time_ms: None,
        train_accuracy: None,
        test_accuracy: None,
    };
    let projected = match job.mode.mode {
        TrainingMode::Exhaustive => Some(projected_exhaustive_candidates(
            train_corpus,
            &templates,
            &policy,
        )?),
        TrainingMode::Lazy => None,
    };

    let run = if projected.is_some_and(|p| p > config.exhaustive_budget) {
        BenchRun {
            row: BenchRow {
                status: RunStatus::Skipped,
                ..base_row
            },
            records: Vec::new(),
            train_size: train_corpus.len(),
            initial_train_accuracy: None,
            projected_candidates: projected,
        }
    } else {
        let train_config = TrainConfig {
            mode: job.mode.mode,
            samples_per_instance: job.mode.samples_per_instance().unwrap_or(0),
            threshold: config.threshold,
            seed: job.seed.unwrap_or(0),
            max_iterations: None,
            initial_tag_policy: policy,
        };
        let mut corpus = train_corpus.clone();
        let started = Instant::now();
        let outcome = train(&mut corpus, &templates, &train_config)?;
        let elapsed = started.elapsed();
        let mut test = test_corpus.clone();
        tag(
            &mut test,
            &outcome.sequence,
            &outcome.sequence.metadata().replay_policy(),
        )?;
        BenchRun {
            row: BenchRow {
                status: if outcome.hit_max_iterations {
                    RunStatus::Capped
                } else {
                    RunStatus::Ok
                },
                candidates_generated_total: Some(outcome.candidates_generated_total),
                peak_distinct_candidates: Some(outcome.peak_distinct_candidates),
                iterations: Some(outcome.records.len()),
                wall_time_ms: config.record_wall_time.then_some(elapsed.as_secs_f64() * 1e3),
                train_accuracy: Some(outcome.final_accuracy()),
                test_accuracy: Some(evaluate(&test)?),
                ..base_row
            },
            records: outcome.records,
            train_size: train_corpus.len(),
            initial_train_accuracy: Some(outcome.initial_accuracy),
            projected_candidates: projected,
        }
    };

    Ok(match job.seed {
        Some(_) => vec![run],
        None => seeds
            .iter()
            .map(|&seed| {
                let mut copy = run.clone();
                copy.row.seed = seed;
                copy
            })
            .collect(),
    })
}
