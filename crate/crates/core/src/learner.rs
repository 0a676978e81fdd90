//! The greedy training loop, plus tagging and evaluation.
//!
//! Each iteration gathers the currently mistagged utterances, generates
//! candidate rules for them (all of them in exhaustive mode, `R` random draws
//! per utterance in lazy mode), scores every distinct candidate against the
//! corpus, and keeps the best one if it clears the threshold.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Tag};
use crate::error::{Error, Result};
use crate::rules::{
    apply_rule, candidate_rules_exhaustive, candidate_rules_sampled, compare_candidates, Rule,
    RuleScore, RuleSequence, ScoringIndex, SequenceMetadata,
};
use crate::templates::{ConditionKind, Template};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingMode {
    Exhaustive,
    Lazy,
}

impl fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainingMode::Exhaustive => "exhaustive",
            TrainingMode::Lazy => "lazy",
        })
    }
}

impl FromStr for TrainingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(TrainingMode::Exhaustive),
            "lazy" => Ok(TrainingMode::Lazy),
            other => Err(Error::Argument(format!("unknown training mode `{other}`"))),
        }
    }
}

/// How every utterance is labelled before the first rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitialTagPolicy {
    /// The most frequent gold tag; ties go to the lexicographically smallest.
    MostFrequentGold,
    Fixed(Tag),
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub mode: TrainingMode,
    /// Rules drawn per mistagged utterance per iteration; lazy mode only.
    pub samples_per_instance: usize,
    /// Minimum net score a rule needs to be kept.
    pub threshold: i64,
    pub seed: u64,
    /// Defaults to ten times the utterance count.
    pub max_iterations: Option<usize>,
    pub initial_tag_policy: InitialTagPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainingMode::Lazy,
            samples_per_instance: 6,
            threshold: 1,
            seed: 0,
            max_iterations: None,
            initial_tag_policy: InitialTagPolicy::MostFrequentGold,
        }
    }
}

impl TrainConfig {
    pub fn exhaustive() -> Self {
        TrainConfig {
            mode: TrainingMode::Exhaustive,
            ..Self::default()
        }
    }

    pub fn lazy(samples_per_instance: usize, seed: u64) -> Self {
        TrainConfig {
            mode: TrainingMode::Lazy,
            samples_per_instance,
            seed,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    #[serde(serialize_with = "serialize_display")]
    pub chosen_rule: Rule,
    pub score: RuleScore,
    /// Rules generated before duplicates were dropped.
    pub candidates_generated: u64,
    pub distinct_candidates: u64,
    pub errors_before: usize,
    /// Training accuracy after the chosen rule was applied.
    pub training_accuracy: f64,
}

fn serialize_display<S: serde::Serializer>(
    rule: &Rule,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    serializer.collect_str(rule)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub sequence: RuleSequence,
    pub records: Vec<IterationRecord>,
    /// Set when the iteration cap stopped training; this indicates a bug.
    pub hit_max_iterations: bool,
    /// Training accuracy after initial tagging, before any rule.
    pub initial_accuracy: f64,
    /// Candidates generated over all iterations, including the last one
    /// that found no rule above threshold.
    pub candidates_generated_total: u64,
    /// Largest distinct-candidate set scored in any iteration.
    pub peak_distinct_candidates: u64,
}

impl TrainOutcome {
    pub fn final_accuracy(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_accuracy, |r| r.training_accuracy)
    }

    /// Per-iteration metrics, one JSON object per line.
    pub fn metrics_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("records serialize"));
            out.push('\n');
        }
        out
    }
}

/// Labels every utterance according to `policy` and returns the tag used.
pub fn initial_tag(corpus: &mut Corpus, policy: &InitialTagPolicy) -> Result<Tag> {
    let tag = match policy {
        InitialTagPolicy::Fixed(tag) => {
            if !corpus.tag_inventory().contains(tag) {
                return Err(Error::Argument(format!(
                    "initial tag `{tag}` is not in the tag inventory"
                )));
            }
            tag.clone()
        }
        InitialTagPolicy::MostFrequentGold => {
            corpus.require_gold()?;
            let mut counts: BTreeMap<&Tag, usize> = BTreeMap::new();
            for gold in corpus.utterances().filter_map(|u| u.gold_tag()) {
                *counts.entry(gold).or_default() += 1;
            }
            // BTreeMap iterates in tag order, so the first maximum wins ties.
            let (tag, _) = counts
                .into_iter()
                .fold(None, |best: Option<(&Tag, usize)>, (tag, n)| match best {
                    Some((_, m)) if m >= n => best,
                    _ => Some((tag, n)),
                })
                .expect("non-empty corpus");
            tag.clone()
        }
    };
    corpus.fill_working_tags(&tag);
    Ok(tag)
}

/// Candidates gathered for one iteration.
pub struct CandidateBatch {
    pub generated: u64,
    pub distinct: Vec<Rule>,
}

/// Generates candidates for every error location. Lazy mode draws from `rng`
/// in location order.
pub fn collect_candidates(
    corpus: &Corpus,
    errors: &[(usize, usize)],
    templates: &[Template],
    mode: TrainingMode,
    samples_per_instance: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CandidateBatch> {
    let mut generated = 0u64;
    let mut distinct = HashSet::new();
    for &(d, p) in errors {
        let rules = match mode {
            TrainingMode::Exhaustive => candidate_rules_exhaustive(corpus, d, p, templates)?,
            TrainingMode::Lazy => {
                candidate_rules_sampled(corpus, d, p, templates, samples_per_instance, rng)?
            }
        };
        generated += rules.len() as u64;
        distinct.extend(rules);
    }
    Ok(CandidateBatch {
        generated,
        distinct: distinct.into_iter().collect(),
    })
}

/// Scores candidates in parallel against one corpus snapshot; output order matches input.
pub fn score_candidates(
    corpus: &Corpus,
    candidates: &[Rule],
    kinds: &[ConditionKind],
) -> Vec<RuleScore> {
    let index = ScoringIndex::build(corpus, kinds);
    candidates
        .par_iter()
        .map(|rule| index.score(rule, corpus))
        .collect()
}

/// Index of the best candidate under [`compare_candidates`].
pub fn select_best(candidates: &[Rule], scores: &[RuleScore]) -> Option<usize> {
    (0..candidates.len()).min_by(|&a, &b| {
        compare_candidates((&candidates[a], &scores[a]), (&candidates[b], &scores[b]))
    })
}

fn template_kinds(templates: &[Template]) -> Vec<ConditionKind> {
    let mut kinds: Vec<ConditionKind> = templates
        .iter()
        .flat_map(|t| t.kinds().iter().cloned())
        .collect();
    kinds.sort();
    kinds.dedup();
    kinds
}

fn accuracy_of(corpus: &Corpus) -> f64 {
    let n = corpus.len();
    (n - corpus.error_count()) as f64 / n as f64
}

/// Learns a rule sequence from `corpus`, leaving it in its final tagged state.
pub fn train(
    corpus: &mut Corpus,
    templates: &[Template],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if templates.is_empty() {
        return Err(Error::Argument("template list is empty".into()));
    }
    if config.threshold < 1 {
        return Err(Error::Argument(format!(
            "threshold must be at least 1, got {}",
            config.threshold
        )));
    }
    corpus.require_gold()?;
    let resolved = initial_tag(corpus, &config.initial_tag_policy)?;
    let mut sequence = RuleSequence::new(SequenceMetadata {
        mode: config.mode,
        samples_per_instance: config.samples_per_instance,
        seed: config.seed,
        threshold: config.threshold,
        initial_tag_policy: config.initial_tag_policy.clone(),
        initial_tag: Some(resolved),
    });
    let kinds = template_kinds(templates);
    let max_iterations = config.max_iterations.unwrap_or(10 * corpus.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::new();
    let initial_accuracy = accuracy_of(corpus);
    let mut hit_max_iterations = false;
    let mut candidates_generated_total = 0;
    let mut peak_distinct_candidates = 0;

    loop {
        let errors = corpus.error_locations();
        if errors.is_empty() {
            break;
        }
        if records.len() >= max_iterations {
            hit_max_iterations = true;
            break;
        }
        let batch = collect_candidates(
            corpus,
            &errors,
            templates,
            config.mode,
            config.samples_per_instance,
            &mut rng,
        )?;
        candidates_generated_total += batch.generated;
        peak_distinct_candidates = peak_distinct_candidates.max(batch.distinct.len() as u64);
        let scores = score_candidates(corpus, &batch.distinct, &kinds);
        let Some(best) = select_best(&batch.distinct, &scores) else {
            break;
        };
        let score = scores[best];
        if score.net < config.threshold {
            break;
        }
        let rule = batch.distinct[best].clone();
        apply_rule(&rule, corpus)?;
        sequence.push(rule.clone(), Some(score));
        records.push(IterationRecord {
            iteration: records.len() + 1,
            chosen_rule: rule,
            score,
            candidates_generated: batch.generated,
            distinct_candidates: batch.distinct.len() as u64,
            errors_before: errors.len(),
            training_accuracy: accuracy_of(corpus),
        });
    }

    Ok(TrainOutcome {
        sequence,
        records,
        hit_max_iterations,
        initial_accuracy,
        candidates_generated_total,
        peak_distinct_candidates,
    })
}

/// Initial-tags `corpus` with `policy`, then applies the rules in order.
/// Tags the corpus has never seen are admitted to its inventory.
pub fn tag(corpus: &mut Corpus, sequence: &RuleSequence, policy: &InitialTagPolicy) -> Result<()> {
    if let InitialTagPolicy::Fixed(tag) = policy {
        corpus.admit_tag(tag);
    }
    initial_tag(corpus, policy)?;
    for rule in sequence.rules() {
        apply_rule(rule, corpus)?;
    }
    Ok(())
}

/// Fraction of utterances whose working tag equals gold.
pub fn evaluate(corpus: &Corpus) -> Result<f64> {
    corpus.require_gold()?;
    corpus.require_tagged()?;
    Ok(accuracy_of(corpus))
}

/// Accuracy of `predicted` (tags in the gold field, as written by tagging)
/// against `gold`. Both must hold the same utterances in the same order.
pub fn evaluate_predictions(gold: &Corpus, predicted: &Corpus) -> Result<f64> {
    gold.require_gold()?;
    predicted.require_gold()?;
    if gold.len() != predicted.len() || gold.dialogues().len() != predicted.dialogues().len() {
        return Err(Error::Argument(
            "predicted corpus does not match the gold corpus".into(),
        ));
    }
    let mut correct = 0;
    for (g, p) in gold.dialogues().iter().zip(predicted.dialogues()) {
        if g.id() != p.id() || g.len() != p.len() {
            return Err(Error::Argument(format!(
                "dialogue `{}` does not match `{}`",
                g.id(),
                p.id()
            )));
        }
        for (gu, pu) in g.utterances().iter().zip(p.utterances()) {
            if gu.tokens() != pu.tokens() || gu.speaker() != pu.speaker() {
                return Err(Error::Argument(format!(
                    "utterance {} of dialogue `{}` differs between gold and predicted",
                    gu.position(),
                    g.id()
                )));
            }
            correct += usize::from(gu.gold_tag() == pu.gold_tag());
        }
    }
    Ok(correct as f64 / gold.len() as f64)
}
