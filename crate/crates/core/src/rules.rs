//! Rules: applicability, application, scoring, and candidate generation.
//!
//! A rule rewrites an utterance's working tag to its target wherever all of
//! its bound conditions hold. Application is one left-to-right sweep per
//! dialogue with immediate updates, so `previous_tag` tests later in the same
//! sweep see tags the rule has just written.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Site, Tag};
use crate::error::{Error, Result};
use crate::learner::{InitialTagPolicy, TrainingMode};
use crate::templates::{BoundCondition, ConditionKind, ConditionRegistry, Template, Value};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    conditions: Vec<BoundCondition>,
    target: Tag,
}

impl Rule {
    pub fn new(mut conditions: Vec<BoundCondition>, target: Tag) -> Result<Self> {
        conditions.sort_by(|a, b| a.kind().cmp(b.kind()));
        if let Some(pair) = conditions.windows(2).find(|w| w[0].kind() == w[1].kind()) {
            return Err(Error::DuplicateCondition(pair[0].kind().name().to_string()));
        }
        Ok(Rule { conditions, target })
    }

    /// `conditions` must already be in kind-name order with distinct kinds.
    fn from_sorted(conditions: Vec<BoundCondition>, target: Tag) -> Self {
        Rule { conditions, target }
    }

    pub fn unconditional(target: Tag) -> Self {
        Rule {
            conditions: Vec::new(),
            target,
        }
    }

    pub fn conditions(&self) -> &[BoundCondition] {
        &self.conditions
    }

    pub fn target(&self) -> &Tag {
        &self.target
    }

    /// The template this rule instantiates.
    pub fn template(&self) -> Template {
        Template::new(self.conditions.iter().map(|c| c.kind().clone()).collect())
            .expect("rule kinds are distinct")
    }

    pub fn applies_at(&self, site: &Site<'_>) -> bool {
        self.conditions.iter().all(|c| c.holds(site))
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("IF ")?;
        if self.conditions.is_empty() {
            f.write_str("*")?;
        }
        for (i, condition) in self.conditions.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{condition}")?;
        }
        write!(f, " THEN {}", self.target)
    }
}

/// Transition counts from applying a rule across the corpus.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleScore {
    /// Incorrect to correct.
    pub good: u64,
    /// Correct to incorrect.
    pub bad: u64,
    pub net: i64,
}

impl RuleScore {
    pub fn new(good: u64, bad: u64) -> Self {
        RuleScore {
            good,
            bad,
            net: good as i64 - bad as i64,
        }
    }
}

pub fn rule_applies(
    rule: &Rule,
    corpus: &Corpus,
    dialogue: usize,
    position: usize,
) -> Result<bool> {
    corpus.require_tagged()?;
    Ok(rule.applies_at(&corpus.site(dialogue, position)?))
}

/// Applies `rule` to every dialogue and returns the number of tags changed.
pub fn apply_rule(rule: &Rule, corpus: &mut Corpus) -> Result<usize> {
    corpus.require_tagged()?;
    Ok(corpus.apply_sweep(|site| rule.applies_at(site), rule.target()))
}

/// Scores `rule` as a full application sweep would, without touching `corpus`.
pub fn score_rule(rule: &Rule, corpus: &Corpus) -> Result<RuleScore> {
    corpus.require_tagged()?;
    corpus.require_gold()?;
    Ok(sweep_score(rule, corpus, corpus.locations()))
}

/// Simulates the sweep over `locations` (in sweep order), keeping the tags
/// the rule would have written so far in a per-dialogue pending list.
fn sweep_score(
    rule: &Rule,
    corpus: &Corpus,
    locations: impl Iterator<Item = (usize, usize)>,
) -> RuleScore {
    let mut pending: Vec<(usize, Tag)> = Vec::new();
    let mut current = usize::MAX;
    let (mut good, mut bad) = (0, 0);
    for (d, p) in locations {
        if d != current {
            pending.clear();
            current = d;
        }
        let dialogue = &corpus.dialogues()[d];
        let site = Site::with_pending(dialogue, p, &pending);
        if !rule.applies_at(&site) {
            continue;
        }
        let utterance = &dialogue.utterances()[p];
        let old = utterance.working_tag().expect("tagged corpus");
        if old == rule.target() {
            continue;
        }
        let gold = utterance.gold_tag().expect("gold corpus");
        if rule.target() == gold {
            good += 1;
        } else if old == gold {
            bad += 1;
        }
        pending.push((p, rule.target().clone()));
    }
    RuleScore::new(good, bad)
}

type Location = (u32, u32);

/// Postings from bound conditions to the locations where they hold, for the
/// condition kinds that do not read neighbouring tags.
///
/// Those conditions keep their truth value for the whole of a sweep, so a
/// rule can only fire inside the shortest posting list among its conditions.
/// Scoring walks that list instead of the whole corpus. The index is tied to
/// the corpus state it was built from.
pub struct ScoringIndex {
    postings: HashMap<BoundCondition, Vec<Location>>,
}

impl ScoringIndex {
    pub fn build<'k>(corpus: &Corpus, kinds: impl IntoIterator<Item = &'k ConditionKind>) -> Self {
        let mut kinds: Vec<&ConditionKind> = kinds
            .into_iter()
            .filter(|k| !k.reads_neighbor_tags())
            .collect();
        kinds.sort();
        kinds.dedup();
        let mut postings: HashMap<BoundCondition, Vec<Location>> = HashMap::new();
        for (d, p) in corpus.locations() {
            let site = Site::new(&corpus.dialogues()[d], p);
            for kind in &kinds {
                for value in kind.bindings(&site) {
                    postings
                        .entry(BoundCondition::new_unchecked((*kind).clone(), value))
                        .or_default()
                        .push((d as u32, p as u32));
                }
            }
        }
        ScoringIndex { postings }
    }

    /// Same result as [`score_rule`] on the corpus the index was built from.
    pub fn score(&self, rule: &Rule, corpus: &Corpus) -> RuleScore {
        let mut shortest: Option<&[Location]> = None;
        for condition in rule.conditions() {
            if condition.kind().reads_neighbor_tags() {
                continue;
            }
            let list = self.postings.get(condition).map_or(&[][..], Vec::as_slice);
            if shortest.is_none_or(|s| list.len() < s.len()) {
                shortest = Some(list);
            }
        }
        match shortest {
            Some(list) => sweep_score(
                rule,
                corpus,
                list.iter().map(|&(d, p)| (d as usize, p as usize)),
            ),
            None => sweep_score(rule, corpus, corpus.locations()),
        }
    }
}

/// Per-site bindings for every kind used by a template list.
struct SiteBindings {
    by_kind: BTreeMap<String, Vec<Value>>,
}

impl SiteBindings {
    fn new(site: &Site<'_>, templates: &[Template]) -> Self {
        let mut by_kind = BTreeMap::new();
        for kind in templates.iter().flat_map(Template::kinds) {
            if !by_kind.contains_key(kind.name()) {
                by_kind.insert(kind.name().to_string(), kind.bindings(site));
            }
        }
        SiteBindings { by_kind }
    }

    fn of(&self, kind: &ConditionKind) -> &[Value] {
        &self.by_kind[kind.name()]
    }

    fn count(&self, template: &Template) -> u64 {
        template
            .kinds()
            .iter()
            .map(|k| self.of(k).len() as u64)
            .product()
    }
}

/// Checks that `(dialogue, position)` is a mistagged utterance and returns its gold tag.
fn error_site<'a>(
    corpus: &'a Corpus,
    dialogue: usize,
    position: usize,
) -> Result<(Site<'a>, &'a Tag)> {
    corpus.require_tagged()?;
    let site = corpus.site(dialogue, position)?;
    let utterance = site.utterance();
    let gold = utterance.gold_tag().ok_or_else(|| {
        Error::State(format!(
            "utterance ({dialogue}, {position}) has no gold tag"
        ))
    })?;
    if utterance.is_correct() {
        return Err(Error::Contract(format!(
            "utterance ({dialogue}, {position}) is already tagged correctly"
        )));
    }
    Ok((site, gold))
}

/// Every rule from `templates` that fires at the error site and rewrites it to gold.
///
/// Values bind to what is actually present at the site: each distinct token,
/// the current and previous working tags, the actual change-of-speaker value.
/// Output follows template order then binding order, without duplicates.
pub fn candidate_rules_exhaustive(
    corpus: &Corpus,
    dialogue: usize,
    position: usize,
    templates: &[Template],
) -> Result<Vec<Rule>> {
    let (site, gold) = error_site(corpus, dialogue, position)?;
    let bindings = SiteBindings::new(&site, templates);
    let mut seen = HashSet::new();
    let mut rules = Vec::new();
    for template in templates {
        let domains: Vec<&[Value]> = template.kinds().iter().map(|k| bindings.of(k)).collect();
        if domains.iter().any(|d| d.is_empty()) {
            continue;
        }
        let mut odometer = vec![0usize; domains.len()];
        loop {
            let conditions = template
                .kinds()
                .iter()
                .zip(&odometer)
                .zip(&domains)
                .map(|((kind, &i), values)| {
                    BoundCondition::new_unchecked(kind.clone(), values[i].clone())
                })
                .collect();
            let rule = Rule::from_sorted(conditions, gold.clone());
            if seen.insert(rule.clone()) {
                rules.push(rule);
            }
            let Some(slot) = (0..odometer.len())
                .rev()
                .find(|&i| odometer[i] + 1 < domains[i].len())
            else {
                break;
            };
            odometer[slot] += 1;
            odometer[slot + 1..].iter_mut().for_each(|i| *i = 0);
        }
    }
    Ok(rules)
}

/// Number of instantiations [`candidate_rules_exhaustive`] would visit at
/// the site, before duplicates are removed.
pub fn exhaustive_candidate_count(
    corpus: &Corpus,
    dialogue: usize,
    position: usize,
    templates: &[Template],
) -> Result<u64> {
    let site = corpus.site(dialogue, position)?;
    let bindings = SiteBindings::new(&site, templates);
    Ok(templates.iter().map(|t| bindings.count(t)).sum())
}

/// How a lazy trainer draws one rule: pick a template, then a value per condition.
pub trait SamplingPolicy: Send + Sync {
    /// Index into `templates`; every listed template has at least one full binding.
    fn choose_template(&self, templates: &[&Template], rng: &mut dyn RngCore) -> usize;

    /// Index into the legal values of one condition.
    fn choose_value(&self, kind: &ConditionKind, values: &[Value], rng: &mut dyn RngCore) -> usize;
}

/// Uniform over templates, then uniform over each condition's legal values.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformSampling;

impl SamplingPolicy for UniformSampling {
    fn choose_template(&self, templates: &[&Template], rng: &mut dyn RngCore) -> usize {
        rng.gen_range(0..templates.len())
    }

    fn choose_value(
        &self,
        _kind: &ConditionKind,
        values: &[Value],
        rng: &mut dyn RngCore,
    ) -> usize {
        rng.gen_range(0..values.len())
    }
}

/// Draws exactly `samples` rules for the error site with [`UniformSampling`].
///
/// Repeats are kept. Templates that cannot bind at the site (e.g.
/// `previous_tag` on a dialogue-initial utterance) are never chosen; if no
/// template can bind, the result is empty.
pub fn candidate_rules_sampled(
    corpus: &Corpus,
    dialogue: usize,
    position: usize,
    templates: &[Template],
    samples: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<Rule>> {
    candidate_rules_sampled_with(
        &UniformSampling,
        corpus,
        dialogue,
        position,
        templates,
        samples,
        rng,
    )
}

pub fn candidate_rules_sampled_with(
    policy: &dyn SamplingPolicy,
    corpus: &Corpus,
    dialogue: usize,
    position: usize,
    templates: &[Template],
    samples: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<Rule>> {
    let (site, gold) = error_site(corpus, dialogue, position)?;
    if samples == 0 {
        return Ok(Vec::new());
    }
    let bindings = SiteBindings::new(&site, templates);
    let viable: Vec<&Template> = templates.iter().filter(|t| bindings.count(t) > 0).collect();
    if viable.is_empty() {
        return Ok(Vec::new());
    }
    let mut rules = Vec::with_capacity(samples);
    for _ in 0..samples {
        let template = viable[policy.choose_template(&viable, rng)];
        let conditions = template
            .kinds()
            .iter()
            .map(|kind| {
                let values = bindings.of(kind);
                let pick = policy.choose_value(kind, values, rng);
                BoundCondition::new_unchecked(kind.clone(), values[pick].clone())
            })
            .collect();
        rules.push(Rule::from_sorted(conditions, gold.clone()));
    }
    Ok(rules)
}

/// Orders scored candidates best first: higher net, then fewer conditions,
/// then the textual form.
pub fn compare_candidates(a: (&Rule, &RuleScore), b: (&Rule, &RuleScore)) -> Ordering {
    b.1.net
        .cmp(&a.1.net)
        .then_with(|| a.0.conditions.len().cmp(&b.0.conditions.len()))
        .then_with(|| a.0.to_string().cmp(&b.0.to_string()))
}

/// Training parameters recorded alongside a learned sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceMetadata {
    pub mode: TrainingMode,
    pub samples_per_instance: usize,
    pub seed: u64,
    pub threshold: i64,
    pub initial_tag_policy: InitialTagPolicy,
    /// The tag the policy resolved to at training time.
    pub initial_tag: Option<Tag>,
}

impl SequenceMetadata {
    /// Metadata for a hand-written sequence.
    pub fn manual(initial_tag: Tag) -> Self {
        SequenceMetadata {
            mode: TrainingMode::Exhaustive,
            samples_per_instance: 0,
            seed: 0,
            threshold: 1,
            initial_tag_policy: InitialTagPolicy::Fixed(initial_tag.clone()),
            initial_tag: Some(initial_tag),
        }
    }

    /// The policy to replay when tagging new data.
    pub fn replay_policy(&self) -> InitialTagPolicy {
        match &self.initial_tag {
            Some(tag) => InitialTagPolicy::Fixed(tag.clone()),
            None => self.initial_tag_policy.clone(),
        }
    }
}

/// A learned model: rules applied first to last.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleSequence {
    rules: Vec<Rule>,
    scores: Vec<Option<RuleScore>>,
    metadata: SequenceMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderRecord {
    mode: TrainingMode,
    samples_per_instance: usize,
    seed: u64,
    threshold: i64,
    initial_tag_policy: PolicyName,
    initial_tag: Option<Tag>,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum PolicyName {
    MostFrequentGold,
    Fixed,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionRecord {
    kind: String,
    value: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleRecord {
    conditions: Vec<ConditionRecord>,
    target: Tag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<RuleScore>,
}

impl RuleSequence {
    pub fn new(metadata: SequenceMetadata) -> Self {
        RuleSequence {
            rules: Vec::new(),
            scores: Vec::new(),
            metadata,
        }
    }

    pub fn from_rules(rules: Vec<Rule>, metadata: SequenceMetadata) -> Self {
        let scores = vec![None; rules.len()];
        RuleSequence {
            rules,
            scores,
            metadata,
        }
    }

    pub fn push(&mut self, rule: Rule, score: Option<RuleScore>) {
        self.rules.push(rule);
        self.scores.push(score);
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn scores(&self) -> &[Option<RuleScore>] {
        &self.scores
    }

    pub fn metadata(&self) -> &SequenceMetadata {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Human-readable form: a metadata comment, then one `IF ... THEN tag` per line.
    pub fn to_text(&self) -> String {
        let m = &self.metadata;
        let mut out = format!(
            "# mode={} samples_per_instance={} seed={} threshold={} initial_tag={}\n",
            m.mode,
            m.samples_per_instance,
            m.seed,
            m.threshold,
            m.initial_tag.as_ref().map_or("-", Tag::as_str)
        );
        for (rule, score) in self.rules.iter().zip(&self.scores) {
            out.push_str(&rule.to_string());
            if let Some(s) = score {
                out.push_str(&format!("  # net={} good={} bad={}", s.net, s.good, s.bad));
            }
            out.push('\n');
        }
        out
    }

    /// Structured form: a header object, then one object per rule.
    pub fn to_jsonl(&self) -> String {
        let m = &self.metadata;
        let header = HeaderRecord {
            mode: m.mode,
            samples_per_instance: m.samples_per_instance,
            seed: m.seed,
            threshold: m.threshold,
            initial_tag_policy: match m.initial_tag_policy {
                InitialTagPolicy::MostFrequentGold => PolicyName::MostFrequentGold,
                InitialTagPolicy::Fixed(_) => PolicyName::Fixed,
            },
            initial_tag: match &m.initial_tag_policy {
                InitialTagPolicy::Fixed(tag) => Some(tag.clone()),
                InitialTagPolicy::MostFrequentGold => m.initial_tag.clone(),
            },
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for (rule, score) in self.rules.iter().zip(&self.scores) {
            let record = RuleRecord {
                conditions: rule
                    .conditions
                    .iter()
                    .map(|c| ConditionRecord {
                        kind: c.kind().name().to_string(),
                        value: c.value().to_json(),
                    })
                    .collect(),
                target: rule.target.clone(),
                score: *score,
            };
            out.push_str(&serde_json::to_string(&record).expect("rule serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(text: &str, registry: &ConditionRegistry) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());
        let (line_no, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing header"))?;
        let header: HeaderRecord =
            serde_json::from_str(header).map_err(|e| Error::parse(line_no, e.to_string()))?;
        let initial_tag_policy = match (header.initial_tag_policy, &header.initial_tag) {
            (PolicyName::MostFrequentGold, _) => InitialTagPolicy::MostFrequentGold,
            (PolicyName::Fixed, Some(tag)) => InitialTagPolicy::Fixed(tag.clone()),
            (PolicyName::Fixed, None) => {
                return Err(Error::parse(line_no, "fixed policy without initial_tag"))
            }
        };
        let mut sequence = RuleSequence::new(SequenceMetadata {
            mode: header.mode,
            samples_per_instance: header.samples_per_instance,
            seed: header.seed,
            threshold: header.threshold,
            initial_tag_policy,
            initial_tag: header.initial_tag,
        });
        for (line_no, line) in lines {
            let record: RuleRecord =
                serde_json::from_str(line).map_err(|e| Error::parse(line_no, e.to_string()))?;
            let conditions = record
                .conditions
                .iter()
                .map(|c| {
                    let kind = registry.get(&c.kind)?;
                    let value = Value::from_json(kind.domain(), &c.value)?;
                    BoundCondition::new(kind, value)
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::parse(line_no, e.to_string()))?;
            let rule = Rule::new(conditions, record.target)
                .map_err(|e| Error::parse(line_no, e.to_string()))?;
            if let Some(score) = record.score {
                if score.net != score.good as i64 - score.bad as i64 {
                    return Err(Error::parse(line_no, "score net does not equal good - bad"));
                }
            }
            sequence.push(rule, record.score);
        }
        Ok(sequence)
    }

    /// Writes `<prefix>.rules.txt` and `<prefix>.rules.jsonl`.
    pub fn write_pair(&self, prefix: impl AsRef<Path>) -> Result<()> {
        let prefix = prefix.as_ref().to_string_lossy().into_owned();
        fs::write(format!("{prefix}.rules.txt"), self.to_text())?;
        fs::write(format!("{prefix}.rules.jsonl"), self.to_jsonl())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, registry: &ConditionRegistry) -> Result<Self> {
        Self::parse_jsonl(&fs::read_to_string(path)?, registry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templates::{
        power_set_templates, CHANGE_OF_SPEAKER, CURRENT_TAG, INCLUDES_WORD, PREVIOUS_TAG,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tag(name: &str) -> Tag {
        Tag::new(name).unwrap()
    }

    fn kind(name: &str) -> ConditionKind {
        ConditionRegistry::builtin().get(name).unwrap()
    }

    fn cond(name: &str, value: Value) -> BoundCondition {
        BoundCondition::new(kind(name), value).unwrap()
    }

    fn word(w: &str) -> Value {
        Value::Token(w.into())
    }

    fn corpus(lines: &[(&str, &str, &[&str], &str)]) -> Corpus {
        let text: String = lines
            .iter()
            .map(|(d, s, toks, t)| {
                serde_json::json!({"dialogue": d, "speaker": s, "tokens": toks, "tag": t})
                    .to_string()
                    + "\n"
            })
            .collect();
        Corpus::parse(&text).unwrap()
    }

    fn small() -> Corpus {
        corpus(&[
            ("d", "A", &["a", "b"], "X"),
            ("d", "B", &["b", "c"], "Y"),
            ("d", "B", &["a", "c", "d", "e"], "Y"),
            ("e", "A", &["c"], "X"),
        ])
    }

    #[test]
    fn untagged_corpus_is_a_state_error() {
        let c = small();
        let rule = Rule::unconditional(tag("X"));
        assert!(matches!(
            rule_applies(&rule, &c, 0, 0),
            Err(Error::State(_))
        ));
        let mut c2 = c.clone();
        assert!(matches!(apply_rule(&rule, &mut c2), Err(Error::State(_))));
        assert!(matches!(score_rule(&rule, &c), Err(Error::State(_))));
    }

    #[test]
    fn assignment_to_same_tag_changes_nothing() {
        let mut c = small();
        c.fill_working_tags(&tag("X"));
        assert_eq!(
            apply_rule(&Rule::unconditional(tag("X")), &mut c).unwrap(),
            0
        );
    }

    #[test]
    fn previous_tag_sees_updates_within_sweep() {
        let mut c = corpus(&[
            ("d", "A", &["go"], "Y"),
            ("d", "A", &["go"], "Y"),
            ("d", "A", &["go"], "Y"),
        ]);
        c.fill_working_tags(&tag("X"));
        c.set_working_tag(0, 0, tag("Y")).unwrap();
        let rule = Rule::new(vec![cond(PREVIOUS_TAG, Value::Tag(tag("Y")))], tag("Y")).unwrap();
        assert_eq!(score_rule(&rule, &c).unwrap(), RuleScore::new(2, 0));
        assert_eq!(apply_rule(&rule, &mut c).unwrap(), 2);
    }

    #[test]
    fn perfect_tagging_can_only_be_damaged() {
        let mut c = small();
        for (d, p) in c.locations().collect::<Vec<_>>() {
            let gold = c.utterance(d, p).unwrap().gold_tag().unwrap().clone();
            c.set_working_tag(d, p, gold).unwrap();
        }
        let score = score_rule(&Rule::unconditional(tag("Y")), &c).unwrap();
        assert_eq!(score, RuleScore::new(0, 2));
        assert!(score.net < 0);
    }

    #[test]
    fn indexed_score_matches_full_sweep() {
        let mut c = small();
        c.fill_working_tags(&tag("X"));
        let kinds: Vec<ConditionKind> =
            [CHANGE_OF_SPEAKER, INCLUDES_WORD, CURRENT_TAG, PREVIOUS_TAG]
                .iter()
                .map(|n| kind(n))
                .collect();
        let templates = power_set_templates(&kinds, 4).unwrap();
        let index = ScoringIndex::build(&c, &kinds);
        for (d, p) in c.error_locations() {
            for rule in candidate_rules_exhaustive(&c, d, p, &templates).unwrap() {
                assert_eq!(
                    index.score(&rule, &c),
                    score_rule(&rule, &c).unwrap(),
                    "{rule}"
                );
            }
        }
    }

    #[test]
    fn exhaustive_on_correct_site_is_a_contract_error() {
        let mut c = small();
        c.fill_working_tags(&tag("X"));
        let templates = vec![Template::empty()];
        assert!(matches!(
            candidate_rules_exhaustive(&c, 0, 0, &templates),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            candidate_rules_sampled(&c, 0, 0, &templates, 3, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn empty_template_gives_one_unconditional_rule() {
        let mut c = small();
        c.fill_working_tags(&tag("X"));
        let rules = candidate_rules_exhaustive(&c, 0, 1, &[Template::empty()]).unwrap();
        assert_eq!(rules, vec![Rule::unconditional(tag("Y"))]);
    }

    #[test]
    fn dialogue_initial_previous_tag_has_no_bindings() {
        let mut c = small();
        c.fill_working_tags(&tag("Y"));
        let templates = vec![Template::new(vec![kind(PREVIOUS_TAG)]).unwrap()];
        assert!(candidate_rules_exhaustive(&c, 0, 0, &templates)
            .unwrap()
            .is_empty());
        assert_eq!(exhaustive_candidate_count(&c, 0, 0, &templates).unwrap(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(candidate_rules_sampled(&c, 0, 0, &templates, 5, &mut rng)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn sampling_zero_is_empty_and_seeded_sampling_repeats() {
        let mut c = small();
        c.fill_working_tags(&tag("X"));
        let kinds: Vec<ConditionKind> = [CHANGE_OF_SPEAKER, INCLUDES_WORD, CURRENT_TAG]
            .iter()
            .map(|n| kind(n))
            .collect();
        let templates = power_set_templates(&kinds, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(candidate_rules_sampled(&c, 0, 2, &templates, 0, &mut rng)
            .unwrap()
            .is_empty());
        let a =
            candidate_rules_sampled(&c, 0, 2, &templates, 6, &mut ChaCha8Rng::seed_from_u64(42))
                .unwrap();
        let b =
            candidate_rules_sampled(&c, 0, 2, &templates, 6, &mut ChaCha8Rng::seed_from_u64(42))
                .unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_rules_come_from_the_exhaustive_set_and_correct_the_site() {
        let mut c = small();
        c.fill_working_tags(&tag("X"));
        let kinds: Vec<ConditionKind> =
            [CHANGE_OF_SPEAKER, INCLUDES_WORD, CURRENT_TAG, PREVIOUS_TAG]
                .iter()
                .map(|n| kind(n))
                .collect();
        let templates = power_set_templates(&kinds, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (d, p) in c.error_locations() {
            let all: HashSet<Rule> = candidate_rules_exhaustive(&c, d, p, &templates)
                .unwrap()
                .into_iter()
                .collect();
            for rule in &all {
                assert!(rule_applies(rule, &c, d, p).unwrap());
                assert_eq!(Some(rule.target()), c.utterance(d, p).unwrap().gold_tag());
            }
            for rule in candidate_rules_sampled(&c, d, p, &templates, 50, &mut rng).unwrap() {
                assert!(all.contains(&rule), "{rule}");
            }
        }
    }

    #[test]
    fn uniform_binding_frequencies() {
        let mut c = corpus(&[("d", "A", &["v", "w", "x", "y", "z"], "Y")]);
        c.fill_working_tags(&tag("X"));
        let templates = vec![Template::new(vec![kind(INCLUDES_WORD)]).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = candidate_rules_sampled(&c, 0, 0, &templates, 10_000, &mut rng).unwrap();
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for rule in &draws {
            *counts.entry(rule.to_string()).or_default() += 1;
        }
        assert_eq!(counts.len(), 5);
        for (rule, count) in counts {
            let freq = count as f64 / 10_000.0;
            assert!((freq - 0.2).abs() <= 0.02, "{rule}: {freq}");
        }
    }

    #[test]
    fn tie_break_prefers_fewer_conditions_then_text() {
        let general = Rule::unconditional(tag("Y"));
        let specific = Rule::new(vec![cond(INCLUDES_WORD, word("a"))], tag("Y")).unwrap();
        let other = Rule::new(vec![cond(INCLUDES_WORD, word("b"))], tag("Y")).unwrap();
        let s = RuleScore::new(3, 1);
        assert_eq!(
            compare_candidates((&general, &s), (&specific, &s)),
            Ordering::Less
        );
        assert_eq!(
            compare_candidates((&specific, &s), (&other, &s)),
            Ordering::Less
        );
        let better = RuleScore::new(4, 1);
        assert_eq!(
            compare_candidates((&other, &better), (&general, &s)),
            Ordering::Less
        );
    }

    #[test]
    fn rule_text_form() {
        let rule = Rule::new(
            vec![
                cond(INCLUDES_WORD, word("can't")),
                cond(PREVIOUS_TAG, Value::Tag(tag("REQUEST"))),
            ],
            tag("REJECT"),
        )
        .unwrap();
        assert_eq!(
            rule.to_string(),
            r#"IF includes_word="can't" & previous_tag=REQUEST THEN REJECT"#
        );
        assert_eq!(
            Rule::unconditional(tag("SUGGEST")).to_string(),
            "IF * THEN SUGGEST"
        );
        assert!(Rule::new(
            vec![
                cond(INCLUDES_WORD, word("a")),
                cond(INCLUDES_WORD, word("b"))
            ],
            tag("Y")
        )
        .is_err());
    }

    #[test]
    fn sequence_jsonl_round_trip() {
        let mut seq = RuleSequence::new(SequenceMetadata {
            mode: TrainingMode::Lazy,
            samples_per_instance: 6,
            seed: 17,
            threshold: 2,
            initial_tag_policy: InitialTagPolicy::MostFrequentGold,
            initial_tag: Some(tag("X")),
        });
        seq.push(Rule::unconditional(tag("Y")), Some(RuleScore::new(5, 2)));
        seq.push(
            Rule::new(
                vec![
                    cond(CHANGE_OF_SPEAKER, Value::Bool(true)),
                    cond(INCLUDES_WORD, word("\"q\"")),
                ],
                tag("X"),
            )
            .unwrap(),
            None,
        );
        let text = seq.to_jsonl();
        let back = RuleSequence::parse_jsonl(&text, &ConditionRegistry::builtin()).unwrap();
        assert_eq!(back, seq);
        assert_eq!(
            back.metadata().replay_policy(),
            InitialTagPolicy::Fixed(tag("X"))
        );
    }

    #[test]
    fn sequence_parse_errors_cite_lines() {
        let registry = ConditionRegistry::builtin();
        assert!(RuleSequence::parse_jsonl("", &registry).is_err());
        let header = r#"{"mode":"exhaustive","samples_per_instance":0,"seed":0,"threshold":1,"initial_tag_policy":"fixed","initial_tag":"X"}"#;
        let bad_kind = format!(
            "{header}\n{}",
            r#"{"conditions":[{"kind":"nope","value":true}],"target":"Y"}"#
        );
        assert!(matches!(
            RuleSequence::parse_jsonl(&bad_kind, &registry),
            Err(Error::Parse { line: 2, .. })
        ));
        let bad_value = format!(
            "{header}\n{}",
            r#"{"conditions":[{"kind":"change_of_speaker","value":"yes"}],"target":"Y"}"#
        );
        assert!(matches!(
            RuleSequence::parse_jsonl(&bad_value, &registry),
            Err(Error::Parse { line: 2, .. })
        ));
        let bad_score = format!(
            "{header}\n{}",
            r#"{"conditions":[],"target":"Y","score":{"good":1,"bad":0,"net":3}}"#
        );
        assert!(matches!(
            RuleSequence::parse_jsonl(&bad_score, &registry),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
