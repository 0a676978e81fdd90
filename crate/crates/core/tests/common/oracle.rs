//! Brute-force reference implementations. Nothing here calls into the
//! engine's condition, application or scoring code; corpora are copied into
//! plain vectors first.

use std::collections::BTreeSet;

use tbl::corpus::Corpus;
use tbl::rules::Rule;
use tbl::templates::Value;

#[derive(Clone, Debug)]
pub struct Utt {
    pub speaker: String,
    pub tokens: Vec<String>,
    pub gold: String,
    pub work: String,
}

pub type Snapshot = Vec<Vec<Utt>>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Cond {
    ChangeOfSpeaker(bool),
    IncludesWord(String),
    CurrentTag(String),
    PreviousTag(String),
}

pub type OracleRule = (Vec<Cond>, String);

pub fn snapshot(corpus: &Corpus) -> Snapshot {
    corpus
        .dialogues()
        .iter()
        .map(|d| {
            d.utterances()
                .iter()
                .map(|u| Utt {
                    speaker: u.speaker().to_string(),
                    tokens: u.tokens().iter().map(|t| t.to_string()).collect(),
                    gold: u.gold_tag().unwrap().to_string(),
                    work: u.working_tag().unwrap().to_string(),
                })
                .collect()
        })
        .collect()
}

pub fn holds(dialogue: &[Utt], p: usize, cond: &Cond) -> bool {
    match cond {
        Cond::ChangeOfSpeaker(b) => {
            let change = p == 0 || dialogue[p].speaker != dialogue[p - 1].speaker;
            change == *b
        }
        Cond::IncludesWord(w) => dialogue[p].tokens.iter().any(|t| t == w),
        Cond::CurrentTag(x) => dialogue[p].work == *x,
        Cond::PreviousTag(x) => p > 0 && dialogue[p - 1].work == *x,
    }
}

/// Copies the snapshot, applies the rule in a left-to-right sweep, and
/// diffs accuracy before and after. Returns `(good, bad)`.
pub fn score(snapshot: &Snapshot, rule: &OracleRule) -> (u64, u64) {
    let mut copy = snapshot.clone();
    for dialogue in &mut copy {
        for p in 0..dialogue.len() {
            if rule.0.iter().all(|c| holds(dialogue, p, c)) {
                dialogue[p].work = rule.1.clone();
            }
        }
    }
    let (mut good, mut bad) = (0, 0);
    for (before, after) in snapshot.iter().flatten().zip(copy.iter().flatten()) {
        let was = before.work == before.gold;
        let now = after.work == after.gold;
        if !was && now {
            good += 1;
        }
        if was && !now {
            bad += 1;
        }
    }
    (good, bad)
}

fn domains(snapshot: &Snapshot) -> (BTreeSet<String>, BTreeSet<String>) {
    let vocabulary = snapshot
        .iter()
        .flatten()
        .flat_map(|u| u.tokens.clone())
        .collect();
    let tags = snapshot
        .iter()
        .flatten()
        .flat_map(|u| [u.gold.clone(), u.work.clone()])
        .collect();
    (vocabulary, tags)
}

/// Cartesian product of the full value domains of each kind in `template`.
fn bindings(
    template: &[&str],
    vocabulary: &BTreeSet<String>,
    tags: &BTreeSet<String>,
) -> Vec<Vec<Cond>> {
    let mut partial: Vec<Vec<Cond>> = vec![Vec::new()];
    for kind in template {
        let domain: Vec<Cond> = match *kind {
            "change_of_speaker" => vec![Cond::ChangeOfSpeaker(false), Cond::ChangeOfSpeaker(true)],
            "includes_word" => vocabulary.iter().cloned().map(Cond::IncludesWord).collect(),
            "current_tag" => tags.iter().cloned().map(Cond::CurrentTag).collect(),
            "previous_tag" => tags.iter().cloned().map(Cond::PreviousTag).collect(),
            other => panic!("oracle does not know `{other}`"),
        };
        let mut next = Vec::new();
        for prefix in &partial {
            for c in &domain {
                let mut conds = prefix.clone();
                conds.push(c.clone());
                next.push(conds);
            }
        }
        partial = next;
    }
    for conds in &mut partial {
        conds.sort();
    }
    partial
}

/// Every binding of every template over the full value domains, kept when
/// the rule fires at `(d, p)`. Target is the gold tag there.
pub fn candidates(
    snapshot: &Snapshot,
    d: usize,
    p: usize,
    templates: &[Vec<&str>],
) -> BTreeSet<OracleRule> {
    let (vocabulary, tags) = domains(snapshot);
    let mut out = BTreeSet::new();
    for template in templates {
        for conds in bindings(template, &vocabulary, &tags) {
            if conds.iter().all(|c| holds(&snapshot[d], p, c)) {
                out.insert((conds, snapshot[d][p].gold.clone()));
            }
        }
    }
    out
}

/// Every rule over the full domains for each template and every target.
pub fn all_instantiations(snapshot: &Snapshot, templates: &[Vec<&str>]) -> Vec<OracleRule> {
    let (vocabulary, tags) = domains(snapshot);
    let mut rules = BTreeSet::new();
    for template in templates {
        for conds in bindings(template, &vocabulary, &tags) {
            for target in &tags {
                rules.insert((conds.clone(), target.clone()));
            }
        }
    }
    rules.into_iter().collect()
}

/// Converts an engine rule to the oracle's representation.
pub fn from_engine(rule: &Rule) -> OracleRule {
    let mut conds: Vec<Cond> = rule
        .conditions()
        .iter()
        .map(|c| match (c.kind().name(), c.value()) {
            ("change_of_speaker", Value::Bool(b)) => Cond::ChangeOfSpeaker(*b),
            ("includes_word", Value::Token(w)) => Cond::IncludesWord(w.to_string()),
            ("current_tag", Value::Tag(t)) => Cond::CurrentTag(t.to_string()),
            ("previous_tag", Value::Tag(t)) => Cond::PreviousTag(t.to_string()),
            (kind, value) => panic!("oracle does not know {kind}={value}"),
        })
        .collect();
    conds.sort();
    (conds, rule.target().to_string())
}
