//! Tagged dialogue corpora.
//!
//! A [`Corpus`] is an ordered list of [`Dialogue`]s, each an ordered list of
//! [`Utterance`]s. Every utterance carries an optional gold tag (absent in raw
//! data) and an optional working tag, the hypothesis that initial tagging and
//! rule application rewrite.
//!
//! On disk a corpus is JSON lines, one utterance per line:
//!
//! ```text
//! {"dialogue":"d1","speaker":"A","tokens":["Okay."],"tag":"ACCEPT"}
//! ```
//!
//! Utterances of one dialogue are contiguous and in order. A `null` tag marks
//! untagged data. Tokens are taken as given: matching is case-sensitive and
//! punctuation stays attached.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A label from the corpus tag inventory, e.g. `SUGGEST`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tag(Arc<str>);

impl Tag {
    pub fn new(name: &str) -> Result<Self> {
        if name.is_empty() {
            return Err(Error::Argument("tag names must be non-empty".into()));
        }
        Ok(Tag(Arc::from(name)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Tag {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Tag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        Tag::new(&name).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Utterance {
    speaker: String,
    tokens: Vec<Arc<str>>,
    gold_tag: Option<Tag>,
    working_tag: Option<Tag>,
    position: usize,
}

impl Utterance {
    /// Builds an utterance; its position is assigned by [`Dialogue::new`].
    pub fn new<S: AsRef<str>>(speaker: &str, tokens: &[S], gold_tag: Option<Tag>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Argument("utterance has no tokens".into()));
        }
        if tokens.iter().any(|t| t.as_ref().is_empty()) {
            return Err(Error::Argument("utterance contains an empty token".into()));
        }
        Ok(Utterance {
            speaker: speaker.to_string(),
            tokens: tokens.iter().map(|t| Arc::from(t.as_ref())).collect(),
            gold_tag,
            working_tag: None,
            position: 0,
        })
    }

    pub fn speaker(&self) -> &str {
        &self.speaker
    }

    pub fn tokens(&self) -> &[Arc<str>] {
        &self.tokens
    }

    pub fn includes(&self, word: &str) -> bool {
        self.tokens.iter().any(|t| &**t == word)
    }

    pub fn gold_tag(&self) -> Option<&Tag> {
        self.gold_tag.as_ref()
    }

    pub fn working_tag(&self) -> Option<&Tag> {
        self.working_tag.as_ref()
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn is_correct(&self) -> bool {
        matches!((&self.working_tag, &self.gold_tag), (Some(w), Some(g)) if w == g)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dialogue {
    id: String,
    utterances: Vec<Utterance>,
}

impl Dialogue {
    pub fn new(id: &str, mut utterances: Vec<Utterance>) -> Result<Self> {
        if utterances.is_empty() {
            return Err(Error::Argument(format!(
                "dialogue `{id}` has no utterances"
            )));
        }
        for (position, utterance) in utterances.iter_mut().enumerate() {
            utterance.position = position;
        }
        Ok(Dialogue {
            id: id.to_string(),
            utterances,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// True at position 0 and wherever the speaker differs from the previous one.
    pub fn change_of_speaker(&self, position: usize) -> bool {
        position == 0 || self.utterances[position].speaker != self.utterances[position - 1].speaker
    }
}

/// Which tag a serialized corpus carries in its `tag` field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TagField {
    Gold,
    Working,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    dialogues: Vec<Dialogue>,
    tag_inventory: BTreeSet<Tag>,
    vocabulary: BTreeSet<Arc<str>>,
}

#[derive(Serialize)]
struct Record<'a> {
    dialogue: &'a str,
    speaker: &'a str,
    tokens: Vec<&'a str>,
    tag: Option<&'a str>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OwnedRecord {
    dialogue: String,
    speaker: String,
    tokens: Vec<String>,
    tag: Option<String>,
}

impl Corpus {
    pub fn new(dialogues: Vec<Dialogue>) -> Result<Self> {
        if dialogues.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut tag_inventory = BTreeSet::new();
        let mut vocabulary = BTreeSet::new();
        for utterance in dialogues.iter().flat_map(|d| &d.utterances) {
            tag_inventory.extend(utterance.gold_tag.iter().cloned());
            tag_inventory.extend(utterance.working_tag.iter().cloned());
            vocabulary.extend(utterance.tokens.iter().cloned());
        }
        Ok(Corpus {
            dialogues,
            tag_inventory,
            vocabulary,
        })
    }

    /// Parses the JSON-lines corpus format. Blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dialogues: Vec<Dialogue> = Vec::new();
        let mut current: Option<(String, Vec<Utterance>)> = None;
        let mut seen = BTreeSet::new();
        for (index, line) in text.lines().enumerate() {
            let line_no = index + 1;
            if line.trim().is_empty() {
                continue;
            }
            let record: OwnedRecord =
                serde_json::from_str(line).map_err(|e| Error::parse(line_no, e.to_string()))?;
            let gold = match record.tag.as_deref() {
                None => None,
                Some(name) => {
                    Some(Tag::new(name).map_err(|e| Error::parse(line_no, e.to_string()))?)
                }
            };
            let utterance = Utterance::new(&record.speaker, &record.tokens, gold)
                .map_err(|e| Error::parse(line_no, e.to_string()))?;
            match &mut current {
                Some((id, utterances)) if *id == record.dialogue => utterances.push(utterance),
                _ => {
                    if !seen.insert(record.dialogue.clone()) {
                        return Err(Error::parse(
                            line_no,
                            format!(
                                "utterances of dialogue `{}` are not contiguous",
                                record.dialogue
                            ),
                        ));
                    }
                    if let Some((id, utterances)) = current.take() {
                        dialogues.push(Dialogue::new(&id, utterances)?);
                    }
                    current = Some((record.dialogue, vec![utterance]));
                }
            }
        }
        if let Some((id, utterances)) = current {
            dialogues.push(Dialogue::new(&id, utterances)?);
        }
        Corpus::new(dialogues)
    }

    pub fn to_jsonl(&self, field: TagField) -> String {
        let mut out = String::new();
        for dialogue in &self.dialogues {
            for utterance in &dialogue.utterances {
                let tag = match field {
                    TagField::Gold => utterance.gold_tag.as_ref(),
                    TagField::Working => utterance.working_tag.as_ref(),
                };
                let record = Record {
                    dialogue: &dialogue.id,
                    speaker: &utterance.speaker,
                    tokens: utterance.tokens.iter().map(|t| &**t).collect(),
                    tag: tag.map(Tag::as_str),
                };
                out.push_str(&serde_json::to_string(&record).expect("records serialize"));
                out.push('\n');
            }
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>, field: TagField) -> Result<()> {
        fs::write(path, self.to_jsonl(field))?;
        Ok(())
    }

    pub fn into_dialogues(self) -> Vec<Dialogue> {
        self.dialogues
    }

    pub fn dialogues(&self) -> &[Dialogue] {
        &self.dialogues
    }

    pub fn dialogue(&self, index: usize) -> Result<&Dialogue> {
        self.dialogues.get(index).ok_or(Error::Index {
            dialogue: index,
            position: 0,
        })
    }

    pub fn utterance(&self, dialogue: usize, position: usize) -> Result<&Utterance> {
        self.dialogues
            .get(dialogue)
            .and_then(|d| d.utterances.get(position))
            .ok_or(Error::Index { dialogue, position })
    }

    pub fn tag_inventory(&self) -> &BTreeSet<Tag> {
        &self.tag_inventory
    }

    pub fn vocabulary(&self) -> &BTreeSet<Arc<str>> {
        &self.vocabulary
    }

    /// Total number of utterances.
    pub fn len(&self) -> usize {
        self.dialogues.iter().map(Dialogue::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All `(dialogue, position)` pairs in sweep order.
    pub fn locations(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.dialogues
            .iter()
            .enumerate()
            .flat_map(|(d, dialogue)| (0..dialogue.len()).map(move |p| (d, p)))
    }

    pub fn utterances(&self) -> impl Iterator<Item = &Utterance> + '_ {
        self.dialogues.iter().flat_map(|d| d.utterances.iter())
    }

    pub fn change_of_speaker(&self, dialogue: usize, position: usize) -> Result<bool> {
        self.utterance(dialogue, position)?;
        Ok(self.dialogues[dialogue].change_of_speaker(position))
    }

    /// Working tag of the preceding utterance in the same dialogue.
    pub fn previous_tag(&self, dialogue: usize, position: usize) -> Result<Option<&Tag>> {
        self.utterance(dialogue, position)?;
        if position == 0 {
            return Ok(None);
        }
        Ok(self.dialogues[dialogue].utterances[position - 1]
            .working_tag
            .as_ref())
    }

    pub fn is_fully_tagged(&self) -> bool {
        self.utterances().all(|u| u.working_tag.is_some())
    }

    pub fn has_gold(&self) -> bool {
        self.utterances().all(|u| u.gold_tag.is_some())
    }

    pub(crate) fn require_tagged(&self) -> Result<()> {
        if self.is_fully_tagged() {
            Ok(())
        } else {
            Err(Error::State("corpus has not been initially tagged".into()))
        }
    }

    pub(crate) fn require_gold(&self) -> Result<()> {
        if self.has_gold() {
            Ok(())
        } else {
            Err(Error::State("corpus is missing gold tags".into()))
        }
    }

    /// Number of utterances whose working tag differs from gold.
    pub fn error_count(&self) -> usize {
        self.utterances().filter(|u| !u.is_correct()).count()
    }

    /// Locations of utterances whose working tag differs from gold, in sweep order.
    pub fn error_locations(&self) -> Vec<(usize, usize)> {
        self.locations()
            .filter(|&(d, p)| !self.dialogues[d].utterances[p].is_correct())
            .collect()
    }

    /// Adds `tag` to the inventory; used for open-world tagging.
    pub fn admit_tag(&mut self, tag: &Tag) {
        if !self.tag_inventory.contains(tag) {
            self.tag_inventory.insert(tag.clone());
        }
    }

    /// Sets every working tag to `tag`, admitting it to the inventory.
    pub fn fill_working_tags(&mut self, tag: &Tag) {
        self.admit_tag(tag);
        for utterance in self
            .dialogues
            .iter_mut()
            .flat_map(|d| d.utterances.iter_mut())
        {
            utterance.working_tag = Some(tag.clone());
        }
    }

    pub fn clear_working_tags(&mut self) {
        for utterance in self
            .dialogues
            .iter_mut()
            .flat_map(|d| d.utterances.iter_mut())
        {
            utterance.working_tag = None;
        }
    }

    /// Copies working tags into the gold field.
    pub(crate) fn promote_working_to_gold(&mut self) {
        for utterance in self
            .dialogues
            .iter_mut()
            .flat_map(|d| d.utterances.iter_mut())
        {
            utterance.gold_tag = utterance.working_tag.clone();
        }
    }

    pub(crate) fn set_gold_tag(&mut self, dialogue: usize, position: usize, tag: Tag) {
        self.admit_tag(&tag);
        self.dialogues[dialogue].utterances[position].gold_tag = Some(tag);
    }

    /// Overwrites one working tag. Returns whether the value changed.
    pub fn set_working_tag(&mut self, dialogue: usize, position: usize, tag: Tag) -> Result<bool> {
        self.utterance(dialogue, position)?;
        self.admit_tag(&tag);
        let slot = &mut self.dialogues[dialogue].utterances[position].working_tag;
        let changed = slot.as_ref() != Some(&tag);
        *slot = Some(tag);
        Ok(changed)
    }

    /// One left-to-right pass per dialogue; `fires` sees tags already updated
    /// earlier in the pass. Returns how many tags actually changed.
    pub(crate) fn apply_sweep(&mut self, fires: impl Fn(&Site<'_>) -> bool, target: &Tag) -> usize {
        self.admit_tag(target);
        let mut changed = 0;
        for dialogue in &mut self.dialogues {
            for position in 0..dialogue.utterances.len() {
                if fires(&Site::new(dialogue, position)) {
                    let slot = &mut dialogue.utterances[position].working_tag;
                    if slot.as_ref() != Some(target) {
                        *slot = Some(target.clone());
                        changed += 1;
                    }
                }
            }
        }
        changed
    }

    /// A read-only view of one utterance in context.
    pub fn site(&self, dialogue: usize, position: usize) -> Result<Site<'_>> {
        self.utterance(dialogue, position)?;
        Ok(Site::new(&self.dialogues[dialogue], position))
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    Corpus::parse(&fs::read_to_string(path)?)
}

/// One utterance seen in the context of its dialogue.
///
/// During a scoring sweep the site can carry pending tag changes made earlier
/// in the same dialogue; tag reads consult those before the stored tags.
#[derive(Clone, Copy)]
pub struct Site<'a> {
    dialogue: &'a Dialogue,
    position: usize,
    pending: &'a [(usize, Tag)],
}

impl<'a> Site<'a> {
    pub fn new(dialogue: &'a Dialogue, position: usize) -> Self {
        Site {
            dialogue,
            position,
            pending: &[],
        }
    }

    /// `pending` must be sorted by position.
    pub(crate) fn with_pending(
        dialogue: &'a Dialogue,
        position: usize,
        pending: &'a [(usize, Tag)],
    ) -> Self {
        Site {
            dialogue,
            position,
            pending,
        }
    }

    pub fn dialogue(&self) -> &'a Dialogue {
        self.dialogue
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn utterance(&self) -> &'a Utterance {
        &self.dialogue.utterances[self.position]
    }

    pub fn change_of_speaker(&self) -> bool {
        self.dialogue.change_of_speaker(self.position)
    }

    /// Working tag at an arbitrary position of the same dialogue.
    pub fn tag_at(&self, position: usize) -> Option<&'a Tag> {
        let pending = self
            .pending
            .iter()
            .rev()
            .take_while(|(p, _)| *p >= position)
            .find(|(p, _)| *p == position);
        match pending {
            Some((_, tag)) => Some(tag),
            None => self.dialogue.utterances.get(position)?.working_tag.as_ref(),
        }
    }

    pub fn current_tag(&self) -> Option<&'a Tag> {
        self.tag_at(self.position)
    }

    /// Working tag `offset` utterances back, or `None` before the dialogue start.
    pub fn tag_back(&self, offset: usize) -> Option<&'a Tag> {
        self.position
            .checked_sub(offset)
            .and_then(|p| self.tag_at(p))
    }

    pub fn previous_tag(&self) -> Option<&'a Tag> {
        self.tag_back(1)
    }
}
