//! Conditions, rule templates, and template generation.
//!
//! A [`Condition`] is a feature test on an utterance in context, left unbound
//! until a rule fixes its value. A [`Template`] is a conjunction of distinct
//! condition kinds; the empty template is valid and yields unconditional
//! rules. Condition kinds live in a [`ConditionRegistry`] so callers can add
//! their own features next to the four built-ins.
//!
//! Templates have a line-oriented text form: one template per line, kind
//! names joined by `&`, a blank line for the empty template, and `#` comments.

use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::corpus::{Site, Tag};
use crate::error::{Error, Result};

/// The set of values a condition kind can bind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BindingDomain {
    Boolean,
    Token,
    Tag,
    /// A contiguous run of tokens.
    TokenSequence,
}

impl BindingDomain {
    pub fn admits(&self, value: &Value) -> bool {
        matches!(
            (self, value),
            (BindingDomain::Boolean, Value::Bool(_))
                | (BindingDomain::Token, Value::Token(_))
                | (BindingDomain::Tag, Value::Tag(_))
                | (BindingDomain::TokenSequence, Value::Tokens(_))
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Token(Arc<str>),
    Tag(Tag),
    Tokens(Arc<[Arc<str>]>),
}

impl Value {
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Bool(b) => serde_json::Value::Bool(*b),
            Value::Token(t) => serde_json::Value::String(t.to_string()),
            Value::Tag(t) => serde_json::Value::String(t.as_str().to_string()),
            Value::Tokens(ts) => ts
                .iter()
                .map(|t| serde_json::Value::String(t.to_string()))
                .collect(),
        }
    }

    pub fn from_json(domain: BindingDomain, json: &serde_json::Value) -> Result<Self> {
        let mismatch =
            || Error::Argument(format!("value {json} does not fit a {domain:?} condition"));
        match (domain, json) {
            (BindingDomain::Boolean, serde_json::Value::Bool(b)) => Ok(Value::Bool(*b)),
            (BindingDomain::Token, serde_json::Value::String(s)) if !s.is_empty() => {
                Ok(Value::Token(Arc::from(s.as_str())))
            }
            (BindingDomain::Tag, serde_json::Value::String(s)) => Ok(Value::Tag(Tag::new(s)?)),
            (BindingDomain::TokenSequence, serde_json::Value::Array(items))
                if !items.is_empty() =>
            {
                items
                    .iter()
                    .map(|item| match item {
                        serde_json::Value::String(s) if !s.is_empty() => Ok(Arc::from(s.as_str())),
                        _ => Err(mismatch()),
                    })
                    .collect::<Result<Vec<_>>>()
                    .map(|tokens| Value::Tokens(tokens.into()))
            }
            _ => Err(mismatch()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Tag(t) => write!(f, "{t}"),
            Value::Token(_) | Value::Tokens(_) => write!(f, "{}", self.to_json()),
        }
    }
}

/// A feature test on an utterance in context.
///
/// `bindings` lists, without repeats and in a stable order, every value for
/// which the condition holds at the site. `holds` must agree with it.
pub trait Condition: Send + Sync {
    fn name(&self) -> &str;

    fn domain(&self) -> BindingDomain;

    /// True when the test reads the tags of other utterances. Such conditions
    /// can change truth value in the middle of an application sweep.
    fn reads_neighbor_tags(&self) -> bool {
        false
    }

    fn bindings(&self, site: &Site<'_>) -> Vec<Value>;

    fn holds(&self, site: &Site<'_>, value: &Value) -> bool;
}

/// Shared handle to a registered condition. Identity is the condition name.
#[derive(Clone)]
pub struct ConditionKind(Arc<dyn Condition>);

impl ConditionKind {
    pub fn new(condition: impl Condition + 'static) -> Self {
        ConditionKind(Arc::new(condition))
    }

    pub fn name(&self) -> &str {
        self.0.name()
    }

    pub fn domain(&self) -> BindingDomain {
        self.0.domain()
    }

    pub fn reads_neighbor_tags(&self) -> bool {
        self.0.reads_neighbor_tags()
    }

    pub fn bindings(&self, site: &Site<'_>) -> Vec<Value> {
        self.0.bindings(site)
    }

    pub fn holds(&self, site: &Site<'_>, value: &Value) -> bool {
        self.0.holds(site, value)
    }
}

impl PartialEq for ConditionKind {
    fn eq(&self, other: &Self) -> bool {
        self.name() == other.name()
    }
}

impl Eq for ConditionKind {}

impl Hash for ConditionKind {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.name().hash(state);
    }
}

impl PartialOrd for ConditionKind {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ConditionKind {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.name().cmp(other.name())
    }
}

impl fmt::Debug for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const CHANGE_OF_SPEAKER: &str = "change_of_speaker";
pub const INCLUDES_WORD: &str = "includes_word";
pub const CURRENT_TAG: &str = "current_tag";
pub const PREVIOUS_TAG: &str = "previous_tag";

/// Whether the speaker differs from the preceding utterance's.
pub struct ChangeOfSpeaker;

impl Condition for ChangeOfSpeaker {
    fn name(&self) -> &str {
        CHANGE_OF_SPEAKER
    }

    fn domain(&self) -> BindingDomain {
        BindingDomain::Boolean
    }

    fn bindings(&self, site: &Site<'_>) -> Vec<Value> {
        vec![Value::Bool(site.change_of_speaker())]
    }

    fn holds(&self, site: &Site<'_>, value: &Value) -> bool {
        matches!(value, Value::Bool(b) if *b == site.change_of_speaker())
    }
}

pub struct IncludesWord;

impl Condition for IncludesWord {
    fn name(&self) -> &str {
        INCLUDES_WORD
    }

    fn domain(&self) -> BindingDomain {
        BindingDomain::Token
    }

    fn bindings(&self, site: &Site<'_>) -> Vec<Value> {
        let tokens = site.utterance().tokens();
        let mut values: Vec<Value> = Vec::with_capacity(tokens.len());
        for (i, token) in tokens.iter().enumerate() {
            if !tokens[..i].contains(token) {
                values.push(Value::Token(token.clone()));
            }
        }
        values
    }

    fn holds(&self, site: &Site<'_>, value: &Value) -> bool {
        matches!(value, Value::Token(w) if site.utterance().includes(w))
    }
}

pub struct CurrentTag;

impl Condition for CurrentTag {
    fn name(&self) -> &str {
        CURRENT_TAG
    }

    fn domain(&self) -> BindingDomain {
        BindingDomain::Tag
    }

    fn bindings(&self, site: &Site<'_>) -> Vec<Value> {
        site.current_tag()
            .map(|t| Value::Tag(t.clone()))
            .into_iter()
            .collect()
    }

    fn holds(&self, site: &Site<'_>, value: &Value) -> bool {
        matches!(value, Value::Tag(t) if site.current_tag() == Some(t))
    }
}

pub struct PreviousTag;

impl Condition for PreviousTag {
    fn name(&self) -> &str {
        PREVIOUS_TAG
    }

    fn domain(&self) -> BindingDomain {
        BindingDomain::Tag
    }

    fn reads_neighbor_tags(&self) -> bool {
        true
    }

    fn bindings(&self, site: &Site<'_>) -> Vec<Value> {
        site.previous_tag()
            .map(|t| Value::Tag(t.clone()))
            .into_iter()
            .collect()
    }

    fn holds(&self, site: &Site<'_>, value: &Value) -> bool {
        matches!(value, Value::Tag(t) if site.previous_tag() == Some(t))
    }
}

/// Condition kinds by name.
#[derive(Clone, Default)]
pub struct ConditionRegistry {
    kinds: BTreeMap<String, ConditionKind>,
}

impl ConditionRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// change_of_speaker, includes_word, current_tag and previous_tag.
    pub fn builtin() -> Self {
        let mut registry = Self::empty();
        for kind in [
            ConditionKind::new(ChangeOfSpeaker),
            ConditionKind::new(IncludesWord),
            ConditionKind::new(CurrentTag),
            ConditionKind::new(PreviousTag),
        ] {
            registry
                .register(kind)
                .expect("built-in names are distinct");
        }
        registry
    }

    pub fn register(&mut self, kind: ConditionKind) -> Result<()> {
        let name = kind.name();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::Argument(format!("invalid condition name `{name}`")));
        }
        if self.kinds.contains_key(name) {
            return Err(Error::Argument(format!(
                "condition `{name}` is already registered"
            )));
        }
        self.kinds.insert(name.to_string(), kind);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<ConditionKind> {
        self.kinds
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownCondition(name.to_string()))
    }

    pub fn kinds(&self) -> impl Iterator<Item = &ConditionKind> {
        self.kinds.values()
    }
}

/// A conjunction of distinct condition kinds, stored in name order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Template {
    kinds: Vec<ConditionKind>,
}

impl Template {
    pub fn new(mut kinds: Vec<ConditionKind>) -> Result<Self> {
        kinds.sort();
        if let Some(pair) = kinds.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateCondition(pair[0].name().to_string()));
        }
        Ok(Template { kinds })
    }

    pub fn empty() -> Self {
        Template { kinds: Vec::new() }
    }

    pub fn kinds(&self) -> &[ConditionKind] {
        &self.kinds
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, kind) in self.kinds.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            f.write_str(kind.name())?;
        }
        Ok(())
    }
}

/// A condition kind with its value fixed.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoundCondition {
    kind: ConditionKind,
    value: Value,
}

impl BoundCondition {
    pub fn new(kind: ConditionKind, value: Value) -> Result<Self> {
        if !kind.domain().admits(&value) {
            return Err(Error::Argument(format!(
                "value {value} is outside the domain of `{}`",
                kind.name()
            )));
        }
        Ok(BoundCondition { kind, value })
    }

    pub(crate) fn new_unchecked(kind: ConditionKind, value: Value) -> Self {
        BoundCondition { kind, value }
    }

    pub fn kind(&self) -> &ConditionKind {
        &self.kind
    }

    pub fn value(&self) -> &Value {
        &self.value
    }

    pub fn holds(&self, site: &Site<'_>) -> bool {
        self.kind.holds(site, &self.value)
    }
}

impl fmt::Display for BoundCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.kind.name(), self.value)
    }
}

/// Every subset of the first `n` kinds, enumerated by a binary counter over
/// the list order: subset `i` holds kind `j` iff bit `j` of `i` is set.
pub fn power_set_templates(conditions: &[ConditionKind], n: usize) -> Result<Vec<Template>> {
    if n > conditions.len() {
        return Err(Error::Argument(format!(
            "n = {n} exceeds the {} available conditions",
            conditions.len()
        )));
    }
    if n >= usize::BITS as usize {
        return Err(Error::Argument(format!(
            "n = {n} is too large to enumerate"
        )));
    }
    (0..1usize << n)
        .map(|mask| {
            let kinds = (0..n)
                .filter(|bit| mask & (1 << bit) != 0)
                .map(|bit| conditions[bit].clone())
                .collect();
            Template::new(kinds)
        })
        .collect()
}

/// Parses the template DSL against `registry`. Kind names are case-insensitive.
pub fn parse_template_spec(text: &str, registry: &ConditionRegistry) -> Result<Vec<Template>> {
    let mut templates = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line_no = index + 1;
        let (body, had_comment) = match raw.find('#') {
            Some(at) => (&raw[..at], true),
            None => (raw, false),
        };
        let body = body.trim();
        if body.is_empty() {
            if !had_comment {
                templates.push(Template::empty());
            }
            continue;
        }
        let kinds = body
            .split('&')
            .map(|name| {
                let name = name.trim();
                if name.is_empty() {
                    return Err(Error::parse(line_no, "empty condition name"));
                }
                registry
                    .get(&name.to_ascii_lowercase())
                    .or_else(|_| registry.get(name))
            })
            .collect::<Result<Vec<_>>>()?;
        templates.push(Template::new(kinds)?);
    }
    Ok(templates)
}

/// Inverse of [`parse_template_spec`].
pub fn format_template_spec(templates: &[Template]) -> String {
    let mut out = String::new();
    for template in templates {
        out.push_str(&template.to_string());
        out.push('\n');
    }
    out
}
