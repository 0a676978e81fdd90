//! Transformation-based learning for tagging dialogue utterances.
//!
//! The learner builds an ordered list of tag-rewriting rules. In exhaustive
//! mode every rule that would fix a mistagged utterance is generated and
//! scored each iteration; in lazy mode only `R` rules are drawn at random per
//! mistagged utterance, which keeps the per-iteration work independent of
//! how many templates are supplied.
//!
//! ```
//! use tbl::corpus::{Corpus, Tag};
//! use tbl::learner::{evaluate, train, TrainConfig};
//! use tbl::templates::{parse_template_spec, ConditionRegistry};
//!
//! let corpus_text = r#"{"dialogue":"d","speaker":"A","tokens":["Can","I","ask?"],"tag":"REQUEST"}
//! {"dialogue":"d","speaker":"B","tokens":["Sure."],"tag":"ACCEPT"}
//! {"dialogue":"d","speaker":"A","tokens":["Can","we","meet?"],"tag":"REQUEST"}"#;
//! let mut corpus = Corpus::parse(corpus_text).unwrap();
//! let templates = parse_template_spec("\nincludes_word\n", &ConditionRegistry::builtin()).unwrap();
//! let outcome = train(&mut corpus, &templates, &TrainConfig::exhaustive()).unwrap();
//! assert_eq!(evaluate(&corpus).unwrap(), 1.0);
//! assert_eq!(outcome.sequence.len(), 1);
//! ```

pub mod bench;
pub mod corpus;
pub mod error;
pub mod learner;
pub mod rules;
pub mod templates;

pub use error::{Error, Result};
