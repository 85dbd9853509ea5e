//! Corpus processing and hypothesis selection for an English→Chinese MT
//! system: data cleaning, synthetic data assembly, curriculum sampling,
//! LLM training-data construction, lexical metrics, MBR decoding and
//! do-not-translate span masking.
//!
//! Neural scorers (language ID, sentence similarity, QE, COMET, model
//! log-probabilities) are never executed here; their outputs are consumed
//! as score files joined by record id, which keeps every procedure
//! deterministic.

pub mod augment;
pub mod corpus;
pub mod curriculum;
pub mod dnt;
pub mod error;
pub mod llm_data;
pub mod mbr;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod preprocess;
pub mod tasks;
pub mod text;

pub use error::{Error, Result};
pub use par::Exec;
