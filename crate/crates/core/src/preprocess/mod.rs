//! Bitext cleaning: deduplication, width normalization and score-based
//! filters, individually or as an ordered chain with per-stage accounting.

mod chain;
mod config;
mod filters;

pub use chain::{run_chain, Stage};
pub use config::FilterConfig;
pub use filters::{
    dedup, filter_alignment, filter_language, filter_length, filter_similarity, normalize_pair_width, normalize_width,
    FilterOutcome, SCORE_ALIGN, SCORE_LANGID_SRC, SCORE_LANGID_TGT, SCORE_SIMILARITY,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("unknown stage `{0}` (expected dedup, normwidth, lang, len, align, sim, zhseg, punct)")]
    UnknownStage(String),
    #[error("stage `{0}` listed twice")]
    RepeatedStage(String),
    #[error("invalid filter config: {0}")]
    Config(String),
    #[error("stage `{stage}` needs `{key}` in the filter config")]
    MissingSetting { stage: &'static str, key: &'static str },
    #[error("external stage `{stage}` failed: {message}")]
    External { stage: &'static str, message: String },
}
