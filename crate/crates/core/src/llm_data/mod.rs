//! Training data for the LLM translation system: packed pre-training
//! documents, QE-filtered fine-tuning pairs rendered through prompt
//! templates, and preference triplets mined from scored N-best lists.

mod cpo;
mod pack;
mod template;

pub use cpo::{build_cpo_triplets, CpoReport, PreferenceTriplet};
pub use pack::{pack_cpt, CapUnit, PackedDocument, Segment, DEFAULT_CAP};
pub use template::{Field, PromptTemplate, RenderFields, TemplateStage};

use crate::corpus::SentencePair;
use crate::par::{self, Exec};
use thiserror::Error;

pub const SCORE_QE: &str = "qe";
pub const DEFAULT_SFT_THRESHOLD: f64 = 0.8;

#[derive(Debug, Error, PartialEq)]
pub enum LlmDataError {
    #[error("cap must be at least 1")]
    ZeroCap,
    #[error("hypothesis {index} for `{src_id}` has no score")]
    MissingScore { src_id: String, index: usize },
    #[error("source `{src_id}` has {count} hypotheses; at least 2 are needed")]
    TooFewHypotheses { src_id: String, count: usize },
    #[error("template: {0}")]
    Template(String),
    #[error("placeholder {{{0}}} has no value")]
    Unbound(&'static str),
}

/// Result of the fine-tuning quality filter.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SftOutcome {
    pub kept: Vec<SentencePair>,
    pub dropped: usize,
    pub missing_score: usize,
}

/// Keeps pairs whose `qe` score is strictly greater than `threshold`.
/// Pairs without a score are dropped and counted.
pub fn filter_sft(pairs: Vec<SentencePair>, threshold: f64, exec: Exec) -> SftOutcome {
    let verdicts = par::map(exec, &pairs, |p| p.score(SCORE_QE).map(|qe| qe > threshold));
    let mut out = SftOutcome::default();
    for (p, v) in pairs.into_iter().zip(verdicts) {
        match v {
            Some(true) => out.kept.push(p),
            Some(false) => out.dropped += 1,
            None => {
                out.dropped += 1;
                out.missing_score += 1;
            }
        }
    }
    out
}
