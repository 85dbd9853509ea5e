//! Shared record types and their line-delimited JSON encoding.

mod io;
mod manifest;
mod model;
mod scores;

pub use io::{
    open_input, open_output, read_all, read_corpus, read_hypotheses, read_mono, read_pairs, read_scores, write_json,
    write_records, CorpusKind, Record, RecordReader,
};
pub use manifest::{CorpusManifest, StageCount, StageKind};
pub use model::{
    Hypothesis, Lang, Method, MonolingualRecord, Origin, ScoreRecord, SentencePair, System, META_DIRECTION, META_MODEL,
    META_PARENT, META_SYSTEM, META_TAG,
};
pub use scores::{attach_scores, AttachReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: field `{field}`: {message}")]
    Field {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate {what} `{key}`")]
    Duplicate {
        line: usize,
        what: &'static str,
        key: String,
    },
    #[error("duplicate score ({record_id}, {scorer})")]
    DuplicateScore { record_id: String, scorer: String },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}
