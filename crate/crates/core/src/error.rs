use thiserror::Error;

use crate::augment::AugmentError;
use crate::corpus::CorpusError;
use crate::curriculum::CurriculumError;
use crate::dnt::DntError;
use crate::llm_data::LlmDataError;
use crate::mbr::MbrError;
use crate::metrics::MetricError;
use crate::preprocess::PreprocessError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
    #[error(transparent)]
    LlmData(#[from] LlmDataError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Mbr(#[from] MbrError),
    #[error(transparent)]
    Dnt(#[from] DntError),
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
