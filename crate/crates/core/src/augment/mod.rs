//! Training-corpus assembly from authentic data plus externally produced
//! translations: bidirectional reconstruction, data diversification,
//! forward translation, tagged back-translation, alternated-training
//! schedules and transductive-ensemble sets.

mod sample;
mod schedule;
mod synth;

pub use sample::{mono_sample, reservoir_sample};
pub use schedule::{at_schedule, AlternationSchedule, Phase, PhaseKind};
pub use synth::{
    bit_reconstruct, bt_tag, bt_untag, dd_merge, ft_build, swap_direction, tel_build, DdReport, TranslationBatch,
    TranslationItem, DEFAULT_BT_TAG,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("batch `{system}` references unknown source id `{src_id}`")]
    UnknownSource { system: String, src_id: String },
    #[error("batch `{system}` translates `{src_id}` more than once")]
    DuplicateItem { system: String, src_id: String },
    #[error("no translation for sampled record `{0}`")]
    MissingTranslation(String),
    #[error("model `{model}` has no translation for source `{src_id}`")]
    CoverageGap { model: String, src_id: String },
    #[error("at least one model batch is required")]
    NoModels,
    #[error("pair `{id}` has origin {origin}; only backward_synthetic pairs can be tagged")]
    NotBackTranslated { id: String, origin: String },
    #[error("pair `{0}` is already tagged")]
    AlreadyTagged(String),
    #[error("pair `{id}` does not start with tag `{tag}`")]
    TagMissing { id: String, tag: String },
    #[error("schedule lengths must be at least 1 (total={total}, synthetic={synthetic}, authentic={authentic})")]
    InvalidSchedule { total: u64, synthetic: u64, authentic: u64 },
}
