use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Metadata key: direction marker on reversed pairs.
pub const META_DIRECTION: &str = "direction";
/// Metadata key: id of the pair a synthetic record was derived from.
pub const META_PARENT: &str = "parent";
/// Metadata key: translation system that produced a synthetic side.
pub const META_SYSTEM: &str = "system";
/// Metadata key: model name on transductive-ensemble pairs.
pub const META_MODEL: &str = "model";
/// Metadata key: back-translation tag already prepended to `src`.
pub const META_TAG: &str = "bt_tag";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    #[default]
    Authentic,
    ForwardSynthetic,
    BackwardSynthetic,
    Diversified,
    TelSynthetic,
}

impl Origin {
    pub const ALL: [Origin; 5] = [
        Origin::Authentic,
        Origin::ForwardSynthetic,
        Origin::BackwardSynthetic,
        Origin::Diversified,
        Origin::TelSynthetic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Authentic => "authentic",
            Origin::ForwardSynthetic => "forward_synthetic",
            Origin::BackwardSynthetic => "backward_synthetic",
            Origin::Diversified => "diversified",
            Origin::TelSynthetic => "tel_synthetic",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One bilingual record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    pub id: String,
    pub src: String,
    pub tgt: String,
    #[serde(default)]
    pub origin: Origin,
    #[serde(default)]
    pub scores: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl SentencePair {
    pub fn new(id: impl Into<String>, src: impl Into<String>, tgt: impl Into<String>) -> Self {
        SentencePair {
            id: id.into(),
            src: src.into(),
            tgt: tgt.into(),
            origin: Origin::Authentic,
            scores: BTreeMap::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_score(mut self, scorer: &str, value: f64) -> Self {
        self.scores.insert(scorer.to_string(), value);
        self
    }

    pub fn score(&self, scorer: &str) -> Option<f64> {
        self.scores.get(scorer).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    En,
    Zh,
}

impl Lang {
    pub fn as_str(self) -> &'static str {
        match self {
            Lang::En => "en",
            Lang::Zh => "zh",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonolingualRecord {
    pub id: String,
    pub text: String,
    pub lang: Lang,
    #[serde(default)]
    pub doc_id: Option<String>,
}

impl MonolingualRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, lang: Lang) -> Self {
        MonolingualRecord {
            id: id.into(),
            text: text.into(),
            lang,
            doc_id: None,
        }
    }

    pub fn in_doc(mut self, doc: impl Into<String>) -> Self {
        self.doc_id = Some(doc.into());
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Nmt,
    Llm,
}

impl System {
    pub fn as_str(self) -> &'static str {
        match self {
            System::Nmt => "nmt",
            System::Llm => "llm",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Beam,
    Sampled,
}

/// One candidate translation of the source sentence `src_id`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub src_id: String,
    pub system: System,
    pub method: Method,
    pub text: String,
    #[serde(default)]
    pub score: Option<f64>,
}

impl Hypothesis {
    pub fn new(src_id: impl Into<String>, system: System, method: Method, text: impl Into<String>) -> Self {
        Hypothesis {
            src_id: src_id.into(),
            system,
            method,
            text: text.into(),
            score: None,
        }
    }

    pub fn scored(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }
}

/// An externally computed score for one record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub record_id: String,
    pub scorer: String,
    pub value: f64,
}

impl ScoreRecord {
    pub fn new(record_id: impl Into<String>, scorer: impl Into<String>, value: f64) -> Self {
        ScoreRecord {
            record_id: record_id.into(),
            scorer: scorer.into(),
            value,
        }
    }

    /// Scorers whose values are probabilities in [0, 1].
    pub fn is_unit_interval(scorer: &str) -> bool {
        matches!(scorer, "similarity" | "qe")
    }
}
