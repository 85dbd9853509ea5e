use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::{Origin, SentencePair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    /// Removes records: out ≤ in.
    Filter,
    /// Adds records: out ≥ in.
    Augment,
    /// Rewrites records one-for-one.
    Transform,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: String,
    pub kind: StageKind,
    #[serde(rename = "in")]
    pub input: usize,
    #[serde(rename = "out")]
    pub output: usize,
}

/// Record accounting for one run: per-origin totals, per-stage in/out
/// counts and named side counters (missing scores, orphans, ...).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    #[serde(default)]
    pub origins: BTreeMap<String, usize>,
    #[serde(default)]
    pub stages: Vec<StageCount>,
    #[serde(default)]
    pub counters: BTreeMap<String, usize>,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

impl CorpusManifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_stage(&mut self, stage: impl Into<String>, kind: StageKind, input: usize, output: usize) {
        self.stages.push(StageCount {
            stage: stage.into(),
            kind,
            input,
            output,
        });
    }

    pub fn bump(&mut self, counter: &str, by: usize) {
        *self.counters.entry(counter.to_string()).or_default() += by;
    }

    pub fn note(&mut self, key: &str, value: impl Into<String>) {
        self.notes.insert(key.to_string(), value.into());
    }

    /// Replaces the per-origin totals with a census of `pairs`.
    pub fn count_origins(&mut self, pairs: &[SentencePair]) {
        self.origins.clear();
        for origin in Origin::ALL {
            let n = pairs.iter().filter(|p| p.origin == origin).count();
            if n > 0 {
                self.origins.insert(origin.as_str().to_string(), n);
            }
        }
    }

    /// Checks stage arithmetic: filters shrink, augmentations grow,
    /// transforms preserve, and consecutive stages telescope.
    pub fn check(&self) -> Result<(), String> {
        for s in &self.stages {
            let ok = match s.kind {
                StageKind::Filter => s.output <= s.input,
                StageKind::Augment => s.output >= s.input,
                StageKind::Transform => s.output == s.input,
            };
            if !ok {
                return Err(format!(
                    "stage {} ({:?}) has in={} out={}",
                    s.stage, s.kind, s.input, s.output
                ));
            }
        }
        for w in self.stages.windows(2) {
            if w[0].output != w[1].input {
                return Err(format!(
                    "stage {} emits {} but stage {} receives {}",
                    w[0].stage, w[0].output, w[1].stage, w[1].input
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn telescoping_stages_pass() {
        let mut m = CorpusManifest::new();
        m.record_stage("dedup", StageKind::Filter, 3, 2);
        m.record_stage("filter_length", StageKind::Filter, 2, 1);
        m.record_stage("bit", StageKind::Augment, 1, 2);
        assert!(m.check().is_ok());
    }

    #[test]
    fn broken_chain_is_reported() {
        let mut m = CorpusManifest::new();
        m.record_stage("dedup", StageKind::Filter, 3, 2);
        m.record_stage("filter_length", StageKind::Filter, 3, 1);
        assert!(m.check().unwrap_err().contains("filter_length"));
        let mut m = CorpusManifest::new();
        m.record_stage("grow", StageKind::Filter, 1, 2);
        assert!(m.check().is_err());
    }

    #[test]
    fn origin_census() {
        let pairs = vec![
            SentencePair::new("a", "x", "y"),
            SentencePair::new("b", "x", "y").with_origin(Origin::TelSynthetic),
        ];
        let mut m = CorpusManifest::new();
        m.count_origins(&pairs);
        assert_eq!(m.origins["authentic"], 1);
        assert_eq!(m.origins["tel_synthetic"], 1);
        assert_eq!(m.origins.len(), 2);
    }
}
