//! Declarative stage chains: a TOML document lists operations with their
//! input and output paths; the runner validates the whole chain up front,
//! executes stages in order and emits a JSON report.
//!
//! ```toml
//! seed = 7
//! report = "out/report.json"
//!
//! [[stage]]
//! op = "preprocess.run"
//! inputs = { in = "pairs.jsonl", scores = "scores.jsonl" }
//! outputs = { out = "out/clean.jsonl", manifest = "out/clean.manifest.json" }
//! params = { stages = "dedup,normwidth,len,sim" }
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{write_json, CorpusManifest};
use crate::par::with_threads;
use crate::tasks::{run_op, validate_stage, RunContext, StageIo};
use crate::{Error, Exec, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub report: Option<String>,
    /// Worker threads; 1 runs everything on the calling thread.
    #[serde(default)]
    pub shards: Option<usize>,
    #[serde(default, rename = "stage")]
    pub stages: Vec<StageIo>,
}

fn resolve(base: &Path, path: &str) -> String {
    if path == "-" || Path::new(path).is_absolute() {
        path.to_string()
    } else {
        base.join(path).to_string_lossy().into_owned()
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text).map_err(|message| Error::Config {
            path: path.to_string(),
            message,
        })?;
        let base = Path::new(path).parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.rebase(&base);
        Ok(cfg)
    }

    /// Makes every relative path relative to `base`.
    pub fn rebase(&mut self, base: &Path) {
        if let Some(r) = &mut self.report {
            *r = resolve(base, r);
        }
        for s in &mut self.stages {
            for p in s.inputs.values_mut().chain(s.outputs.values_mut()) {
                *p = resolve(base, p);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Zero-based stage index, if the problem belongs to one stage.
    pub stage: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.stage {
            Some(i) => write!(f, "stage {i}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Every problem that would stop the pipeline, found without running any
/// stage. An empty list means the config is runnable.
pub fn validate(cfg: &PipelineConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut diag = |stage: Option<usize>, message: String| out.push(Diagnostic { stage, message });
    if cfg.stages.is_empty() {
        diag(None, "empty pipeline".into());
        return out;
    }
    if cfg.shards == Some(0) {
        diag(None, "shards must be at least 1".into());
    }
    for (i, s) in cfg.stages.iter().enumerate() {
        for m in validate_stage(s) {
            diag(Some(i), format!("{}: {m}", s.op));
        }
    }

    let mut writer: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, s) in cfg.stages.iter().enumerate() {
        for (name, path) in &s.inputs {
            if path == "-" {
                continue;
            }
            if s.outputs.values().any(|o| o == path) {
                diag(
                    Some(i),
                    format!("input `{name}` ({path}) is also one of this stage's outputs"),
                );
            } else if !writer.contains_key(path.as_str()) {
                let later = cfg.stages[i + 1..]
                    .iter()
                    .position(|t| t.outputs.values().any(|o| o == path));
                match later {
                    Some(j) => diag(
                        Some(i),
                        format!(
                            "input `{name}` ({path}) is written by stage {}, which runs later",
                            i + 1 + j
                        ),
                    ),
                    None if !Path::new(path).exists() => diag(
                        Some(i),
                        format!("input `{name}` ({path}) does not exist and no earlier stage writes it"),
                    ),
                    None => {}
                }
            }
        }
        let mut own: Vec<&str> = Vec::new();
        for path in s.outputs.values() {
            if path == "-" {
                continue;
            }
            if own.contains(&path.as_str()) {
                diag(Some(i), format!("writes {path} twice"));
            } else if let Some(&j) = writer.get(path.as_str()) {
                diag(Some(i), format!("stages {j} and {i} both write {path}"));
            }
            own.push(path);
        }
        for path in own {
            writer.entry(path).or_insert(i);
        }
    }
    if let Some(r) = &cfg.report {
        if let Some(&j) = writer.get(r.as_str()) {
            diag(None, format!("report path {r} is also written by stage {j}"));
        }
    }
    out
}

/// Seed for stage `stage` of a run with `global` seed, further keyed by
/// `key` (an operation name or record id). Stable across platforms and
/// releases.
pub fn derive_seed(global: u64, stage: u64, key: &str) -> u64 {
    // FNV-1a over the key, mixed with splitmix64 finalizers
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix(mix(global ^ mix(stage.wrapping_add(0x9e37_79b9_7f4a_7c15))) ^ h)
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    ValidationError,
    StageError,
}

impl RunStatus {
    /// Process exit code: 0 success, 1 stage error, 2 validation error.
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::StageError => 1,
            RunStatus::ValidationError => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub index: usize,
    pub op: String,
    pub ok: bool,
    pub seed: u64,
    pub duration_ms: f64,
    pub outputs: BTreeMap<String, String>,
    pub counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<CorpusManifest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub status: RunStatus,
    pub seed: u64,
    pub shards: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
    pub stages: Vec<StageEntry>,
    pub duration_ms: f64,
}

fn default_shards() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Validates, then runs every stage in order, stopping at the first
/// failure. `shards` overrides the config's worker count. The report is
/// written to the config's report path when one is set.
pub fn run_pipeline(cfg: &PipelineConfig, shards: Option<usize>) -> PipelineReport {
    let shards = shards.or(cfg.shards).unwrap_or_else(default_shards).max(1);
    let started = Instant::now();
    let diagnostics = validate(cfg);
    let mut report = PipelineReport {
        status: RunStatus::Ok,
        seed: cfg.seed,
        shards,
        diagnostics,
        stages: Vec::new(),
        duration_ms: 0.0,
    };
    if !report.diagnostics.is_empty() {
        report.status = RunStatus::ValidationError;
    } else {
        let exec = if shards > 1 { Exec::Parallel } else { Exec::Sequential };
        report.stages = with_threads(shards, || run_stages(cfg, exec));
        if report.stages.iter().any(|s| !s.ok) {
            report.status = RunStatus::StageError;
        }
    }
    report.duration_ms = started.elapsed().as_secs_f64() * 1e3;
    if let Some(path) = &cfg.report {
        if let Err(e) = write_json(path, &report) {
            report.status = RunStatus::StageError;
            report.diagnostics.push(Diagnostic {
                stage: None,
                message: format!("cannot write report: {e}"),
            });
        }
    }
    report
}

fn run_stages(cfg: &PipelineConfig, exec: Exec) -> Vec<StageEntry> {
    let mut entries = Vec::new();
    for (i, stage) in cfg.stages.iter().enumerate() {
        let seed = derive_seed(cfg.seed, i as u64, &stage.op);
        let t = Instant::now();
        let result = prepare_outputs(stage).and_then(|()| run_op(stage, &RunContext { exec, seed }));
        let mut entry = StageEntry {
            index: i,
            op: stage.op.clone(),
            ok: result.is_ok(),
            seed,
            duration_ms: t.elapsed().as_secs_f64() * 1e3,
            outputs: stage.outputs.clone(),
            counts: BTreeMap::new(),
            warnings: Vec::new(),
            manifest: None,
            error: None,
        };
        match result {
            Ok(r) => {
                entry.counts = r.counts;
                entry.warnings = r.warnings;
                entry.manifest = r.manifest;
                entries.push(entry);
            }
            Err(e) => {
                entry.error = Some(e.to_string());
                entries.push(entry);
                break;
            }
        }
    }
    entries
}

fn prepare_outputs(stage: &StageIo) -> Result<()> {
    for path in stage.outputs.values().filter(|p| *p != "-") {
        if let Some(dir) = Path::new(path).parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: PathBuf::from(dir).to_string_lossy().into_owned(),
                source,
            })?;
        }
    }
    Ok(())
}
