use std::io::Write;
use std::process::{Command, Stdio};
use std::str::FromStr;

use super::filters::{self, FilterOutcome};
use super::{FilterConfig, PreprocessError};
use crate::corpus::{CorpusManifest, RecordReader, SentencePair, StageKind};
use crate::par::{self, Exec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Dedup,
    NormWidth,
    Language,
    Length,
    Alignment,
    Similarity,
    /// External Chinese pre-segmentation command.
    ZhSegment,
    /// External English punctuation normalization command.
    EnPunct,
}

impl Stage {
    /// Name recorded in manifests.
    pub fn name(self) -> &'static str {
        match self {
            Stage::Dedup => "dedup",
            Stage::NormWidth => "normalize_width",
            Stage::Language => "filter_language",
            Stage::Length => "filter_length",
            Stage::Alignment => "filter_alignment",
            Stage::Similarity => "filter_similarity",
            Stage::ZhSegment => "zh_segment",
            Stage::EnPunct => "en_punct",
        }
    }

    pub fn kind(self) -> StageKind {
        match self {
            Stage::NormWidth | Stage::ZhSegment | Stage::EnPunct => StageKind::Transform,
            _ => StageKind::Filter,
        }
    }

    /// Parses a comma-separated stage list.
    pub fn parse_list(list: &str) -> Result<Vec<Stage>, PreprocessError> {
        let stages = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(Stage::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        check_unique(&stages)?;
        Ok(stages)
    }
}

impl FromStr for Stage {
    type Err = PreprocessError;

    fn from_str(s: &str) -> Result<Self, PreprocessError> {
        Ok(match s {
            "dedup" => Stage::Dedup,
            "normwidth" | "normalize_width" => Stage::NormWidth,
            "lang" | "filter_language" => Stage::Language,
            "len" | "filter_length" => Stage::Length,
            "align" | "filter_alignment" => Stage::Alignment,
            "sim" | "filter_similarity" => Stage::Similarity,
            "zhseg" | "zh_segment" => Stage::ZhSegment,
            "punct" | "en_punct" => Stage::EnPunct,
            other => return Err(PreprocessError::UnknownStage(other.to_string())),
        })
    }
}

fn check_unique(stages: &[Stage]) -> Result<(), PreprocessError> {
    for (i, s) in stages.iter().enumerate() {
        if stages[..i].contains(s) {
            return Err(PreprocessError::RepeatedStage(s.name().to_string()));
        }
    }
    Ok(())
}

fn check_settings(cfg: &FilterConfig, stages: &[Stage]) -> Result<(), PreprocessError> {
    cfg.validate()?;
    check_unique(stages)?;
    for s in stages {
        let missing = match s {
            Stage::Language if cfg.langid_threshold.is_none() => Some("langid_threshold"),
            Stage::Alignment if cfg.align_threshold.is_none() => Some("align_threshold"),
            Stage::ZhSegment if cfg.zh_segment_cmd.is_none() => Some("zh_segment_cmd"),
            Stage::EnPunct if cfg.en_punct_cmd.is_none() => Some("en_punct_cmd"),
            _ => None,
        };
        if let Some(key) = missing {
            return Err(PreprocessError::MissingSetting { stage: s.name(), key });
        }
    }
    Ok(())
}

/// Applies `stages` in order, recording in/out counts for each. Settings
/// are checked for every stage before any stage runs.
pub fn run_chain(
    pairs: Vec<SentencePair>,
    cfg: &FilterConfig,
    stages: &[Stage],
    exec: Exec,
) -> Result<(Vec<SentencePair>, CorpusManifest), PreprocessError> {
    check_settings(cfg, stages)?;
    let mut manifest = CorpusManifest::new();
    if let Some(v) = cfg.subword_vocab_size {
        manifest.note("subword_vocab_size", v.to_string());
    }
    let mut current = pairs;
    for &stage in stages {
        let input = current.len();
        let outcome = match stage {
            Stage::Dedup => filters::dedup(current),
            Stage::NormWidth => FilterOutcome {
                kept: par::map_owned(exec, current, filters::normalize_pair_width),
                ..Default::default()
            },
            Stage::Length => filters::filter_length(current, cfg, exec),
            Stage::Language => filters::filter_language(current, cfg.langid_threshold.unwrap_or_default(), exec),
            Stage::Alignment => filters::filter_alignment(current, cfg.align_threshold.unwrap_or_default(), exec),
            Stage::Similarity => filters::filter_similarity(current, cfg.similarity_threshold, exec),
            Stage::ZhSegment => FilterOutcome {
                kept: run_external(stage, cfg.zh_segment_cmd.as_deref().unwrap_or_default(), current)?,
                ..Default::default()
            },
            Stage::EnPunct => FilterOutcome {
                kept: run_external(stage, cfg.en_punct_cmd.as_deref().unwrap_or_default(), current)?,
                ..Default::default()
            },
        };
        if outcome.missing_score > 0 {
            manifest.bump(&format!("{}.missing_score", stage.name()), outcome.missing_score);
        }
        manifest.record_stage(stage.name(), stage.kind(), input, outcome.kept.len());
        current = outcome.kept;
    }
    manifest.count_origins(&current);
    Ok((current, manifest))
}

/// Pipes the records through an external command. The command must emit
/// the same records (same ids, same order) with rewritten text.
fn run_external(stage: Stage, argv: &[String], pairs: Vec<SentencePair>) -> Result<Vec<SentencePair>, PreprocessError> {
    let fail = |message: String| PreprocessError::External {
        stage: stage.name(),
        message,
    };
    let (prog, args) = argv.split_first().ok_or_else(|| fail("empty command".into()))?;
    let mut child = Command::new(prog)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| fail(format!("cannot start `{prog}`: {e}")))?;
    let mut payload = Vec::new();
    for p in &pairs {
        serde_json::to_writer(&mut payload, p).map_err(|e| fail(e.to_string()))?;
        payload.push(b'\n');
    }
    let mut stdin = child.stdin.take().ok_or_else(|| fail("no stdin".into()))?;
    let writer = std::thread::spawn(move || stdin.write_all(&payload));
    let output = child.wait_with_output().map_err(|e| fail(e.to_string()))?;
    writer
        .join()
        .map_err(|_| fail("writer thread panicked".into()))?
        .map_err(|e| fail(format!("writing input: {e}")))?;
    if !output.status.success() {
        return Err(fail(format!("exited with {}", output.status)));
    }
    let rewritten: Vec<SentencePair> = RecordReader::new(output.stdout.as_slice())
        .collect::<Result<_, _>>()
        .map_err(|e| fail(e.to_string()))?;
    if rewritten.len() != pairs.len() || rewritten.iter().zip(&pairs).any(|(a, b)| a.id != b.id) {
        return Err(fail(format!(
            "expected {} records with unchanged ids, got {}",
            pairs.len(),
            rewritten.len()
        )));
    }
    Ok(rewritten)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize) -> String {
        vec!["w"; n].join(" ")
    }

    #[test]
    fn dedup_then_length() {
        let pairs = vec![
            SentencePair::new("1", "a", "b"),
            SentencePair::new("2", "a", "b"),
            SentencePair::new("3", words(151), "c"),
        ];
        let (out, m) = run_chain(
            pairs,
            &FilterConfig::default(),
            &[Stage::Dedup, Stage::Length],
            Exec::Parallel,
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        let counts: Vec<_> = m.stages.iter().map(|s| (s.stage.as_str(), s.input, s.output)).collect();
        assert_eq!(counts, vec![("dedup", 3, 2), ("filter_length", 2, 1)]);
        assert!(m.check().is_ok());
    }

    #[test]
    fn empty_stage_list_is_identity() {
        let pairs = vec![SentencePair::new("1", "a", "b")];
        let (out, m) = run_chain(pairs.clone(), &FilterConfig::default(), &[], Exec::Sequential).unwrap();
        assert_eq!(out, pairs);
        assert!(m.stages.is_empty());
    }

    #[test]
    fn empty_input_gives_zero_counts() {
        let stages = Stage::parse_list("dedup,normwidth,len,sim").unwrap();
        let (out, m) = run_chain(vec![], &FilterConfig::default(), &stages, Exec::Parallel).unwrap();
        assert!(out.is_empty());
        assert!(m.stages.iter().all(|s| s.input == 0 && s.output == 0));
        assert_eq!(m.stages.len(), 4);
    }

    #[test]
    fn unknown_and_repeated_stages() {
        assert!(matches!(Stage::parse_list("dedup,bogus"), Err(PreprocessError::UnknownStage(s)) if s == "bogus"));
        assert!(matches!(
            Stage::parse_list("len,len"),
            Err(PreprocessError::RepeatedStage(_))
        ));
    }

    #[test]
    fn lang_stage_requires_threshold() {
        let err = run_chain(vec![], &FilterConfig::default(), &[Stage::Language], Exec::Sequential).unwrap_err();
        assert!(matches!(
            err,
            PreprocessError::MissingSetting {
                key: "langid_threshold",
                ..
            }
        ));
    }

    #[test]
    fn missing_scores_are_counted_in_manifest() {
        let cfg = FilterConfig {
            align_threshold: Some(0.5),
            ..FilterConfig::default()
        };
        let pairs = vec![
            SentencePair::new("1", "a", "b"),
            SentencePair::new("2", "a", "c").with_score("align", 0.9),
        ];
        let (out, m) = run_chain(pairs, &cfg, &[Stage::Alignment], Exec::Sequential).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(m.counters["filter_alignment.missing_score"], 1);
    }

    #[test]
    fn external_stage_round_trips_through_command() {
        let cfg = FilterConfig {
            zh_segment_cmd: Some(vec!["cat".into()]),
            ..FilterConfig::default()
        };
        let pairs = vec![SentencePair::new("1", "a", "你好"), SentencePair::new("2", "b", "世界")];
        let (out, m) = run_chain(pairs.clone(), &cfg, &[Stage::ZhSegment], Exec::Sequential).unwrap();
        assert_eq!(out, pairs);
        assert_eq!(m.stages[0].kind, StageKind::Transform);
    }

    #[test]
    fn external_stage_that_drops_records_fails() {
        let cfg = FilterConfig {
            en_punct_cmd: Some(vec!["head".into(), "-n".into(), "1".into()]),
            ..FilterConfig::default()
        };
        let pairs = vec![SentencePair::new("1", "a", "x"), SentencePair::new("2", "b", "y")];
        let err = run_chain(pairs, &cfg, &[Stage::EnPunct], Exec::Sequential).unwrap_err();
        assert!(matches!(err, PreprocessError::External { .. }));
    }
}
