use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::LlmDataError;
use crate::corpus::{Hypothesis, SentencePair};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferenceTriplet {
    pub src_id: String,
    pub source: String,
    pub preferred: String,
    pub preferred_score: f64,
    pub dispreferred: String,
    pub dispreferred_score: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpoReport {
    pub emitted: usize,
    /// Sources whose hypotheses all share one text.
    pub skipped_identical: usize,
    /// Sources where best and worst hypotheses share a text but differ in
    /// score, so no distinct pair exists at the extremes.
    pub skipped_degenerate: usize,
    /// Sources without any hypothesis.
    pub without_hypotheses: usize,
    /// Sources whose list size differs from the expected N.
    pub size_mismatch: usize,
    /// Hypotheses whose source is not in the source set (for example,
    /// removed by an earlier filter). They are ignored.
    pub unknown_source: usize,
}

/// For each source with hypotheses, picks the best-scoring hypothesis as
/// preferred and the worst as dispreferred. Score ties go to the
/// lexicographically smaller text for the best and the larger text for the
/// worst. Triplets follow the order of `sources`.
pub fn build_cpo_triplets(
    sources: &[SentencePair],
    hyps: &[Hypothesis],
    n_expected: usize,
) -> Result<(Vec<PreferenceTriplet>, CpoReport), LlmDataError> {
    let known: HashMap<&str, &SentencePair> = sources.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut groups: HashMap<&str, Vec<(usize, &Hypothesis)>> = HashMap::new();
    let mut report = CpoReport::default();
    for h in hyps {
        if !known.contains_key(h.src_id.as_str()) {
            report.unknown_source += 1;
            continue;
        }
        let g = groups.entry(h.src_id.as_str()).or_default();
        g.push((g.len(), h));
    }

    let mut out = Vec::new();
    for src in sources {
        let Some(group) = groups.get(src.id.as_str()) else {
            report.without_hypotheses += 1;
            continue;
        };
        if group.len() < 2 {
            return Err(LlmDataError::TooFewHypotheses {
                src_id: src.id.clone(),
                count: group.len(),
            });
        }
        if group.len() != n_expected {
            report.size_mismatch += 1;
        }
        let mut scored = Vec::with_capacity(group.len());
        for &(index, h) in group {
            let score = h.score.ok_or_else(|| LlmDataError::MissingScore {
                src_id: src.id.clone(),
                index,
            })?;
            scored.push((score, h.text.as_str()));
        }
        let first = scored[0].1;
        if scored.iter().all(|(_, t)| *t == first) {
            report.skipped_identical += 1;
            continue;
        }
        let best = scored
            .iter()
            .copied()
            .reduce(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
            .expect("non-empty");
        let worst = scored
            .iter()
            .copied()
            .reduce(|a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 > a.1) { b } else { a })
            .expect("non-empty");
        if best.1 == worst.1 {
            report.skipped_degenerate += 1;
            continue;
        }
        out.push(PreferenceTriplet {
            src_id: src.id.clone(),
            source: src.src.clone(),
            preferred: best.1.to_string(),
            preferred_score: best.0,
            dispreferred: worst.1.to_string(),
            dispreferred_score: worst.0,
        });
    }
    report.emitted = out.len();
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Method, System};

    fn hyps(src: &str, items: &[(&str, f64)]) -> Vec<Hypothesis> {
        items
            .iter()
            .map(|(t, s)| Hypothesis::new(src, System::Nmt, Method::Beam, *t).scored(*s))
            .collect()
    }

    fn sources() -> Vec<SentencePair> {
        vec![SentencePair::new("s1", "source one", "ref")]
    }

    #[test]
    fn argmax_and_argmin() {
        let (t, rep) = build_cpo_triplets(&sources(), &hyps("s1", &[("x", 0.9), ("y", 0.5), ("z", 0.7)]), 3).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].preferred.as_str(), t[0].preferred_score), ("x", 0.9));
        assert_eq!((t[0].dispreferred.as_str(), t[0].dispreferred_score), ("y", 0.5));
        assert_eq!(t[0].source, "source one");
        assert_eq!(rep.size_mismatch, 0);
    }

    #[test]
    fn identical_lists_are_skipped() {
        let items: Vec<(&str, f64)> = (0..10).map(|i| ("same", i as f64 / 10.0)).collect();
        let mut hs = hyps("s1", &items);
        // identical texts are only legal across systems/methods
        for (i, h) in hs.iter_mut().enumerate() {
            h.method = if i % 2 == 0 { Method::Beam } else { Method::Sampled };
        }
        let (t, rep) = build_cpo_triplets(&sources(), &hs, 10).unwrap();
        assert!(t.is_empty());
        assert_eq!(rep.skipped_identical, 1);
    }

    #[test]
    fn ties_are_broken_by_text() {
        let (t, _) = build_cpo_triplets(
            &sources(),
            &hyps("s1", &[("b", 0.9), ("a", 0.9), ("c", 0.1), ("d", 0.1)]),
            4,
        )
        .unwrap();
        assert_eq!(t[0].preferred, "a");
        assert_eq!(t[0].dispreferred, "d");
    }

    #[test]
    fn errors() {
        let mut hs = hyps("s1", &[("x", 0.9), ("y", 0.5)]);
        hs[1].score = None;
        assert_eq!(
            build_cpo_triplets(&sources(), &hs, 2).unwrap_err(),
            LlmDataError::MissingScore {
                src_id: "s1".into(),
                index: 1
            }
        );
        assert!(matches!(
            build_cpo_triplets(&sources(), &hyps("s1", &[("x", 0.9)]), 10),
            Err(LlmDataError::TooFewHypotheses { count: 1, .. })
        ));
    }

    #[test]
    fn hypotheses_of_unknown_sources_are_counted() {
        let (t, rep) = build_cpo_triplets(&sources(), &hyps("s9", &[("x", 0.9), ("y", 0.1)]), 2).unwrap();
        assert!(t.is_empty());
        assert_eq!(rep.unknown_source, 2);
        assert_eq!(rep.without_hypotheses, 1);
    }

    #[test]
    fn sources_without_hypotheses_are_counted() {
        let (t, rep) = build_cpo_triplets(&sources(), &[], 10).unwrap();
        assert!(t.is_empty());
        assert_eq!(rep.without_hypotheses, 1);
    }
}
