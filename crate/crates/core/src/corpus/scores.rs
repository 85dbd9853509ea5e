use std::collections::{HashMap, HashSet};

use super::model::{ScoreRecord, SentencePair};
use super::CorpusError;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AttachReport {
    pub attached: usize,
    /// Score records whose id matches no pair.
    pub orphans: usize,
}

/// Joins score records onto pairs by id. Pair order is preserved and
/// pairs without scores pass through unchanged. Scores for unknown ids are
/// counted, not fatal; two scores for the same (record_id, scorer) are.
pub fn attach_scores(
    mut pairs: Vec<SentencePair>,
    scores: impl IntoIterator<Item = ScoreRecord>,
) -> Result<(Vec<SentencePair>, AttachReport), CorpusError> {
    let index: HashMap<String, usize> = pairs.iter().enumerate().map(|(i, p)| (p.id.clone(), i)).collect();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut report = AttachReport::default();
    for s in scores {
        if !seen.insert((s.record_id.clone(), s.scorer.clone())) {
            return Err(CorpusError::DuplicateScore {
                record_id: s.record_id,
                scorer: s.scorer,
            });
        }
        match index.get(&s.record_id) {
            Some(&i) => {
                pairs[i].scores.insert(s.scorer, s.value);
                report.attached += 1;
            }
            None => report.orphans += 1,
        }
    }
    Ok((pairs, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn attaches_by_id() {
        let (out, rep) = attach_scores(
            vec![SentencePair::new("p1", "a", "b")],
            vec![ScoreRecord::new("p1", "similarity", 0.85)],
        )
        .unwrap();
        assert_eq!(out[0].score("similarity"), Some(0.85));
        assert_eq!(
            rep,
            AttachReport {
                attached: 1,
                orphans: 0
            }
        );
    }

    #[test]
    fn unscored_pairs_pass_through() {
        let p = SentencePair::new("p1", "a", "b");
        let (out, _) = attach_scores(vec![p.clone()], vec![]).unwrap();
        assert_eq!(out, vec![p]);
    }

    #[test]
    fn orphan_scores_are_counted() {
        let p = SentencePair::new("p1", "a", "b");
        let (out, rep) = attach_scores(vec![p.clone()], vec![ScoreRecord::new("p9", "qe", 0.5)]).unwrap();
        assert_eq!(out, vec![p]);
        assert_eq!(rep.orphans, 1);
    }

    #[test]
    fn duplicate_scores_are_an_error() {
        let err = attach_scores(
            vec![SentencePair::new("p1", "a", "b")],
            vec![ScoreRecord::new("p1", "qe", 0.5), ScoreRecord::new("p1", "qe", 0.6)],
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateScore { .. }));
    }

    proptest! {
        #[test]
        fn never_drops_or_reorders(n in 0usize..40, picks in proptest::collection::vec((0usize..60, 0.0f64..1.0), 0..80)) {
            let pairs: Vec<SentencePair> = (0..n).map(|i| SentencePair::new(format!("p{i}"), "s", "t")).collect();
            let mut seen = HashSet::new();
            let scores: Vec<ScoreRecord> = picks
                .into_iter()
                .filter(|(i, _)| seen.insert(*i))
                .map(|(i, v)| ScoreRecord::new(format!("p{i}"), "qe", v))
                .collect();
            let (out, rep) = attach_scores(pairs.clone(), scores.clone()).unwrap();
            let ids: Vec<_> = out.iter().map(|p| &p.id).collect();
            let want: Vec<_> = pairs.iter().map(|p| &p.id).collect();
            prop_assert_eq!(ids, want);
            prop_assert_eq!(rep.attached + rep.orphans, scores.len());
        }
    }
}
