use std::collections::HashSet;

use super::FilterConfig;
use crate::corpus::SentencePair;
use crate::par::{self, Exec};
use crate::text::word_count;

pub const SCORE_SIMILARITY: &str = "similarity";
pub const SCORE_LANGID_SRC: &str = "langid_src";
pub const SCORE_LANGID_TGT: &str = "langid_tgt";
pub const SCORE_ALIGN: &str = "align";

/// Survivors of a filter plus drop accounting. `dropped` includes the
/// `missing_score` pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<SentencePair>,
    pub dropped: usize,
    pub missing_score: usize,
}

/// Keeps the first occurrence of every exact (src, tgt) pair. Pairs that
/// share only a source (or only a target) are all kept.
pub fn dedup(pairs: Vec<SentencePair>) -> FilterOutcome {
    let mut seen: HashSet<(String, String)> = HashSet::with_capacity(pairs.len());
    let total = pairs.len();
    let kept: Vec<_> = pairs
        .into_iter()
        .filter(|p| seen.insert((p.src.clone(), p.tgt.clone())))
        .collect();
    FilterOutcome {
        dropped: total - kept.len(),
        kept,
        missing_score: 0,
    }
}

/// Maps full-width forms U+FF01..=U+FF5E and the ideographic space U+3000
/// to their half-width counterparts.
pub fn normalize_width(text: &str) -> String {
    text.chars()
        .map(|c| match c as u32 {
            0xFF01..=0xFF5E => char::from_u32(c as u32 - 0xFEE0).unwrap_or(c),
            0x3000 => ' ',
            _ => c,
        })
        .collect()
}

pub fn normalize_pair_width(mut pair: SentencePair) -> SentencePair {
    pair.src = normalize_width(&pair.src);
    pair.tgt = normalize_width(&pair.tgt);
    pair
}

/// Drops pairs where either side has more than `cfg.max_words` words.
pub fn filter_length(pairs: Vec<SentencePair>, cfg: &FilterConfig, exec: Exec) -> FilterOutcome {
    let max = cfg.max_words;
    let (kept, dropped) = par::partition(exec, pairs, |p| word_count(&p.src) <= max && word_count(&p.tgt) <= max);
    FilterOutcome {
        kept,
        dropped: dropped.len(),
        missing_score: 0,
    }
}

enum Verdict {
    Keep,
    Drop,
    Missing,
}

fn by_scores<F>(pairs: Vec<SentencePair>, exec: Exec, judge: F) -> FilterOutcome
where
    F: Fn(&SentencePair) -> Verdict + Sync + Send,
{
    let verdicts = par::map(exec, &pairs, judge);
    let mut out = FilterOutcome::default();
    for (p, v) in pairs.into_iter().zip(verdicts) {
        match v {
            Verdict::Keep => out.kept.push(p),
            Verdict::Drop => out.dropped += 1,
            Verdict::Missing => {
                out.dropped += 1;
                out.missing_score += 1;
            }
        }
    }
    out
}

/// Drops pairs whose language-ID confidence on either side is below the
/// threshold. Pairs without both `langid_src` and `langid_tgt` are dropped
/// and counted as missing.
pub fn filter_language(pairs: Vec<SentencePair>, threshold: f64, exec: Exec) -> FilterOutcome {
    by_scores(pairs, exec, |p| {
        match (p.score(SCORE_LANGID_SRC), p.score(SCORE_LANGID_TGT)) {
            (Some(s), Some(t)) if s >= threshold && t >= threshold => Verdict::Keep,
            (Some(_), Some(_)) => Verdict::Drop,
            _ => Verdict::Missing,
        }
    })
}

/// Drops pairs with `align` below the threshold; the boundary is kept.
pub fn filter_alignment(pairs: Vec<SentencePair>, threshold: f64, exec: Exec) -> FilterOutcome {
    by_scores(pairs, exec, |p| match p.score(SCORE_ALIGN) {
        Some(a) if a >= threshold => Verdict::Keep,
        Some(_) => Verdict::Drop,
        None => Verdict::Missing,
    })
}

/// Drops pairs whose `similarity` is strictly lower than the threshold.
pub fn filter_similarity(pairs: Vec<SentencePair>, threshold: f64, exec: Exec) -> FilterOutcome {
    by_scores(pairs, exec, |p| match p.score(SCORE_SIMILARITY) {
        Some(s) if s >= threshold => Verdict::Keep,
        Some(_) => Verdict::Drop,
        None => Verdict::Missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(id: &str, src: &str, tgt: &str) -> SentencePair {
        SentencePair::new(id, src, tgt)
    }

    fn texts(out: &FilterOutcome) -> Vec<(&str, &str)> {
        out.kept.iter().map(|p| (p.src.as_str(), p.tgt.as_str())).collect()
    }

    #[test]
    fn dedup_examples() {
        let out = dedup(vec![pair("1", "a", "b"), pair("2", "a", "b")]);
        assert_eq!(texts(&out), vec![("a", "b")]);
        assert_eq!(out.kept[0].id, "1");
        let out = dedup(vec![pair("1", "a", "b"), pair("2", "a", "c")]);
        assert_eq!(texts(&out), vec![("a", "b"), ("a", "c")]);
        assert!(dedup(vec![]).kept.is_empty());
    }

    #[test]
    fn width_examples() {
        assert_eq!(normalize_width("ＡＢＣ！"), "ABC!");
        assert_eq!(normalize_width("abc"), "abc");
        assert_eq!(normalize_width("你好"), "你好");
        assert_eq!(normalize_width("１２３\u{3000}～"), "123 ~");
    }

    fn words(n: usize) -> String {
        vec!["w"; n].join(" ")
    }

    #[test]
    fn length_boundary() {
        let cfg = FilterConfig::default();
        let out = filter_length(
            vec![
                pair("a", &words(151), "x"),
                pair("b", &words(150), "x"),
                pair("c", "x", &words(151)),
            ],
            &cfg,
            Exec::Sequential,
        );
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].id, "b");
        assert_eq!(out.dropped, 2);
        assert!(filter_length(vec![], &cfg, Exec::Parallel).kept.is_empty());
    }

    #[test]
    fn length_counts_chinese_characters() {
        let cfg = FilterConfig {
            max_words: 3,
            ..FilterConfig::default()
        };
        let out = filter_length(
            vec![pair("a", "x", "你好世"), pair("b", "x", "你好世界")],
            &cfg,
            Exec::Sequential,
        );
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].id, "a");
    }

    #[test]
    fn language_examples() {
        let ok = pair("a", "x", "y")
            .with_score(SCORE_LANGID_SRC, 0.99)
            .with_score(SCORE_LANGID_TGT, 0.98);
        let low = pair("b", "x", "y")
            .with_score(SCORE_LANGID_SRC, 0.2)
            .with_score(SCORE_LANGID_TGT, 0.98);
        let missing = pair("c", "x", "y").with_score(SCORE_LANGID_SRC, 0.99);
        let out = filter_language(vec![ok, low, missing], 0.9, Exec::Sequential);
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].id, "a");
        assert_eq!(out.dropped, 2);
        assert_eq!(out.missing_score, 1);
    }

    #[test]
    fn alignment_examples() {
        let out = filter_alignment(
            vec![
                pair("a", "x", "y").with_score(SCORE_ALIGN, 0.1),
                pair("b", "x", "y").with_score(SCORE_ALIGN, 0.5),
                pair("c", "x", "y"),
            ],
            0.5,
            Exec::Parallel,
        );
        assert_eq!(out.kept.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(), vec!["b"]);
        assert_eq!(out.missing_score, 1);
    }

    #[test]
    fn similarity_examples() {
        let out = filter_similarity(
            vec![
                pair("a", "x", "y").with_score(SCORE_SIMILARITY, 0.69),
                pair("b", "x", "y").with_score(SCORE_SIMILARITY, 0.70),
                pair("c", "x", "y").with_score(SCORE_SIMILARITY, 0.85),
            ],
            0.7,
            Exec::Sequential,
        );
        assert_eq!(
            out.kept.iter().map(|p| p.id.as_str()).collect::<Vec<_>>(),
            vec!["b", "c"]
        );
    }

    fn corpus() -> impl Strategy<Value = Vec<SentencePair>> {
        proptest::collection::vec(("[ab]{1,3}", "[ab ]{1,6}", proptest::option::of(0.0f64..1.0)), 0..30).prop_map(
            |rows| {
                rows.into_iter()
                    .enumerate()
                    .map(|(i, (s, t, sim))| {
                        let t = if t.trim().is_empty() { "b".to_string() } else { t };
                        let mut p = pair(&format!("p{i}"), &s, &t);
                        if let Some(v) = sim {
                            p.scores.insert(SCORE_SIMILARITY.into(), v);
                            p.scores.insert(SCORE_ALIGN.into(), v);
                        }
                        p
                    })
                    .collect()
            },
        )
    }

    fn is_subsequence(sub: &[SentencePair], of: &[SentencePair]) -> bool {
        let mut it = of.iter();
        sub.iter().all(|s| it.any(|o| o == s))
    }

    type Pass<'a> = dyn Fn(Vec<SentencePair>) -> Vec<SentencePair> + 'a;

    proptest! {
        #[test]
        fn filters_are_idempotent_subsequences(pairs in corpus(), t in 0.0f64..1.0, max in 1usize..4) {
            let cfg = FilterConfig { max_words: max, ..FilterConfig::default() };
            let runs: Vec<Box<Pass<'_>>> = vec![
                Box::new(|x| dedup(x).kept),
                Box::new(move |x| filter_similarity(x, t, Exec::Parallel).kept),
                Box::new(move |x| filter_alignment(x, t, Exec::Sequential).kept),
                Box::new(|x| filter_length(x, &cfg, Exec::Parallel).kept),
            ];
            for f in &runs {
                let once = f(pairs.clone());
                prop_assert!(is_subsequence(&once, &pairs));
                let twice = f(once.clone());
                prop_assert_eq!(once, twice);
            }
        }

        #[test]
        fn similarity_keep_set_matches_brute_force(pairs in corpus(), t in 0.0f64..1.0) {
            let kept: Vec<String> = filter_similarity(pairs.clone(), t, Exec::Parallel).kept.into_iter().map(|p| p.id).collect();
            let mut want = Vec::new();
            for p in &pairs {
                if let Some(s) = p.scores.get("similarity") {
                    if *s >= t {
                        want.push(p.id.clone());
                    }
                }
            }
            prop_assert_eq!(kept, want);
        }

        #[test]
        fn dedup_keeps_one_per_distinct_pair(pairs in corpus()) {
            let distinct: HashSet<(String, String)> = pairs.iter().map(|p| (p.src.clone(), p.tgt.clone())).collect();
            prop_assert_eq!(dedup(pairs).kept.len(), distinct.len());
        }

        #[test]
        fn width_normalization_is_idempotent_and_length_preserving(s in "[\u{FF01}-\u{FF5E}a-z\u{4E00}-\u{4E10} ]{0,20}") {
            let once = normalize_width(&s);
            prop_assert_eq!(once.chars().count(), s.chars().count());
            prop_assert_eq!(normalize_width(&once), once.clone());
        }
    }
}
