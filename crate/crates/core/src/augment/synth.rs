use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::AugmentError;
use crate::corpus::{
    Hypothesis, Method, MonolingualRecord, Origin, SentencePair, META_DIRECTION, META_MODEL, META_PARENT, META_SYSTEM,
    META_TAG,
};

pub const DEFAULT_BT_TAG: &str = "<BT>";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationItem {
    pub src_id: String,
    pub text: String,
}

/// Translations of a set of source records by one external system.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationBatch {
    pub system: String,
    pub method: Method,
    pub items: Vec<TranslationItem>,
}

impl TranslationBatch {
    pub fn new(system: impl Into<String>, method: Method) -> Self {
        TranslationBatch {
            system: system.into(),
            method,
            items: Vec::new(),
        }
    }

    pub fn push(&mut self, src_id: impl Into<String>, text: impl Into<String>) {
        self.items.push(TranslationItem {
            src_id: src_id.into(),
            text: text.into(),
        });
    }

    /// Builds a batch from hypothesis records (one per source id).
    pub fn from_hypotheses(system: impl Into<String>, hyps: Vec<Hypothesis>) -> Result<Self, AugmentError> {
        let mut batch = TranslationBatch::new(system, hyps.first().map(|h| h.method).unwrap_or_default());
        for h in hyps {
            batch.push(h.src_id, h.text);
        }
        batch.index()?;
        Ok(batch)
    }

    fn index(&self) -> Result<HashMap<&str, &str>, AugmentError> {
        let mut map = HashMap::with_capacity(self.items.len());
        for item in &self.items {
            if map.insert(item.src_id.as_str(), item.text.as_str()).is_some() {
                return Err(AugmentError::DuplicateItem {
                    system: self.system.clone(),
                    src_id: item.src_id.clone(),
                });
            }
        }
        Ok(map)
    }
}

/// Swaps source and target, toggling the direction marker.
pub fn swap_direction(mut pair: SentencePair) -> SentencePair {
    std::mem::swap(&mut pair.src, &mut pair.tgt);
    if pair.meta.remove(META_DIRECTION).is_none() {
        pair.meta.insert(META_DIRECTION.into(), "reverse".into());
    }
    pair
}

/// Emits every pair followed by its reversed copy. Reversed copies get id
/// `<id>#rev`, a `direction=reverse` marker and no scores, since scores
/// were computed for the forward direction.
pub fn bit_reconstruct(pairs: Vec<SentencePair>) -> Vec<SentencePair> {
    let mut out = Vec::with_capacity(pairs.len() * 2);
    for p in pairs {
        let mut rev = swap_direction(p.clone());
        rev.id = format!("{}#rev", p.id);
        rev.scores.clear();
        rev.meta.insert(META_PARENT.into(), p.id.clone());
        out.push(p);
        out.push(rev);
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DdReport {
    pub forward_added: usize,
    pub backward_added: usize,
    pub duplicates_dropped: usize,
}

/// Merges forward translations of the original sources and backward
/// translations of the original targets into the original set. Synthetic
/// pairs identical to an original pair are dropped.
pub fn dd_merge(
    original: Vec<SentencePair>,
    forward: &TranslationBatch,
    backward: &TranslationBatch,
) -> Result<(Vec<SentencePair>, DdReport), AugmentError> {
    let by_id: HashMap<&str, &SentencePair> = original.iter().map(|p| (p.id.as_str(), p)).collect();
    let existing: HashSet<(&str, &str)> = original.iter().map(|p| (p.src.as_str(), p.tgt.as_str())).collect();
    forward.index()?;
    backward.index()?;

    let mut report = DdReport::default();
    let mut synthetic = Vec::new();
    for (batch, suffix, is_forward) in [(forward, "fwd", true), (backward, "bwd", false)] {
        for item in &batch.items {
            let parent = by_id
                .get(item.src_id.as_str())
                .ok_or_else(|| AugmentError::UnknownSource {
                    system: batch.system.clone(),
                    src_id: item.src_id.clone(),
                })?;
            let (src, tgt) = if is_forward {
                (parent.src.as_str(), item.text.as_str())
            } else {
                (item.text.as_str(), parent.tgt.as_str())
            };
            if existing.contains(&(src, tgt)) {
                report.duplicates_dropped += 1;
                continue;
            }
            let mut p =
                SentencePair::new(format!("{}#dd-{suffix}", parent.id), src, tgt).with_origin(Origin::Diversified);
            p.meta.insert(META_PARENT.into(), parent.id.clone());
            p.meta.insert(META_SYSTEM.into(), batch.system.clone());
            synthetic.push(p);
            if is_forward {
                report.forward_added += 1;
            } else {
                report.backward_added += 1;
            }
        }
    }
    let mut out = original;
    out.extend(synthetic);
    Ok((out, report))
}

/// Pairs each sampled monolingual record with its translation (tagged
/// forward_synthetic) and appends the authentic pairs.
pub fn ft_build(
    mono_sample: &[MonolingualRecord],
    translations: &TranslationBatch,
    authentic: Vec<SentencePair>,
) -> Result<Vec<SentencePair>, AugmentError> {
    let index = translations.index()?;
    let mut out = Vec::with_capacity(mono_sample.len() + authentic.len());
    for rec in mono_sample {
        let tgt = index
            .get(rec.id.as_str())
            .ok_or_else(|| AugmentError::MissingTranslation(rec.id.clone()))?;
        let mut p = SentencePair::new(rec.id.clone(), rec.text.clone(), *tgt).with_origin(Origin::ForwardSynthetic);
        p.meta.insert(META_SYSTEM.into(), translations.system.clone());
        out.push(p);
    }
    out.extend(authentic);
    Ok(out)
}

/// Prefixes `tag` and a space to every back-translated source.
pub fn bt_tag(pairs: Vec<SentencePair>, tag: &str) -> Result<Vec<SentencePair>, AugmentError> {
    pairs
        .into_iter()
        .map(|mut p| {
            if p.origin != Origin::BackwardSynthetic {
                return Err(AugmentError::NotBackTranslated {
                    id: p.id,
                    origin: p.origin.to_string(),
                });
            }
            if p.meta.contains_key(META_TAG) {
                return Err(AugmentError::AlreadyTagged(p.id));
            }
            p.src = format!("{tag} {}", p.src);
            p.meta.insert(META_TAG.into(), tag.into());
            Ok(p)
        })
        .collect()
}

/// Inverse of [`bt_tag`].
pub fn bt_untag(pairs: Vec<SentencePair>, tag: &str) -> Result<Vec<SentencePair>, AugmentError> {
    let prefix = format!("{tag} ");
    pairs
        .into_iter()
        .map(|mut p| match p.src.strip_prefix(&prefix) {
            Some(rest) if p.meta.get(META_TAG).map(String::as_str) == Some(tag) => {
                p.src = rest.to_string();
                p.meta.remove(META_TAG);
                Ok(p)
            }
            _ => Err(AugmentError::TagMissing {
                id: p.id,
                tag: tag.into(),
            }),
        })
        .collect()
}

/// Translations of the test sources by every ensemble member, source-major:
/// for each source, one pair per model in batch order.
pub fn tel_build(
    sources: &[MonolingualRecord],
    models: &[TranslationBatch],
) -> Result<Vec<SentencePair>, AugmentError> {
    if models.is_empty() {
        return Err(AugmentError::NoModels);
    }
    let indexes = models
        .iter()
        .map(TranslationBatch::index)
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::with_capacity(sources.len() * models.len());
    for s in sources {
        for (batch, index) in models.iter().zip(&indexes) {
            let tgt = index.get(s.id.as_str()).ok_or_else(|| AugmentError::CoverageGap {
                model: batch.system.clone(),
                src_id: s.id.clone(),
            })?;
            let mut p = SentencePair::new(format!("{}#{}", s.id, batch.system), s.text.clone(), *tgt)
                .with_origin(Origin::TelSynthetic);
            p.meta.insert(META_MODEL.into(), batch.system.clone());
            p.meta.insert(META_PARENT.into(), s.id.clone());
            out.push(p);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Lang;
    use proptest::prelude::*;

    fn st(p: &SentencePair) -> (&str, &str) {
        (p.src.as_str(), p.tgt.as_str())
    }

    #[test]
    fn bit_examples() {
        let out = bit_reconstruct(vec![SentencePair::new("1", "a", "b")]);
        assert_eq!(out.iter().map(st).collect::<Vec<_>>(), vec![("a", "b"), ("b", "a")]);
        assert_eq!(out[1].meta[META_DIRECTION], "reverse");
        assert!(bit_reconstruct(vec![]).is_empty());
        let out = bit_reconstruct(vec![SentencePair::new("1", "a", "b"), SentencePair::new("2", "c", "d")]);
        assert_eq!(
            out.iter().map(st).collect::<Vec<_>>(),
            vec![("a", "b"), ("b", "a"), ("c", "d"), ("d", "c")]
        );
    }

    fn originals() -> Vec<SentencePair> {
        vec![SentencePair::new("o1", "s1", "t1"), SentencePair::new("o2", "s2", "t2")]
    }

    fn batch(system: &str, items: &[(&str, &str)]) -> TranslationBatch {
        let mut b = TranslationBatch::new(system, Method::Beam);
        for (id, t) in items {
            b.push(*id, *t);
        }
        b
    }

    #[test]
    fn dd_cardinality() {
        let fwd = batch("fwd", &[("o1", "f1"), ("o2", "f2")]);
        let bwd = batch("bwd", &[("o1", "b1"), ("o2", "b2")]);
        let (out, rep) = dd_merge(originals(), &fwd, &bwd).unwrap();
        assert_eq!(out.len(), 6);
        assert_eq!(out[2], {
            let mut p = SentencePair::new("o1#dd-fwd", "s1", "f1").with_origin(Origin::Diversified);
            p.meta.insert(META_PARENT.into(), "o1".into());
            p.meta.insert(META_SYSTEM.into(), "fwd".into());
            p
        });
        assert_eq!(st(&out[4]), ("b1", "t1"));
        assert_eq!(rep.duplicates_dropped, 0);
    }

    #[test]
    fn dd_drops_copies_of_originals() {
        let fwd = batch("fwd", &[("o1", "t1"), ("o2", "f2")]);
        let bwd = batch("bwd", &[("o1", "b1"), ("o2", "b2")]);
        let (out, rep) = dd_merge(originals(), &fwd, &bwd).unwrap();
        assert_eq!(out.len(), 5);
        assert_eq!(rep.duplicates_dropped, 1);
    }

    #[test]
    fn dd_empty_batches_and_unknown_ids() {
        let (out, _) = dd_merge(originals(), &batch("f", &[]), &batch("b", &[])).unwrap();
        assert_eq!(out, originals());
        let err = dd_merge(originals(), &batch("f", &[("o9", "x")]), &batch("b", &[])).unwrap_err();
        assert_eq!(
            err,
            AugmentError::UnknownSource {
                system: "f".into(),
                src_id: "o9".into()
            }
        );
    }

    fn mono(ids: &[&str]) -> Vec<MonolingualRecord> {
        ids.iter()
            .map(|id| MonolingualRecord::new(*id, format!("text {id}"), Lang::En))
            .collect()
    }

    #[test]
    fn ft_examples() {
        let t = batch("teacher", &[("m1", "x1"), ("m2", "x2"), ("m3", "x3")]);
        let out = ft_build(&mono(&["m1", "m2", "m3"]), &t, originals()).unwrap();
        assert_eq!(out.len(), 5);
        assert_eq!(out.iter().filter(|p| p.origin == Origin::ForwardSynthetic).count(), 3);
        assert_eq!(out[0].src, "text m1");
        assert_eq!(ft_build(&[], &t, originals()).unwrap(), originals());
        let short = batch("teacher", &[("m1", "x1"), ("m3", "x3")]);
        assert_eq!(
            ft_build(&mono(&["m1", "m2", "m3"]), &short, vec![]).unwrap_err(),
            AugmentError::MissingTranslation("m2".into())
        );
    }

    fn bt_pair(id: &str, src: &str, tgt: &str) -> SentencePair {
        SentencePair::new(id, src, tgt).with_origin(Origin::BackwardSynthetic)
    }

    #[test]
    fn bt_tag_examples() {
        let out = bt_tag(vec![bt_pair("1", "hola", "hello")], DEFAULT_BT_TAG).unwrap();
        assert_eq!(st(&out[0]), ("<BT> hola", "hello"));
        assert_eq!(
            bt_tag(out, "<BT>").unwrap_err(),
            AugmentError::AlreadyTagged("1".into())
        );
        assert!(bt_tag(vec![], "<BT>").unwrap().is_empty());
        assert!(matches!(
            bt_tag(vec![SentencePair::new("a", "x", "y")], "<BT>"),
            Err(AugmentError::NotBackTranslated { .. })
        ));
    }

    #[test]
    fn tel_examples() {
        let srcs = mono(&["s1", "s2"]);
        let models: Vec<_> = ["A", "B", "C"]
            .iter()
            .map(|m| batch(m, &[("s1", &format!("{m}1")), ("s2", &format!("{m}2"))]))
            .collect();
        let out = tel_build(&srcs, &models).unwrap();
        assert_eq!(out.len(), 6);
        assert_eq!(out[1].meta[META_MODEL], "B");
        assert!(out.iter().all(|p| p.origin == Origin::TelSynthetic));

        let single = tel_build(&srcs, &models[..1]).unwrap();
        assert_eq!(
            single.iter().map(|p| p.tgt.as_str()).collect::<Vec<_>>(),
            vec!["A1", "A2"]
        );

        let gap = vec![models[0].clone(), batch("B", &[("s1", "B1")])];
        assert_eq!(
            tel_build(&srcs, &gap).unwrap_err(),
            AugmentError::CoverageGap {
                model: "B".into(),
                src_id: "s2".into()
            }
        );
        assert_eq!(tel_build(&srcs, &[]).unwrap_err(), AugmentError::NoModels);
    }

    fn corpus() -> impl Strategy<Value = Vec<SentencePair>> {
        proptest::collection::vec(("[a-c]{1,4}", "[x-z]{1,4}"), 0..20).prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, (s, t))| SentencePair::new(format!("p{i}"), s, t))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn bit_doubles_and_swaps_back(pairs in corpus()) {
            let out = bit_reconstruct(pairs.clone());
            prop_assert_eq!(out.len(), 2 * pairs.len());
            for (chunk, p) in out.chunks(2).zip(&pairs) {
                prop_assert_eq!(&chunk[0], p);
                let back = swap_direction(chunk[1].clone());
                prop_assert_eq!(st(&back), st(p));
            }
        }

        #[test]
        fn dd_keeps_originals_and_links_parents(pairs in corpus(), take in 0usize..20) {
            let mut fwd = TranslationBatch::new("f", Method::Beam);
            let mut bwd = TranslationBatch::new("b", Method::Sampled);
            for p in pairs.iter().take(take) {
                fwd.push(p.id.clone(), p.tgt.clone() + "x");
                bwd.push(p.id.clone(), p.src.clone());
            }
            let (out, _) = dd_merge(pairs.clone(), &fwd, &bwd).unwrap();
            prop_assert_eq!(&out[..pairs.len()], &pairs[..]);
            for p in &out[pairs.len()..] {
                let parent = &p.meta[META_PARENT];
                prop_assert_eq!(pairs.iter().filter(|o| &o.id == parent).count(), 1);
            }
        }

        #[test]
        fn tag_strips_back_exactly(pairs in corpus(), tag in "<[A-Z]{1,3}>") {
            let bt: Vec<_> = pairs.into_iter().map(|p| p.with_origin(Origin::BackwardSynthetic)).collect();
            let tagged = bt_tag(bt.clone(), &tag).unwrap();
            let prefix = format!("{} ", tag);
            for p in &tagged {
                prop_assert!(p.src.starts_with(&prefix));
            }
            prop_assert_eq!(bt_untag(tagged, &tag).unwrap(), bt);
        }
    }
}
