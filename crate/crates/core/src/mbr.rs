//! Minimum Bayes risk selection over merged N-best pools.
//!
//! The pool doubles as its own pseudo-reference set. Duplicate texts are
//! collapsed into one candidate with a multiplicity, and with multiplicity
//! weighting the expected utility equals the plain average over the raw
//! (uncollapsed) hypothesis list while computing only |H|² utilities.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Hypothesis, Method, System};
use crate::metrics::{self, CHRF_BETA, CHRF_ORDER};
use crate::par::{self, Exec};
use crate::text::{tokenize, Tokenize};

/// Relative tolerance under which two expected utilities count as tied.
pub const EU_TIE_EPS: f64 = 1e-12;

pub const DEFAULT_TEMPERATURE: f64 = 0.8;
pub const DEFAULT_NUCLEUS_P: f64 = 0.95;

#[derive(Debug, Error, PartialEq)]
pub enum MbrError {
    #[error("empty hypothesis pool")]
    EmptyPool,
    #[error("pool mixes source ids `{0}` and `{1}`")]
    MixedSources(String, String),
    #[error("utility for `{src_id}` (hyp {hyp}, ref {reference}) is not finite: {value}")]
    NonFinite {
        src_id: String,
        hyp: usize,
        reference: usize,
        value: f64,
    },
    #[error("source `{0}` has no hypotheses")]
    NoHypotheses(String),
    #[error("external matrix lacks entry ({src_id}, {hyp}, {reference})")]
    MissingEntry {
        src_id: String,
        hyp: usize,
        reference: usize,
    },
    #[error("external matrix repeats entry ({src_id}, {hyp}, {reference})")]
    DuplicateEntry {
        src_id: String,
        hyp: usize,
        reference: usize,
    },
    #[error("unknown utility `{0}` (chrf|bleu|indicator)")]
    UnknownUtility(String),
    #[error("invalid sampling metadata: {0}")]
    BadSampling(String),
}

/// Decoding settings of sampled LLM hypotheses. Recorded only; sampling
/// happens upstream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingMeta {
    pub temperature: f64,
    pub nucleus_p: f64,
}

impl Default for SamplingMeta {
    fn default() -> Self {
        SamplingMeta {
            temperature: DEFAULT_TEMPERATURE,
            nucleus_p: DEFAULT_NUCLEUS_P,
        }
    }
}

impl SamplingMeta {
    pub fn new(temperature: f64, nucleus_p: f64) -> Result<Self, MbrError> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(MbrError::BadSampling(format!("temperature {temperature} must be > 0")));
        }
        if !(nucleus_p > 0.0 && nucleus_p <= 1.0) {
            return Err(MbrError::BadSampling(format!(
                "nucleus_p {nucleus_p} must be in (0, 1]"
            )));
        }
        Ok(SamplingMeta { temperature, nucleus_p })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    /// First occurrence; later duplicates only add to `multiplicity`.
    pub hypothesis: Hypothesis,
    pub multiplicity: usize,
    /// Position of the first occurrence in the raw list.
    pub raw_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisPool {
    pub src_id: String,
    pub candidates: Vec<Candidate>,
}

impl HypothesisPool {
    pub fn raw_count(&self) -> usize {
        self.candidates.iter().map(|c| c.multiplicity).sum()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Collapses a raw hypothesis list by exact text, keeping first-seen order.
    pub fn from_raw(hyps: impl IntoIterator<Item = Hypothesis>) -> Result<Self, MbrError> {
        let mut src_id: Option<String> = None;
        let mut slot: HashMap<String, usize> = HashMap::new();
        let mut candidates: Vec<Candidate> = Vec::new();
        for (i, h) in hyps.into_iter().enumerate() {
            match &src_id {
                None => src_id = Some(h.src_id.clone()),
                Some(s) if *s != h.src_id => return Err(MbrError::MixedSources(s.clone(), h.src_id)),
                _ => {}
            }
            match slot.get(&h.text) {
                Some(&k) => candidates[k].multiplicity += 1,
                None => {
                    slot.insert(h.text.clone(), candidates.len());
                    candidates.push(Candidate {
                        hypothesis: h,
                        multiplicity: 1,
                        raw_index: i,
                    });
                }
            }
        }
        Ok(HypothesisPool {
            src_id: src_id.ok_or(MbrError::EmptyPool)?,
            candidates,
        })
    }
}

/// Concatenates per-system lists in the given order and collapses
/// duplicate texts.
pub fn merge_pools(pools: Vec<(System, Vec<Hypothesis>)>) -> Result<HypothesisPool, MbrError> {
    HypothesisPool::from_raw(pools.into_iter().flat_map(|(_, hyps)| hyps))
}

/// A utility u(hypothesis, pseudo-reference). Must be pure.
pub trait Utility: Sync {
    fn utility(&self, hyp: &str, reference: &str) -> f64;
}

impl<F> Utility for F
where
    F: Fn(&str, &str) -> f64 + Sync,
{
    fn utility(&self, hyp: &str, reference: &str) -> f64 {
        self(hyp, reference)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChrfUtility;

impl Utility for ChrfUtility {
    fn utility(&self, hyp: &str, reference: &str) -> f64 {
        metrics::chrf(hyp, reference, CHRF_ORDER, CHRF_BETA).unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BleuUtility(pub Tokenize);

impl Utility for BleuUtility {
    fn utility(&self, hyp: &str, reference: &str) -> f64 {
        metrics::sentence_bleu(&tokenize(hyp, self.0), &tokenize(reference, self.0), 4).unwrap_or(f64::NAN)
    }
}

/// 1 when texts are identical, else 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndicatorUtility;

impl Utility for IndicatorUtility {
    fn utility(&self, hyp: &str, reference: &str) -> f64 {
        if hyp == reference {
            1.0
        } else {
            0.0
        }
    }
}

/// Named built-in utilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedUtility {
    Chrf,
    Bleu(Tokenize),
    Indicator,
}

impl std::str::FromStr for NamedUtility {
    type Err = MbrError;
    fn from_str(s: &str) -> Result<Self, MbrError> {
        match s {
            "chrf" => Ok(NamedUtility::Chrf),
            "bleu" => Ok(NamedUtility::Bleu(Tokenize::Character)),
            "bleu-ws" => Ok(NamedUtility::Bleu(Tokenize::Whitespace)),
            "indicator" => Ok(NamedUtility::Indicator),
            other => Err(MbrError::UnknownUtility(other.to_string())),
        }
    }
}

impl Utility for NamedUtility {
    fn utility(&self, hyp: &str, reference: &str) -> f64 {
        match self {
            NamedUtility::Chrf => ChrfUtility.utility(hyp, reference),
            NamedUtility::Bleu(t) => BleuUtility(*t).utility(hyp, reference),
            NamedUtility::Indicator => IndicatorUtility.utility(hyp, reference),
        }
    }
}

/// Row-major |H|×|R| utilities with reference weights.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilityMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub ref_weights: Vec<f64>,
}

impl UtilityMatrix {
    pub fn get(&self, h: usize, r: usize) -> f64 {
        self.values[h * self.cols + r]
    }

    /// Weighted row means.
    pub fn expected(&self) -> Vec<f64> {
        let total: f64 = self.ref_weights.iter().sum();
        (0..self.rows)
            .map(|h| {
                let row = &self.values[h * self.cols..(h + 1) * self.cols];
                row.iter().zip(&self.ref_weights).map(|(u, w)| u * w).sum::<f64>() / total
            })
            .collect()
    }
}

fn weights(pool: &HypothesisPool, by_multiplicity: bool) -> Vec<f64> {
    pool.candidates
        .iter()
        .map(|c| if by_multiplicity { c.multiplicity as f64 } else { 1.0 })
        .collect()
}

fn build_matrix<F>(pool: &HypothesisPool, by_multiplicity: bool, exec: Exec, cell: F) -> Result<UtilityMatrix, MbrError>
where
    F: Fn(usize, usize) -> Result<f64, MbrError> + Sync + Send,
{
    if pool.is_empty() {
        return Err(MbrError::EmptyPool);
    }
    let n = pool.len();
    let rows: Vec<usize> = (0..n).collect();
    let rows = par::try_map(exec, &rows, |&h| {
        (0..n).map(|r| cell(h, r)).collect::<Result<Vec<f64>, _>>()
    })?;
    Ok(UtilityMatrix {
        rows: n,
        cols: n,
        values: rows.into_iter().flatten().collect(),
        ref_weights: weights(pool, by_multiplicity),
    })
}

/// Utility of every candidate against every candidate (self included) and
/// the weighted expected utility of each candidate.
pub fn expected_utility<U: Utility + ?Sized>(
    pool: &HypothesisPool,
    utility: &U,
    by_multiplicity: bool,
    exec: Exec,
) -> Result<(UtilityMatrix, Vec<f64>), MbrError> {
    let m = build_matrix(pool, by_multiplicity, exec, |h, r| {
        let value = utility.utility(&pool.candidates[h].hypothesis.text, &pool.candidates[r].hypothesis.text);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(MbrError::NonFinite {
                src_id: pool.src_id.clone(),
                hyp: h,
                reference: r,
                value,
            })
        }
    })?;
    let eu = m.expected();
    Ok((m, eu))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub hypothesis: Hypothesis,
    pub expected_utility: f64,
    pub index: usize,
    pub multiplicity: usize,
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= EU_TIE_EPS * a.abs().max(b.abs()).max(1.0)
}

/// Index of the best candidate: highest EU; near-equal EUs (within
/// [`EU_TIE_EPS`]) go to the higher multiplicity, then the earlier one.
pub fn argmax_eu(pool: &HypothesisPool, eu: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..eu.len() {
        let better = if tied(eu[i], eu[best]) {
            pool.candidates[i].multiplicity > pool.candidates[best].multiplicity
        } else {
            eu[i] > eu[best]
        };
        if better {
            best = i;
        }
    }
    best
}

fn select_from(pool: &HypothesisPool, eu: &[f64]) -> Selection {
    let i = argmax_eu(pool, eu);
    let c = &pool.candidates[i];
    Selection {
        hypothesis: c.hypothesis.clone(),
        expected_utility: eu[i],
        index: i,
        multiplicity: c.multiplicity,
    }
}

pub fn mbr_select<U: Utility + ?Sized>(
    pool: &HypothesisPool,
    utility: &U,
    by_multiplicity: bool,
    exec: Exec,
) -> Result<Selection, MbrError> {
    let (_, eu) = expected_utility(pool, utility, by_multiplicity, exec)?;
    Ok(select_from(pool, &eu))
}

/// One record of an externally computed utility matrix. Indices are
/// positions of hypotheses within their source's group in the pool file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub src_id: String,
    pub hyp_index: usize,
    pub ref_index: usize,
    pub value: f64,
}

/// Externally supplied utilities keyed by (src_id, hyp index, ref index).
#[derive(Clone, Debug, Default)]
pub struct ExternalMatrix {
    entries: HashMap<String, HashMap<(usize, usize), f64>>,
}

impl ExternalMatrix {
    pub fn from_entries(entries: impl IntoIterator<Item = MatrixEntry>) -> Result<Self, MbrError> {
        let mut m = ExternalMatrix::default();
        for e in entries {
            if !e.value.is_finite() {
                return Err(MbrError::NonFinite {
                    src_id: e.src_id,
                    hyp: e.hyp_index,
                    reference: e.ref_index,
                    value: e.value,
                });
            }
            let slot = m.entries.entry(e.src_id.clone()).or_default();
            if slot.insert((e.hyp_index, e.ref_index), e.value).is_some() {
                return Err(MbrError::DuplicateEntry {
                    src_id: e.src_id,
                    hyp: e.hyp_index,
                    reference: e.ref_index,
                });
            }
        }
        Ok(m)
    }

    fn get(&self, src_id: &str, h: usize, r: usize) -> Result<f64, MbrError> {
        self.entries
            .get(src_id)
            .and_then(|m| m.get(&(h, r)))
            .copied()
            .ok_or_else(|| MbrError::MissingEntry {
                src_id: src_id.to_string(),
                hyp: h,
                reference: r,
            })
    }
}

/// Where utilities come from in corpus-level selection.
pub enum UtilitySource<'a> {
    Computed(&'a dyn Utility),
    External(&'a ExternalMatrix),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub src_id: String,
    pub text: String,
    pub expected_utility: f64,
    pub system: System,
    pub method: Method,
    pub multiplicity: usize,
    pub pool_size: usize,
}

/// Groups hypotheses by source id and selects one per group. With
/// `sources`, output follows that order and a source without hypotheses is
/// an error; otherwise groups follow first appearance in `hyps`.
pub fn select_corpus(
    hyps: Vec<Hypothesis>,
    sources: Option<&[String]>,
    utility: UtilitySource<'_>,
    by_multiplicity: bool,
    exec: Exec,
) -> Result<Vec<SelectionRecord>, MbrError> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Hypothesis>> = HashMap::new();
    for h in hyps {
        if !groups.contains_key(&h.src_id) {
            order.push(h.src_id.clone());
        }
        groups.entry(h.src_id.clone()).or_default().push(h);
    }
    if let Some(src) = sources {
        if let Some(missing) = src.iter().find(|s| !groups.contains_key(*s)) {
            return Err(MbrError::NoHypotheses(missing.clone()));
        }
        order = src.to_vec();
    }
    let pools = order
        .iter()
        .map(|id| HypothesisPool::from_raw(groups.remove(id).unwrap_or_default()))
        .collect::<Result<Vec<_>, _>>()?;

    par::try_map(exec, &pools, |pool| {
        let eu = match &utility {
            UtilitySource::Computed(u) => expected_utility(pool, *u, by_multiplicity, Exec::Sequential)?.1,
            UtilitySource::External(ext) => build_matrix(pool, by_multiplicity, Exec::Sequential, |h, r| {
                ext.get(&pool.src_id, pool.candidates[h].raw_index, pool.candidates[r].raw_index)
            })?
            .expected(),
        };
        let s = select_from(pool, &eu);
        Ok(SelectionRecord {
            src_id: pool.src_id.clone(),
            text: s.hypothesis.text,
            expected_utility: s.expected_utility,
            system: s.hypothesis.system,
            method: s.hypothesis.method,
            multiplicity: s.multiplicity,
            pool_size: pool.raw_count(),
        })
    })
}
