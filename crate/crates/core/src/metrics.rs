//! Lexical similarity metrics (chrF, sentence and corpus BLEU) and the
//! bidirectional-KL regularized loss.

use std::collections::HashMap;
use std::hash::Hash;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("n-gram order must be at least 1")]
    ZeroOrder,
    #[error("distributions have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid distribution: {0}")]
    BadDistribution(String),
    #[error("lambda must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("hypothesis and reference counts differ ({0} vs {1})")]
    CorpusMismatch(usize, usize),
}

/// Multiset of n-grams of one order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NGramProfile<T: Eq + Hash> {
    pub order: usize,
    pub counts: HashMap<Vec<T>, usize>,
}

impl<T: Eq + Hash + Clone> NGramProfile<T> {
    pub fn new(seq: &[T], order: usize) -> Self {
        let mut counts: HashMap<Vec<T>, usize> = HashMap::new();
        if order > 0 && seq.len() >= order {
            for w in seq.windows(order) {
                *counts.entry(w.to_vec()).or_default() += 1;
            }
        }
        NGramProfile { order, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Σ min(count_self, count_other) over shared n-grams.
    pub fn clipped_matches(&self, other: &Self) -> usize {
        self.counts
            .iter()
            .map(|(g, c)| other.counts.get(g).map_or(0, |o| (*c).min(*o)))
            .sum()
    }
}

fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom <= 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

/// Clipped match count of two n-gram lists: sorts both and walks them
/// together, so each shared n-gram counts min(count_a, count_b) times.
fn sorted_matches<T: Ord>(a: &mut [T], b: &mut [T]) -> usize {
    a.sort_unstable();
    b.sort_unstable();
    let (mut i, mut j, mut m) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                m += 1;
                i += 1;
                j += 1;
            }
        }
    }
    m
}

/// Character n-gram F-score in [0, 1].
///
/// Precision and recall are averaged over the orders 1..=max_n at which
/// both strings have at least one n-gram, then combined as F-beta.
/// Whitespace characters are kept. Two empty strings score 1, one empty
/// string scores 0.
pub fn chrf(hyp: &str, reference: &str, max_n: usize, beta: f64) -> Result<f64, MetricError> {
    if max_n == 0 {
        return Err(MetricError::ZeroOrder);
    }
    let h: Vec<char> = hyp.chars().collect();
    let r: Vec<char> = reference.chars().collect();
    match (h.is_empty(), r.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let (mut p_sum, mut r_sum, mut orders) = (0.0, 0.0, 0usize);
    let (mut hw, mut rw) = (Vec::with_capacity(h.len()), Vec::with_capacity(r.len()));
    for n in 1..=max_n.min(h.len()).min(r.len()) {
        hw.clear();
        hw.extend(h.windows(n));
        rw.clear();
        rw.extend(r.windows(n));
        let m = sorted_matches(&mut hw, &mut rw) as f64;
        p_sum += m / hw.len() as f64;
        r_sum += m / rw.len() as f64;
        orders += 1;
    }
    Ok(f_beta(p_sum / orders as f64, r_sum / orders as f64, beta))
}

pub const CHRF_ORDER: usize = 6;
pub const CHRF_BETA: f64 = 2.0;

fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    (1.0 - ref_len as f64 / hyp_len as f64).min(0.0).exp()
}

/// Sentence BLEU with add-one smoothing on orders ≥ 2 and brevity penalty
/// exp(min(0, 1 − |ref|/|hyp|)). An empty hypothesis scores 0.
pub fn sentence_bleu<T: Eq + Hash + Clone>(hyp: &[T], reference: &[T], max_n: usize) -> Result<f64, MetricError> {
    if max_n == 0 {
        return Err(MetricError::ZeroOrder);
    }
    if hyp.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let hp = NGramProfile::new(hyp, n);
        let rp = NGramProfile::new(reference, n);
        let m = hp.clipped_matches(&rp) as f64;
        let c = hp.total() as f64;
        let p = if n == 1 { m / c } else { (m + 1.0) / (c + 1.0) };
        if p == 0.0 {
            return Ok(0.0);
        }
        log_sum += p.ln();
    }
    Ok((log_sum / max_n as f64).exp() * brevity_penalty(hyp.len(), reference.len()))
}

/// Corpus BLEU from summed clipped counts, without smoothing.
pub fn corpus_bleu<T: Eq + Hash + Clone>(hyps: &[Vec<T>], refs: &[Vec<T>], max_n: usize) -> Result<f64, MetricError> {
    if max_n == 0 {
        return Err(MetricError::ZeroOrder);
    }
    if hyps.len() != refs.len() {
        return Err(MetricError::CorpusMismatch(hyps.len(), refs.len()));
    }
    let mut matches = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hyps.iter().zip(refs) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=max_n {
            let hp = NGramProfile::new(h, n);
            matches[n - 1] += hp.clipped_matches(&NGramProfile::new(r, n));
            totals[n - 1] += hp.total();
        }
    }
    if hyp_len == 0 || matches.iter().zip(&totals).any(|(m, t)| *m == 0 || *t == 0) {
        return Ok(0.0);
    }
    let log_mean = matches
        .iter()
        .zip(&totals)
        .map(|(m, t)| (*m as f64 / *t as f64).ln())
        .sum::<f64>()
        / max_n as f64;
    Ok(log_mean.exp() * brevity_penalty(hyp_len, ref_len))
}

/// A probability vector: non-negative entries summing to 1 within 1e-9.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, MetricError> {
        if probs.is_empty() {
            return Err(MetricError::BadDistribution("empty".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(MetricError::BadDistribution(format!("entry {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MetricError::BadDistribution(format!("sums to {sum}")));
        }
        Ok(Distribution(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }
}

/// KL(p‖q) = Σ p_i ln(p_i / q_i), with 0·ln(0/q) = 0 and +∞ where
/// q_i = 0 < p_i.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64, MetricError> {
    if p.0.len() != q.0.len() {
        return Err(MetricError::LengthMismatch(p.0.len(), q.0.len()));
    }
    let mut sum = 0.0;
    for (&pi, &qi) in p.0.iter().zip(&q.0) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        sum += pi * (pi / qi).ln();
    }
    Ok(sum)
}

pub const RDROP_LAMBDA: f64 = 5.0;

/// (nll_a + nll_b) + λ · ½ · (KL(p‖q) + KL(q‖p)).
pub fn rdrop_loss(nll_a: f64, nll_b: f64, p: &Distribution, q: &Distribution, lambda: f64) -> Result<f64, MetricError> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(MetricError::NegativeLambda(lambda));
    }
    let sym = 0.5 * (kl_divergence(p, q)? + kl_divergence(q, p)?);
    let reg = if lambda == 0.0 { 0.0 } else { lambda * sym };
    Ok(nll_a + nll_b + reg)
}
