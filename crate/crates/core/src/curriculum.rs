//! Domain-feature difficulty scoring, rank bucketing and probabilistic
//! curriculum batch sampling.
//!
//! The score of a pair is the per-target-word log-probability gap between
//! an in-domain and an out-of-domain model; both log-probabilities arrive
//! as `logp_in` / `logp_out` score records.

use std::cmp::Ordering;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCORE_LOGP_IN: &str = "logp_in";
pub const SCORE_LOGP_OUT: &str = "logp_out";

#[derive(Debug, Error, PartialEq)]
pub enum CurriculumError {
    #[error("target length must be at least 1")]
    ZeroLength,
    #[error("log-probabilities must be finite and ≤ 0 (got in={logp_in}, out={logp_out})")]
    BadLogProb { logp_in: f64, logp_out: f64 },
    #[error("{items} items cannot fill {buckets} buckets")]
    TooFewItems { items: usize, buckets: usize },
    #[error("invalid sampling plan: {0}")]
    BadPlan(String),
    #[error("bucket {bucket} is empty but has weight {weight} from step {from_step}")]
    EmptyBucket { bucket: usize, weight: f64, from_step: u64 },
    #[error("pair `{id}` lacks score `{scorer}`")]
    MissingScore { id: String, scorer: &'static str },
}

/// `(logp_in − logp_out) / tgt_len`.
pub fn domain_feature(logp_in: f64, logp_out: f64, tgt_len: usize) -> Result<f64, CurriculumError> {
    if tgt_len == 0 {
        return Err(CurriculumError::ZeroLength);
    }
    if !(logp_in.is_finite() && logp_out.is_finite()) || logp_in > 0.0 || logp_out > 0.0 {
        return Err(CurriculumError::BadLogProb { logp_in, logp_out });
    }
    Ok((logp_in - logp_out) / tgt_len as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredInput {
    pub pair_id: String,
    pub logp_in: f64,
    pub logp_out: f64,
    pub tgt_len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumItem {
    pub pair_id: String,
    pub q: f64,
    pub tgt_len: usize,
    pub bucket: usize,
}

/// Scores every item, orders by descending q (ties by ascending pair id)
/// and cuts the ranking into `num_buckets` equal slices, bucket 0 holding
/// the highest q. Leftover items go to the last bucket.
pub fn rank_and_bucket(items: Vec<ScoredInput>, num_buckets: usize) -> Result<Vec<CurriculumItem>, CurriculumError> {
    if num_buckets == 0 {
        return Err(CurriculumError::BadPlan("num_buckets must be at least 1".into()));
    }
    if items.len() < num_buckets {
        return Err(CurriculumError::TooFewItems {
            items: items.len(),
            buckets: num_buckets,
        });
    }
    let mut scored = items
        .into_iter()
        .map(|it| {
            Ok(CurriculumItem {
                q: domain_feature(it.logp_in, it.logp_out, it.tgt_len)?,
                pair_id: it.pair_id,
                tgt_len: it.tgt_len,
                bucket: 0,
            })
        })
        .collect::<Result<Vec<_>, CurriculumError>>()?;
    scored.sort_by(|a, b| {
        b.q.partial_cmp(&a.q)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.pair_id.cmp(&b.pair_id))
    });
    let size = scored.len() / num_buckets;
    for (rank, item) in scored.iter_mut().enumerate() {
        item.bucket = (rank / size).min(num_buckets - 1);
    }
    Ok(scored)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    /// First step at which these weights apply.
    pub from_step: u64,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingPlan {
    pub num_buckets: usize,
    pub schedule: Vec<ScheduleEntry>,
    pub batch_size: usize,
    pub seed: u64,
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<(), CurriculumError> {
        let bad = |m: String| Err(CurriculumError::BadPlan(m));
        if self.num_buckets == 0 {
            return bad("num_buckets must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        let Some(first) = self.schedule.first() else {
            return bad("schedule is empty".into());
        };
        if first.from_step != 0 {
            return bad("the first schedule entry must start at step 0".into());
        }
        for w in self.schedule.windows(2) {
            if w[1].from_step <= w[0].from_step {
                return bad("schedule steps must be strictly increasing".into());
            }
        }
        for e in &self.schedule {
            if e.weights.len() != self.num_buckets {
                return bad(format!(
                    "entry at step {} has {} weights for {} buckets",
                    e.from_step,
                    e.weights.len(),
                    self.num_buckets
                ));
            }
            if e.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return bad(format!(
                    "entry at step {} has a negative or non-finite weight",
                    e.from_step
                ));
            }
            let sum: f64 = e.weights.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return bad(format!("entry at step {} weights sum to {sum}", e.from_step));
            }
        }
        Ok(())
    }

    /// Index of the schedule entry governing `step`.
    fn entry_for(&self, step: u64) -> usize {
        self.schedule.partition_point(|e| e.from_step <= step) - 1
    }
}

/// Draws `total_steps` batches. For each draw a bucket is chosen by the
/// active weight vector, then an item uniformly within that bucket.
pub fn sample_batches(
    items: &[CurriculumItem],
    plan: &SamplingPlan,
    total_steps: u64,
) -> Result<Vec<Vec<String>>, CurriculumError> {
    plan.validate()?;
    let mut buckets: Vec<Vec<&str>> = vec![Vec::new(); plan.num_buckets];
    for it in items {
        let slot = buckets.get_mut(it.bucket).ok_or_else(|| {
            CurriculumError::BadPlan(format!(
                "item {} is in bucket {} of {}",
                it.pair_id, it.bucket, plan.num_buckets
            ))
        })?;
        slot.push(&it.pair_id);
    }
    let mut samplers = Vec::with_capacity(plan.schedule.len());
    for e in &plan.schedule {
        if e.from_step >= total_steps && !samplers.is_empty() {
            break;
        }
        for (b, &w) in e.weights.iter().enumerate() {
            if w > 0.0 && buckets[b].is_empty() {
                return Err(CurriculumError::EmptyBucket {
                    bucket: b,
                    weight: w,
                    from_step: e.from_step,
                });
            }
        }
        samplers.push(WeightedIndex::new(&e.weights).map_err(|e| CurriculumError::BadPlan(e.to_string()))?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut batches = Vec::with_capacity(total_steps as usize);
    for step in 0..total_steps {
        let dist = &samplers[plan.entry_for(step)];
        let batch = (0..plan.batch_size)
            .map(|_| {
                let bucket = &buckets[dist.sample(&mut rng)];
                bucket[rng.random_range(0..bucket.len())].to_string()
            })
            .collect();
        batches.push(batch);
    }
    Ok(batches)
}
