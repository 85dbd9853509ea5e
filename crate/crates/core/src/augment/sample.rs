use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::MonolingualRecord;

/// Uniform sample of `min(n, len)` items without replacement in a single
/// pass (reservoir sampling). Survivors keep their input order.
pub fn reservoir_sample<T, I>(items: I, n: usize, seed: u64) -> Vec<T>
where
    I: IntoIterator<Item = T>,
{
    if n == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reservoir: Vec<(usize, T)> = Vec::with_capacity(n);
    for (i, item) in items.into_iter().enumerate() {
        if i < n {
            reservoir.push((i, item));
        } else {
            let j = rng.random_range(0..=i);
            if j < n {
                reservoir[j] = (i, item);
            }
        }
    }
    reservoir.sort_unstable_by_key(|(i, _)| *i);
    reservoir.into_iter().map(|(_, item)| item).collect()
}

pub fn mono_sample<I>(mono: I, n: usize, seed: u64) -> Vec<MonolingualRecord>
where
    I: IntoIterator<Item = MonolingualRecord>,
{
    reservoir_sample(mono, n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Lang;

    fn corpus(n: usize) -> Vec<MonolingualRecord> {
        (0..n)
            .map(|i| MonolingualRecord::new(format!("m{i}"), format!("t{i}"), Lang::En))
            .collect()
    }

    #[test]
    fn zero_gives_empty() {
        assert!(mono_sample(corpus(10), 0, 1).is_empty());
    }

    #[test]
    fn oversized_request_returns_everything_in_order() {
        assert_eq!(mono_sample(corpus(10), 10, 3), corpus(10));
        assert_eq!(mono_sample(corpus(10), 50, 3), corpus(10));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let a = mono_sample(corpus(10_000), 1000, 42);
        let b = mono_sample(corpus(10_000), 1000, 42);
        assert_eq!(a.len(), 1000);
        assert_eq!(a, b);
        assert_ne!(a, mono_sample(corpus(10_000), 1000, 43));
        // order preserved
        let idx: Vec<usize> = a.iter().map(|r| r.id[1..].parse().unwrap()).collect();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn inclusion_is_uniform() {
        // 10 elements, n = 5: each inclusion is Bernoulli(0.5). 10,000
        // trials give sd = sqrt(0.25 / 10_000) = 0.005, so 3 sd = 0.015.
        let trials = 10_000;
        let mut hits = [0usize; 10];
        for seed in 0..trials {
            for x in reservoir_sample(0..10usize, 5, seed as u64) {
                hits[x] += 1;
            }
        }
        for (i, h) in hits.iter().enumerate() {
            let freq = *h as f64 / trials as f64;
            assert!((freq - 0.5).abs() <= 0.015, "element {i}: {freq}");
        }
    }
}
