//! Seeded random streams and Poisson shot noise.
//!
//! Every stochastic quantity is drawn from a `ChaCha8Rng` whose seed is
//! derived from a master seed and a task index with [`split_seed`]. Work can
//! therefore be spread across threads in any order without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Subseed for task `index` of a run seeded with `seed`:
/// `splitmix64(splitmix64(seed) + index)` (wrapping), a bijection in `index`.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed).wrapping_add(index))
}

/// Draws a Poisson variate with the given mean. Non-positive or non-finite
/// means yield zero.
pub fn poisson<R: rand::Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean.is_nan() || mean <= 0.0 {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(d) => d.sample(rng) as u64,
        Err(_) => 0,
    }
}

/// Poisson count with mean `rate * integration_time`, reproducible per seed.
pub fn sample_counts(rate: f64, integration_time: f64, seed: u64) -> u64 {
    let mut rng = seeded_rng(seed);
    poisson(rate * integration_time, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_gives_zero() {
        for seed in 0..20 {
            assert_eq!(sample_counts(0.0, 10.0, seed), 0);
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        assert_eq!(sample_counts(12.5, 10.0, 77), sample_counts(12.5, 10.0, 77));
        assert_eq!(sample_counts(3e4, 10.0, 77), sample_counts(3e4, 10.0, 77));
    }

    #[test]
    fn split_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for s in 0..4u64 {
            for i in 0..1000u64 {
                assert!(seen.insert(split_seed(s, i)));
            }
        }
    }

    #[test]
    fn mean_of_many_draws() {
        // 3 sigma / sqrt(N) band around 100 is +-0.095; the stated band is [99, 101]
        let n = 100_000;
        let mut rng = seeded_rng(2024);
        let total: u64 = (0..n).map(|_| poisson(100.0, &mut rng)).sum();
        let mean = total as f64 / n as f64;
        assert!((99.0..=101.0).contains(&mean), "mean {mean}");
        assert!((mean - 100.0).abs() < 3.0 * 10.0 / (n as f64).sqrt());
    }

    #[test]
    fn small_mean_variance() {
        let n = 50_000;
        let mut rng = seeded_rng(1);
        let xs: Vec<f64> = (0..n).map(|_| poisson(4.0, &mut rng) as f64).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((mean - 4.0).abs() < 0.05);
        assert!((var - 4.0).abs() < 0.15);
    }
}
