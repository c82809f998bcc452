use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::simulator::{splitmix64, RepStream};
use crate::{Error, Result};

/// Number of bootstrap resamples behind every reported standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Runs `m` replications on a pool of `workers` threads. Replication `k`
/// receives `RepStream::new(base_seed, k)`; results come back in index
/// order whatever the scheduling.
pub fn replicate<T, F>(m: usize, base_seed: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(RepStream) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..m as u64)
            .into_par_iter()
            .map(|k| f(RepStream::new(base_seed, k)))
            .collect()
    })
}

/// Replicated values of one statistic with summary moments.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatSample {
    pub name: String,
    #[serde(skip)]
    pub values: Vec<f64>,
    pub base_seed: u64,
    pub m: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// `sd / √m`
    pub se_mean: f64,
    pub bootstrap_se_mean: f64,
    pub bootstrap_se_variance: f64,
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, ss / (m - 1.0))
}

fn name_salt(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    })
}

/// Deterministic bootstrap generator for a statistic.
pub fn bootstrap_rng(base_seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(base_seed ^ splitmix64(name_salt(name))))
}

/// Standard deviation over bootstrap resamples of `stat`.
pub fn bootstrap_se<F>(values: &[f64], resamples: usize, rng: &mut ChaCha8Rng, mut stat: F) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let m = values.len();
    let mut buf = vec![0.0; m];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = values[rng.random_range(0..m)];
        }
        stats.push(stat(&buf));
    }
    mean_var(&stats).1.sqrt()
}

impl StatSample {
    pub fn new(name: &str, values: Vec<f64>, base_seed: u64) -> Result<Self> {
        let m = values.len();
        if m < 2 {
            return Err(Error::SampleTooSmall { need: 2, got: m });
        }
        let (mean, variance) = mean_var(&values);
        let mut rng = bootstrap_rng(base_seed, name);
        let bootstrap_se_mean =
            bootstrap_se(&values, BOOTSTRAP_RESAMPLES, &mut rng, |v| mean_var(v).0);
        let bootstrap_se_variance =
            bootstrap_se(&values, BOOTSTRAP_RESAMPLES, &mut rng, |v| mean_var(v).1);
        Ok(StatSample {
            name: name.to_string(),
            values,
            base_seed,
            m,
            mean,
            variance,
            se_mean: (variance / m as f64).sqrt(),
            bootstrap_se_mean,
            bootstrap_se_variance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replication_order_is_independent_of_workers() {
        let f = |s: RepStream| Ok(s.point_rng().random::<u64>());
        let a = replicate(50, 7, 1, f).unwrap();
        let b = replicate(50, 7, 4, f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replication_errors_abort() {
        let r: Result<Vec<u64>> = replicate(10, 0, 2, |s| {
            if s.rep == 5 {
                Err(Error::ZeroVariance)
            } else {
                Ok(s.rep)
            }
        });
        assert!(r.is_err());
    }

    #[test]
    fn moments_and_standard_errors() {
        let values: Vec<f64> = (0..1000).map(|k| (k % 10) as f64).collect();
        let s = StatSample::new("x", values, 1).unwrap();
        assert!((s.mean - 4.5).abs() < 1e-12);
        assert!((s.variance - 8.25 * 1000.0 / 999.0).abs() < 1e-9);
        assert!((s.bootstrap_se_mean / s.se_mean - 1.0).abs() < 0.25);
        assert!(s.bootstrap_se_variance > 0.0);
        let again = StatSample::new("x", s.values.clone(), 1).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn constant_sample_has_zero_variance() {
        let s = StatSample::new("c", vec![3.0; 10], 0).unwrap();
        assert_eq!(s.variance, 0.0);
        assert!(StatSample::new("c", vec![3.0], 0).is_err());
    }
}
