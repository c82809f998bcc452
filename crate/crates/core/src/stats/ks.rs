use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::sample::StatSample;
use crate::{Error, Result};

/// Smallest sample accepted by the normality check.
pub const KS_MIN_SAMPLE: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Standardization {
    SampleMoments,
    OracleMoments { mean: f64, variance: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub distance: f64,
    pub center: f64,
    pub spread: f64,
    pub m: usize,
}

/// Sup-distance between the empirical CDF of `z` and `Φ`. Ties are
/// handled by comparing `Φ` with the ECDF just below and at each distinct
/// value.
pub fn ks_distance_to_normal(z: &[f64]) -> f64 {
    let phi = Normal::standard();
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    let m = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut k = 0;
    while k < sorted.len() {
        let x = sorted[k];
        let mut end = k;
        while end < sorted.len() && sorted[end] == x {
            end += 1;
        }
        let f = phi.cdf(x);
        d = d
            .max((f - k as f64 / m).abs())
            .max((end as f64 / m - f).abs());
        k = end;
    }
    d
}

/// KS distance of the standardized sample to the standard normal law.
pub fn ks_normality(sample: &StatSample, standardization: Standardization) -> Result<KsResult> {
    if sample.m < KS_MIN_SAMPLE {
        return Err(Error::SampleTooSmall {
            need: KS_MIN_SAMPLE,
            got: sample.m,
        });
    }
    let (center, variance) = match standardization {
        Standardization::SampleMoments => (sample.mean, sample.variance),
        Standardization::OracleMoments { mean, variance } => (mean, variance),
    };
    if !(variance > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let spread = variance.sqrt();
    let z: Vec<f64> = sample
        .values
        .iter()
        .map(|v| (v - center) / spread)
        .collect();
    Ok(KsResult {
        distance: ks_distance_to_normal(&z),
        center,
        spread,
        m: sample.m,
    })
}
