//! Explicit lower bound `Var I^r((0,nM]^2) >= γ n²` for bounded-support
//! connection functions in the plane.

use serde::Serialize;

use super::field::{box_value, covariance_field, FieldModel};
use super::sample::{replicate, StatSample};
use super::Batch;
use crate::moments::ModelConfig;
use crate::region::Region;
use crate::{Error, Result};

/// Density of the boxes used by the bound: those with both indices even
/// in the row-major enumeration of the quadrant. They are pairwise
/// non-adjacent, and any box of `n²` contains at least `n²/4` of them
/// once `n >= 2`.
pub const BOX_DENSITY: f64 = 0.25;

/// Side of the boxes over which `μ̂` is estimated.
const MEAN_BOX_SIDE: f64 = 16.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundCertificate {
    pub r: u32,
    /// Support radius of the connection function.
    #[serde(rename = "R")]
    pub support: f64,
    pub lambda: f64,
    /// Estimated `E I^r((0,1]^2)`.
    pub mu_hat: f64,
    pub mu_se: f64,
    pub big_m: u64,
    pub alpha: f64,
    /// `μ̂M² - 2λR(M + rR)`
    pub margin: f64,
    /// `γ` itself underflows for any realistic `M`; the certificate is
    /// carried in logarithmic form.
    pub ln_gamma: f64,
    pub gamma: f64,
}

impl LowerBoundCertificate {
    /// Builds the certificate from an estimate of `μ`.
    pub fn from_mean(lambda: f64, support: f64, r: u32, mu_hat: f64, mu_se: f64) -> Result<Self> {
        if !(mu_hat > 0.0) {
            return Err(Error::NotSignificant(format!(
                "mean estimate {mu_hat} is not positive"
            )));
        }
        let rr = r as f64 * support;
        let mut big_m = (3.0 * lambda * support / mu_hat).floor() as u64 + 1;
        let margin_at = |m: u64| mu_hat * (m * m) as f64 - 2.0 * lambda * support * (m as f64 + rr);
        while margin_at(big_m) <= 0.0 {
            big_m += 1;
        }
        let margin = margin_at(big_m);
        let m = big_m as f64;
        let ln_gamma = BOX_DENSITY.ln() + 2.0 * margin.ln() - lambda * (m + 2.0 * rr).powi(2);
        Ok(LowerBoundCertificate {
            r,
            support,
            lambda,
            mu_hat,
            mu_se,
            big_m,
            alpha: BOX_DENSITY,
            margin,
            ln_gamma,
            gamma: ln_gamma.exp(),
        })
    }

    /// `γ > 0` as a real number: finite logarithm and positive margin.
    pub fn is_valid(&self) -> bool {
        self.margin > 0.0 && self.ln_gamma.is_finite()
    }

    /// `v >= γ n²`, decided on the log scale.
    pub fn admits(&self, variance: f64, n: u64) -> bool {
        variance > 0.0 && variance.ln() >= self.ln_gamma + 2.0 * (n as f64).ln()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundRow {
    pub n: u64,
    pub side: f64,
    pub variance: f64,
    pub se: f64,
    /// `Var / n²`
    pub per_block: f64,
    pub ln_bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub certificate: LowerBoundCertificate,
    pub rows: Vec<LowerBoundRow>,
    /// Least-squares `c` in `Var ≈ c n²`.
    pub fitted_c: f64,
    /// `M² Σ_z Cov(I^r(0), I^r(z))`, the large-`n` value of `Var / n²`.
    pub field_prediction: f64,
    pub field_prediction_se: f64,
    /// `max / min` of `Var / n²` over the rows.
    pub spread: f64,
}

/// Estimates `μ = E I^r((0,1]^2)`, builds the certificate and checks it
/// against Monte Carlo variances of `I^r((0,nM]^2)`.
pub fn variance_lower_bound(
    cfg: &ModelConfig<f64>,
    r: u32,
    ns: &[u64],
    batch: &Batch,
) -> Result<LowerBoundReport> {
    if cfg.d.get() != 2 {
        return Err(Error::pre("the lower-bound construction is planar"));
    }
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::param("need positive block counts"));
    }
    batch.check(2)?;
    let model = FieldModel::new(cfg, r)?;
    let mean_box = Region::cube(cfg.d, MEAN_BOX_SIDE);
    let mean_values = replicate(batch.m, batch.seed, batch.workers, |s| {
        Ok(box_value(&model, &mean_box, s)? / mean_box.volume())
    })?;
    let mean = StatSample::new("lower-bound-mean", mean_values, batch.seed)?;
    if mean.mean <= 3.0 * mean.se_mean {
        return Err(Error::NotSignificant(format!(
            "mean {} within 3 SE ({}) of zero; increase m",
            mean.mean, mean.se_mean
        )));
    }
    let cert =
        LowerBoundCertificate::from_mean(model.lambda, model.support, r, mean.mean, mean.se_mean)?;
    let big_m = cert.big_m as f64;

    let mut rows = Vec::with_capacity(ns.len());
    for (k, &n) in ns.iter().enumerate() {
        let side = n as f64 * big_m;
        let b = Region::cube(cfg.d, side);
        let seed = batch.seed.wrapping_add(1 + k as u64);
        let values = replicate(batch.m, seed, batch.workers, |s| box_value(&model, &b, s))?;
        let s = StatSample::new(&format!("lower-bound-n{n}"), values, seed)?;
        let ln_bound = cert.ln_gamma + 2.0 * (n as f64).ln();
        rows.push(LowerBoundRow {
            n,
            side,
            variance: s.variance,
            se: s.bootstrap_se_variance,
            per_block: s.variance / (n * n) as f64,
            ln_bound,
            holds: cert.admits(s.variance, n),
        });
    }
    let num: f64 = rows
        .iter()
        .map(|row| row.variance * (row.n * row.n) as f64)
        .sum();
    let den: f64 = rows
        .iter()
        .map(|row| ((row.n * row.n) as f64).powi(2))
        .sum();
    let per: Vec<f64> = rows.iter().map(|row| row.per_block).collect();
    let hi = per.iter().cloned().fold(f64::MIN, f64::max);
    let lo = per.iter().cloned().fold(f64::MAX, f64::min);

    let field_batch = Batch::new(batch.m, batch.seed.wrapping_add(1000), batch.workers);
    let field = covariance_field(cfg, r, None, None, &field_batch)?;
    Ok(LowerBoundReport {
        certificate: cert,
        rows,
        fitted_c: num / den,
        field_prediction: big_m * big_m * field.sum,
        field_prediction_se: big_m * big_m * field.sum_se,
        spread: if lo > 0.0 { hi / lo } else { f64::INFINITY },
    })
}
