//! Replication engine and statistical checks.

mod bound;
mod convergence;
mod field;
mod ks;
mod martingale;
mod sample;

use serde::Serialize;

pub use bound::{
    variance_lower_bound, LowerBoundCertificate, LowerBoundReport, LowerBoundRow, BOX_DENSITY,
};
pub use convergence::{
    clt_scan, isolated_sample, truncation_collapse, truncation_counts,
    variance_density_convergence, CltRow, CollapseRow, DensityRow, DensityStatistic,
};
pub use field::{
    box_value, box_variance_check, covariance_field, BoxVarianceRow, BoxVarianceTable,
    CovarianceField, CovariancePoint, FieldModel,
};
pub use ks::{ks_distance_to_normal, ks_normality, KsResult, Standardization, KS_MIN_SAMPLE};
pub use martingale::{random_integer_space, FiniteFiltrationSpace, IdentityReport};
pub use sample::{bootstrap_rng, bootstrap_se, replicate, StatSample, BOOTSTRAP_RESAMPLES};

use crate::{Error, Result};

/// Replication count, base seed and worker count of one batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Batch {
    pub m: usize,
    pub seed: u64,
    #[serde(skip)]
    pub workers: usize,
}

impl Batch {
    pub fn new(m: usize, seed: u64, workers: usize) -> Self {
        Batch { m, seed, workers }
    }

    pub fn check(&self, need: usize) -> Result<()> {
        if self.m < need {
            return Err(Error::SampleTooSmall { need, got: self.m });
        }
        Ok(())
    }
}
