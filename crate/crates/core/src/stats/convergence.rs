//! Monte Carlo counterparts of the moment limits.

use serde::Serialize;

use super::ks::{ks_normality, KsResult, Standardization};
use super::sample::{replicate, StatSample};
use super::Batch;
use crate::moments::{limit_var_i, limit_var_l, ModelConfig};
use crate::quadrature::QuadratureSpec;
use crate::simulator::{count_isolated, count_truncation_family, NearRule, RepCounts, Scenario};
use crate::Result;

/// Statistic whose variance density is compared with its limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensityStatistic {
    Isolated,
    /// `L_{R,n}` at truncation radius `r`.
    TruncationError {
        r: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityRow {
    pub n: f64,
    pub lambda_n: f64,
    /// `Var / (λ_n ℓ(K))` from Monte Carlo.
    pub density: f64,
    pub se: f64,
    pub limit: f64,
    pub limit_error: f64,
    pub relative_gap: f64,
    pub bias_bound: f64,
}

/// `I_n` counts of `m` replications of `cfg`.
pub fn isolated_sample(
    cfg: &ModelConfig<f64>,
    eps: f64,
    batch: &Batch,
    name: &str,
) -> Result<StatSample> {
    let sc = Scenario::new(cfg, eps)?;
    let k = cfg.window.clone();
    let values = replicate(batch.m, batch.seed, batch.workers, |s| {
        Ok(count_isolated(&sc.graph(s, true)?, &k) as f64)
    })?;
    StatSample::new(name, values, batch.seed)
}

/// Full per-replication counts at truncation radius `r`.
pub fn truncation_counts(
    cfg: &ModelConfig<f64>,
    r: f64,
    eps: f64,
    batch: &Batch,
) -> Result<Vec<RepCounts>> {
    let sc = Scenario::new(cfg, eps)?;
    replicate(batch.m, batch.seed, batch.workers, |s| sc.counts(s, r))
}

/// Variance density of the statistic at each `n`, next to its limit.
pub fn variance_density_convergence(
    cfg: &ModelConfig<f64>,
    statistic: DensityStatistic,
    ns: &[f64],
    eps: f64,
    batch: &Batch,
    spec: &QuadratureSpec<f64>,
) -> Result<Vec<DensityRow>> {
    let limit = match statistic {
        DensityStatistic::Isolated => limit_var_i(cfg.lambda, &cfg.g, cfg.d, spec)?,
        DensityStatistic::TruncationError { r } => limit_var_l(cfg.lambda, &cfg.g, r, cfg.d, spec)?,
    };
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let c = cfg.with_n(n)?;
        let sc = Scenario::new(&c, eps)?;
        let k = c.window.clone();
        let values = replicate(batch.m, batch.seed, batch.workers, |s| {
            let g = sc.graph(s, true)?;
            Ok(match statistic {
                DensityStatistic::Isolated => count_isolated(&g, &k) as f64,
                DensityStatistic::TruncationError { r } => {
                    count_truncation_family(&g, &k, NearRule::new(r, n)?).l as f64
                }
            })
        })?;
        let sample = StatSample::new(&format!("variance-density-n{n}"), values, batch.seed)?;
        let norm = c.lambda_n() * c.window.volume();
        let density = sample.variance / norm;
        rows.push(DensityRow {
            n,
            lambda_n: c.lambda_n(),
            density,
            se: sample.bootstrap_se_variance / norm,
            limit: limit.value,
            limit_error: limit.error,
            relative_gap: (density - limit.value).abs() / limit.value,
            bias_bound: sc.window().bias_bound,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CltRow {
    pub n: f64,
    pub ks: KsResult,
    pub mean: f64,
    pub variance: f64,
}

/// KS distance of standardized `I_n` to the normal law at each `n`.
pub fn clt_scan(
    cfg: &ModelConfig<f64>,
    ns: &[f64],
    eps: f64,
    batch: &Batch,
    standardization: impl Fn(&ModelConfig<f64>) -> Result<Standardization>,
) -> Result<Vec<CltRow>> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let c = cfg.with_n(n)?;
        let sample = isolated_sample(&c, eps, batch, &format!("isolated-n{n}"))?;
        let ks = ks_normality(&sample, standardization(&c)?)?;
        rows.push(CltRow {
            n,
            ks,
            mean: sample.mean,
            variance: sample.variance,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CollapseRow {
    pub r: f64,
    /// Share of replications with `|L - mean L| >= threshold · sd(I_n)`.
    pub exceedance: f64,
    pub mean_l: f64,
    pub sd_i: f64,
}

/// Empirical `P(|L_{R,n} - E L_{R,n}| / √Var I_n >= threshold)` over
/// `rs`, all radii read off one graph per replication.
pub fn truncation_collapse(
    cfg: &ModelConfig<f64>,
    rs: &[f64],
    threshold: f64,
    eps: f64,
    batch: &Batch,
) -> Result<Vec<CollapseRow>> {
    let sc = Scenario::new(cfg, eps)?;
    let k = cfg.window.clone();
    let n = cfg.n;
    let per_rep = replicate(batch.m, batch.seed, batch.workers, |s| {
        let g = sc.graph(s, true)?;
        let mut out = Vec::with_capacity(rs.len() + 1);
        out.push(count_isolated(&g, &k) as f64);
        for &r in rs {
            out.push(count_truncation_family(&g, &k, NearRule::new(r, n)?).l as f64);
        }
        Ok(out)
    })?;
    let i_values: Vec<f64> = per_rep.iter().map(|v| v[0]).collect();
    let i = StatSample::new("collapse-isolated", i_values, batch.seed)?;
    let sd_i = i.variance.sqrt();
    let mut rows = Vec::with_capacity(rs.len());
    for (k, &r) in rs.iter().enumerate() {
        let l: Vec<f64> = per_rep.iter().map(|v| v[k + 1]).collect();
        let mean_l = l.iter().sum::<f64>() / l.len() as f64;
        let hits = l
            .iter()
            .filter(|&&x| (x - mean_l).abs() >= threshold * sd_i)
            .count();
        rows.push(CollapseRow {
            r,
            exceedance: hits as f64 / l.len() as f64,
            mean_l,
            sd_i,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connfn::ConnectionFunction;
    use crate::moments::mean_i_scaled;
    use crate::region::Region;
    use crate::Dimension;

    #[test]
    fn isolated_mean_matches_oracle() {
        let cfg = ModelConfig::new(
            1.0,
            2.0,
            Region::unit(Dimension::ONE),
            ConnectionFunction::exponential(1.0).unwrap(),
        )
        .unwrap();
        let s = isolated_sample(&cfg, 1e-6, &Batch::new(4000, 3, 2), "i").unwrap();
        let want = mean_i_scaled(&cfg, &QuadratureSpec::default())
            .unwrap()
            .value;
        assert!(
            (s.mean - want).abs() < 3.0 * s.se_mean,
            "{} vs {want}",
            s.mean
        );
    }

    #[test]
    fn collapse_decreases_in_radius() {
        let cfg = ModelConfig::new(
            1.0,
            4.0,
            Region::unit(Dimension::ONE),
            ConnectionFunction::exponential(1.0).unwrap(),
        )
        .unwrap();
        let rows = truncation_collapse(&cfg, &[0.5, 2.0, 6.0], 0.25, 1e-6, &Batch::new(1000, 1, 2))
            .unwrap();
        assert!(rows[2].exceedance <= rows[0].exceedance);
        assert!(rows[2].mean_l < rows[0].mean_l);
    }
}
