//! Lattice field `z ↦ I^r(z + (0,1]^d)` of vertices in components of
//! exactly `r` vertices, its covariance function and box sums.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::sample::{bootstrap_rng, replicate, BOOTSTRAP_RESAMPLES};
use super::Batch;
use crate::moments::ModelConfig;
use crate::region::Region;
use crate::simulator::{
    component_field, component_window, connect, sample_points, EdgeRange, LatticeRegion, RepStream,
};
use crate::{Error, Result};

/// The unscaled-or-scaled model whose field is studied: intensity `λ_n`
/// and connection function `g_n` of `cfg`, which must have bounded support.
#[derive(Clone, Debug)]
pub struct FieldModel {
    pub lambda: f64,
    pub g: crate::ConnFn,
    pub support: f64,
    pub r: u32,
}

impl FieldModel {
    pub fn new(cfg: &ModelConfig<f64>, r: u32) -> Result<Self> {
        cfg.validate()?;
        if r == 0 {
            return Err(Error::param("component size must be >= 1"));
        }
        let g = cfg.g.scaled(cfg.n)?;
        let support = g.support_radius().ok_or(Error::UnboundedSupport)?;
        Ok(FieldModel {
            lambda: cfg.lambda_n(),
            g,
            support,
            r,
        })
    }

    /// Offsets beyond this sup-norm distance give independent cells: the
    /// value of a cell depends only on points within `r·R` of it.
    pub fn dependence_range(&self) -> i64 {
        2 * (self.r as f64 * self.support).ceil() as i64 + 1
    }

    /// Values of `I^r` (vertex counts divided by `r`) on every site of
    /// `sites` for replication `stream`.
    pub fn field(&self, sites: &LatticeRegion, stream: RepStream) -> Result<Vec<f64>> {
        let window = component_window(sites, self.r, self.support);
        let mut graph = sample_points(self.lambda, &window, &mut stream.point_rng())?;
        connect(
            &mut graph,
            &self.g,
            EdgeRange::for_function(&self.g, self.support),
            &stream.pair_uniforms(),
            None,
        );
        let counts = component_field(&graph, sites, self.r, Some(self.support))?;
        Ok(counts
            .into_iter()
            .map(|c| c as f64 / self.r as f64)
            .collect())
    }
}

/// All offsets in `{-z_max..z_max}^d`, lexicographic.
fn offsets(d: usize, z_max: i64) -> Vec<[i64; 3]> {
    let span = |a: usize| if a < d { -z_max..=z_max } else { 0..=0 };
    let mut out = Vec::new();
    for z in span(2) {
        for y in span(1) {
            for x in span(0) {
                out.push([x, y, z]);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovariancePoint {
    pub offset: Vec<i64>,
    pub covariance: f64,
    pub se: f64,
    /// Cell pairs at this offset in one window.
    pub pairs: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovarianceField {
    pub r: u32,
    pub z_max: i64,
    pub dependence_range: i64,
    pub window_side: usize,
    pub m: usize,
    pub mean: f64,
    pub points: Vec<CovariancePoint>,
    pub sum: f64,
    pub sum_se: f64,
}

impl CovarianceField {
    pub fn at(&self, z: &[i64]) -> Option<&CovariancePoint> {
        self.points.iter().find(|p| p.offset == z)
    }

    /// Points strictly beyond the dependence range.
    pub fn beyond_range(&self) -> impl Iterator<Item = &CovariancePoint> {
        let range = self.dependence_range;
        self.points
            .iter()
            .filter(move |p| p.offset.iter().map(|c| c.abs()).max().unwrap_or(0) > range)
    }
}

/// Per-replication sufficient statistics: `Σ_a Y_a` and, for every
/// offset, `Σ_a Y_a Y_{a+z}` over pairs inside the window.
struct FieldMoments {
    total: f64,
    products: Vec<f64>,
}

fn field_moments(values: &[f64], sites: &LatticeRegion, offs: &[[i64; 3]]) -> FieldMoments {
    let mut products = vec![0.0; offs.len()];
    for (k, z) in offs.iter().enumerate() {
        let mut s = 0.0;
        for (a, site) in sites.sites().iter().enumerate() {
            let shifted = [site[0] + z[0], site[1] + z[1], site[2] + z[2]];
            if let Some(b) = sites.position(&shifted) {
                s += values[a] * values[b];
            }
        }
        products[k] = s;
    }
    FieldMoments {
        total: values.iter().sum(),
        products,
    }
}

/// Covariances and their sum from replication moments, restricted to the
/// replications listed in `pick`.
fn covariances(
    moments: &[FieldMoments],
    pick: &[usize],
    sites: usize,
    pairs: &[u64],
) -> (Vec<f64>, f64) {
    let m = pick.len() as f64;
    let mean = pick.iter().map(|&k| moments[k].total).sum::<f64>() / (m * sites as f64);
    let cov: Vec<f64> = pairs
        .iter()
        .enumerate()
        .map(|(z, &n)| {
            pick.iter().map(|&k| moments[k].products[z]).sum::<f64>() / (m * n as f64) - mean * mean
        })
        .collect();
    let sum = cov.iter().sum();
    (cov, sum)
}

/// Covariance function of the `I^r` field estimated from one cubic
/// window of `window_side` cells per replication, pooling every cell pair
/// at a given offset. Standard errors come from a bootstrap over
/// replications. `z_max` defaults to the dependence range.
pub fn covariance_field(
    cfg: &ModelConfig<f64>,
    r: u32,
    z_max: Option<i64>,
    window_side: Option<usize>,
    batch: &Batch,
) -> Result<CovarianceField> {
    let model = FieldModel::new(cfg, r)?;
    let range = model.dependence_range();
    let z_max = z_max.unwrap_or(range);
    if z_max < (r as f64 * model.support).ceil() as i64 + 1 {
        return Err(Error::pre(
            "z_max must reach the dependence range ceil(r R)+1",
        ));
    }
    let side = window_side.unwrap_or((4 * z_max as usize).max(16));
    if side as i64 <= z_max {
        return Err(Error::pre("window must be wider than z_max"));
    }
    batch.check(2)?;
    let d = cfg.d.get();
    let sites = LatticeRegion::cube(cfg.d, 0, side)?;
    let offs = offsets(d, z_max);
    let pairs: Vec<u64> = offs
        .iter()
        .map(|z| (0..d).map(|a| (side as i64 - z[a].abs()) as u64).product())
        .collect();
    let moments = replicate(batch.m, batch.seed, batch.workers, |s| {
        Ok(field_moments(&model.field(&sites, s)?, &sites, &offs))
    })?;
    let all: Vec<usize> = (0..batch.m).collect();
    let (cov, sum) = covariances(&moments, &all, sites.len(), &pairs);
    let mean = moments.iter().map(|f| f.total).sum::<f64>() / (batch.m * sites.len()) as f64;

    let mut rng: ChaCha8Rng = bootstrap_rng(batch.seed, "covariance-field");
    let mut boot_cov = vec![Vec::with_capacity(BOOTSTRAP_RESAMPLES); offs.len()];
    let mut boot_sum = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut pick = vec![0usize; batch.m];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for p in pick.iter_mut() {
            *p = rand::Rng::random_range(&mut rng, 0..batch.m);
        }
        let (c, s) = covariances(&moments, &pick, sites.len(), &pairs);
        for (slot, v) in boot_cov.iter_mut().zip(c) {
            slot.push(v);
        }
        boot_sum.push(s);
    }
    let points = offs
        .iter()
        .zip(&cov)
        .zip(&boot_cov)
        .zip(&pairs)
        .map(|(((z, &c), b), &n)| CovariancePoint {
            offset: z[..d].to_vec(),
            covariance: c,
            se: sd(b),
            pairs: n,
        })
        .collect();
    Ok(CovarianceField {
        r,
        z_max,
        dependence_range: range,
        window_side: side,
        m: batch.m,
        mean,
        points,
        sum,
        sum_se: sd(&boot_sum),
    })
}

fn sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxVarianceRow {
    pub side: usize,
    pub sites: usize,
    pub boundary_ratio: f64,
    /// `Var Σ_{z∈Λ} Y_z / |Λ|`
    pub normalized_variance: f64,
    pub se: f64,
    /// `normalized_variance - Σ_z Cov(Y_0, Y_z)`
    pub gap: f64,
    /// `√(se² + sum_se²)`
    pub combined_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxVarianceTable {
    pub field_sum: f64,
    pub field_sum_se: f64,
    pub rows: Vec<BoxVarianceRow>,
}

/// Normalized variance of box sums of the field for cubic boxes of the
/// given sides, next to the covariance-field sum. Every replication
/// simulates one window holding the largest box; the smaller boxes share
/// its lower corner.
pub fn box_variance_check(
    cfg: &ModelConfig<f64>,
    r: u32,
    sides: &[usize],
    field: &CovarianceField,
    batch: &Batch,
) -> Result<BoxVarianceTable> {
    let model = FieldModel::new(cfg, r)?;
    let largest = *sides
        .iter()
        .max()
        .ok_or_else(|| Error::param("need at least one box side"))?;
    if sides.contains(&0) {
        return Err(Error::param("box sides must be positive"));
    }
    batch.check(2)?;
    let d = cfg.d.get();
    let sites = LatticeRegion::cube(cfg.d, 0, largest)?;
    let sums = replicate(batch.m, batch.seed, batch.workers, |s| {
        let values = model.field(&sites, s)?;
        Ok(sides
            .iter()
            .map(|&side| {
                sites
                    .sites()
                    .iter()
                    .zip(&values)
                    .filter(|(z, _)| z[..d].iter().all(|&c| (c as usize) < side))
                    .map(|(_, v)| v)
                    .sum::<f64>()
            })
            .collect::<Vec<f64>>())
    })?;
    let mut rows = Vec::with_capacity(sides.len());
    for (k, &side) in sides.iter().enumerate() {
        let values: Vec<f64> = sums.iter().map(|row| row[k]).collect();
        let n_sites = side.pow(d as u32);
        let sample = super::StatSample::new(&format!("box-sum-{side}"), values, batch.seed)?;
        let normalized_variance = sample.variance / n_sites as f64;
        let se = sample.bootstrap_se_variance / n_sites as f64;
        rows.push(BoxVarianceRow {
            side,
            sites: n_sites,
            boundary_ratio: LatticeRegion::cube(cfg.d, 0, side)?.boundary_ratio(),
            normalized_variance,
            se,
            gap: normalized_variance - field.sum,
            combined_se: (se * se + field.sum_se * field.sum_se).sqrt(),
        });
    }
    Ok(BoxVarianceTable {
        field_sum: field.sum,
        field_sum_se: field.sum_se,
        rows,
    })
}

/// Field value `I^r(B)` for an arbitrary box `B`, simulated with the
/// margin that makes it exact.
pub fn box_value(model: &FieldModel, b: &Region<f64>, stream: RepStream) -> Result<f64> {
    let window = b.expanded(model.r as f64 * model.support * (1.0 + 1e-9));
    let mut graph = sample_points(model.lambda, &window, &mut stream.point_rng())?;
    connect(
        &mut graph,
        &model.g,
        EdgeRange::for_function(&model.g, model.support),
        &stream.pair_uniforms(),
        None,
    );
    Ok(crate::simulator::count_components(&graph, b, model.r, Some(model.support))?.value())
}
