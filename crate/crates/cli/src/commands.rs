use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rcmlab::moments::{
    degenerate_limits_n_r, delta_r, domination_constant, limit_mean_l, limit_var_i, limit_var_l,
    mean_i_scaled, mean_l_scaled, var_i_scaled, var_l_scaled, MomentReport,
};
use rcmlab::quadrature::Estimate;
use rcmlab::simulator::{dump_realization, RepStream, Scenario};
use rcmlab::stats::{
    box_variance_check, clt_scan, covariance_field, random_integer_space, replicate,
    truncation_collapse, truncation_counts, variance_density_convergence, variance_lower_bound,
    DensityStatistic, FiniteFiltrationSpace, Standardization,
};
use rcmlab::verify::{run_criterion, Profile, VerifyOptions};
use rcmlab::Error;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, StandardizationMode};
use crate::report::{Report, Table};

/// Why a command could not produce its report.
#[derive(Debug)]
pub enum Failure {
    /// The configuration asks for something the model rejects.
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::Precondition(_)
            | Error::InvalidVariant(_)
            | Error::MissingTail
            | Error::UnboundedSupport
            | Error::Parse { .. }
            | Error::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

/// A report plus per-item wall-clock timings for the metadata file.
pub struct Outcome {
    pub report: Report,
    pub timings: Vec<(String, f64)>,
}

impl From<Report> for Outcome {
    fn from(report: Report) -> Self {
        Outcome {
            report,
            timings: Vec::new(),
        }
    }
}

type CmdResult = Result<Outcome, Failure>;

pub fn simulate(cfg: &ExperimentConfig, dump: Option<u64>) -> CmdResult {
    let n = cfg.ns[0];
    let r = cfg.rs[0];
    let model = cfg.model.with_n(n)?;
    let sc = Scenario::new(&model, cfg.bias_eps)?;
    let counts = truncation_counts(&model, r, cfg.bias_eps, &cfg.batch())?;
    #[derive(Serialize)]
    struct Row {
        rep: usize,
        #[serde(flatten)]
        counts: rcmlab::simulator::RepCounts,
    }
    let holds = counts
        .iter()
        .all(|c| c.j_rn == c.i + c.l_rn && c.j_nr == c.i + c.l_nr);
    let rows: Vec<Row> = counts
        .iter()
        .enumerate()
        .map(|(rep, &c)| Row { rep, counts: c })
        .collect();
    if let Some(rep) = dump {
        let stream = RepStream::new(cfg.seed, rep);
        let g = sc.graph(stream, false)?;
        std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Failure::Run(e.to_string()))?;
        std::fs::write(
            cfg.out_dir.join(format!("realization-{rep}.txt")),
            dump_realization(&g, stream),
        )
        .map_err(|e| Failure::Run(e.to_string()))?;
    }
    let mean = |f: fn(&rcmlab::simulator::RepCounts) -> u64| {
        counts.iter().map(|c| f(c) as f64).sum::<f64>() / counts.len() as f64
    };
    Ok(Report::new("simulate", cfg.seed, &cfg.hash, Table::from_records(&rows))
        .with_bias(vec![sc.window().bias_bound])
        .with_verdict(holds)
        .with_extra(json!({
            "n": n, "R": r, "lambda_n": sc.lambda_n(), "window": sc.window(),
            "mean_i": mean(|c| c.i), "mean_l_rn": mean(|c| c.l_rn), "mean_l_nr": mean(|c| c.l_nr),
        }))
        .into())
}

pub fn moments(cfg: &ExperimentConfig) -> CmdResult {
    let s = &cfg.spec;
    let base = &cfg.model;
    let (lambda, g, d) = (base.lambda, &base.g, base.d);
    let mut rows: Vec<MomentReport<f64>> = Vec::new();
    for &n in &cfg.ns {
        let c = base.with_n(n)?;
        let ln = Some(c.lambda_n());
        rows.push(MomentReport::new("mean_I", mean_i_scaled(&c, s)?).at(None, Some(n), ln));
        rows.push(MomentReport::new("var_I", var_i_scaled(&c, s)?).at(None, Some(n), ln));
        for &r in &cfg.rs {
            rows.push(
                MomentReport::new("mean_L_scaled", mean_l_scaled(&c, r, s)?).at(
                    Some(r),
                    Some(n),
                    ln,
                ),
            );
            rows.push(
                MomentReport::new("var_L_scaled", var_l_scaled(&c, r, s)?).at(Some(r), Some(n), ln),
            );
        }
    }
    rows.push(MomentReport::new(
        "limit_var_I",
        limit_var_i(lambda, g, d, s)?,
    ));
    for &r in &cfg.rs {
        rows.push(
            MomentReport::new("limit_mean_L", limit_mean_l(lambda, g, r, d, s)?).at(
                Some(r),
                None,
                None,
            ),
        );
        rows.push(
            MomentReport::new("limit_var_L", limit_var_l(lambda, g, r, d, s)?).at(
                Some(r),
                None,
                None,
            ),
        );
        rows.push(
            MomentReport::new("delta_R", delta_r(lambda, g, r, d, s)?).at(Some(r), None, None),
        );
        if r > base.window.diameter() {
            for row in degenerate_limits_n_r(base, r, &cfg.ns, false, s)? {
                rows.push(
                    MomentReport::new("normalized_mean_L_nR", row.normalized_mean).at(
                        Some(r),
                        Some(row.n),
                        None,
                    ),
                );
            }
        }
    }
    let dom = domination_constant(lambda, g, d, base.threshold_index(), s)?;
    for (name, v) in [
        ("domination.M", dom.radius),
        ("domination.C_pair", dom.c_pair),
        ("domination.C_total", dom.c_total),
    ] {
        rows.push(MomentReport::new(name, Estimate::exact(v)));
    }
    Ok(
        Report::new("moments", cfg.seed, &cfg.hash, Table::from_records(&rows))
            .with_extra(json!({ "domination": dom }))
            .into(),
    )
}

fn bias_for(cfg: &ExperimentConfig, ns: &[f64]) -> Result<Vec<f64>, Failure> {
    ns.iter()
        .map(|&n| {
            Ok(Scenario::new(&cfg.model.with_n(n)?, cfg.bias_eps)?
                .window()
                .bias_bound)
        })
        .collect()
}

pub fn clt_test(cfg: &ExperimentConfig) -> CmdResult {
    let s = cfg.spec;
    let mode = cfg.standardization;
    let rows = clt_scan(
        &cfg.model,
        &cfg.ns,
        cfg.bias_eps,
        &cfg.batch(),
        |c| match mode {
            StandardizationMode::Sample => Ok(Standardization::SampleMoments),
            StandardizationMode::Oracle => Ok(Standardization::OracleMoments {
                mean: mean_i_scaled(c, &s)?.value,
                variance: var_i_scaled(c, &s)?.value,
            }),
        },
    )?;
    let last = rows.last().expect("at least one n").ks.distance;
    Ok(Report::new("clt-test", cfg.seed, &cfg.hash, Table::from_records(&rows))
        .with_bias(bias_for(cfg, &cfg.ns)?)
        .with_verdict(last < cfg.ks_threshold)
        .with_extra(json!({ "ks_threshold": cfg.ks_threshold, "standardization": format!("{mode:?}").to_lowercase() }))
        .into())
}

pub fn truncation_demo(cfg: &ExperimentConfig) -> CmdResult {
    let n = *cfg.ns.last().expect("at least one n");
    let model = cfg.model.with_n(n)?;
    let rows = truncation_collapse(
        &model,
        &cfg.rs,
        cfg.collapse_threshold,
        cfg.bias_eps,
        &cfg.batch(),
    )?;
    #[derive(Serialize)]
    struct Row {
        n: f64,
        #[serde(flatten)]
        row: rcmlab::stats::CollapseRow,
        exact_mean_l: f64,
    }
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let exact_mean_l = mean_l_scaled(&model, row.r, &cfg.spec)?.value;
        out.push(Row {
            n,
            row,
            exact_mean_l,
        });
    }
    let first = out.first().map(|r| r.row.exceedance).unwrap_or(0.0);
    let last = out.last().map(|r| r.row.exceedance).unwrap_or(0.0);
    Ok(Report::new(
        "truncation-demo",
        cfg.seed,
        &cfg.hash,
        Table::from_records(&out),
    )
    .with_bias(bias_for(cfg, &[n])?)
    .with_verdict(last <= first)
    .with_extra(json!({ "threshold": cfg.collapse_threshold }))
    .into())
}

pub fn variance_growth(cfg: &ExperimentConfig) -> CmdResult {
    #[derive(Serialize)]
    struct Row {
        statistic: String,
        #[serde(flatten)]
        row: rcmlab::stats::DensityRow,
    }
    let mut out = Vec::new();
    let mut passed = true;
    for (label, stat) in [
        ("I".to_string(), DensityStatistic::Isolated),
        (
            format!("L(R={})", cfg.rs[0]),
            DensityStatistic::TruncationError { r: cfg.rs[0] },
        ),
    ] {
        let rows = variance_density_convergence(
            &cfg.model,
            stat,
            &cfg.ns,
            cfg.bias_eps,
            &cfg.batch(),
            &cfg.spec,
        )?;
        passed &= rows
            .last()
            .map(|r| r.relative_gap < cfg.density_gap)
            .unwrap_or(false);
        out.extend(rows.into_iter().map(|row| Row {
            statistic: label.clone(),
            row,
        }));
    }
    Ok(Report::new(
        "variance-growth",
        cfg.seed,
        &cfg.hash,
        Table::from_records(&out),
    )
    .with_bias(bias_for(cfg, &cfg.ns)?)
    .with_verdict(passed)
    .with_extra(json!({ "density_gap": cfg.density_gap }))
    .into())
}

pub fn covariance(cfg: &ExperimentConfig, lower_bound: bool) -> CmdResult {
    let model = cfg.model.with_n(cfg.ns[0])?;
    let r = cfg.component_size;
    let field = covariance_field(&model, r, cfg.z_max, cfg.window_side, &cfg.batch())?;
    let boxes = box_variance_check(&model, r, &cfg.boxes, &field, &cfg.batch())?;
    let mut positive = field.sum > 3.0 * field.sum_se;
    let bound = if lower_bound {
        let b = variance_lower_bound(&model, r, &cfg.blocks, &cfg.batch())?;
        positive &= b.rows.iter().all(|row| row.holds);
        Some(b)
    } else {
        None
    };
    Ok(Report::new("covariance-field", cfg.seed, &cfg.hash, Table::from_records(&field.points))
        .with_bias(vec![0.0])
        .with_verdict(positive)
        .with_extra(json!({
            "r": r, "z_max": field.z_max, "dependence_range": field.dependence_range, "window_side": field.window_side,
            "mean": field.mean, "sum": field.sum, "sum_se": field.sum_se, "boxes": boxes, "lower_bound": bound,
        }))
        .into())
}

pub fn martingale(cfg: &ExperimentConfig) -> CmdResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    #[derive(Serialize)]
    struct Row {
        space: usize,
        outcomes: usize,
        steps: usize,
        variance: f64,
        exact_equal: bool,
        float_difference: f64,
    }
    let mut rows = Vec::with_capacity(cfg.m);
    for space in 0..cfg.m {
        let (w, y, parts) = random_integer_space(&mut rng, 64, 6);
        let total: u64 = w.iter().sum();
        let exact = FiniteFiltrationSpace {
            probabilities: w
                .iter()
                .map(|&v| BigRational::new((v as i64).into(), (total as i64).into()))
                .collect(),
            y: y.iter()
                .map(|&v| BigRational::from_integer(v.into()))
                .collect(),
            partitions: parts.clone(),
        };
        let e = exact.martingale_identity()?;
        let float = FiniteFiltrationSpace {
            probabilities: w.iter().map(|&v| v as f64 / total as f64).collect(),
            y: y.iter().map(|&v| v as f64).collect(),
            partitions: parts.clone(),
        };
        let f = float.martingale_identity()?;
        rows.push(Row {
            space,
            outcomes: w.len(),
            steps: parts.len() - 1,
            variance: f.variance,
            exact_equal: e.variance == e.increment_sum,
            float_difference: (f.variance - f.increment_sum).abs(),
        });
    }
    let passed = rows
        .iter()
        .all(|r| r.exact_equal && r.float_difference < 1e-12);
    Ok(Report::new(
        "martingale-check",
        cfg.seed,
        &cfg.hash,
        Table::from_records(&rows),
    )
    .with_verdict(passed)
    .into())
}

/// Criteria 1 to 14. Each line goes to stdout as it completes.
pub fn verify_all(cfg: &ExperimentConfig) -> CmdResult {
    let profile = if cfg.quick {
        Profile::Quick
    } else {
        Profile::Full
    };
    let mut opts = VerifyOptions::new(cfg.seed, cfg.workers, profile);
    opts.eps = cfg.bias_eps;
    opts.spec = cfg.spec;
    // the determinism replay is only meaningful on the quick profile
    let ids: Vec<u8> = if cfg.quick {
        (1..=13).collect()
    } else {
        (1..=14).collect()
    };
    #[derive(Serialize)]
    struct Row {
        id: u8,
        name: String,
        passed: bool,
        details: String,
    }
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for id in ids {
        let t = run_criterion(id, &opts);
        println!("{}", t.outcome.line());
        timings.push((format!("criterion {id}"), t.elapsed.as_secs_f64()));
        rows.push(Row {
            id,
            name: t.outcome.name.clone(),
            passed: t.outcome.passed,
            details: t.outcome.details.to_string(),
        });
    }
    let passed = rows.iter().all(|r| r.passed);
    let report = Report::new(
        "verify-all",
        cfg.seed,
        &cfg.hash,
        Table::from_records(&rows),
    )
    .with_verdict(passed)
    .with_extra(json!({ "profile": profile }));
    Ok(Outcome { report, timings })
}

/// Replications of the per-rep point count, used by tests of the worker
/// contract.
#[allow(dead_code)]
pub fn point_counts(cfg: &ExperimentConfig) -> Result<Vec<usize>, Failure> {
    let sc = Scenario::new(&cfg.model, cfg.bias_eps)?;
    Ok(replicate(cfg.m, cfg.seed, cfg.workers, |s| {
        Ok(sc.points(s)?.len())
    })?)
}
