//! Monte Carlo realizations of the scaled random connection model.

mod counts;
mod graph;
mod lattice;
mod rng;
mod window;

use std::fmt::Write as _;

use serde::Serialize;

pub use counts::{
    component_field, component_sizes, count_components, count_isolated, count_truncation_family,
    ComponentCount, NearRule, TruncationCounts, UnionFind,
};
pub use graph::{connect, sample_points, EdgeRange, PointGraph};
pub use lattice::LatticeRegion;
pub use rng::{splitmix64, PairUniforms, RepStream};
pub use window::{margin_policy, SimWindow};

use crate::connfn::ConnectionFunction;
use crate::moments::ModelConfig;
use crate::region::Region;
use crate::Result;

/// A scaled model ready for replication: `g_n`, `λ_n` and the sampling
/// window around `K`.
#[derive(Clone, Debug)]
pub struct Scenario {
    cfg: ModelConfig<f64>,
    g_n: ConnectionFunction<f64>,
    lambda_n: f64,
    window: SimWindow,
}

/// Counts of one replication. `*_rn` use the near rule of `g_{R,n}`
/// (cut at `R/n`), `*_nr` that of `g_{n,R}` (cut at `R`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RepCounts {
    pub points_in_k: u64,
    pub i: u64,
    pub j_rn: u64,
    pub l_rn: u64,
    pub j_nr: u64,
    pub l_nr: u64,
}

/// Outcome of the shared-randomness check on one replication.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CouplingCheck {
    pub i: u64,
    pub j_rn: u64,
    pub l_rn: u64,
    /// Isolated count on a graph built directly with `g_{R,n}`.
    pub i_truncated_direct: u64,
    pub j_nr: u64,
    pub l_nr: u64,
    /// Isolated count on a graph built directly with `g_{n,R}`.
    pub i_truncated_after_scaling_direct: u64,
}

impl CouplingCheck {
    pub fn holds(&self) -> bool {
        self.j_rn == self.i_truncated_direct
            && self.j_rn == self.i + self.l_rn
            && self.j_nr == self.i_truncated_after_scaling_direct
            && self.j_nr == self.i + self.l_nr
    }
}

impl Scenario {
    /// `eps` bounds the expected number of target vertices misclassified
    /// by the finite window and edge cut-off (see [`margin_policy`]).
    pub fn new(cfg: &ModelConfig<f64>, eps: f64) -> Result<Self> {
        cfg.validate()?;
        let g_n = cfg.g.scaled(cfg.n)?;
        let lambda_n = cfg.lambda_n();
        let window = margin_policy(&g_n, lambda_n, &cfg.window, eps)?;
        Ok(Scenario {
            cfg: cfg.clone(),
            g_n,
            lambda_n,
            window,
        })
    }

    /// Widens the margin, e.g. to observe whole components.
    pub fn with_margin_at_least(mut self, margin: f64) -> Self {
        self.window = self.window.with_margin_at_least(margin);
        self
    }

    pub fn config(&self) -> &ModelConfig<f64> {
        &self.cfg
    }

    pub fn window(&self) -> &SimWindow {
        &self.window
    }

    pub fn scaled_function(&self) -> &ConnectionFunction<f64> {
        &self.g_n
    }

    pub fn lambda_n(&self) -> f64 {
        self.lambda_n
    }

    /// Points of replication `stream` in the sampling window, without edges.
    pub fn points(&self, stream: RepStream) -> Result<PointGraph> {
        sample_points(
            self.lambda_n,
            &self.window.sampling_region(),
            &mut stream.point_rng(),
        )
    }

    /// Graph of `f` on the points of `stream`. `focus_on_target` restricts
    /// edge sampling to pairs touching `K`, which leaves every count over
    /// `K` unchanged.
    pub fn graph_with(
        &self,
        f: &ConnectionFunction<f64>,
        stream: RepStream,
        focus_on_target: bool,
    ) -> Result<PointGraph> {
        let mut g = self.points(stream)?;
        self.reconnect(&mut g, f, stream, focus_on_target);
        Ok(g)
    }

    fn reconnect(
        &self,
        g: &mut PointGraph,
        f: &ConnectionFunction<f64>,
        stream: RepStream,
        focus_on_target: bool,
    ) {
        let range = EdgeRange::for_function(f, self.window.edge_cutoff);
        let focus = focus_on_target.then_some(&self.cfg.window);
        connect(g, f, range, &stream.pair_uniforms(), focus);
    }

    pub fn graph(&self, stream: RepStream, focus_on_target: bool) -> Result<PointGraph> {
        self.graph_with(&self.g_n, stream, focus_on_target)
    }

    /// `I_n`, and `J`, `L` for both truncation orders at radius `r`.
    pub fn counts(&self, stream: RepStream, r: f64) -> Result<RepCounts> {
        let g = self.graph(stream, true)?;
        let k = &self.cfg.window;
        let rn = count_truncation_family(&g, k, NearRule::new(r, self.cfg.n)?);
        let nr = count_truncation_family(&g, k, NearRule::new(r, 1.0)?);
        let points_in_k = (0..g.len()).filter(|&i| k.contains(g.point(i))).count() as u64;
        Ok(RepCounts {
            points_in_k,
            i: rn.i,
            j_rn: rn.j,
            l_rn: rn.l,
            j_nr: nr.j,
            l_nr: nr.l,
        })
    }

    /// Builds the `g_n` graph and the two truncated graphs from the same
    /// points and pair uniforms and compares the counts.
    pub fn coupling_check(&self, stream: RepStream, r: f64) -> Result<CouplingCheck> {
        let k = &self.cfg.window;
        let n = self.cfg.n;
        let mut g = self.graph(stream, true)?;
        let rn = count_truncation_family(&g, k, NearRule::new(r, n)?);
        let nr = count_truncation_family(&g, k, NearRule::new(r, 1.0)?);
        self.reconnect(&mut g, &self.cfg.g.inside(r)?.scaled(n)?, stream, true);
        let i_rn = count_isolated(&g, k);
        self.reconnect(&mut g, &self.g_n.inside(r)?, stream, true);
        let i_nr = count_isolated(&g, k);
        Ok(CouplingCheck {
            i: rn.i,
            j_rn: rn.j,
            l_rn: rn.l,
            i_truncated_direct: i_rn,
            j_nr: nr.j,
            l_nr: nr.l,
            i_truncated_after_scaling_direct: i_nr,
        })
    }
}

/// Line-oriented dump of a realization: a header, one `p` line per point
/// and one `e` line per edge.
pub fn dump_realization(graph: &PointGraph, stream: RepStream) -> String {
    let d = graph.window().dim().get();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# seed {} rep {} dim {} points {} edges {}",
        stream.base_seed,
        stream.rep,
        d,
        graph.len(),
        graph.edge_count()
    );
    for i in 0..graph.len() {
        let coords: Vec<String> = graph.point(i).iter().map(|x| format!("{x:.17e}")).collect();
        let _ = writeln!(out, "p {i} {}", coords.join(" "));
    }
    for (i, j, r) in graph.edges() {
        let _ = writeln!(out, "e {i} {j} {r:.17e}");
    }
    out
}

/// Sampling window for `I^r` over the cells of `sites` with the margin
/// `r · support` that makes every component meeting them fully observed.
pub fn component_window(sites: &LatticeRegion, r: u32, support: f64) -> Region<f64> {
    sites
        .bounding_box()
        .expanded(r as f64 * support * (1.0 + 1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Dimension;

    fn cfg(d: Dimension, n: f64, g: ConnectionFunction<f64>) -> ModelConfig<f64> {
        ModelConfig::new(1.0, n, Region::unit(d), g).unwrap()
    }

    #[test]
    fn coupling_identity_holds_on_many_seeds() {
        let configs = [
            cfg(
                Dimension::ONE,
                2.0,
                ConnectionFunction::exponential(1.0).unwrap(),
            ),
            cfg(
                Dimension::TWO,
                4.0,
                ConnectionFunction::exponential(1.0).unwrap(),
            ),
            cfg(
                Dimension::TWO,
                4.0,
                ConnectionFunction::hard_disk(1.0).unwrap(),
            ),
        ];
        for c in &configs {
            let sc = Scenario::new(c, 1e-6).unwrap();
            for seed in 0..10 {
                let chk = sc.coupling_check(RepStream::new(seed, 0), 0.5).unwrap();
                assert!(chk.holds(), "{chk:?}");
            }
        }
    }

    #[test]
    fn j_is_non_increasing_in_radius() {
        let c = cfg(
            Dimension::TWO,
            4.0,
            ConnectionFunction::exponential(1.0).unwrap(),
        );
        let sc = Scenario::new(&c, 1e-6).unwrap();
        let g = sc.graph(RepStream::new(3, 0), true).unwrap();
        let mut prev = u64::MAX;
        for k in 0..20 {
            let j = count_truncation_family(
                &g,
                &c.window,
                NearRule::new(k as f64 * 0.05, 1.0).unwrap(),
            )
            .j;
            assert!(j <= prev);
            prev = j;
        }
    }

    #[test]
    fn counts_are_deterministic() {
        let c = cfg(
            Dimension::ONE,
            2.0,
            ConnectionFunction::exponential(1.0).unwrap(),
        );
        let sc = Scenario::new(&c, 1e-6).unwrap();
        let a = sc.counts(RepStream::new(9, 17), 1.0).unwrap();
        let b = sc.counts(RepStream::new(9, 17), 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dump_lists_points_and_edges() {
        let c = cfg(
            Dimension::TWO,
            2.0,
            ConnectionFunction::hard_disk(1.0).unwrap(),
        );
        let sc = Scenario::new(&c, 1e-6).unwrap();
        let g = sc.graph(RepStream::new(1, 0), false).unwrap();
        let text = dump_realization(&g, RepStream::new(1, 0));
        assert_eq!(
            text.lines().filter(|l| l.starts_with("p ")).count(),
            g.len()
        );
        assert_eq!(
            text.lines().filter(|l| l.starts_with("e ")).count(),
            g.edge_count()
        );
    }
}
