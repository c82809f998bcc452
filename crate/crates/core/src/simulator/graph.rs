use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::rng::PairUniforms;
use crate::connfn::ConnectionFunction;
use crate::region::Region;
use crate::{Error, Result};

const ALL_PAIRS_BELOW: usize = 2000;
const MAX_CELLS: usize = 1 << 20;

/// Points of one realization and the sampled edges between them.
#[derive(Clone, Debug)]
pub struct PointGraph {
    window: Region<f64>,
    points: Vec<[f64; 3]>,
    adjacency: Vec<Vec<(u32, f64)>>,
}

impl PointGraph {
    pub fn from_points(window: Region<f64>, points: Vec<[f64; 3]>) -> Self {
        let adjacency = vec![Vec::new(); points.len()];
        PointGraph {
            window,
            points,
            adjacency,
        }
    }

    pub fn window(&self) -> &Region<f64> {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i][..self.window.dim().get()]
    }

    /// Neighbours of `i` with the edge lengths.
    pub fn neighbors(&self, i: usize) -> &[(u32, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, nb)| {
            nb.iter()
                .filter(move |(j, _)| (*j as usize) > i)
                .map(move |&(j, r)| (i, j as usize, r))
        })
    }

    pub fn clear_edges(&mut self) {
        self.adjacency.iter_mut().for_each(Vec::clear);
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.points[i], &self.points[j]);
        let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Poisson number of i.i.d. uniform points in `window`.
pub fn sample_points<R: Rng + ?Sized>(
    intensity: f64,
    window: &Region<f64>,
    rng: &mut R,
) -> Result<PointGraph> {
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(Error::param("intensity must be finite and >= 0"));
    }
    let mean = intensity * window.volume();
    let count = if mean > 0.0 {
        let law = Poisson::new(mean).map_err(|e| Error::param(e.to_string()))?;
        law.sample(rng) as usize
    } else {
        0
    };
    let d = window.dim().get();
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let mut p = [0.0; 3];
        for (axis, x) in p.iter_mut().enumerate().take(d) {
            // (0,1] so the point lies in the half-open window
            let u = 1.0 - rng.random::<f64>();
            *x = window.lower()[axis] + u * window.sides()[axis];
        }
        points.push(p);
    }
    Ok(PointGraph::from_points(window.clone(), points))
}

/// Which pairs are eligible for an edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EdgeRange {
    /// Bounded support: every pair is tested, the function itself is 0
    /// beyond `support`.
    Support(f64),
    /// Unbounded support cut at a tail radius; pairs farther apart are
    /// never joined.
    Cutoff(f64),
}

impl EdgeRange {
    pub fn for_function(f: &ConnectionFunction<f64>, cutoff: f64) -> Self {
        match f.base().support() {
            Some(_) => EdgeRange::Support(f.support_radius().unwrap_or(0.0)),
            None => EdgeRange::Cutoff(cutoff),
        }
    }

    fn search_radius(self) -> f64 {
        match self {
            // slack so rounding in f's own cut test decides boundary pairs
            EdgeRange::Support(s) => s * (1.0 + 1e-9),
            EdgeRange::Cutoff(t) => t,
        }
    }

    #[inline]
    fn admits(self, r: f64) -> bool {
        match self {
            EdgeRange::Support(_) => true,
            EdgeRange::Cutoff(t) => r <= t,
        }
    }
}

/// Replaces the edge set of `graph` by Bernoulli edges: the pair `{i,j}`
/// at distance `r` is joined iff `range` admits `r` and `u_ij < f(r)`.
///
/// With `focus`, only pairs with at least one endpoint in the focus region
/// are examined; the adjacency of focus vertices is then complete and
/// identical to the full construction because the uniforms are indexed by
/// the pair.
pub fn connect(
    graph: &mut PointGraph,
    f: &ConnectionFunction<f64>,
    range: EdgeRange,
    uniforms: &PairUniforms,
    focus: Option<&Region<f64>>,
) {
    graph.clear_edges();
    let n = graph.len();
    let radius = range.search_radius();
    if n < 2 || f.is_zero() || !(radius > 0.0) {
        return;
    }
    let d = graph.window.dim().get();
    let in_focus: Vec<bool> = match focus {
        Some(k) => (0..n).map(|i| k.contains(graph.point(i))).collect(),
        None => vec![true; n],
    };
    let try_pair = |g: &mut PointGraph, i: usize, j: usize| {
        if !(in_focus[i] || in_focus[j]) {
            return;
        }
        let r = g.distance(i, j);
        if r > radius || !range.admits(r) {
            return;
        }
        let p = f.eval(r);
        if p > 0.0 && uniforms.get(i as u32, j as u32) < p {
            g.adjacency[i].push((j as u32, r));
            g.adjacency[j].push((i as u32, r));
        }
    };

    if n < ALL_PAIRS_BELOW {
        for i in 0..n {
            for j in (i + 1)..n {
                try_pair(graph, i, j);
            }
        }
        sort_adjacency(graph);
        return;
    }

    let grid = CellGrid::new(&graph.window, radius, d);
    let mut cells: Vec<Vec<u32>> = vec![Vec::new(); grid.total];
    for i in 0..n {
        cells[grid.cell_of(&graph.points[i])].push(i as u32);
    }
    let mut near = Vec::new();
    for i in (0..n).filter(|&i| in_focus[i]) {
        let p = graph.points[i];
        grid.neighbor_cells(&p, &mut near);
        for &c in &near {
            for &j in &cells[c] {
                let j = j as usize;
                // pairs inside the focus are visited from the lower index
                if j != i && !(in_focus[j] && j < i) {
                    try_pair(graph, i, j);
                }
            }
        }
    }
    sort_adjacency(graph);
}

// deterministic neighbour order regardless of the search strategy
fn sort_adjacency(graph: &mut PointGraph) {
    for nb in &mut graph.adjacency {
        nb.sort_unstable_by_key(|&(j, _)| j);
    }
}

struct CellGrid {
    dim: usize,
    lower: [f64; 3],
    side: f64,
    counts: [usize; 3],
    total: usize,
}

impl CellGrid {
    fn new(window: &Region<f64>, radius: f64, dim: usize) -> Self {
        let mut side = radius;
        loop {
            let mut counts = [1usize; 3];
            for a in 0..dim {
                counts[a] = ((window.sides()[a] / side).ceil() as usize).max(1);
            }
            let total: usize = counts.iter().product();
            if total <= MAX_CELLS {
                let mut lower = [0.0; 3];
                lower[..dim].copy_from_slice(window.lower());
                return CellGrid {
                    dim,
                    lower,
                    side,
                    counts,
                    total,
                };
            }
            side *= 2.0;
        }
    }

    fn coord(&self, p: &[f64; 3], a: usize) -> usize {
        let c = ((p[a] - self.lower[a]) / self.side).floor();
        (c.max(0.0) as usize).min(self.counts[a] - 1)
    }

    fn index(&self, c: [usize; 3]) -> usize {
        (c[2] * self.counts[1] + c[1]) * self.counts[0] + c[0]
    }

    fn cell_of(&self, p: &[f64; 3]) -> usize {
        let mut c = [0usize; 3];
        for (a, slot) in c.iter_mut().enumerate().take(self.dim) {
            *slot = self.coord(p, a);
        }
        self.index(c)
    }

    fn neighbor_cells(&self, p: &[f64; 3], out: &mut Vec<usize>) {
        out.clear();
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..self.dim {
            let c = self.coord(p, a);
            lo[a] = c.saturating_sub(1);
            hi[a] = (c + 1).min(self.counts[a] - 1);
        }
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    out.push(self.index([x, y, z]));
                }
            }
        }
    }
}
