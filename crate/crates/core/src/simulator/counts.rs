use serde::Serialize;

use super::graph::PointGraph;
use super::lattice::LatticeRegion;
use crate::region::Region;
use crate::{Error, Result};

/// Vertices in `k` with degree 0.
pub fn count_isolated(graph: &PointGraph, k: &Region<f64>) -> u64 {
    (0..graph.len())
        .filter(|&i| graph.degree(i) == 0 && k.contains(graph.point(i)))
        .count() as u64
}

/// Neighbour at distance `r` counts as near iff `r * scale <= radius`.
///
/// Written as a product so that it reproduces bit for bit the cut test of
/// the truncated connection function: `NearRule { radius: R, scale: n }`
/// selects exactly the edges of `1{x <= R/n} g(n x)` among those of
/// `g(n x)`, and `scale = 1` those of `1{x <= R} g(n x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NearRule {
    pub radius: f64,
    pub scale: f64,
}

impl NearRule {
    pub fn new(radius: f64, scale: f64) -> Result<Self> {
        if !(radius >= 0.0) || !(scale > 0.0) {
            return Err(Error::param("near rule needs radius >= 0 and scale > 0"));
        }
        Ok(NearRule { radius, scale })
    }

    #[inline]
    pub fn is_near(&self, r: f64) -> bool {
        r * self.scale <= self.radius
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TruncationCounts {
    /// Isolated vertices.
    pub i: u64,
    /// Vertices without a near neighbour.
    pub j: u64,
    /// Vertices without a near neighbour but with some neighbour.
    pub l: u64,
}

/// Counts `(I, J, L)` over the vertices in `k` of one graph.
pub fn count_truncation_family(
    graph: &PointGraph,
    k: &Region<f64>,
    near: NearRule,
) -> TruncationCounts {
    let mut out = TruncationCounts::default();
    for v in 0..graph.len() {
        if !k.contains(graph.point(v)) {
            continue;
        }
        let nb = graph.neighbors(v);
        if nb.is_empty() {
            out.i += 1;
            out.j += 1;
        } else if !nb.iter().any(|&(_, r)| near.is_near(r)) {
            out.j += 1;
            out.l += 1;
        }
    }
    out
}

/// Disjoint sets with union by size and path halving.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let p = self.parent[x] as usize;
            self.parent[x] = self.parent[p];
            x = self.parent[x] as usize;
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a as u32;
        self.size[a] += self.size[b];
    }

    pub fn component_size(&mut self, x: usize) -> usize {
        let root = self.find(x);
        self.size[root] as usize
    }
}

/// Component size of every vertex.
pub fn component_sizes(graph: &PointGraph) -> Vec<usize> {
    let mut uf = UnionFind::new(graph.len());
    for (i, j, _) in graph.edges() {
        uf.union(i, j);
    }
    (0..graph.len()).map(|i| uf.component_size(i)).collect()
}

/// Vertices lying in components of exactly `r` vertices. The statistic
/// `I^r` is `vertices / r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ComponentCount {
    pub vertices: u64,
    pub r: u32,
}

impl ComponentCount {
    pub fn value(&self) -> f64 {
        self.vertices as f64 / self.r as f64
    }
}

fn check_component_window(
    graph: &PointGraph,
    inner: &Region<f64>,
    r: u32,
    support: Option<f64>,
) -> Result<()> {
    let Some(support) = support else {
        return Err(Error::UnboundedSupport);
    };
    if r == 0 {
        return Err(Error::param("component size must be >= 1"));
    }
    let need = r as f64 * support;
    let have = inner.inset_within(graph.window());
    if have < need * (1.0 - 1e-12) {
        return Err(Error::InsufficientMargin { need, have });
    }
    Ok(())
}

/// `I^r(B)` for a box `B`, using components of the whole window graph.
/// `support` is the support radius of the connection function used to
/// build the graph; `None` (unbounded support) is rejected.
pub fn count_components(
    graph: &PointGraph,
    b: &Region<f64>,
    r: u32,
    support: Option<f64>,
) -> Result<ComponentCount> {
    check_component_window(graph, b, r, support)?;
    let sizes = component_sizes(graph);
    let vertices = (0..graph.len())
        .filter(|&i| sizes[i] == r as usize && b.contains(graph.point(i)))
        .count() as u64;
    Ok(ComponentCount { vertices, r })
}

/// Per-site vertex counts of `I^r` over the unit cells `z + (0,1]^d` of `sites`.
pub fn component_field(
    graph: &PointGraph,
    sites: &LatticeRegion,
    r: u32,
    support: Option<f64>,
) -> Result<Vec<u64>> {
    check_component_window(graph, &sites.bounding_box(), r, support)?;
    let sizes = component_sizes(graph);
    let mut counts = vec![0u64; sites.len()];
    for i in 0..graph.len() {
        if sizes[i] != r as usize {
            continue;
        }
        if let Some(k) = sites.index_of_point(graph.point(i)) {
            counts[k] += 1;
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connfn::ConnectionFunction;
    use crate::simulator::graph::{connect, EdgeRange};
    use crate::simulator::rng::RepStream;
    use crate::Dimension;

    fn line_graph(xs: &[f64], radius: f64) -> PointGraph {
        let pts = xs.iter().map(|&x| [x, 0.0, 0.0]).collect();
        let mut g = PointGraph::from_points(Region::new(vec![-10.0], vec![30.0]).unwrap(), pts);
        let f = ConnectionFunction::hard_disk(radius).unwrap();
        connect(
            &mut g,
            &f,
            EdgeRange::for_function(&f, 0.0),
            &RepStream::new(0, 0).pair_uniforms(),
            None,
        );
        g
    }

    #[test]
    fn isolated_counts() {
        let k = Region::new(vec![0.0], vec![5.0]).unwrap();
        assert_eq!(count_isolated(&line_graph(&[], 1.0), &k), 0);
        assert_eq!(count_isolated(&line_graph(&[2.0], 1.0), &k), 1);
        assert_eq!(count_isolated(&line_graph(&[2.0, 2.5, 4.0], 1.0), &k), 1);
    }

    #[test]
    fn truncation_family_boundaries() {
        let k = Region::new(vec![0.0], vec![5.0]).unwrap();
        let g = line_graph(&[1.0, 1.5, 2.5, 4.5], 1.0);
        // edges: 1-1.5 (0.5), 1.5-2.5 (1.0)
        let all_far = count_truncation_family(&g, &k, NearRule::new(0.0, 1.0).unwrap());
        assert_eq!(all_far.i, 1);
        assert_eq!(all_far.l, 3);
        assert_eq!(all_far.j, all_far.i + all_far.l);
        let all_near = count_truncation_family(&g, &k, NearRule::new(100.0, 1.0).unwrap());
        assert_eq!((all_near.j, all_near.l), (all_near.i, 0));
        let mid = count_truncation_family(&g, &k, NearRule::new(0.6, 1.0).unwrap());
        // 2.5 only has the long edge
        assert_eq!((mid.i, mid.j, mid.l), (1, 2, 1));
    }

    #[test]
    fn components_of_size_two() {
        let g = line_graph(&[1.0, 1.5, 3.0, 6.0, 6.4, 6.8], 0.5);
        let b = Region::new(vec![0.0], vec![2.0]).unwrap();
        let c = count_components(&g, &b, 2, Some(0.5)).unwrap();
        assert_eq!(c.vertices, 2);
        assert_eq!(c.value(), 1.0);
        let b = Region::new(vec![0.0], vec![8.0]).unwrap();
        assert_eq!(count_components(&g, &b, 3, Some(0.5)).unwrap().vertices, 3);
        assert_eq!(count_components(&g, &b, 1, Some(0.5)).unwrap().vertices, 1);
    }

    #[test]
    fn component_preconditions() {
        let g = line_graph(&[1.0], 0.5);
        let b = Region::new(vec![0.0], vec![2.0]).unwrap();
        assert!(matches!(
            count_components(&g, &b, 2, None),
            Err(Error::UnboundedSupport)
        ));
        let edge = Region::new(vec![-9.8], vec![2.0]).unwrap();
        assert!(matches!(
            count_components(&g, &edge, 2, Some(0.5)),
            Err(Error::InsufficientMargin { .. })
        ));
    }

    #[test]
    fn union_find_merges() {
        let mut uf = UnionFind::new(5);
        uf.union(0, 1);
        uf.union(3, 4);
        uf.union(1, 4);
        assert_eq!(uf.component_size(0), 4);
        assert_eq!(uf.component_size(2), 1);
        assert_eq!(uf.find(3), uf.find(0));
    }

    #[test]
    fn isolated_matches_size_one_components() {
        let w = Region::cube(Dimension::TWO, 6.0);
        let mut g =
            crate::simulator::graph::sample_points(2.0, &w, &mut RepStream::new(8, 0).point_rng())
                .unwrap();
        let f = ConnectionFunction::hard_disk(1.0).unwrap();
        connect(
            &mut g,
            &f,
            EdgeRange::for_function(&f, 0.0),
            &RepStream::new(8, 0).pair_uniforms(),
            None,
        );
        let b = Region::new(vec![1.5, 1.5], vec![3.0, 3.0]).unwrap();
        assert_eq!(
            count_components(&g, &b, 1, Some(1.0)).unwrap().vertices,
            count_isolated(&g, &b)
        );
    }
}
