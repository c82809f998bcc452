use std::collections::HashMap;

use crate::region::Region;
use crate::scalar::Dimension;
use crate::{Error, Result};

/// Finite set of sites `z ∈ Z^d`; site `z` stands for the cell `z + (0,1]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeRegion {
    dim: Dimension,
    sites: Vec<[i64; 3]>,
    index: HashMap<[i64; 3], usize>,
}

impl LatticeRegion {
    pub fn from_sites(dim: Dimension, sites: Vec<[i64; 3]>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::param(
                "lattice region must contain at least one site",
            ));
        }
        let mut index = HashMap::with_capacity(sites.len());
        for (k, s) in sites.iter().enumerate() {
            if s[dim.get()..].iter().any(|&c| c != 0) {
                return Err(Error::param("unused lattice coordinates must be 0"));
            }
            if index.insert(*s, k).is_some() {
                return Err(Error::param("duplicate lattice site"));
            }
        }
        Ok(LatticeRegion { dim, sites, index })
    }

    /// Sites `lower + {0..side-1}^d` in row-major order (first axis fastest).
    pub fn cube(dim: Dimension, lower: i64, side: usize) -> Result<Self> {
        if side == 0 {
            return Err(Error::param("lattice box side must be positive"));
        }
        let s = side as i64;
        let extent = |a: usize| if a < dim.get() { s } else { 1 };
        let mut sites = Vec::with_capacity(side.pow(dim.get() as u32));
        for z in 0..extent(2) {
            for y in 0..extent(1) {
                for x in 0..s {
                    let mut site = [0i64; 3];
                    let coords = [x, y, z];
                    for a in 0..dim.get() {
                        site[a] = lower + coords[a];
                    }
                    sites.push(site);
                }
            }
        }
        Self::from_sites(dim, sites)
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[[i64; 3]] {
        &self.sites
    }

    pub fn contains(&self, z: &[i64; 3]) -> bool {
        self.index.contains_key(z)
    }

    pub fn position(&self, z: &[i64; 3]) -> Option<usize> {
        self.index.get(z).copied()
    }

    /// Sites with at least one nearest neighbour outside the region.
    pub fn inner_boundary(&self) -> Vec<[i64; 3]> {
        self.sites
            .iter()
            .filter(|z| {
                (0..self.dim.get()).any(|a| {
                    [-1i64, 1].iter().any(|&step| {
                        let mut w = **z;
                        w[a] += step;
                        !self.contains(&w)
                    })
                })
            })
            .copied()
            .collect()
    }

    /// `|∂Λ| / |Λ|`
    pub fn boundary_ratio(&self) -> f64 {
        self.inner_boundary().len() as f64 / self.len() as f64
    }

    /// Smallest box containing every cell.
    pub fn bounding_box(&self) -> Region<f64> {
        let d = self.dim.get();
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for s in &self.sites {
            for a in 0..d {
                lo[a] = lo[a].min(s[a]);
                hi[a] = hi[a].max(s[a]);
            }
        }
        let lower = (0..d).map(|a| lo[a] as f64).collect();
        let sides = (0..d).map(|a| (hi[a] - lo[a] + 1) as f64).collect();
        Region::new(lower, sides).expect("non-empty lattice region")
    }

    /// Site whose cell `z + (0,1]^d` contains `x`.
    pub fn index_of_point(&self, x: &[f64]) -> Option<usize> {
        let mut z = [0i64; 3];
        for (a, &xi) in x.iter().enumerate().take(self.dim.get()) {
            z[a] = xi.ceil() as i64 - 1;
        }
        self.position(&z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_boundary_sizes() {
        let b = LatticeRegion::cube(Dimension::TWO, 0, 4).unwrap();
        assert_eq!(b.len(), 16);
        assert_eq!(b.inner_boundary().len(), 12);
        let b = LatticeRegion::cube(Dimension::THREE, -1, 3).unwrap();
        assert_eq!(b.len(), 27);
        assert_eq!(b.inner_boundary().len(), 26);
        let single = LatticeRegion::cube(Dimension::ONE, 5, 1).unwrap();
        assert_eq!(single.inner_boundary().len(), 1);
    }

    #[test]
    fn boundary_ratio_decreases_with_size() {
        let ratios: Vec<f64> = [4, 8, 16]
            .iter()
            .map(|&s| {
                LatticeRegion::cube(Dimension::TWO, 0, s)
                    .unwrap()
                    .boundary_ratio()
            })
            .collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]));
        assert!(ratios.iter().all(|&r| r <= 1.0));
    }

    #[test]
    fn half_open_cells() {
        let b = LatticeRegion::cube(Dimension::TWO, 0, 2).unwrap();
        assert_eq!(b.index_of_point(&[1.0, 1.0]), b.position(&[0, 0, 0]));
        assert_eq!(
            b.index_of_point(&[1.0 + 1e-12, 0.5]),
            b.position(&[1, 0, 0])
        );
        assert_eq!(b.index_of_point(&[0.0, 0.5]), None);
        let bb = b.bounding_box();
        assert_eq!(bb.lower(), &[0.0, 0.0]);
        assert_eq!(bb.sides(), &[2.0, 2.0]);
    }

    #[test]
    fn rejects_duplicates() {
        assert!(LatticeRegion::from_sites(Dimension::ONE, vec![[0, 0, 0], [0, 0, 0]]).is_err());
    }
}
