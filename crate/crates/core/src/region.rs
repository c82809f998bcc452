//! Axis-aligned boxes used as observation regions.

use crate::scalar::{Dimension, Real};
use crate::{Error, Result};

/// Half-open axis-aligned box `(lower, lower + sides]` in R^d.
#[derive(Clone, Debug, PartialEq)]
pub struct Region<T> {
    dim: Dimension,
    lower: Vec<T>,
    sides: Vec<T>,
}

impl<T: Real> Region<T> {
    pub fn new(lower: Vec<T>, sides: Vec<T>) -> Result<Self> {
        if lower.len() != sides.len() {
            return Err(Error::param("region corner and sides differ in dimension"));
        }
        let dim = Dimension::new(sides.len())?;
        if sides.iter().any(|&a| !(a > T::zero()) || !a.is_finite()) {
            return Err(Error::param(
                "region side lengths must be positive and finite",
            ));
        }
        if lower.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("region corner must be finite"));
        }
        Ok(Region { dim, lower, sides })
    }

    /// The unit cube `(0,1]^d`.
    pub fn unit(dim: Dimension) -> Self {
        Self::cube(dim, T::one())
    }

    /// `(0, side]^d`
    pub fn cube(dim: Dimension, side: T) -> Self {
        Region {
            dim,
            lower: vec![T::zero(); dim.get()],
            sides: vec![side; dim.get()],
        }
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn sides(&self) -> &[T] {
        &self.sides
    }

    pub fn upper(&self, axis: usize) -> T {
        self.lower[axis] + self.sides[axis]
    }

    /// Lebesgue measure.
    pub fn volume(&self) -> T {
        self.sides.iter().fold(T::one(), |acc, &a| acc * a)
    }

    pub fn diameter(&self) -> T {
        self.sides
            .iter()
            .fold(T::zero(), |acc, &a| acc + a * a)
            .sqrt()
    }

    pub fn is_cube(&self) -> bool {
        self.sides.iter().all(|&a| a == self.sides[0])
    }

    pub fn contains(&self, x: &[T]) -> bool {
        self.lower
            .iter()
            .zip(&self.sides)
            .zip(x)
            .all(|((&lo, &a), &xi)| xi > lo && xi <= lo + a)
    }

    /// Box grown by `margin` on every side.
    pub fn expanded(&self, margin: T) -> Self {
        Region {
            dim: self.dim,
            lower: self.lower.iter().map(|&x| x - margin).collect(),
            sides: self.sides.iter().map(|&a| a + margin + margin).collect(),
        }
    }

    /// Distance from this box to the boundary of `outer` (negative if not nested).
    pub fn inset_within(&self, outer: &Region<T>) -> T {
        let mut best = T::infinity();
        for i in 0..self.dim.get() {
            let lo = self.lower[i] - outer.lower[i];
            let hi = outer.upper(i) - self.upper(i);
            best = best.min(lo).min(hi);
        }
        best
    }

    /// Set covariogram `c_K(v) = ℓ(K ∩ (K - v)) = Π max(0, a_i - |v_i|)`.
    pub fn covariogram(&self, v: &[T]) -> T {
        self.sides.iter().zip(v).fold(T::one(), |acc, (&a, &vi)| {
            acc * (a - vi.abs()).max(T::zero())
        })
    }
}

impl Region<f64> {
    pub fn to_f32(&self) -> Region<f32> {
        Region {
            dim: self.dim,
            lower: self.lower.iter().map(|&x| x as f32).collect(),
            sides: self.sides.iter().map(|&x| x as f32).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_covariogram() {
        let k = Region::<f64>::unit(Dimension::TWO);
        assert_eq!(k.covariogram(&[0.0, 0.0]), 1.0);
        assert_eq!(k.covariogram(&[0.5, 0.0]), 0.5);
        assert_eq!(k.covariogram(&[1.5, 0.0]), 0.0);
        assert_eq!(k.covariogram(&[-0.5, 0.25]), k.covariogram(&[0.5, -0.25]));
    }

    #[test]
    fn volume_and_diameter() {
        let k = Region::new(vec![0.0, 1.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(k.volume(), 12.0);
        assert_eq!(k.diameter(), 5.0);
        assert!(!k.is_cube());
    }

    #[test]
    fn half_open_membership() {
        let k = Region::<f64>::unit(Dimension::ONE);
        assert!(!k.contains(&[0.0]));
        assert!(k.contains(&[1.0]));
        assert!(k.contains(&[0.5]));
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Region::new(vec![0.0], vec![0.0]).is_err());
        assert!(Region::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }
}
