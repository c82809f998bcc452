use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar used by the deterministic parts of the crate
/// (connection functions, quadrature, moment formulas): `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    /// Smallest tolerance that is meaningful at this precision.
    #[inline]
    fn tolerance_floor() -> Self {
        Self::epsilon() * Self::lit(64.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Spatial dimension of the model. Only 1, 2 and 3 are supported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct Dimension(u8);

impl Dimension {
    pub const ONE: Dimension = Dimension(1);
    pub const TWO: Dimension = Dimension(2);
    pub const THREE: Dimension = Dimension(3);

    pub fn new(d: usize) -> crate::Result<Self> {
        match d {
            1..=3 => Ok(Dimension(d as u8)),
            _ => Err(crate::Error::InvalidParameter(format!(
                "dimension must be 1, 2 or 3 (got {d})"
            ))),
        }
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// Surface area of the unit sphere in R^d.
    pub fn sphere_area<T: Real>(self) -> T {
        match self.0 {
            1 => T::lit(2.0),
            2 => T::lit(2.0) * T::PI(),
            _ => T::lit(4.0) * T::PI(),
        }
    }

    /// Volume of the unit ball in R^d.
    pub fn ball_volume<T: Real>(self) -> T {
        self.sphere_area::<T>() / T::from_usize_lossy(self.get())
    }

    /// `x^d`
    #[inline]
    pub fn pow<T: Real>(self, x: T) -> T {
        match self.0 {
            1 => x,
            2 => x * x,
            _ => x * x * x,
        }
    }

    /// `r^(d-1)`, the radial Jacobian.
    #[inline]
    pub fn radial_weight<T: Real>(self, r: T) -> T {
        match self.0 {
            1 => T::one(),
            2 => r,
            _ => r * r,
        }
    }
}

impl Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert_eq!(Dimension::ONE.sphere_area::<f64>(), 2.0);
        assert!((Dimension::TWO.sphere_area::<f64>() - 2.0 * std::f64::consts::PI).abs() < 1e-15);
        assert!(
            (Dimension::THREE.ball_volume::<f64>() - 4.0 / 3.0 * std::f64::consts::PI).abs()
                < 1e-15
        );
    }

    #[test]
    fn rejects_high_dimension() {
        assert!(Dimension::new(0).is_err());
        assert!(Dimension::new(4).is_err());
        assert_eq!(Dimension::new(2).unwrap().get(), 2);
    }
}
