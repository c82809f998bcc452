//! Random connection model laboratory.
//!
//! Connection functions and their transforms, deterministic moment formulas
//! evaluated by adaptive quadrature, a seeded Monte Carlo simulator and the
//! statistical checks built on top of it.

// negated comparisons reject NaN; quadrature nodes are kept at full published precision
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod connfn;
pub mod error;
pub mod moments;
pub mod quadrature;
pub mod region;
pub mod scalar;
pub mod simulator;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::{Dimension, Real};

pub type ConnFn = connfn::ConnectionFunction<f64>;
pub type Box64 = region::Region<f64>;
pub type Spec = quadrature::QuadratureSpec<f64>;
