use serde::Serialize;

use crate::connfn::ConnectionFunction;
use crate::region::Region;
use crate::{Error, Result};

/// Target region, the margin added around it and the bound on the
/// expected number of target vertices whose status the finite window or
/// the edge cut-off can change.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimWindow {
    #[serde(skip)]
    pub target: Region<f64>,
    pub margin: f64,
    /// Largest edge length ever sampled. Equal to the margin unless the
    /// caller widened the margin.
    pub edge_cutoff: f64,
    pub bias_bound: f64,
}

impl SimWindow {
    pub fn sampling_region(&self) -> Region<f64> {
        self.target.expanded(self.margin)
    }

    /// Copy with the margin widened to at least `margin`.
    pub fn with_margin_at_least(&self, margin: f64) -> Self {
        SimWindow {
            margin: self.margin.max(margin),
            ..self.clone()
        }
    }
}

/// Margin `t` for simulating `f` (the scaled connection function) at
/// `intensity` around `target`.
///
/// Bounded support: `t` is the support radius and the bias is 0. Otherwise
/// `t` is the tail radius at which `intensity² ℓ(K) ∫_{|y|>t} f` drops to
/// `eps`; since every neighbour a target vertex can miss lies beyond `t`,
/// this bounds the expected number of misclassified target vertices.
/// The radius is computed from the untruncated scaled base so that every
/// truncation of the same base shares it.
pub fn margin_policy(
    f: &ConnectionFunction<f64>,
    intensity: f64,
    target: &Region<f64>,
    eps: f64,
) -> Result<SimWindow> {
    if !(eps > 0.0) {
        return Err(Error::param("bias tolerance must be positive"));
    }
    let d = target.dim();
    let untruncated = f.base_function().scaled(f.scale_product())?;
    if f.base().support().is_some() {
        let t = untruncated.support_radius().unwrap_or(0.0);
        return Ok(SimWindow {
            target: target.clone(),
            margin: t,
            edge_cutoff: t,
            bias_bound: 0.0,
        });
    }
    let scale = intensity * intensity * target.volume();
    if eps.is_infinite() {
        return Ok(SimWindow {
            target: target.clone(),
            margin: 0.0,
            edge_cutoff: 0.0,
            bias_bound: scale * untruncated.tail_mass(0.0, d),
        });
    }
    let t = if scale > 0.0 {
        untruncated.range_cutoff(eps / scale, d)
    } else {
        0.0
    };
    Ok(SimWindow {
        target: target.clone(),
        margin: t,
        edge_cutoff: t,
        bias_bound: scale * untruncated.tail_mass(t, d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Dimension;

    #[test]
    fn bounded_support_uses_exact_range() {
        let g = ConnectionFunction::hard_disk(1.0)
            .unwrap()
            .scaled(4.0)
            .unwrap();
        let w = margin_policy(&g, 16.0, &Region::unit(Dimension::TWO), 1e-6).unwrap();
        assert_eq!(w.margin, 0.25);
        assert_eq!(w.bias_bound, 0.0);
    }

    #[test]
    fn exponential_line_closed_form() {
        // ∫_{|y|>t} e^{-n|y|} dy = 2 e^{-nt}/n in one dimension
        let n = 2.0;
        let lam = 2.0;
        let g = ConnectionFunction::exponential(1.0)
            .unwrap()
            .scaled(n)
            .unwrap();
        let eps = 1e-6;
        let w = margin_policy(&g, lam, &Region::unit(Dimension::ONE), eps).unwrap();
        let t_exact = -(eps * n / (2.0 * lam * lam)).ln() / n;
        assert!((w.margin - t_exact).abs() < 1e-6);
        assert!(w.bias_bound <= eps);
    }

    #[test]
    fn infinite_tolerance_gives_no_margin() {
        let g = ConnectionFunction::exponential(1.0).unwrap();
        let w = margin_policy(&g, 1.0, &Region::unit(Dimension::ONE), f64::INFINITY).unwrap();
        assert_eq!(w.margin, 0.0);
    }

    #[test]
    fn truncations_share_the_margin() {
        let g = ConnectionFunction::exponential(1.0).unwrap();
        let k = Region::unit(Dimension::TWO);
        let a = margin_policy(&g.scaled(3.0).unwrap(), 9.0, &k, 1e-6).unwrap();
        let b = margin_policy(&g.inside(1.0).unwrap().scaled(3.0).unwrap(), 9.0, &k, 1e-6).unwrap();
        assert_eq!(a.margin, b.margin);
    }
}
