//! Exact finite-window moments and their large-scale limits.
//!
//! Every quantity is built from two primitives: the isolation probability
//! `p(μ, h) = exp(-μ ∫ h)` and the pair factor `P(s) = exp(μ O_{h1,h2}(s))`.
//! Double integrals over the window go through the isotropized
//! covariogram; integrals over all of R^d are radial and cut where the
//! domination bound makes the remainder negligible.

use serde::Serialize;

use crate::connfn::ConnectionFunction;
use crate::quadrature::{
    double_region_integral, integrate_estimates, overlap_integral, radial_integral, Estimate,
    QuadratureSpec,
};
use crate::region::Region;
use crate::scalar::{Dimension, Real};
use crate::{Error, Result};

/// How the intensity grows with the scale index.
#[derive(Clone, Debug, PartialEq)]
pub enum DensityRule<T> {
    /// `λ_n = λ n^d`
    Power,
    /// `λ_n` for `n = 1, 2, ...` given explicitly; beyond the table the
    /// power rule applies. Only integer `n` are valid.
    Sequence(Vec<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig<T> {
    pub d: Dimension,
    pub lambda: T,
    pub n: T,
    pub density: DensityRule<T>,
    pub window: Region<T>,
    pub g: ConnectionFunction<T>,
}

impl<T: Real> ModelConfig<T> {
    pub fn new(lambda: T, n: T, window: Region<T>, g: ConnectionFunction<T>) -> Result<Self> {
        let cfg = ModelConfig {
            d: window.dim(),
            lambda,
            n,
            density: DensityRule::Power,
            window,
            g,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_n(&self, n: T) -> Result<Self> {
        let cfg = ModelConfig { n, ..self.clone() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > T::zero()) || !self.lambda.is_finite() {
            return Err(Error::param("intensity must be positive and finite"));
        }
        if !(self.n >= T::one()) || !self.n.is_finite() {
            return Err(Error::param("scale index must be >= 1"));
        }
        if self.window.dim() != self.d {
            return Err(Error::param(
                "window dimension differs from model dimension",
            ));
        }
        if let DensityRule::Sequence(v) = &self.density {
            if v.iter().any(|&x| !(x > T::zero())) {
                return Err(Error::param("density sequence must be positive"));
            }
            if self.n.fract() != T::zero() {
                return Err(Error::param(
                    "explicit density sequences need an integer scale index",
                ));
            }
        }
        Ok(())
    }

    /// `λ_n` at an arbitrary index.
    pub fn lambda_at(&self, n: T) -> T {
        if let DensityRule::Sequence(v) = &self.density {
            if let Some(i) = n.to_usize() {
                if n.fract() == T::zero() && i >= 1 && i <= v.len() {
                    return v[i - 1];
                }
            }
        }
        self.lambda * self.d.pow(n)
    }

    pub fn lambda_n(&self) -> T {
        self.lambda_at(self.n)
    }

    /// `λ_n / n^d`, the intensity seen by the unscaled function.
    pub fn reduced_intensity(&self) -> T {
        self.lambda_n() / self.d.pow(self.n)
    }

    /// Smallest `N` with `3λ/4 <= λ_m / m^d <= 3λ/2` for all `m >= N`.
    pub fn threshold_index(&self) -> usize {
        match &self.density {
            DensityRule::Power => 1,
            DensityRule::Sequence(v) => {
                let lo = T::lit(0.75) * self.lambda;
                let hi = T::lit(1.5) * self.lambda;
                let mut first = v.len() + 1;
                for i in (1..=v.len()).rev() {
                    let ratio = v[i - 1] / self.d.pow(T::from_usize_lossy(i));
                    if ratio < lo || ratio > hi {
                        break;
                    }
                    first = i;
                }
                first
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport<T> {
    pub quantity: String,
    #[serde(rename = "R")]
    pub r: Option<T>,
    pub n: Option<T>,
    pub lambda_n: Option<T>,
    pub value: T,
    pub error_bound: T,
}

impl<T: Real> MomentReport<T> {
    pub fn new(quantity: &str, est: Estimate<T>) -> Self {
        MomentReport {
            quantity: quantity.to_string(),
            r: None,
            n: None,
            lambda_n: None,
            value: est.value,
            error_bound: est.error.abs(),
        }
    }

    pub fn at(mut self, r: Option<T>, n: Option<T>, lambda_n: Option<T>) -> Self {
        self.r = r;
        self.n = n;
        self.lambda_n = lambda_n;
        self
    }
}

/// `p(μ, h) = exp(-μ ∫_{R^d} h(|y|) dy)`.
pub fn p_iso<T: Real>(
    mu: T,
    h: &ConnectionFunction<T>,
    d: Dimension,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    if mu < T::zero() {
        return Err(Error::pre("intensity must be >= 0"));
    }
    if mu == T::zero() {
        return Ok(Estimate::exact(T::one()));
    }
    Ok(radial_integral(h, d, spec)?.exp_scaled(-mu))
}

/// `P(s) = exp(+μ ∫ h1(|y|) h2(|y - x|) dy)` with `|x| = s`.
pub fn p_pair<T: Real>(
    mu: T,
    h1: &ConnectionFunction<T>,
    h2: &ConnectionFunction<T>,
    s: T,
    d: Dimension,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    if mu < T::zero() {
        return Err(Error::pre("intensity must be >= 0"));
    }
    if mu == T::zero() {
        return Ok(Estimate::exact(T::one()));
    }
    Ok(overlap_integral(h1, h2, s, d, spec)?.exp_scaled(mu))
}

/// The three pieces `h_in = 1{≤R}h`, `h_out = 1{>R}h` and `h` together
/// with their isolation probabilities at intensity `mu`. The full
/// probability is formed as the product of the two parts so that the
/// pair bracket cancels exactly where all overlaps vanish.
struct Split<T> {
    mu: T,
    d: Dimension,
    inner: ConnectionFunction<T>,
    outer: ConnectionFunction<T>,
    full: ConnectionFunction<T>,
    p_in: Estimate<T>,
    p_out: Estimate<T>,
    p_full: Estimate<T>,
}

impl<T: Real> Split<T> {
    fn new(
        mu: T,
        inner: ConnectionFunction<T>,
        outer: ConnectionFunction<T>,
        full: ConnectionFunction<T>,
        d: Dimension,
        spec: &QuadratureSpec<T>,
    ) -> Result<Self> {
        let p_in = p_iso(mu, &inner, d, spec)?;
        let p_out = p_iso(mu, &outer, d, spec)?;
        let p_full = p_in.mul(p_out);
        Ok(Split {
            mu,
            d,
            inner,
            outer,
            full,
            p_in,
            p_out,
            p_full,
        })
    }

    /// Normalized mean `p_in (1 - p_out)`.
    fn mean_density(&self) -> Estimate<T> {
        self.p_in.mul(Estimate::exact(T::one()).sub(self.p_out))
    }

    /// `(1-h(s))[p_in² P_in,in - 2 p_in² p_out P_in,h + p² P_h,h] - p_in²(1-p_out)²`,
    /// plus `h_out(s) p_in² P_in,in` when `extra` is set.
    fn kernel(&self, s: T, extra: bool, spec: &QuadratureSpec<T>) -> Result<Estimate<T>> {
        // the bracket cancels to far below the size of its terms
        let fine = spec.inner();
        let pii = p_pair(self.mu, &self.inner, &self.inner, s, self.d, &fine)?;
        let pif = p_pair(self.mu, &self.inner, &self.full, s, self.d, &fine)?;
        let pff = p_pair(self.mu, &self.full, &self.full, s, self.d, &fine)?;
        let p_in2 = self.p_in.mul(self.p_in);
        let two = T::lit(2.0);
        let bracket = p_in2
            .mul(pii)
            .sub(p_in2.mul(self.p_out).mul(pif).scale(two))
            .add(self.p_full.mul(self.p_full).mul(pff));
        let miss = Estimate::exact(T::one()).sub(self.p_out);
        let mut out = bracket
            .scale(T::one() - self.full.eval(s))
            .sub(p_in2.mul(miss).mul(miss));
        if extra {
            out = out.add(p_in2.mul(pii).scale(self.outer.eval(s)));
        }
        Ok(out)
    }

    fn breakpoints(&self) -> Vec<T> {
        pair_breakpoints(&[&self.inner, &self.outer, &self.full])
    }
}

/// Radii where pair kernels built from `fs` may be non-smooth: the cuts
/// themselves and all sums and differences of two cuts.
fn pair_breakpoints<T: Real>(fs: &[&ConnectionFunction<T>]) -> Vec<T> {
    let mut cuts: Vec<T> = fs.iter().flat_map(|f| f.cut_radii()).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cuts"));
    cuts.dedup();
    let mut out = cuts.clone();
    for (i, &a) in cuts.iter().enumerate() {
        for &b in &cuts[i..] {
            out.push(a + b);
            if b > a {
                out.push(b - a);
            }
        }
    }
    out
}

fn check_window_inside_range<T: Real>(r: T, k: &Region<T>) -> Result<()> {
    if !(r > k.diameter()) {
        return Err(Error::pre(format!(
            "truncation radius {r} must exceed the window diameter {}",
            k.diameter()
        )));
    }
    Ok(())
}

fn finite_window_variance<T: Real>(
    split: &Split<T>,
    lambda_n: T,
    k: &Region<T>,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    let mean = split.mean_density().scale(lambda_n * k.volume());
    let double = double_region_integral(
        |s| split.kernel(s, true, spec),
        k,
        &split.breakpoints(),
        spec,
    )?;
    let var = mean.add(double.scale(lambda_n * lambda_n));
    Ok(Estimate::new(var.value.max(T::zero()), var.error))
}

/// Mean of the truncation error for an unscaled model, valid for `R > diam K`.
pub fn mean_l_unscaled<T: Real>(
    lambda: T,
    g: &ConnectionFunction<T>,
    r: T,
    k: &Region<T>,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    check_window_inside_range(r, k)?;
    let split = Split::new(
        lambda,
        g.inside(r)?,
        g.outside(r)?,
        g.clone(),
        k.dim(),
        spec,
    )?;
    Ok(split.mean_density().scale(lambda * k.volume()))
}

/// Variance of the truncation error for an unscaled model, valid for `R > diam K`.
pub fn var_l_unscaled<T: Real>(
    lambda: T,
    g: &ConnectionFunction<T>,
    r: T,
    k: &Region<T>,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    check_window_inside_range(r, k)?;
    if g.outside(r)?.is_zero() {
        return Ok(Estimate::exact(T::zero()));
    }
    let split = Split::new(
        lambda,
        g.inside(r)?,
        g.outside(r)?,
        g.clone(),
        k.dim(),
        spec,
    )?;
    finite_window_variance(&split, lambda, k, spec)
}

fn scaled_split<T: Real>(cfg: &ModelConfig<T>, r: T, spec: &QuadratureSpec<T>) -> Result<Split<T>> {
    if !(r > T::zero()) {
        return Err(Error::pre("truncation radius must be positive"));
    }
    let g = &cfg.g;
    Split::new(
        cfg.lambda_n(),
        g.inside(r)?.scaled(cfg.n)?,
        g.outside(r)?.scaled(cfg.n)?,
        g.scaled(cfg.n)?,
        cfg.d,
        spec,
    )
}

/// `E L_{R,n}` for the scaled model.
pub fn mean_l_scaled<T: Real>(
    cfg: &ModelConfig<T>,
    r: T,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    let split = scaled_split(cfg, r, spec)?;
    Ok(split
        .mean_density()
        .scale(cfg.lambda_n() * cfg.window.volume()))
}

/// `Var L_{R,n}` for the scaled model, including the term from pairs
/// joined only by a long edge.
pub fn var_l_scaled<T: Real>(
    cfg: &ModelConfig<T>,
    r: T,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    if cfg.g.outside(r)?.is_zero() {
        return Ok(Estimate::exact(T::zero()));
    }
    let split = scaled_split(cfg, r, spec)?;
    finite_window_variance(&split, cfg.lambda_n(), &cfg.window, spec)
}

/// Nonnegative extra term `λ_n² p² ∬_K g^{R,n}(|x1-x2|) P(x1,x2)` of the
/// scaled variance on its own.
pub fn var_l_scaled_extra_term<T: Real>(
    cfg: &ModelConfig<T>,
    r: T,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    let split = scaled_split(cfg, r, spec)?;
    let p_in2 = split.p_in.mul(split.p_in);
    let ln = cfg.lambda_n();
    let est = double_region_integral(
        |s| {
            let w = split.outer.eval(s);
            if w == T::zero() {
                return Ok(Estimate::exact(T::zero()));
            }
            Ok(
                p_pair(split.mu, &split.inner, &split.inner, s, split.d, spec)?
                    .mul(p_in2)
                    .scale(w),
            )
        },
        &cfg.window,
        &split.breakpoints(),
        spec,
    )?;
    Ok(est.scale(ln * ln))
}

/// `E I_n = λ_n ℓ(K) p(λ_n, g_n)`.
pub fn mean_i_scaled<T: Real>(
    cfg: &ModelConfig<T>,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    let gn = cfg.g.scaled(cfg.n)?;
    Ok(p_iso(cfg.lambda_n(), &gn, cfg.d, spec)?.scale(cfg.lambda_n() * cfg.window.volume()))
}

/// `Var I_n = E I_n + λ_n² ∬_K [(1-g_n) p² P_{g_n,g_n} - p²]`.
pub fn var_i_scaled<T: Real>(
    cfg: &ModelConfig<T>,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    let gn = cfg.g.scaled(cfg.n)?;
    let ln = cfg.lambda_n();
    let p = p_iso(ln, &gn, cfg.d, spec)?;
    let p2 = p.mul(p);
    let double = double_region_integral(
        |s| {
            let pp = p_pair(ln, &gn, &gn, s, cfg.d, spec)?;
            Ok(p2.mul(pp).scale(T::one() - gn.eval(s)).sub(p2))
        },
        &cfg.window,
        &pair_breakpoints(&[&gn]),
        spec,
    )?;
    let var = p.scale(ln * cfg.window.volume()).add(double.scale(ln * ln));
    Ok(Estimate::new(var.value.max(T::zero()), var.error))
}

/// Constants of the domination bound
/// `|bracket(x)| <= C_total g(|x|/2)` for all `x`, `R > 0`, `n >= N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DominationConstant<T> {
    pub threshold_index: usize,
    /// Radius threshold. For bounded-support fallbacks this is twice the
    /// support radius, beyond which the bracket vanishes identically.
    pub radius: T,
    pub c_pair: T,
    pub c_total: T,
    /// True when the pair constant comes from the convexity (chord) bound
    /// because `g(M/2)` vanishes at every admissible `M`.
    pub bounded_fallback: bool,
}

/// Builds the domination constants for `g` at base intensity `lambda`.
pub fn domination_constant<T: Real>(
    lambda: T,
    g: &ConnectionFunction<T>,
    d: Dimension,
    threshold_index: usize,
    spec: &QuadratureSpec<T>,
) -> Result<DominationConstant<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::param("intensity must be positive"));
    }
    let mass = radial_integral(g, d, spec)?;
    // upper-bound the mass so the constants stay conservative
    let big_g = mass.value + mass.error;
    let four_lg = T::lit(4.0) * lambda * big_g;
    let e = T::one().exp();
    let admissible = |m: T| four_lg * g.eval(m * T::lit(0.5)) <= T::one();
    let finish = |radius: T, c_pair: T, bounded_fallback: bool| DominationConstant {
        threshold_index,
        radius,
        c_pair,
        c_total: T::lit(4.0) * (T::one() + c_pair),
        bounded_fallback,
    };
    if g.is_zero() || admissible(T::zero()) {
        return Ok(finish(T::zero(), T::lit(4.0) * e * lambda * big_g, false));
    }
    let support = g.support_radius();
    let mut hi = match support {
        Some(s) => {
            let edge = s + s;
            if !admissible(edge) || g.eval(s) == T::zero() {
                let t_max = four_lg * g.eval(T::zero());
                let c_pair = four_lg * (t_max.exp() - T::one()) / t_max;
                return Ok(finish(edge, c_pair, true));
            }
            edge
        }
        None => {
            let mut hi = T::one();
            while !admissible(hi) {
                hi = hi + hi;
                if !hi.is_finite() {
                    return Err(Error::param("connection function does not decay"));
                }
            }
            hi
        }
    };
    let mut lo = T::zero();
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if !(mid > lo && mid < hi) {
            break;
        }
        if admissible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let gm = g.eval(hi * T::lit(0.5));
    let c_pair = (T::lit(4.0) * e * lambda * big_g).max((four_lg.exp() - T::one()) / gm);
    Ok(finish(hi, c_pair, false))
}

/// Left-hand side of the domination bound at intensity `mu = λ_n/n^d`:
/// `(1-g(s))[p_R² P_{R,R} - 2 p_R² p^R P_{R,g} + p² P_{g,g}] - p_R²(1-p^R)²`.
pub fn domination_bracket<T: Real>(
    mu: T,
    g: &ConnectionFunction<T>,
    r: T,
    s: T,
    d: Dimension,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    let split = Split::new(mu, g.inside(r)?, g.outside(r)?, g.clone(), d, spec)?;
    split.kernel(s, false, spec)
}

/// Radial integral over R^d of a pair kernel that is dominated by
/// `bound · g(|x|/2)`; the region beyond the cut-off contributes at most
/// the returned tail allowance.
fn dominated_radial<T, F>(
    mut kernel: F,
    g: &ConnectionFunction<T>,
    bound: T,
    breakpoints: &[T],
    d: Dimension,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>>
where
    T: Real,
    F: FnMut(T) -> Result<Estimate<T>>,
{
    // ∫_{|x|>2t} g(|x|/2) dx = 2^d ∫_{|y|>t} g(|y|) dy
    let factor = bound * d.pow(T::lit(2.0));
    let t = g.tail_radius(spec.tail_eps / factor, d);
    let cutoff = t + t;
    let tail = factor * g.tail_mass(t, d);
    let omega = d.sphere_area::<T>();
    let est = integrate_estimates(
        |s| {
            let w = d.radial_weight(s);
            if w == T::zero() {
                return Ok(Estimate::exact(T::zero()));
            }
            Ok(kernel(s)?.scale(w))
        },
        T::zero(),
        cutoff,
        breakpoints,
        spec,
    )?;
    Ok(Estimate::new(est.value * omega, est.error * omega + tail))
}

/// `lim (λ_n ℓ(K))^{-1} E L_{R,n} = p(λ,g_R)(1 - p(λ,g^R))`.
pub fn limit_mean_l<T: Real>(
    lambda: T,
    g: &ConnectionFunction<T>,
    r: T,
    d: Dimension,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    if !(r > T::zero()) {
        return Err(Error::pre("truncation radius must be positive"));
    }
    let split = Split::new(lambda, g.inside(r)?, g.outside(r)?, g.clone(), d, spec)?;
    Ok(split.mean_density())
}

/// `lim (λ_n ℓ(K))^{-1} Var L_{R,n}`.
pub fn limit_var_l<T: Real>(
    lambda: T,
    g: &ConnectionFunction<T>,
    r: T,
    d: Dimension,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    if !(r > T::zero()) {
        return Err(Error::pre("truncation radius must be positive"));
    }
    if g.outside(r)?.is_zero() {
        return Ok(Estimate::exact(T::zero()));
    }
    let split = Split::new(lambda, g.inside(r)?, g.outside(r)?, g.clone(), d, spec)?;
    let dom = domination_constant(lambda, g, d, 1, spec)?;
    // the long-edge term is bounded by g^R <= g(|x|/2)
    let bound = dom.c_total + T::one();
    let integral = dominated_radial(
        |s| split.kernel(s, true, spec),
        g,
        bound,
        &split.breakpoints(),
        d,
        spec,
    )?;
    let var = split.mean_density().add(integral.scale(lambda));
    Ok(Estimate::new(var.value.max(T::zero()), var.error))
}

/// `lim (λ_n ℓ(K))^{-1} Var I_n = p + λ p² ∫ [(1-g) P_{g,g} - 1]`.
pub fn limit_var_i<T: Real>(
    lambda: T,
    g: &ConnectionFunction<T>,
    d: Dimension,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    if g.is_zero() {
        return Ok(Estimate::exact(T::one()));
    }
    let p = p_iso(lambda, g, d, spec)?;
    let p2 = p.mul(p);
    let dom = domination_constant(lambda, g, d, 1, spec)?;
    // p²(P - 1) <= P_{2λ} - 1 <= C_pair g(|x|/2) and p² g P <= g
    let bound = dom.c_pair + T::one();
    let integral = dominated_radial(
        |s| {
            let pp = p_pair(lambda, g, g, s, d, spec)?;
            Ok(pp
                .scale(T::one() - g.eval(s))
                .sub(Estimate::exact(T::one()))
                .mul(p2))
        },
        g,
        bound,
        &pair_breakpoints(&[g]),
        d,
        spec,
    )?;
    Ok(p.add(integral.scale(lambda)))
}

/// Ratio of the limiting variance densities of `I_n(g_R)` and `I_n(g)`.
pub fn delta_r<T: Real>(
    lambda: T,
    g: &ConnectionFunction<T>,
    r: T,
    d: Dimension,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    if !(r > T::zero()) {
        return Err(Error::pre("truncation radius must be positive"));
    }
    let num = limit_var_i(lambda, &g.inside(r)?, d, spec)?;
    let den = limit_var_i(lambda, g, d, spec)?;
    let value = num.value / den.value;
    let error = value.abs() * (num.error / num.value.abs() + den.error / den.value.abs());
    Ok(Estimate::new(value, error))
}

/// Normalized moments of `L_{n,R}` (truncation after scaling).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DegenerateRow<T> {
    pub n: T,
    pub normalized_mean: Estimate<T>,
    pub normalized_variance: Option<Estimate<T>>,
}

/// `(λ_n ℓ(K))^{-1} E L_{n,R}` (and optionally the variance) along `ns`,
/// for `R > diam K` where the unscaled formulas apply to `g_n`.
pub fn degenerate_limits_n_r<T: Real>(
    cfg: &ModelConfig<T>,
    r: T,
    ns: &[T],
    with_variance: bool,
    spec: &QuadratureSpec<T>,
) -> Result<Vec<DegenerateRow<T>>> {
    check_window_inside_range(r, &cfg.window)?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let c = cfg.with_n(n)?;
        // p(λ_n, 1{≤R} g(n·)) = p(λ_n/n^d, 1{≤nR} g)
        let mu = c.reduced_intensity();
        let wide = n * r;
        let split = Split::new(
            mu,
            cfg.g.inside(wide)?,
            cfg.g.outside(wide)?,
            cfg.g.clone(),
            cfg.d,
            spec,
        )?;
        let normalized_mean = split.mean_density();
        let normalized_variance = if with_variance {
            let gn = cfg.g.scaled(n)?;
            let ln = c.lambda_n();
            let v = var_l_unscaled(ln, &gn, r, &cfg.window, spec)?;
            Some(v.scale(T::one() / (ln * cfg.window.volume())))
        } else {
            None
        };
        rows.push(DegenerateRow {
            n,
            normalized_mean,
            normalized_variance,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn spec() -> QuadratureSpec<f64> {
        QuadratureSpec::default()
    }

    fn exp1() -> ConnectionFunction<f64> {
        ConnectionFunction::exponential(1.0).unwrap()
    }

    fn disk1() -> ConnectionFunction<f64> {
        ConnectionFunction::hard_disk(1.0).unwrap()
    }

    // ∫_{|y|<=R} e^{-|y|} dy in the plane
    fn exp_disk_mass(r: f64) -> f64 {
        2.0 * PI * (1.0 - (1.0 + r) * (-r).exp())
    }

    #[test]
    fn isolation_probability_examples() {
        let s = spec();
        let zero = exp1().inside(0.0).unwrap();
        assert_eq!(p_iso(3.0, &zero, Dimension::TWO, &s).unwrap().value, 1.0);
        assert_abs_diff_eq!(
            p_iso(1.0, &disk1(), Dimension::TWO, &s).unwrap().value,
            (-PI).exp(),
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            p_iso(2.0, &exp1(), Dimension::ONE, &s).unwrap().value,
            (-4.0f64).exp(),
            epsilon = 1e-10
        );
        assert!(p_iso(-1.0, &exp1(), Dimension::ONE, &s).is_err());
    }

    #[test]
    fn pair_factor_examples() {
        let s = spec();
        let d = Dimension::TWO;
        assert_eq!(
            p_pair(0.0, &disk1(), &disk1(), 0.5, d, &s).unwrap().value,
            1.0
        );
        assert_abs_diff_eq!(
            p_pair(1.0, &disk1(), &disk1(), 2.0, d, &s).unwrap().value,
            1.0,
            epsilon = 1e-10
        );
        let lens = 2.0 * PI / 3.0 - 3f64.sqrt() / 2.0;
        let got = p_pair(1.0, &disk1(), &disk1(), 1.0, d, &s).unwrap().value;
        assert_abs_diff_eq!(got, lens.exp(), epsilon = 1e-7);
    }

    #[test]
    fn split_identity() {
        let s = spec();
        for d in [Dimension::ONE, Dimension::TWO, Dimension::THREE] {
            for r in [0.3, 1.0, 2.5] {
                let a = p_iso(1.3, &exp1().inside(r).unwrap(), d, &s).unwrap().value;
                let b = p_iso(1.3, &exp1().outside(r).unwrap(), d, &s)
                    .unwrap()
                    .value;
                let c = p_iso(1.3, &exp1(), d, &s).unwrap().value;
                assert_abs_diff_eq!(a * b, c, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn unscaled_mean_plane_exponential() {
        let s = spec();
        let k = Region::unit(Dimension::TWO);
        let got = mean_l_unscaled(1.0, &exp1(), 2.0, &k, &s).unwrap();
        let inner = exp_disk_mass(2.0);
        let outer = 2.0 * PI - inner;
        let want = (-inner).exp() * (1.0 - (-outer).exp());
        assert_abs_diff_eq!(got.value, want, epsilon = 1e-10);
        assert!(got.error < 1e-8);
    }

    #[test]
    fn unscaled_requires_large_radius() {
        let s = spec();
        let k = Region::unit(Dimension::TWO);
        assert!(matches!(
            mean_l_unscaled(1.0, &exp1(), 1.0, &k, &s),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            var_l_unscaled(1.0, &exp1(), 1.2, &k, &s),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn bounded_support_below_radius_gives_zero() {
        let s = spec();
        let k = Region::unit(Dimension::ONE);
        assert_eq!(
            mean_l_unscaled(1.0, &disk1(), 1.5, &k, &s).unwrap().value,
            0.0
        );
        assert_eq!(
            var_l_unscaled(1.0, &disk1(), 1.5, &k, &s).unwrap().value,
            0.0
        );
        let cfg = ModelConfig::new(1.0, 4.0, k, disk1()).unwrap();
        assert_eq!(mean_l_scaled(&cfg, 1.0, &s).unwrap().value, 0.0);
        assert_eq!(var_l_scaled(&cfg, 1.0, &s).unwrap().value, 0.0);
    }

    #[test]
    fn tiny_intensity_gives_vanishing_moments() {
        let s = spec();
        let k = Region::unit(Dimension::ONE);
        let m = mean_l_unscaled(1e-9, &exp1(), 2.0, &k, &s).unwrap().value;
        let v = var_l_unscaled(1e-9, &exp1(), 2.0, &k, &s).unwrap().value;
        assert!(m < 1e-9 && v < 1e-9);
    }

    #[test]
    fn scaled_mean_plane_closed_form() {
        // radial integrals of g(4r) over r <= R/4 and beyond are the
        // unscaled ones divided by 16
        let s = spec();
        let cfg = ModelConfig::new(1.0, 4.0, Region::unit(Dimension::TWO), exp1()).unwrap();
        let got = mean_l_scaled(&cfg, 2.0, &s).unwrap();
        let ln = 16.0;
        let inner = exp_disk_mass(2.0) / 16.0;
        let outer = (2.0 * PI - exp_disk_mass(2.0)) / 16.0;
        let want = ln * (-ln * inner).exp() * (1.0 - (-ln * outer).exp());
        assert_abs_diff_eq!(got.value, want, epsilon = 1e-9);
    }

    #[test]
    fn scaled_at_unit_index_matches_unscaled() {
        let s = spec();
        let k = Region::unit(Dimension::ONE);
        let cfg = ModelConfig::new(1.0, 1.0, k.clone(), exp1()).unwrap();
        let a = mean_l_scaled(&cfg, 2.0, &s).unwrap().value;
        let b = mean_l_unscaled(1.0, &exp1(), 2.0, &k, &s).unwrap().value;
        assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        let a = var_l_scaled(&cfg, 2.0, &s).unwrap().value;
        let b = var_l_unscaled(1.0, &exp1(), 2.0, &k, &s).unwrap().value;
        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
    }

    #[test]
    fn variance_exceeds_mean_term_and_extra_is_nonnegative() {
        let s = spec();
        let cfg = ModelConfig::new(1.0, 2.0, Region::unit(Dimension::ONE), exp1()).unwrap();
        let v = var_l_scaled(&cfg, 1.0, &s).unwrap();
        let x = var_l_scaled_extra_term(&cfg, 1.0, &s).unwrap();
        assert!(v.value > 0.0);
        assert!(x.value >= 0.0);
        assert!(v.error < 1e-6);
    }

    #[test]
    fn limit_mean_plane_golden() {
        let s = spec();
        let got = limit_mean_l(1.0, &exp1(), 1.0, Dimension::TWO, &s)
            .unwrap()
            .value;
        let inner = exp_disk_mass(1.0);
        let want = (-inner).exp() * (1.0 - (-(2.0 * PI - inner)).exp());
        assert_abs_diff_eq!(got, want, epsilon = 1e-12);
    }

    #[test]
    fn limit_var_i_without_interaction_is_poisson() {
        let s = spec();
        let zero = exp1().inside(0.0).unwrap();
        assert_eq!(
            limit_var_i(1.0, &zero, Dimension::TWO, &s).unwrap().value,
            1.0
        );
    }

    #[test]
    fn limit_var_i_positive() {
        let s = spec();
        for (g, d) in [
            (disk1(), Dimension::TWO),
            (exp1(), Dimension::ONE),
            (exp1(), Dimension::TWO),
        ] {
            let v = limit_var_i(1.0, &g, d, &s).unwrap();
            assert!(v.value > 0.0, "{g} d={d}: {v:?}");
            assert!(v.error < 1e-6);
        }
    }

    #[test]
    fn delta_r_edge_cases() {
        let s = spec();
        let d = Dimension::TWO;
        assert_abs_diff_eq!(
            delta_r(1.0, &disk1(), 1.5, d, &s).unwrap().value,
            1.0,
            epsilon = 1e-9
        );
        let full = limit_var_i(1.0, &exp1(), Dimension::ONE, &s).unwrap().value;
        let tiny = delta_r(1.0, &exp1(), 1e-9, Dimension::ONE, &s)
            .unwrap()
            .value;
        assert_abs_diff_eq!(tiny, 1.0 / full, epsilon = 1e-6);
    }

    #[test]
    fn domination_exponential_line() {
        let s = spec();
        let dom = domination_constant(1.0, &exp1(), Dimension::ONE, 1, &s).unwrap();
        assert_abs_diff_eq!(dom.radius, 2.0 * 8f64.ln(), epsilon = 1e-6);
        assert!(!dom.bounded_fallback);
        let gm = (-dom.radius / 2.0).exp();
        let want = (8.0 * 1f64.exp()).max((8f64.exp() - 1.0) / gm);
        assert_abs_diff_eq!(dom.c_pair, want, epsilon = 1e-3 * want);
        assert_abs_diff_eq!(dom.c_total, 4.0 * (1.0 + dom.c_pair), epsilon = 1e-9);
        assert!(4.0 * 2.0 * gm <= 1.0 + 1e-12);
    }

    #[test]
    fn domination_hard_disk_falls_back() {
        let s = spec();
        let dom = domination_constant(1.0, &disk1(), Dimension::TWO, 1, &s).unwrap();
        assert!(dom.bounded_fallback);
        assert_eq!(dom.radius, 2.0);
        // beyond twice the support the bracket vanishes
        for x in [2.01, 3.0, 5.0] {
            let b = domination_bracket(1.0, &disk1(), 0.5, x, Dimension::TWO, &s)
                .unwrap()
                .value;
            assert_abs_diff_eq!(b, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn domination_bound_holds_on_grid() {
        let s = spec();
        for (g, d) in [
            (exp1(), Dimension::ONE),
            (exp1(), Dimension::TWO),
            (disk1(), Dimension::TWO),
        ] {
            let lambda = 1.0;
            let dom = domination_constant(lambda, &g, d, 1, &s).unwrap();
            // μ = λ_n/n^d ranges over [3λ/4, 3λ/2] for n >= N
            for mu in [0.75, 1.0, 1.5] {
                for r in [0.5, 1.0, 2.0, 4.0] {
                    for i in 0..20 {
                        let x = 0.25 * i as f64;
                        let lhs = domination_bracket(mu, &g, r, x, d, &s).unwrap();
                        let rhs = dom.c_total * g.eval(x / 2.0);
                        assert!(
                            lhs.value.abs() <= rhs + lhs.error,
                            "{g} d={d} mu={mu} R={r} x={x}"
                        );
                    }
                }
            }
            for i in 0..20 {
                let x = 0.25 * i as f64;
                let excess = p_pair(2.0 * lambda, &g, &g, x, d, &s).unwrap().value - 1.0;
                assert!(excess <= dom.c_pair * g.eval(x / 2.0) + 1e-9);
            }
        }
    }

    #[test]
    fn threshold_index_from_sequence() {
        let k = Region::unit(Dimension::ONE);
        let mut cfg = ModelConfig::new(1.0, 1.0, k, exp1()).unwrap();
        assert_eq!(cfg.threshold_index(), 1);
        cfg.density = DensityRule::Sequence(vec![5.0, 0.5, 3.0, 4.4, 5.0]);
        assert_eq!(cfg.threshold_index(), 3);
        assert_eq!(cfg.with_n(2.0).unwrap().lambda_n(), 0.5);
        assert_eq!(cfg.with_n(7.0).unwrap().lambda_n(), 7.0);
        assert!(cfg.with_n(2.5).is_err());
    }

    #[test]
    fn degenerate_sequence_decreases() {
        let s = spec();
        let cfg = ModelConfig::new(1.0, 1.0, Region::unit(Dimension::ONE), exp1()).unwrap();
        let ns = [1.0, 2.0, 4.0, 8.0, 16.0];
        let rows = degenerate_limits_n_r(&cfg, 2.0, &ns, false, &s).unwrap();
        let base = limit_mean_l(1.0, &exp1(), 2.0, Dimension::ONE, &s)
            .unwrap()
            .value;
        assert_abs_diff_eq!(rows[0].normalized_mean.value, base, epsilon = 1e-12);
        for w in rows.windows(2) {
            assert!(w[1].normalized_mean.value < w[0].normalized_mean.value);
        }
        assert!(rows[4].normalized_mean.value < 1e-3);
        let disk = ModelConfig::new(1.0, 1.0, Region::unit(Dimension::ONE), disk1()).unwrap();
        let rows = degenerate_limits_n_r(&disk, 2.0, &[1.0], true, &s).unwrap();
        assert_eq!(rows[0].normalized_mean.value, 0.0);
        assert!(degenerate_limits_n_r(&cfg, 0.5, &ns, false, &s).is_err());
    }

    #[test]
    fn single_precision_pipeline() {
        let s = QuadratureSpec::<f32>::default();
        let g = ConnectionFunction::<f32>::exponential(1.0).unwrap();
        let v = limit_mean_l(1.0f32, &g, 1.0, Dimension::ONE, &s)
            .unwrap()
            .value;
        let want = (-2.0 * (1.0 - (-1.0f64).exp())).exp() * (1.0 - (-2.0 * (-1.0f64).exp()).exp());
        assert!((v as f64 - want).abs() < 1e-5);
    }
}
