//! Deterministic numerical integration.
//!
//! Everything here reduces to globally adaptive 15-point Gauss–Kronrod
//! quadrature on finite intervals with explicit breakpoints. Improper radial
//! integrals are cut at the tail radius `T(ε)` of the integrand and the
//! discarded mass `ε` is added to the reported error.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::connfn::ConnectionFunction;
use crate::region::Region;
use crate::scalar::{Dimension, Real};
use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_subdivisions: usize,
    /// Mass discarded beyond the tail cut-off of improper integrals.
    pub tail_eps: T,
}

impl<T: Real> Default for QuadratureSpec<T> {
    fn default() -> Self {
        let floor = T::tolerance_floor();
        QuadratureSpec {
            rel_tol: T::lit(1e-8).max(floor),
            abs_tol: T::lit(1e-10).max(floor),
            max_subdivisions: 4000,
            tail_eps: T::lit(1e-12).max(floor),
        }
    }
}

impl<T: Real> QuadratureSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > T::zero() && self.abs_tol > T::zero() && self.tail_eps > T::zero()) {
            return Err(Error::param("quadrature tolerances must be positive"));
        }
        if self.tail_eps > self.abs_tol {
            return Err(Error::param(
                "tail epsilon must not exceed the absolute tolerance",
            ));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::param("max subdivisions must be positive"));
        }
        Ok(())
    }

    /// Tighter copy for integrals nested inside another quadrature.
    pub fn inner(&self) -> Self {
        let ten = T::lit(10.0);
        QuadratureSpec {
            rel_tol: (self.rel_tol / ten).max(T::tolerance_floor()),
            abs_tol: (self.abs_tol / ten).max(T::tolerance_floor()),
            max_subdivisions: self.max_subdivisions,
            tail_eps: (self.tail_eps / ten).max(T::tolerance_floor()),
        }
    }
}

/// Value with an absolute error bound.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

// named methods keep the error-bound arithmetic visible at call sites
#[allow(clippy::should_implement_trait)]
impl<T: Real> Estimate<T> {
    pub fn exact(value: T) -> Self {
        Estimate {
            value,
            error: T::zero(),
        }
    }

    pub fn new(value: T, error: T) -> Self {
        Estimate { value, error }
    }

    pub fn scale(self, c: T) -> Self {
        Estimate {
            value: self.value * c,
            error: self.error * c.abs(),
        }
    }

    pub fn add(self, other: Self) -> Self {
        Estimate {
            value: self.value + other.value,
            error: self.error + other.error,
        }
    }

    pub fn sub(self, other: Self) -> Self {
        Estimate {
            value: self.value - other.value,
            error: self.error + other.error,
        }
    }

    pub fn mul(self, other: Self) -> Self {
        Estimate {
            value: self.value * other.value,
            error: self.error * other.value.abs()
                + other.error * self.value.abs()
                + self.error * other.error,
        }
    }

    /// `exp(c · self)` with first-order error propagation.
    pub fn exp_scaled(self, c: T) -> Self {
        let v = (c * self.value).exp();
        Estimate {
            value: v,
            error: v * c.abs() * self.error,
        }
    }
}

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
    // integrated error of the integrand itself; not reduced by subdividing
    carried: T,
}

impl<T: Real> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T: Real> Eq for Segment<T> {}
impl<T: Real> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
    }
}

fn rescale_error<T: Real>(err: T, res_abs: T, res_asc: T) -> T {
    let mut err = err.abs();
    if res_asc != T::zero() && err != T::zero() {
        let scale = (T::lit(200.0) * err / res_asc).powf(T::lit(1.5));
        err = if scale < T::one() {
            res_asc * scale
        } else {
            res_asc
        };
    }
    let min_err = T::lit(50.0) * T::epsilon() * res_abs;
    if res_abs > T::min_positive_value() / (T::lit(50.0) * T::epsilon()) && min_err > err {
        err = min_err;
    }
    err
}

/// One 15-point Gauss–Kronrod panel: value, discretization error and the
/// Kronrod integral of the integrand's own error.
fn gk15<T, F>(f: &mut F, a: T, b: T) -> Result<(T, T, T)>
where
    T: Real,
    F: FnMut(T) -> Result<Estimate<T>>,
{
    let center = (a + b) * T::lit(0.5);
    let half = (b - a) * T::lit(0.5);
    let fc = f(center)?;
    let mut res_k = fc.value * T::lit(WGK[7]);
    let mut res_g = fc.value * T::lit(WG[3]);
    let mut res_abs = fc.value.abs() * T::lit(WGK[7]);
    let mut inner_err = fc.error.abs() * T::lit(WGK[7]);
    let mut fv1 = [T::zero(); 7];
    let mut fv2 = [T::zero(); 7];
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1.value;
        fv2[j] = f2.value;
        let wk = T::lit(WGK[j]);
        res_k = res_k + wk * (f1.value + f2.value);
        res_abs = res_abs + wk * (f1.value.abs() + f2.value.abs());
        inner_err = inner_err + wk * (f1.error.abs() + f2.error.abs());
        if j % 2 == 1 {
            res_g = res_g + T::lit(WG[j / 2]) * (f1.value + f2.value);
        }
    }
    let mean = res_k * T::lit(0.5);
    let mut res_asc = T::lit(WGK[7]) * (fc.value - mean).abs();
    for j in 0..7 {
        res_asc = res_asc + T::lit(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let h = half.abs();
    let err = rescale_error((res_k - res_g) * half, res_abs * h, res_asc * h);
    Ok((res_k * half, err, inner_err * h))
}

/// Adaptive integral of a fallible integrand that reports its own error.
///
/// Subdivision stops once the discretization error meets the tolerance;
/// the integrated error of the integrand is added to the reported bound
/// but does not drive refinement, since splitting cannot reduce it.
pub fn integrate_estimates<T, F>(
    mut f: F,
    a: T,
    b: T,
    breakpoints: &[T],
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>>
where
    T: Real,
    F: FnMut(T) -> Result<Estimate<T>>,
{
    if !(b > a) {
        return Ok(Estimate::exact(T::zero()));
    }
    let mut cuts: Vec<T> = breakpoints
        .iter()
        .copied()
        .filter(|&c| c > a && c < b)
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    let mut done = (T::zero(), T::zero(), T::zero());
    let mut total = T::zero();
    let mut total_err = T::zero();
    let mut lo = a;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        let (v, e, c) = gk15(&mut f, lo, hi)?;
        total = total + v;
        total_err = total_err + e;
        heap.push(Segment {
            a: lo,
            b: hi,
            value: v,
            error: e,
            carried: c,
        });
        lo = hi;
    }
    let mut subdivisions = heap.len();
    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        let Some(seg) = heap.pop() else {
            return Err(Error::NonConvergent {
                value: total.as_f64(),
                error: total_err.as_f64(),
                subdivisions,
            });
        };
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::NonConvergent {
                value: total.as_f64(),
                error: total_err.as_f64(),
                subdivisions,
            });
        }
        let mid = (seg.a + seg.b) * T::lit(0.5);
        if !(mid > seg.a && mid < seg.b) {
            // cannot split further at this precision
            done = (done.0 + seg.value, done.1 + seg.error, done.2 + seg.carried);
            continue;
        }
        let (v1, e1, c1) = gk15(&mut f, seg.a, mid)?;
        let (v2, e2, c2) = gk15(&mut f, mid, seg.b)?;
        total = total - seg.value + v1 + v2;
        total_err = total_err - seg.error + e1 + e2;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
            carried: c1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
            carried: c2,
        });
        subdivisions += 1;
    }
    // recompute from the parts to shed accumulated cancellation
    let (mut value, mut error, mut carried) = done;
    for seg in heap {
        value = value + seg.value;
        error = error + seg.error;
        carried = carried + seg.carried;
    }
    Ok(Estimate {
        value,
        error: error + carried,
    })
}

/// Adaptive integral of a plain function on `[a, b]`.
pub fn integrate<T, F>(
    mut f: F,
    a: T,
    b: T,
    breakpoints: &[T],
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>>
where
    T: Real,
    F: FnMut(T) -> T,
{
    integrate_estimates(|x| Ok(Estimate::exact(f(x))), a, b, breakpoints, spec)
}

/// `∫_{R^d} h(|y|) dy = ω_d ∫_0^∞ r^{d-1} h(r) dr`.
pub fn radial_integral<T: Real>(
    h: &ConnectionFunction<T>,
    d: Dimension,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    if h.is_zero() {
        return Ok(Estimate::exact(T::zero()));
    }
    let cutoff = h.tail_radius(spec.tail_eps, d);
    let lo = h.inner_cut();
    let omega = d.sphere_area::<T>();
    let est = integrate(
        |r| d.radial_weight(r) * h.eval(r),
        lo,
        cutoff,
        &h.cut_radii(),
        spec,
    )?;
    let tail = h.tail_mass(cutoff, d);
    Ok(Estimate::new(est.value * omega, est.error * omega + tail))
}

/// `O(s) = ∫_{R^d} h1(|y|) h2(|y - s e_1|) dy`.
pub fn overlap_integral<T: Real>(
    h1: &ConnectionFunction<T>,
    h2: &ConnectionFunction<T>,
    s: T,
    d: Dimension,
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>> {
    if s < T::zero() {
        return Err(Error::pre("separation must be >= 0"));
    }
    if h1.is_zero() || h2.is_zero() {
        return Ok(Estimate::exact(T::zero()));
    }
    let half_eps = spec.tail_eps * T::lit(0.5);
    let t1 = h1.tail_radius(half_eps, d);
    let t2 = h2.tail_radius(half_eps, d);
    let tail = h1.tail_mass(t1, d) + h2.tail_mass(t2, d);
    let cuts1 = h1.cut_radii();
    let cuts2 = h2.cut_radii();
    let inner = spec.inner();

    let est = match d.get() {
        1 => {
            let lo = (-t1).max(s - t2);
            let hi = t1.min(s + t2);
            let mut bps = vec![T::zero(), s];
            for &c in &cuts1 {
                bps.push(c);
                bps.push(-c);
            }
            for &c in &cuts2 {
                bps.push(s + c);
                bps.push(s - c);
            }
            integrate(
                |y| h1.eval(y.abs()) * h2.eval((y - s).abs()),
                lo,
                hi,
                &bps,
                spec,
            )?
        }
        _ if s == T::zero() => {
            let omega = d.sphere_area::<T>();
            let mut bps = cuts1.clone();
            bps.extend(cuts2.iter().copied());
            let hi = t1.min(t2);
            integrate(
                |r| d.radial_weight(r) * h1.eval(r) * h2.eval(r),
                T::zero(),
                hi,
                &bps,
                spec,
            )?
            .scale(omega)
        }
        dd => {
            let lo = (s - t2).max(T::zero()).max(h1.inner_cut());
            let hi = t1.min(s + t2);
            let mut bps = cuts1.clone();
            bps.push(s);
            for &c in &cuts2 {
                bps.push((s - c).abs());
                bps.push(s + c);
            }
            if dd == 2 {
                // 2 ∫_0^π h2(ρ(r,θ)) dθ for the circle of radius r
                let angular = |r: T| -> Result<Estimate<T>> {
                    let w = r * h1.eval(r);
                    if w == T::zero() {
                        return Ok(Estimate::exact(T::zero()));
                    }
                    let two_rs = T::lit(2.0) * r * s;
                    let mut abps = Vec::new();
                    for &c in &cuts2 {
                        let cos = (r * r + s * s - c * c) / two_rs;
                        if cos > -T::one() && cos < T::one() {
                            abps.push(cos.acos());
                        }
                    }
                    let diff = r - s;
                    let inner_est = integrate(
                        |theta: T| {
                            let sh = (theta * T::lit(0.5)).sin();
                            let rho = (diff * diff + T::lit(2.0) * two_rs * sh * sh).sqrt();
                            h2.eval(rho)
                        },
                        T::zero(),
                        T::PI(),
                        &abps,
                        &inner,
                    )?;
                    Ok(inner_est.scale(T::lit(2.0) * w))
                };
                integrate_estimates(angular, lo, hi, &bps, spec)?
            } else {
                // 2π ∫ r^2 h1(r) (1/(rs)) ∫_{|r-s|}^{r+s} h2(ρ) ρ dρ dr
                let shell = |r: T| -> Result<Estimate<T>> {
                    let w = r * h1.eval(r);
                    if w == T::zero() {
                        return Ok(Estimate::exact(T::zero()));
                    }
                    let inner_est = integrate(
                        |rho: T| h2.eval(rho) * rho,
                        (r - s).abs(),
                        r + s,
                        &cuts2,
                        &inner,
                    )?;
                    Ok(inner_est.scale(T::lit(2.0) * T::PI() * w / s))
                };
                integrate_estimates(shell, lo, hi, &bps, spec)?
            }
        }
    };
    Ok(Estimate::new(est.value, est.error + tail))
}

/// `∫_0^{π/2} (a1 - ρ cos φ)_+ (a2 - ρ sin φ)_+ dφ`, in closed form.
fn quarter_rectangle_profile<T: Real>(a1: T, a2: T, rho: T) -> T {
    if rho == T::zero() {
        return a1 * a2 * T::FRAC_PI_2();
    }
    let lo = (a1 / rho).min(T::one()).acos();
    let hi = (a2 / rho).min(T::one()).asin();
    if !(hi > lo) {
        return T::zero();
    }
    let anti = |phi: T| {
        let (s, c) = phi.sin_cos();
        a1 * a2 * phi + a1 * rho * c - a2 * rho * s + rho * rho * s * s * T::lit(0.5)
    };
    (anti(hi) - anti(lo)).max(T::zero())
}

/// Spherical integral of the box covariogram: `∫_{S^{d-1}} c_K(ρ u) dσ(u)`.
pub fn isotropic_covariogram<T: Real>(
    k: &Region<T>,
    rho: T,
    spec: &QuadratureSpec<T>,
) -> Result<T> {
    let a = k.sides();
    match k.dim().get() {
        1 => Ok(T::lit(2.0) * (a[0] - rho).max(T::zero())),
        2 => Ok(T::lit(4.0) * quarter_rectangle_profile(a[0], a[1], rho)),
        _ => {
            if rho == T::zero() {
                return Ok(T::lit(4.0) * T::PI() * k.volume());
            }
            let mut bps = Vec::new();
            if a[2] < rho {
                bps.push((a[2] / rho).acos());
            }
            for &ai in &a[..2] {
                if ai < rho {
                    bps.push((ai / rho).asin());
                }
            }
            let est = integrate(
                |theta: T| {
                    let (s, c) = theta.sin_cos();
                    s * (a[2] - rho * c).max(T::zero())
                        * quarter_rectangle_profile(a[0], a[1], rho * s)
                },
                T::zero(),
                T::FRAC_PI_2(),
                &bps,
                &spec.inner(),
            )?;
            Ok(T::lit(8.0) * est.value)
        }
    }
}

/// `∫_K ∫_K F(|x1 - x2|) dx2 dx1 = ∫_0^{diam K} F(ρ) ρ^{d-1} C̄_K(ρ) dρ`.
///
/// `breakpoints` are radii where `F` is not smooth; the side lengths of
/// `K` are added automatically.
pub fn double_region_integral<T, F>(
    mut f: F,
    k: &Region<T>,
    breakpoints: &[T],
    spec: &QuadratureSpec<T>,
) -> Result<Estimate<T>>
where
    T: Real,
    F: FnMut(T) -> Result<Estimate<T>>,
{
    let d = k.dim();
    let mut bps: Vec<T> = breakpoints.to_vec();
    bps.extend(k.sides().iter().copied());
    if d.get() == 3 {
        let s = k.sides();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            bps.push((s[i] * s[i] + s[j] * s[j]).sqrt());
        }
    } else if d.get() == 2 {
        bps.push(k.diameter());
    }
    integrate_estimates(
        |rho| {
            let w = d.radial_weight(rho) * isotropic_covariogram(k, rho, spec)?;
            if w == T::zero() {
                return Ok(Estimate::exact(T::zero()));
            }
            Ok(f(rho)?.scale(w))
        },
        T::zero(),
        k.diameter(),
        &bps,
        spec,
    )
}
