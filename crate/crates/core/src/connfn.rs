//! Radial connection functions and their truncation/scaling transforms.
//!
//! A [`ConnectionFunction`] is a builtin or tabulated base profile followed by
//! a symbolic stack of transforms. Keeping the stack symbolic means indicator
//! cut-offs are evaluated exactly (`1{x <= R}` is closed on the left) and the
//! quadrature layer can ask for the exact cut radii.
//!
//! Transforms act on the function, in order. Starting from `f_0 = base`:
//!
//! * `TruncateInside(R)`:  `f_{k+1}(x) = 1{x <= R} f_k(x)`
//! * `TruncateOutside(R)`: `f_{k+1}(x) = 1{x > R} f_k(x)`
//! * `Scale(n)`:           `f_{k+1}(x) = f_k(n x)`
//!
//! So `[TruncateInside(R), Scale(n)]` is `1{x <= R/n} g(nx)` while
//! `[Scale(n), TruncateInside(R)]` is `1{x <= R} g(nx)`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::scalar::{Dimension, Real};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum BaseKind<T> {
    /// `1{x <= a}`
    HardDisk {
        range: T,
    },
    /// `exp(-x/a)`
    Exponential {
        scale: T,
    },
    /// `exp(-(x/a)^2)`
    Gaussian {
        scale: T,
    },
    Table(TableProfile<T>),
}

/// Monotone piecewise-linear profile.
///
/// Linear between knots, constant at the last knot value up to `tail`, and
/// zero beyond `tail`. The tail radius is mandatory: monotonicity alone does
/// not make the profile integrable.
#[derive(Clone, Debug, PartialEq)]
pub struct TableProfile<T> {
    radii: Vec<T>,
    values: Vec<T>,
    tail: T,
}

impl<T: Real> TableProfile<T> {
    pub fn new(knots: Vec<(T, T)>, tail: T) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::param("table needs at least one knot"));
        }
        if knots[0].0 != T::zero() {
            return Err(Error::param("table must start at radius 0"));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::param("table radii must be strictly increasing"));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::param("table values must be non-increasing"));
            }
        }
        if knots.iter().any(|&(_, v)| v < T::zero() || v > T::one()) {
            return Err(Error::param("table values must lie in [0, 1]"));
        }
        let last = knots[knots.len() - 1].0;
        if !(tail >= last) || !tail.is_finite() {
            return Err(Error::param(
                "table tail radius must be finite and >= last knot",
            ));
        }
        let (radii, values) = knots.into_iter().unzip();
        Ok(TableProfile {
            radii,
            values,
            tail,
        })
    }

    pub fn tail(&self) -> T {
        self.tail
    }

    pub fn knots(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.radii.iter().copied().zip(self.values.iter().copied())
    }

    fn eval(&self, x: T) -> T {
        if x > self.tail {
            return T::zero();
        }
        let n = self.radii.len();
        if x >= self.radii[n - 1] {
            return self.values[n - 1];
        }
        // first knot strictly greater than x
        let hi = self.radii.partition_point(|&r| r <= x);
        let lo = hi - 1;
        let (r0, r1) = (self.radii[lo], self.radii[hi]);
        let (v0, v1) = (self.values[lo], self.values[hi]);
        v0 + (v1 - v0) * (x - r0) / (r1 - r0)
    }

    fn support(&self) -> T {
        match self.values.iter().position(|&v| v == T::zero()) {
            Some(i) => self.radii[i],
            None => self.tail,
        }
    }
}

impl<T: Real> BaseKind<T> {
    fn eval(&self, x: T) -> T {
        match self {
            BaseKind::HardDisk { range } => {
                if x <= *range {
                    T::one()
                } else {
                    T::zero()
                }
            }
            BaseKind::Exponential { scale } => (-x / *scale).exp(),
            BaseKind::Gaussian { scale } => {
                let u = x / *scale;
                (-u * u).exp()
            }
            BaseKind::Table(t) => t.eval(x),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            BaseKind::HardDisk { .. } => "hard-disk",
            BaseKind::Exponential { .. } => "exponential",
            BaseKind::Gaussian { .. } => "gaussian",
            BaseKind::Table(_) => "table",
        }
    }

    /// Support radius of the base profile, if bounded.
    pub fn support(&self) -> Option<T> {
        match self {
            BaseKind::HardDisk { range } => Some(*range),
            BaseKind::Table(t) => Some(t.support()),
            _ => None,
        }
    }

    fn breakpoints(&self) -> Vec<T> {
        match self {
            BaseKind::HardDisk { range } => vec![*range],
            BaseKind::Table(t) => t
                .radii
                .iter()
                .copied()
                .skip(1)
                .chain(std::iter::once(t.tail))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Upper bound on `∫_{|y|>t} base(|y|) dy` in R^d.
    fn tail_mass(&self, t: f64, d: Dimension) -> f64 {
        use statrs::function::erf::erfc;
        use std::f64::consts::PI;
        let t = t.max(0.0);
        match self {
            BaseKind::HardDisk { range } => {
                let a = range.as_f64();
                if t >= a {
                    0.0
                } else {
                    d.ball_volume::<f64>() * (d.pow(a) - d.pow(t))
                }
            }
            BaseKind::Exponential { scale } => {
                let a = scale.as_f64();
                let u = t / a;
                let e = (-u).exp();
                match d.get() {
                    1 => 2.0 * a * e,
                    2 => 2.0 * PI * a * a * (1.0 + u) * e,
                    _ => 4.0 * PI * a * a * a * (u * u + 2.0 * u + 2.0) * e,
                }
            }
            BaseKind::Gaussian { scale } => {
                let a = scale.as_f64();
                let u = t / a;
                match d.get() {
                    1 => a * PI.sqrt() * erfc(u),
                    2 => PI * a * a * (-u * u).exp(),
                    _ => {
                        4.0 * PI
                            * a.powi(3)
                            * (0.5 * u * (-u * u).exp() + 0.25 * PI.sqrt() * erfc(u))
                    }
                }
            }
            BaseKind::Table(tab) => {
                let tail = tab.tail.as_f64();
                if t >= tail {
                    0.0
                } else {
                    tab.eval(T::lit(t)).as_f64() * d.ball_volume::<f64>() * (d.pow(tail) - d.pow(t))
                }
            }
        }
    }

    /// Smallest radius `T` (up to bisection resolution, erring outward) with
    /// tail mass at most `eps`.
    fn tail_radius(&self, eps: f64, d: Dimension) -> f64 {
        if !(eps > 0.0) {
            return match self.support() {
                Some(s) => s.as_f64(),
                None => f64::INFINITY,
            };
        }
        let eps = eps * (1.0 - 1e-6);
        if self.tail_mass(0.0, d) <= eps {
            return 0.0;
        }
        let mut hi = match self {
            BaseKind::HardDisk { range } => range.as_f64(),
            BaseKind::Table(t) => t.tail.as_f64(),
            BaseKind::Exponential { scale } | BaseKind::Gaussian { scale } => scale.as_f64(),
        };
        while self.tail_mass(hi, d) > eps {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.tail_mass(mid, d) > eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Transform<T> {
    TruncateInside(T),
    TruncateOutside(T),
    Scale(T),
}

/// Radial, non-increasing, `[0,1]`-valued connection function.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionFunction<T> {
    base: BaseKind<T>,
    transforms: Vec<Transform<T>>,
}

impl<T: Real> ConnectionFunction<T> {
    fn from_base(base: BaseKind<T>) -> Result<Self> {
        match &base {
            BaseKind::HardDisk { range: a }
            | BaseKind::Exponential { scale: a }
            | BaseKind::Gaussian { scale: a } => {
                if !(*a > T::zero()) || !a.is_finite() {
                    return Err(Error::param(
                        "connection-function scale must be positive and finite",
                    ));
                }
            }
            BaseKind::Table(t) => {
                if t.support() <= T::zero() {
                    return Err(Error::param("table profile has zero integral"));
                }
            }
        }
        Ok(ConnectionFunction {
            base,
            transforms: Vec::new(),
        })
    }

    pub fn hard_disk(range: T) -> Result<Self> {
        Self::from_base(BaseKind::HardDisk { range })
    }

    pub fn exponential(scale: T) -> Result<Self> {
        Self::from_base(BaseKind::Exponential { scale })
    }

    pub fn gaussian(scale: T) -> Result<Self> {
        Self::from_base(BaseKind::Gaussian { scale })
    }

    pub fn table(knots: Vec<(T, T)>, tail: T) -> Result<Self> {
        Self::from_base(BaseKind::Table(TableProfile::new(knots, tail)?))
    }

    pub fn base(&self) -> &BaseKind<T> {
        &self.base
    }

    pub fn transforms(&self) -> &[Transform<T>] {
        &self.transforms
    }

    /// The base profile with the transform stack removed.
    pub fn base_function(&self) -> Self {
        ConnectionFunction {
            base: self.base.clone(),
            transforms: Vec::new(),
        }
    }

    pub fn then(mut self, t: Transform<T>) -> Result<Self> {
        match t {
            Transform::TruncateInside(r) | Transform::TruncateOutside(r) => {
                if !(r >= T::zero()) {
                    return Err(Error::param("truncation radius must be >= 0"));
                }
            }
            Transform::Scale(n) => {
                if !(n > T::zero()) || !n.is_finite() {
                    return Err(Error::param("scale factor must be positive and finite"));
                }
            }
        }
        self.transforms.push(t);
        Ok(self)
    }

    /// `1{x <= r} f(x)`
    pub fn inside(&self, r: T) -> Result<Self> {
        self.clone().then(Transform::TruncateInside(r))
    }

    /// `1{x > r} f(x)`
    pub fn outside(&self, r: T) -> Result<Self> {
        self.clone().then(Transform::TruncateOutside(r))
    }

    /// `f(n x)`
    pub fn scaled(&self, n: T) -> Result<Self> {
        self.clone().then(Transform::Scale(n))
    }

    /// Value of the composed stack at radius `x >= 0`.
    pub fn eval(&self, x: T) -> T {
        debug_assert!(!(x < T::zero()), "radius must be non-negative");
        let mut x = x;
        for t in self.transforms.iter().rev() {
            match *t {
                Transform::Scale(n) => x = x * n,
                Transform::TruncateInside(r) => {
                    if !(x <= r) {
                        return T::zero();
                    }
                }
                Transform::TruncateOutside(r) => {
                    if x <= r {
                        return T::zero();
                    }
                }
            }
        }
        self.base.eval(x)
    }

    /// Product of all scale factors in the stack.
    pub fn scale_product(&self) -> T {
        self.transforms.iter().fold(T::one(), |acc, t| match *t {
            Transform::Scale(n) => acc * n,
            _ => acc,
        })
    }

    /// Visits each truncation with its cut radius expressed in the
    /// coordinates of the final function.
    fn for_each_cut(&self, mut visit: impl FnMut(&Transform<T>, T)) {
        let mut later_scale = T::one();
        for t in self.transforms.iter().rev() {
            match *t {
                Transform::Scale(n) => later_scale = later_scale * n,
                Transform::TruncateInside(r) | Transform::TruncateOutside(r) => {
                    visit(t, r / later_scale)
                }
            }
        }
    }

    /// Radii where the function may be discontinuous or kinked: truncation
    /// cuts and base breakpoints, sorted and deduplicated.
    pub fn cut_radii(&self) -> Vec<T> {
        let s = self.scale_product();
        let mut cuts: Vec<T> = self.base.breakpoints().into_iter().map(|b| b / s).collect();
        self.for_each_cut(|_, r| cuts.push(r));
        cuts.retain(|r| *r > T::zero() && r.is_finite());
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cut radii"));
        cuts.dedup();
        cuts
    }

    /// Radius beyond which the function vanishes, if it has bounded support.
    pub fn support_radius(&self) -> Option<T> {
        let mut support = self.base.support().map(|b| b / self.scale_product());
        self.for_each_cut(|t, r| {
            if let Transform::TruncateInside(_) = t {
                support = Some(support.map_or(r, |s: T| s.min(r)));
            }
        });
        support
    }

    /// Largest outside-truncation cut: the function is 0 on `[0, cut]`.
    pub fn inner_cut(&self) -> T {
        let mut cut = T::zero();
        self.for_each_cut(|t, r| {
            if let Transform::TruncateOutside(_) = t {
                cut = cut.max(r);
            }
        });
        cut
    }

    /// True when the function vanishes almost everywhere.
    pub fn is_zero(&self) -> bool {
        match self.support_radius() {
            Some(s) => s <= T::zero() || s <= self.inner_cut(),
            None => false,
        }
    }

    /// Upper bound on `∫_{|y|>t} f(|y|) dy`.
    pub fn tail_mass(&self, t: T, d: Dimension) -> T {
        if self.is_zero() {
            return T::zero();
        }
        if let Some(s) = self.support_radius() {
            if t >= s {
                return T::zero();
            }
        }
        let scale = self.scale_product().as_f64();
        let m = self.base.tail_mass(t.as_f64() * scale, d) / d.pow(scale);
        T::lit(m)
    }

    /// Radius `T(eps)` with `∫_{|y|>T} f(|y|) dy <= eps`.
    pub fn tail_radius(&self, eps: T, d: Dimension) -> T {
        if self.is_zero() {
            return T::zero();
        }
        let t = self.base_tail_radius(eps, d);
        match self.support_radius() {
            Some(s) => s.min(t),
            None => t,
        }
    }

    /// Tail radius of the scaled base profile, ignoring truncations in the
    /// stack. Equal for every truncation of the same scaled base, which lets
    /// coupled simulations use identical cut-off predicates.
    pub fn range_cutoff(&self, eps: T, d: Dimension) -> T {
        if self.is_zero() {
            return T::zero();
        }
        self.base_tail_radius(eps, d)
    }

    fn base_tail_radius(&self, eps: T, d: Dimension) -> T {
        let s = self.scale_product().as_f64();
        match self.base.support() {
            Some(b) => b / self.scale_product(),
            None => T::lit(self.base.tail_radius(eps.as_f64() * d.pow(s), d) / s),
        }
    }

    /// Checks `0 <= f <= 1` on the given radius grid (which need not be
    /// sorted), that `f` vanishes up to the inner cut of any outside
    /// truncation and is non-increasing beyond it.
    pub fn check_shape_on(&self, grid: &[T]) -> Result<()> {
        let mut pts: Vec<T> = grid.to_vec();
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
        let inner = self.inner_cut();
        let mut has_outside = false;
        self.for_each_cut(|t, _| has_outside |= matches!(t, Transform::TruncateOutside(_)));
        let mut prev = T::infinity();
        for &x in &pts {
            let v = self.eval(x);
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::param(format!(
                    "value {v} at radius {x} outside [0,1]"
                )));
            }
            if has_outside && x <= inner {
                if v != T::zero() {
                    return Err(Error::param(format!(
                        "nonzero value inside the inner cut at radius {x}"
                    )));
                }
                continue;
            }
            if v > prev {
                return Err(Error::param(format!("function increases at radius {x}")));
            }
            prev = v;
        }
        Ok(())
    }

    /// Serializes to the `key=value` grammar understood by [`FromStr`].
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "kind={}", self.base.name());
        match &self.base {
            BaseKind::HardDisk { range: a }
            | BaseKind::Exponential { scale: a }
            | BaseKind::Gaussian { scale: a } => {
                let _ = writeln!(out, "scale={a}");
            }
            BaseKind::Table(t) => {
                let knots: Vec<String> = t.knots().map(|(r, v)| format!("{r}:{v}")).collect();
                let _ = writeln!(out, "table={}", knots.join(","));
                let _ = writeln!(out, "tail={}", t.tail);
            }
        }
        let ts: Vec<String> = self
            .transforms
            .iter()
            .map(|t| match t {
                Transform::TruncateInside(r) => format!("inside:{r}"),
                Transform::TruncateOutside(r) => format!("outside:{r}"),
                Transform::Scale(n) => format!("scale:{n}"),
            })
            .collect();
        let _ = writeln!(out, "transforms={}", ts.join(","));
        out
    }

    /// Builds a function from `(key, value, line)` triples, as found in a
    /// config section. Unknown keys are rejected.
    pub fn from_entries<'a>(
        entries: impl IntoIterator<Item = (&'a str, &'a str, usize)>,
    ) -> Result<Self> {
        let mut kind = None;
        let mut scale = None;
        let mut table = None;
        let mut tail = None;
        let mut transforms = None;
        for (key, value, line) in entries {
            let slot = match key {
                "kind" => &mut kind,
                "scale" => &mut scale,
                "table" => &mut table,
                "tail" => &mut tail,
                "transforms" => &mut transforms,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown connection-function key `{other}`"),
                    })
                }
            };
            *slot = Some((value.trim(), line));
        }
        let (kind, kind_line) = kind.ok_or_else(|| Error::Parse {
            line: 0,
            msg: "connection function needs `kind`".into(),
        })?;
        let num = |s: &str, line: usize| -> Result<T> {
            s.trim().parse::<T>().map_err(|_| Error::Parse {
                line,
                msg: format!("`{s}` is not a number"),
            })
        };
        let scaled = |ctor: fn(T) -> Result<Self>| -> Result<Self> {
            let (s, line) = scale.ok_or_else(|| Error::Parse {
                line: kind_line,
                msg: format!("`{kind}` needs `scale`"),
            })?;
            ctor(num(s, line)?).map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })
        };
        let mut f = match kind {
            "hard-disk" => scaled(Self::hard_disk)?,
            "exponential" => scaled(Self::exponential)?,
            "gaussian" => scaled(Self::gaussian)?,
            "table" => {
                let (tab, line) = table.ok_or_else(|| Error::Parse {
                    line: kind_line,
                    msg: "`table` kind needs `table`".into(),
                })?;
                let mut knots = Vec::new();
                for item in tab.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let (r, v) = item.split_once(':').ok_or_else(|| Error::Parse {
                        line,
                        msg: format!("table knot `{item}` is not radius:value"),
                    })?;
                    knots.push((num(r, line)?, num(v, line)?));
                }
                let (tl, tline) = tail.ok_or(Error::MissingTail)?;
                Self::table(knots, num(tl, tline)?).map_err(|e| Error::Parse {
                    line,
                    msg: e.to_string(),
                })?
            }
            other => {
                return Err(Error::Parse {
                    line: kind_line,
                    msg: format!("unknown connection-function kind `{other}`"),
                })
            }
        };
        if let Some((ts, line)) = transforms {
            for item in ts.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (op, arg) = item.split_once(':').ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("transform `{item}` is not op:value"),
                })?;
                let arg = num(arg, line)?;
                let t = match op.trim() {
                    "inside" => Transform::TruncateInside(arg),
                    "outside" => Transform::TruncateOutside(arg),
                    "scale" => Transform::Scale(arg),
                    other => {
                        return Err(Error::Parse {
                            line,
                            msg: format!("unknown transform `{other}`"),
                        })
                    }
                };
                f = f.then(t).map_err(|e| Error::Parse {
                    line,
                    msg: e.to_string(),
                })?;
            }
        }
        Ok(f)
    }

    pub fn to_f64(&self) -> ConnectionFunction<f64> {
        let c = |x: T| x.as_f64();
        let base = match &self.base {
            BaseKind::HardDisk { range } => BaseKind::HardDisk { range: c(*range) },
            BaseKind::Exponential { scale } => BaseKind::Exponential { scale: c(*scale) },
            BaseKind::Gaussian { scale } => BaseKind::Gaussian { scale: c(*scale) },
            BaseKind::Table(t) => BaseKind::Table(TableProfile {
                radii: t.radii.iter().map(|&r| c(r)).collect(),
                values: t.values.iter().map(|&v| c(v)).collect(),
                tail: c(t.tail),
            }),
        };
        let transforms = self
            .transforms
            .iter()
            .map(|t| match *t {
                Transform::TruncateInside(r) => Transform::TruncateInside(c(r)),
                Transform::TruncateOutside(r) => Transform::TruncateOutside(c(r)),
                Transform::Scale(n) => Transform::Scale(c(n)),
            })
            .collect();
        ConnectionFunction { base, transforms }
    }
}

impl ConnectionFunction<f64> {
    pub fn to_f32(&self) -> ConnectionFunction<f32> {
        let c = |x: f64| x as f32;
        let base = match &self.base {
            BaseKind::HardDisk { range } => BaseKind::HardDisk { range: c(*range) },
            BaseKind::Exponential { scale } => BaseKind::Exponential { scale: c(*scale) },
            BaseKind::Gaussian { scale } => BaseKind::Gaussian { scale: c(*scale) },
            BaseKind::Table(t) => BaseKind::Table(TableProfile {
                radii: t.radii.iter().map(|&r| c(r)).collect(),
                values: t.values.iter().map(|&v| c(v)).collect(),
                tail: c(t.tail),
            }),
        };
        let transforms = self
            .transforms
            .iter()
            .map(|t| match *t {
                Transform::TruncateInside(r) => Transform::TruncateInside(c(r)),
                Transform::TruncateOutside(r) => Transform::TruncateOutside(c(r)),
                Transform::Scale(n) => Transform::Scale(c(n)),
            })
            .collect();
        ConnectionFunction { base, transforms }
    }
}

impl<T: Real> FromStr for ConnectionFunction<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key=value, got `{line}`"),
            })?;
            entries.push((k.trim(), v.trim(), i + 1));
        }
        Self::from_entries(entries)
    }
}

impl<T: Real> fmt::Display for ConnectionFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.base {
            BaseKind::HardDisk { range } => write!(f, "hard-disk({range})")?,
            BaseKind::Exponential { scale } => write!(f, "exponential({scale})")?,
            BaseKind::Gaussian { scale } => write!(f, "gaussian({scale})")?,
            BaseKind::Table(t) => write!(f, "table[{} knots, tail {}]", t.radii.len(), t.tail)?,
        }
        for t in &self.transforms {
            match t {
                Transform::TruncateInside(r) => write!(f, " |<={r}")?,
                Transform::TruncateOutside(r) => write!(f, " |>{r}")?,
                Transform::Scale(n) => write!(f, " *{n}")?,
            }
        }
        Ok(())
    }
}

/// Named truncation/scaling variants of a connection function `g`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `1{x <= R} g(x)`
    Inside,
    /// `1{x > R} g(x)`
    Outside,
    /// `g(n x)`
    Scaled,
    /// `1{x <= R/n} g(n x)`: truncate at `R`, then scale.
    ScaledThenTruncated,
    /// `1{x > R/n} g(n x)`
    ScaledThenTruncatedOutside,
    /// `1{x <= R} g(n x)`: scale, then truncate at `R`.
    TruncatedThenScaled,
    /// `1{x > R} g(n x)`
    TruncatedThenScaledOutside,
    /// `1{x <= nR} g(x)`
    WideInside,
    /// `1{x > nR} g(x)`
    WideOutside,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::Inside,
        Variant::Outside,
        Variant::Scaled,
        Variant::ScaledThenTruncated,
        Variant::ScaledThenTruncatedOutside,
        Variant::TruncatedThenScaled,
        Variant::TruncatedThenScaledOutside,
        Variant::WideInside,
        Variant::WideOutside,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Inside => "inside_R",
            Variant::Outside => "outside_R",
            Variant::Scaled => "scaled_n",
            Variant::ScaledThenTruncated => "scaled_then_truncated",
            Variant::ScaledThenTruncatedOutside => "scaled_then_truncated_outside",
            Variant::TruncatedThenScaled => "truncated_then_scaled",
            Variant::TruncatedThenScaledOutside => "truncated_then_scaled_outside",
            Variant::WideInside => "k_inside",
            Variant::WideOutside => "k_outside",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidVariant(s.to_string()))
    }
}

/// Builds the named variant of `f` for radius `r > 0` and scale `n >= 1`.
pub fn make_variant<T: Real>(
    f: &ConnectionFunction<T>,
    variant: Variant,
    r: T,
    n: T,
) -> Result<ConnectionFunction<T>> {
    if !(r > T::zero()) {
        return Err(Error::param("variant radius must be positive"));
    }
    if !(n >= T::one()) {
        return Err(Error::param("variant scale must be >= 1"));
    }
    use Transform::*;
    let stack: &[Transform<T>] = match variant {
        Variant::Inside => &[TruncateInside(r)],
        Variant::Outside => &[TruncateOutside(r)],
        Variant::Scaled => &[Scale(n)],
        Variant::ScaledThenTruncated => &[TruncateInside(r), Scale(n)],
        Variant::ScaledThenTruncatedOutside => &[TruncateOutside(r), Scale(n)],
        Variant::TruncatedThenScaled => &[Scale(n), TruncateInside(r)],
        Variant::TruncatedThenScaledOutside => &[Scale(n), TruncateOutside(r)],
        Variant::WideInside => &[TruncateInside(n * r)],
        Variant::WideOutside => &[TruncateOutside(n * r)],
    };
    stack.iter().try_fold(f.clone(), |acc, &t| acc.then(t))
}

/// Pointwise identities between the variants, checked exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Identity {
    /// `g_{R,n}(x) = g_R(n x)`
    ScaleOfTruncation,
    /// `g_{n,R}(x) = k_{nR}(n x)`
    TruncationOfScale,
    /// `g_R(x) + g^R(x) = g(x)`
    SplitUnscaled,
    /// `g_{R,n}(x) + g^{R,n}(x) = g_n(x)`
    SplitScaled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport<T> {
    pub points_checked: usize,
    pub first_violation: Option<(Identity, T)>,
}

impl<T> IdentityReport<T> {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }
}

pub fn verify_identities<T: Real>(
    f: &ConnectionFunction<T>,
    r: T,
    n: T,
    grid: &[T],
) -> Result<IdentityReport<T>> {
    let v = |variant| make_variant(f, variant, r, n);
    let g_r = v(Variant::Inside)?;
    let g_out = v(Variant::Outside)?;
    let g_n = v(Variant::Scaled)?;
    let g_rn = v(Variant::ScaledThenTruncated)?;
    let g_rn_out = v(Variant::ScaledThenTruncatedOutside)?;
    let g_nr = v(Variant::TruncatedThenScaled)?;
    let k_nr = v(Variant::WideInside)?;

    for &x in grid {
        let checks = [
            (Identity::ScaleOfTruncation, g_rn.eval(x), g_r.eval(n * x)),
            (Identity::TruncationOfScale, g_nr.eval(x), k_nr.eval(n * x)),
            (
                Identity::SplitUnscaled,
                g_r.eval(x) + g_out.eval(x),
                f.eval(x),
            ),
            (
                Identity::SplitScaled,
                g_rn.eval(x) + g_rn_out.eval(x),
                g_n.eval(x),
            ),
        ];
        if let Some((id, _, _)) = checks.iter().find(|(_, a, b)| a != b) {
            return Ok(IdentityReport {
                points_checked: grid.len(),
                first_violation: Some((*id, x)),
            });
        }
    }
    Ok(IdentityReport {
        points_checked: grid.len(),
        first_violation: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn exp1() -> ConnectionFunction<f64> {
        ConnectionFunction::exponential(1.0).unwrap()
    }

    #[test]
    fn eval_examples() {
        let disk = ConnectionFunction::hard_disk(1.0).unwrap();
        assert_eq!(disk.eval(0.5), 1.0);
        assert_eq!(disk.eval(1.0), 1.0);
        assert_eq!(disk.eval(1.0 + 1e-12), 0.0);
        assert_eq!(exp1().outside(1.0).unwrap().eval(0.5), 0.0);
        assert_abs_diff_eq!(
            exp1().scaled(2.0).unwrap().eval(0.5),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn variant_examples() {
        let g = exp1();
        let g_rn = make_variant(&g, Variant::ScaledThenTruncated, 2.0, 4.0).unwrap();
        assert_abs_diff_eq!(g_rn.eval(0.4), (-1.6f64).exp(), epsilon = 1e-15);
        assert_eq!(g_rn.eval(1.0), 0.0);
        let g_nr = make_variant(&g, Variant::TruncatedThenScaled, 2.0, 4.0).unwrap();
        assert_abs_diff_eq!(g_nr.eval(1.0), 0.018_315_638_888_734_18, epsilon = 1e-15);
        // the two orders differ: "scale then truncate" is not "truncate then scale"
        assert_ne!(g_nr.eval(1.0), g_rn.eval(1.0));

        let wide = make_variant(&g, Variant::Inside, f64::INFINITY, 1.0).unwrap();
        for i in 0..100 {
            let x = i as f64 * 0.37;
            assert_eq!(wide.eval(x), g.eval(x));
        }
    }

    #[test]
    fn variant_errors() {
        assert!(matches!(
            "nope".parse::<Variant>(),
            Err(Error::InvalidVariant(_))
        ));
        assert!(make_variant(&exp1(), Variant::Inside, 0.0, 1.0).is_err());
        assert!(make_variant(&exp1(), Variant::Scaled, 1.0, 0.5).is_err());
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn identities_hold_on_grid() {
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
        let rep = verify_identities(&exp1(), 2.0, 4.0, &grid).unwrap();
        assert!(rep.holds(), "{rep:?}");
        let disk = ConnectionFunction::hard_disk(1.0).unwrap();
        let rep = verify_identities(&disk, 0.5, 1.0, &grid).unwrap();
        assert!(rep.holds());
        let g_rn = make_variant(&disk, Variant::ScaledThenTruncated, 0.5, 1.0).unwrap();
        let g_r = make_variant(&disk, Variant::Inside, 0.5, 1.0).unwrap();
        for &x in &grid {
            assert_eq!(g_rn.eval(x), g_r.eval(x));
        }
    }

    #[test]
    fn cut_radii_in_final_coordinates() {
        let f = make_variant(&exp1(), Variant::ScaledThenTruncated, 2.0, 4.0).unwrap();
        assert_eq!(f.cut_radii(), vec![0.5]);
        assert_eq!(f.support_radius(), Some(0.5));
        let f = make_variant(&exp1(), Variant::TruncatedThenScaled, 2.0, 4.0).unwrap();
        assert_eq!(f.cut_radii(), vec![2.0]);
        let disk = ConnectionFunction::hard_disk(1.0)
            .unwrap()
            .scaled(4.0)
            .unwrap();
        assert_eq!(disk.cut_radii(), vec![0.25]);
        assert_eq!(disk.support_radius(), Some(0.25));
        let out = exp1().outside(1.0).unwrap().scaled(2.0).unwrap();
        assert_eq!(out.inner_cut(), 0.5);
        assert!(exp1().inside(0.0).unwrap().is_zero());
        assert!(ConnectionFunction::hard_disk(1.0)
            .unwrap()
            .outside(1.0)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn tail_radius_bounds_mass() {
        for d in [Dimension::ONE, Dimension::TWO, Dimension::THREE] {
            for f in [
                exp1(),
                ConnectionFunction::gaussian(0.7).unwrap(),
                exp1().scaled(3.0).unwrap(),
            ] {
                for eps in [1e-6, 1e-9] {
                    let t = f.tail_radius(eps, d);
                    assert!(f.tail_mass(t, d) <= eps * (1.0 + 1e-12));
                    assert!(f.tail_mass(t * 0.99, d) > eps);
                }
            }
        }
        let disk = ConnectionFunction::hard_disk(2.0)
            .unwrap()
            .scaled(4.0)
            .unwrap();
        assert_eq!(disk.tail_radius(1e-9, Dimension::TWO), 0.5);
        assert_eq!(disk.range_cutoff(1e-9, Dimension::TWO), 0.5);
        assert_eq!(exp1().tail_radius(f64::INFINITY, Dimension::ONE), 0.0);
    }

    #[test]
    fn range_cutoff_ignores_truncation() {
        let g_n = exp1().scaled(4.0).unwrap();
        let g_rn = make_variant(&exp1(), Variant::ScaledThenTruncated, 1.0, 4.0).unwrap();
        let d = Dimension::TWO;
        assert_eq!(g_n.range_cutoff(1e-8, d), g_rn.range_cutoff(1e-8, d));
        assert_eq!(g_rn.tail_radius(1e-8, d), 0.25);
    }

    #[test]
    fn table_profile() {
        let t = ConnectionFunction::table(vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.25)], 3.0).unwrap();
        assert_eq!(t.eval(0.5), 0.75);
        assert_eq!(t.eval(2.5), 0.25);
        assert_eq!(t.eval(3.0), 0.25);
        assert_eq!(t.eval(3.5), 0.0);
        assert_eq!(t.support_radius(), Some(3.0));
        assert_eq!(t.cut_radii(), vec![1.0, 2.0, 3.0]);
        assert!(ConnectionFunction::table(vec![(0.0, 0.5), (1.0, 0.7)], 2.0).is_err());
        assert!(ConnectionFunction::table(vec![(0.0, 1.0), (1.0, 0.5)], 0.5).is_err());
        assert!(matches!(
            "kind=table\ntable=0:1,1:0".parse::<ConnectionFunction<f64>>(),
            Err(Error::MissingTail)
        ));
    }

    #[test]
    fn kv_round_trip_examples() {
        let t = ConnectionFunction::table(vec![(0.0, 1.0), (0.5, 0.3)], 1.25)
            .unwrap()
            .outside(0.1)
            .unwrap();
        let back: ConnectionFunction<f64> = t.to_kv().parse().unwrap();
        assert_eq!(back, t);
        let err =
            "kind=exponential\nscale=1\ntransforms=twist:3".parse::<ConnectionFunction<f64>>();
        assert!(matches!(err, Err(Error::Parse { line: 3, .. })));
        assert!("kind=spiral\nscale=1"
            .parse::<ConnectionFunction<f64>>()
            .is_err());
    }

    fn arb_function() -> impl Strategy<Value = ConnectionFunction<f64>> {
        let base = prop_oneof![
            (0.1f64..3.0).prop_map(|a| ConnectionFunction::hard_disk(a).unwrap()),
            (0.1f64..3.0).prop_map(|a| ConnectionFunction::exponential(a).unwrap()),
            (0.1f64..3.0).prop_map(|a| ConnectionFunction::gaussian(a).unwrap()),
        ];
        let transform = prop_oneof![
            (0.0f64..5.0).prop_map(Transform::TruncateInside),
            (0.0f64..5.0).prop_map(Transform::TruncateOutside),
            (0.2f64..8.0).prop_map(Transform::Scale),
        ];
        (base, prop::collection::vec(transform, 0..4))
            .prop_map(|(b, ts)| ts.into_iter().fold(b, |f, t| f.then(t).unwrap()))
    }

    proptest! {
        #[test]
        fn stacks_stay_monotone_and_bounded(f in arb_function()) {
            let grid: Vec<f64> = (0..400).map(|i| i as f64 * 0.025).collect();
            prop_assert!(f.check_shape_on(&grid).is_ok());
        }

        #[test]
        fn kv_round_trip(f in arb_function()) {
            let back: ConnectionFunction<f64> = f.to_kv().parse().unwrap();
            prop_assert_eq!(back, f);
        }

        #[test]
        fn scale_truncate_identity_is_exact(r in 0.05f64..5.0, n in 1.0f64..16.0) {
            let grid: Vec<f64> = (0..500).map(|i| i as f64 * 0.01).collect();
            let rep = verify_identities(&exp1(), r, n, &grid).unwrap();
            prop_assert!(rep.holds(), "{:?}", rep);
        }
    }
}
