//! Coefficient fields `a(x)` of divergence-form operators `-div(a grad)`.
//!
//! A [`CoefficientProfile`] is an immutable description of a scalar or
//! 2x2 matrix field: a closed-form family, an optional translation and the
//! domain on which it is defined. Profiles know their exact ellipticity
//! bounds on any window and, for the built-in families, their limits at
//! infinity.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;

/// Domain of a profile: an interval of the line or a rectangle of the plane.
/// Infinite endpoints are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Domain {
    Interval { lo: f64, hi: f64 },
    Rect { lo: [f64; 2], hi: [f64; 2] },
}

impl Domain {
    pub const LINE: Domain = Domain::Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const PLANE: Domain = Domain::Rect {
        lo: [f64::NEG_INFINITY; 2],
        hi: [f64::INFINITY; 2],
    };

    pub fn interval(lo: f64, hi: f64) -> Self {
        Domain::Interval { lo, hi }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rect { .. } => 2,
        }
    }

    /// Bounds along the first axis.
    pub fn first_axis(&self) -> (f64, f64) {
        match *self {
            Domain::Interval { lo, hi } => (lo, hi),
            Domain::Rect { lo, hi } => (lo[0], hi[0]),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            Domain::Interval { lo, hi } => x.len() == 1 && x[0] >= lo && x[0] <= hi,
            Domain::Rect { lo, hi } => {
                x.len() == 2 && (0..2).all(|i| x[i] >= lo[i] && x[i] <= hi[i])
            }
        }
    }

    pub fn contains_domain(&self, other: &Domain) -> bool {
        match (*self, *other) {
            (Domain::Interval { lo, hi }, Domain::Interval { lo: a, hi: b }) => a >= lo && b <= hi,
            (Domain::Rect { lo, hi }, Domain::Rect { lo: a, hi: b }) => {
                (0..2).all(|i| a[i] >= lo[i] && b[i] <= hi[i])
            }
            _ => false,
        }
    }

    fn shifted(&self, c: [f64; 2]) -> Self {
        match *self {
            Domain::Interval { lo, hi } => Domain::Interval {
                lo: lo - c[0],
                hi: hi - c[0],
            },
            Domain::Rect { lo, hi } => Domain::Rect {
                lo: [lo[0] - c[0], lo[1] - c[1]],
                hi: [hi[0] - c[0], hi[1] - c[1]],
            },
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Interval { lo, hi } => write!(f, "[{lo}, {hi}]"),
            Domain::Rect { lo, hi } => write!(f, "[{}, {}]x[{}, {}]", lo[0], hi[0], lo[1], hi[1]),
        }
    }
}

/// The closed-form family behind a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum Shape {
    /// `a(x) = value`.
    Uniform { value: f64 },
    /// `a(x) = exp(-rate x)`.
    ExpDecay { rate: f64 },
    /// `a(x) = x^exponent` on the half-line, `0 < exponent < 2`.
    Power { exponent: f64 },
    /// `a(x) = mean + amplitude sin(2 pi x / period)`.
    Periodic {
        mean: f64,
        amplitude: f64,
        period: f64,
    },
    /// `a(x) = height / (1 + (x / width)^2)`.
    RationalBump { height: f64, width: f64 },
    /// Monotone-cubic interpolation of samples, with optional declared limits at infinity.
    Tabulated {
        xs: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        limits: Vec<CoefficientProfile>,
    },
    /// `a(x) = R(angle) diag(first(x1), second(x1)) R(angle)^T` on the plane.
    MatrixDiag2D {
        first: Box<CoefficientProfile>,
        second: Box<CoefficientProfile>,
        angle: f64,
    },
    /// `left` for `x <= start`, `right` for `x >= end`, quintic smoothstep in between.
    Blend {
        left: f64,
        right: f64,
        start: f64,
        end: f64,
    },
}

/// Value of a coefficient field at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    Scalar(f64),
    Matrix(Matrix2<f64>),
}

impl Coefficient {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            Coefficient::Scalar(v) => Some(*v),
            Coefficient::Matrix(_) => None,
        }
    }

    /// The coefficient as a 2x2 matrix (scalars act as multiples of the identity).
    pub fn as_matrix(&self) -> Matrix2<f64> {
        match self {
            Coefficient::Scalar(v) => Matrix2::identity() * *v,
            Coefficient::Matrix(m) => *m,
        }
    }
}

/// Infimum and supremum of a coefficient over a window.
///
/// A zero `lower` means the profile is not uniformly elliptic on the window;
/// an infinite `upper` means it is unbounded there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityBounds {
    pub lower: f64,
    pub upper: f64,
}

impl EllipticityBounds {
    pub fn is_uniformly_elliptic(&self) -> bool {
        self.lower > 0.0
    }

    pub fn is_bounded(&self) -> bool {
        self.upper.is_finite()
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

/// A coefficient field with its translation and domain.
/// Unknown keys are rejected by the flattened [`Shape`], which sees every
/// key other than `shift` and `domain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientProfile {
    #[serde(flatten)]
    pub shape: Shape,
    /// Translation `c`: the profile evaluates the family at `x + c`.
    #[serde(default)]
    pub shift: [f64; 2],
    /// Domain in the (translated) variable `x`.
    #[serde(default)]
    pub domain: Option<Domain>,
}

impl fmt::Display for CoefficientProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag())
    }
}

fn smoothstep(u: f64) -> [f64; 3] {
    if u <= 0.0 {
        return [0.0, 0.0, 0.0];
    }
    if u >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    let u2 = u * u;
    [
        u2 * u * (10.0 - 15.0 * u + 6.0 * u2),
        30.0 * u2 * (u - 1.0) * (u - 1.0),
        60.0 * u * (u - 1.0) * (2.0 * u - 1.0),
    ]
}

impl CoefficientProfile {
    fn from_shape(shape: Shape) -> Result<Self> {
        let p = Self {
            shape,
            shift: [0.0; 2],
            domain: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn uniform(value: f64) -> Result<Self> {
        Self::from_shape(Shape::Uniform { value })
    }

    pub fn exp_decay(rate: f64) -> Result<Self> {
        Self::from_shape(Shape::ExpDecay { rate })
    }

    pub fn power(exponent: f64) -> Result<Self> {
        Self::from_shape(Shape::Power { exponent })
    }

    pub fn periodic(mean: f64, amplitude: f64, period: f64) -> Result<Self> {
        Self::from_shape(Shape::Periodic {
            mean,
            amplitude,
            period,
        })
    }

    pub fn rational_bump(height: f64, width: f64) -> Result<Self> {
        Self::from_shape(Shape::RationalBump { height, width })
    }

    pub fn blend(left: f64, right: f64, start: f64, end: f64) -> Result<Self> {
        Self::from_shape(Shape::Blend {
            left,
            right,
            start,
            end,
        })
    }

    pub fn tabulated(xs: Vec<f64>, values: Vec<f64>, limits: Vec<CoefficientProfile>) -> Result<Self> {
        Self::from_shape(Shape::Tabulated { xs, values, limits })
    }

    pub fn matrix_diag_2d(first: CoefficientProfile, second: CoefficientProfile, angle: f64) -> Result<Self> {
        Self::from_shape(Shape::MatrixDiag2D {
            first: Box::new(first),
            second: Box::new(second),
            angle,
        })
    }

    /// Restricts the profile to `domain`, which must lie inside its natural domain.
    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        if !self.natural_domain().contains_domain(&domain) {
            return Err(Error::InvalidProfile(format!(
                "domain {domain} exceeds the natural domain {} of {}",
                self.natural_domain(),
                self.tag()
            )));
        }
        self.domain = Some(domain);
        self.validate()?;
        Ok(self)
    }

    /// Checks the family invariants (positivity, admissible exponents, ...).
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidProfile(m));
        let finite = |v: f64| v.is_finite();
        match &self.shape {
            Shape::Uniform { value } => {
                if !(finite(*value) && *value >= 0.0) {
                    return bad(format!("uniform value must be finite and >= 0, got {value}"));
                }
            }
            Shape::ExpDecay { rate } => {
                if !finite(*rate) {
                    return bad(format!("decay rate must be finite, got {rate}"));
                }
            }
            Shape::Power { exponent } => {
                if !(*exponent > 0.0 && *exponent < 2.0) {
                    return bad(format!("power exponent must lie in (0, 2), got {exponent}"));
                }
            }
            Shape::Periodic {
                mean,
                amplitude,
                period,
            } => {
                if !(finite(*mean) && finite(*amplitude) && *period > 0.0 && amplitude.abs() < *mean) {
                    return bad(format!(
                        "periodic profile needs |amplitude| < mean and period > 0, got mean {mean}, amplitude {amplitude}, period {period}"
                    ));
                }
            }
            Shape::RationalBump { height, width } => {
                if !(*height > 0.0 && *width > 0.0 && finite(*height) && finite(*width)) {
                    return bad(format!("rational bump needs positive height and width, got {height}, {width}"));
                }
            }
            Shape::Tabulated { xs, values, limits } => {
                if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return bad("tabulated values must be positive and finite".into());
                }
                if MonotoneCubic::new(xs.clone(), values.clone()).is_none() {
                    return bad("tabulated abscissae must be strictly increasing with at least two samples".into());
                }
                for l in limits {
                    l.validate()?;
                }
            }
            Shape::MatrixDiag2D { first, second, angle } => {
                if !finite(*angle) {
                    return bad("rotation angle must be finite".into());
                }
                for c in [first, second] {
                    if c.dim() != 1 || matches!(c.shape, Shape::MatrixDiag2D { .. }) {
                        return bad("matrix eigenvalue fields must be scalar one-dimensional profiles".into());
                    }
                    c.validate()?;
                }
            }
            Shape::Blend {
                left,
                right,
                start,
                end,
            } => {
                if !(*left > 0.0 && *right > 0.0 && finite(*left) && finite(*right) && start < end) {
                    return bad(format!(
                        "blend needs positive end values and start < end, got {left}, {right}, [{start}, {end}]"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Short human-readable identifier, stable across runs.
    pub fn tag(&self) -> String {
        let base = match &self.shape {
            Shape::Uniform { value } => format!("Uniform({value})"),
            Shape::ExpDecay { rate } => format!("ExpDecay({rate})"),
            Shape::Power { exponent } => format!("Power({exponent})"),
            Shape::Periodic {
                mean,
                amplitude,
                period,
            } => format!("Periodic({mean},{amplitude},{period})"),
            Shape::RationalBump { height, width } => format!("RationalBump({height},{width})"),
            Shape::Tabulated { xs, .. } => format!("Tabulated({} samples)", xs.len()),
            Shape::MatrixDiag2D { first, second, angle } => {
                format!("MatrixDiag2D({},{},{angle})", first.tag(), second.tag())
            }
            Shape::Blend {
                left,
                right,
                start,
                end,
            } => format!("Blend({left},{right},{start},{end})"),
        };
        if self.shift == [0.0; 2] {
            base
        } else if self.dim() == 1 {
            format!("{base}@{}", self.shift[0])
        } else {
            format!("{base}@({},{})", self.shift[0], self.shift[1])
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.shape {
            Shape::Uniform { .. } => "Uniform",
            Shape::ExpDecay { .. } => "ExpDecay",
            Shape::Power { .. } => "Power",
            Shape::Periodic { .. } => "Periodic",
            Shape::RationalBump { .. } => "RationalBump",
            Shape::Tabulated { .. } => "Tabulated",
            Shape::MatrixDiag2D { .. } => "MatrixDiag2D",
            Shape::Blend { .. } => "Blend",
        }
    }

    pub fn dim(&self) -> usize {
        self.domain().dim()
    }

    pub fn is_matrix(&self) -> bool {
        matches!(self.shape, Shape::MatrixDiag2D { .. })
    }

    /// Number of continuous derivatives available in closed form.
    pub fn smoothness(&self) -> u32 {
        match &self.shape {
            Shape::Tabulated { .. } => 1,
            Shape::Blend { .. } => 2,
            Shape::MatrixDiag2D { first, second, .. } => first.smoothness().min(second.smoothness()),
            _ => u32::MAX,
        }
    }

    /// True for the identically-zero coefficient, which no operator assembly accepts.
    pub fn is_degenerate(&self) -> bool {
        matches!(self.shape, Shape::Uniform { value } if value == 0.0)
    }

    fn natural_domain(&self) -> Domain {
        let base = match &self.shape {
            Shape::Power { .. } => Domain::interval(0.0, f64::INFINITY),
            Shape::Tabulated { xs, .. } => Domain::interval(xs[0], *xs.last().unwrap()),
            Shape::MatrixDiag2D { .. } => Domain::PLANE,
            _ => Domain::LINE,
        };
        base.shifted(self.shift)
    }

    pub fn domain(&self) -> Domain {
        self.domain.unwrap_or_else(|| self.natural_domain())
    }

    /// Period along the first axis for periodic families.
    pub fn period(&self) -> Option<f64> {
        match self.shape {
            Shape::Periodic { period, .. } => Some(period),
            _ => None,
        }
    }

    /// `(a, a', a'')` of a scalar family at the untranslated variable `u`.
    fn family_derivs(&self, u: f64) -> [f64; 3] {
        match &self.shape {
            Shape::Uniform { value } => [*value, 0.0, 0.0],
            Shape::ExpDecay { rate } => {
                let v = (-rate * u).exp();
                [v, -rate * v, rate * rate * v]
            }
            Shape::Power { exponent: p } => [
                u.powf(*p),
                p * u.powf(p - 1.0),
                p * (p - 1.0) * u.powf(p - 2.0),
            ],
            Shape::Periodic {
                mean,
                amplitude,
                period,
            } => {
                let w = 2.0 * PI / period;
                let (s, c) = (w * u).sin_cos();
                [mean + amplitude * s, amplitude * w * c, -amplitude * w * w * s]
            }
            Shape::RationalBump { height, width } => {
                let z = u / width;
                let q = 1.0 + z * z;
                [
                    height / q,
                    -2.0 * height * z / (width * q * q),
                    height * (6.0 * z * z - 2.0) / (width * width * q * q * q),
                ]
            }
            Shape::Tabulated { xs, values, .. } => MonotoneCubic::new(xs.clone(), values.clone())
                .expect("validated on construction")
                .eval_derivs(u),
            Shape::Blend {
                left,
                right,
                start,
                end,
            } => {
                let len = end - start;
                let [s, ds, dds] = smoothstep((u - start) / len);
                let jump = right - left;
                [left + jump * s, jump * ds / len, jump * dds / (len * len)]
            }
            Shape::MatrixDiag2D { .. } => unreachable!("matrix profiles have no scalar derivatives"),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        let domain = self.domain();
        // scalar fields extend to the plane as functions of the first coordinate
        let probe = if !self.is_matrix() && x.len() == 2 { &x[..1] } else { x };
        if domain.contains(probe) {
            Ok(())
        } else {
            Err(Error::Domain {
                point: x.to_vec(),
                domain: domain.to_string(),
            })
        }
    }

    /// `a(x)`: a positive scalar, or a symmetric positive-definite 2x2 matrix.
    pub fn evaluate(&self, x: &[f64]) -> Result<Coefficient> {
        self.check_point(x)?;
        Ok(self.evaluate_unchecked(x))
    }

    /// Scalar value at a one-dimensional point, with domain check.
    pub fn value(&self, x: f64) -> Result<f64> {
        self.check_point(&[x])?;
        self.scalar_at(x)
    }

    /// `(a, a', a'')` at a one-dimensional point.
    pub fn derivatives(&self, x: f64) -> Result<[f64; 3]> {
        self.check_point(&[x])?;
        if self.is_matrix() {
            return Err(Error::Unsupported("derivatives of matrix-valued profiles".into()));
        }
        Ok(self.family_derivs(x + self.shift[0]))
    }

    fn scalar_at(&self, x: f64) -> Result<f64> {
        match self.shape {
            Shape::MatrixDiag2D { .. } => Err(Error::Unsupported(format!(
                "scalar evaluation of matrix profile {}",
                self.tag()
            ))),
            _ => Ok(self.family_derivs(x + self.shift[0])[0]),
        }
    }

    /// Evaluation without the domain check, for assembly loops over validated grids.
    pub(crate) fn evaluate_unchecked(&self, x: &[f64]) -> Coefficient {
        match &self.shape {
            Shape::MatrixDiag2D { first, second, angle } => {
                let x1 = x[0] + self.shift[0];
                let l1 = first.family_derivs(x1 + first.shift[0])[0];
                let l2 = second.family_derivs(x1 + second.shift[0])[0];
                let (s, c) = angle.sin_cos();
                let r = Matrix2::new(c, -s, s, c);
                Coefficient::Matrix(r * Matrix2::new(l1, 0.0, 0.0, l2) * r.transpose())
            }
            _ => Coefficient::Scalar(self.family_derivs(x[0] + self.shift[0])[0]),
        }
    }

    /// The translate `x -> a(x + c)`, with the domain shifted accordingly.
    pub fn translate(&self, c: &[f64]) -> CoefficientProfile {
        let mut c2 = [0.0; 2];
        for (i, v) in c.iter().take(2).enumerate() {
            c2[i] = *v;
        }
        let mut out = self.clone();
        out.domain = self.domain.map(|d| d.shifted(c2));
        out.shift = [self.shift[0] + c2[0], self.shift[1] + c2[1]];
        out.normalize_shift();
        out
    }

    fn normalize_shift(&mut self) {
        match &self.shape {
            Shape::Uniform { .. } => self.shift = [0.0; 2],
            Shape::Periodic { period, .. } => {
                let r = self.shift[0].rem_euclid(*period);
                // Shifts that are whole periods within round-off collapse to zero.
                self.shift[0] = if r.min(period - r) <= 1e-12 * period.max(1.0) { 0.0 } else { r };
                self.shift[1] = 0.0;
            }
            Shape::MatrixDiag2D { .. } => {}
            _ => self.shift[1] = 0.0,
        }
    }

    /// Exact infimum and supremum of the coefficient (of its eigenvalues, for
    /// matrix fields) over `window`, which must lie in the domain.
    pub fn ellipticity_bounds(&self, window: &Domain) -> Result<EllipticityBounds> {
        if !self.domain().contains_domain(window) {
            return Err(Error::Domain {
                point: vec![window.first_axis().0, window.first_axis().1],
                domain: self.domain().to_string(),
            });
        }
        let (lo, hi) = window.first_axis();
        Ok(self.bounds_on(lo + self.shift[0], hi + self.shift[0]))
    }

    /// Bounds of the untranslated family on `[lo, hi]` (endpoints may be infinite).
    fn bounds_on(&self, lo: f64, hi: f64) -> EllipticityBounds {
        let eb = |a: f64, b: f64| EllipticityBounds {
            lower: a.min(b),
            upper: a.max(b),
        };
        let at = |u: f64| self.family_derivs(u)[0];
        match &self.shape {
            Shape::Uniform { value } => eb(*value, *value),
            Shape::ExpDecay { rate } => {
                let f = |u: f64| {
                    let e = -rate * u;
                    if e.is_nan() { 1.0 } else { e.exp() }
                };
                eb(f(lo), f(hi))
            }
            Shape::Power { exponent } => eb(lo.max(0.0).powf(*exponent), hi.powf(*exponent)),
            Shape::Periodic {
                mean,
                amplitude,
                period,
            } => {
                let (smin, smax) = sin_range(2.0 * PI * lo / period, 2.0 * PI * hi / period);
                let (a, b) = (mean + amplitude * smin, mean + amplitude * smax);
                eb(a, b)
            }
            Shape::RationalBump { height, width } => {
                let closest = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
                let farthest = lo.abs().max(hi.abs());
                let f = |z: f64| {
                    if z.is_infinite() {
                        0.0
                    } else {
                        height / (1.0 + (z / width).powi(2))
                    }
                };
                EllipticityBounds {
                    lower: f(farthest),
                    upper: f(closest),
                }
            }
            Shape::Tabulated { xs, values, .. } => {
                let lo = lo.max(xs[0]);
                let hi = hi.min(*xs.last().unwrap());
                let mut b = eb(at(lo), at(hi));
                for (x, v) in xs.iter().zip(values) {
                    if *x > lo && *x < hi {
                        b.lower = b.lower.min(*v);
                        b.upper = b.upper.max(*v);
                    }
                }
                b
            }
            Shape::Blend { left, right, .. } => {
                let f = |u: f64| {
                    if u == f64::NEG_INFINITY {
                        *left
                    } else if u == f64::INFINITY {
                        *right
                    } else {
                        at(u)
                    }
                };
                eb(f(lo), f(hi))
            }
            Shape::MatrixDiag2D { first, second, .. } => {
                let b1 = first.bounds_on(lo + first.shift[0], hi + first.shift[0]);
                let b2 = second.bounds_on(lo + second.shift[0], hi + second.shift[0]);
                EllipticityBounds {
                    lower: b1.lower.min(b2.lower),
                    upper: b1.upper.max(b2.upper),
                }
            }
        }
    }

    /// Every distinct limit of `a(. + c_n)` along `|c_n| -> infinity`.
    pub fn asymptotic_profiles(&self) -> Result<Vec<AsymptoticLimit>> {
        let constant = |v: f64, direction| -> Result<AsymptoticLimit> {
            Ok(AsymptoticLimit {
                direction,
                limit: Limit::Profile(CoefficientProfile::uniform(v)?),
            })
        };
        let divergent = |direction| AsymptoticLimit {
            direction,
            limit: Limit::Divergent,
        };
        let mut out = match &self.shape {
            Shape::Uniform { value } => vec![constant(*value, Direction::Both)?],
            Shape::ExpDecay { rate } => {
                if *rate > 0.0 {
                    vec![divergent(Direction::Left), constant(0.0, Direction::Right)?]
                } else if *rate < 0.0 {
                    vec![constant(0.0, Direction::Left)?, divergent(Direction::Right)]
                } else {
                    vec![constant(1.0, Direction::Both)?]
                }
            }
            Shape::Power { .. } => vec![divergent(Direction::Right)],
            Shape::Periodic { .. } => {
                let mut canonical = self.clone();
                canonical.shift = [0.0; 2];
                canonical.domain = None;
                vec![AsymptoticLimit {
                    direction: Direction::Orbit,
                    limit: Limit::Profile(canonical),
                }]
            }
            Shape::RationalBump { .. } => vec![constant(0.0, Direction::Both)?],
            Shape::Blend { left, right, .. } => {
                vec![constant(*left, Direction::Left)?, constant(*right, Direction::Right)?]
            }
            Shape::Tabulated { limits, .. } => {
                if limits.is_empty() {
                    return Err(Error::Unsupported(
                        "tabulated profile without declared limits at infinity".into(),
                    ));
                }
                limits
                    .iter()
                    .map(|p| AsymptoticLimit {
                        direction: Direction::Declared,
                        limit: Limit::Profile(p.clone()),
                    })
                    .collect()
            }
            Shape::MatrixDiag2D { first, second, angle } => {
                let f = first.asymptotic_profiles()?;
                let s = second.asymptotic_profiles()?;
                let mut out = Vec::new();
                for lf in &f {
                    for ls in &s {
                        if !lf.direction.compatible(ls.direction) {
                            continue;
                        }
                        let direction = lf.direction.meet(ls.direction);
                        let limit = match (&lf.limit, &ls.limit) {
                            (Limit::Profile(p1), Limit::Profile(p2)) => Limit::Profile(
                                CoefficientProfile::matrix_diag_2d(p1.clone(), p2.clone(), *angle)?,
                            ),
                            _ => Limit::Divergent,
                        };
                        out.push(AsymptoticLimit { direction, limit });
                    }
                }
                out
            }
        };
        let mut distinct: Vec<AsymptoticLimit> = Vec::new();
        for l in out.drain(..) {
            if !distinct.iter().any(|d| d.limit == l.limit) {
                distinct.push(l);
            }
        }
        Ok(distinct)
    }
}

/// Range of `sin` over `[a, b]` (radians).
fn sin_range(a: f64, b: f64) -> (f64, f64) {
    if !(a.is_finite() && b.is_finite()) || b - a >= 2.0 * PI {
        return (-1.0, 1.0);
    }
    let (mut lo, mut hi) = (a.sin().min(b.sin()), a.sin().max(b.sin()));
    // critical points pi/2 + k pi inside (a, b)
    let mut k = ((a - PI / 2.0) / PI).ceil();
    loop {
        let c = PI / 2.0 + k * PI;
        if c > b {
            break;
        }
        if c >= a {
            let v = c.sin();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        k += 1.0;
    }
    (lo, hi)
}

/// Where along infinity a limit profile is reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Left,
    Right,
    Both,
    /// Translates of a periodic profile: the limit set is its own orbit.
    Orbit,
    /// Limits supplied by the user for tabulated data.
    Declared,
}

impl Direction {
    fn compatible(self, other: Direction) -> bool {
        !matches!(
            (self, other),
            (Direction::Left, Direction::Right) | (Direction::Right, Direction::Left)
        )
    }

    fn meet(self, other: Direction) -> Direction {
        match (self, other) {
            (Direction::Both, d) | (d, Direction::Both) => d,
            (a, _) => a,
        }
    }
}

/// A limit of translated coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Limit {
    /// A coefficient profile; `Uniform(0)` is the degenerate zero form.
    Profile(CoefficientProfile),
    /// The coefficient grows without bound; the limit form is `+infinity`
    /// off the constants and the limiting resolvent vanishes.
    Divergent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticLimit {
    pub direction: Direction,
    pub limit: Limit,
}

impl AsymptoticLimit {
    pub fn is_degenerate(&self) -> bool {
        matches!(&self.limit, Limit::Profile(p) if p.is_degenerate())
    }
}
