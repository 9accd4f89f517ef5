//! Change of variable `s(x) = \int_0^x a^{-1/2}` that turns `-(a f')'` into
//! the Schrodinger form `-h'' + V(s) h` with `sigma = a^{1/4}` and
//! `V = sigma'' / sigma`, plus a cross-check of the two representations.
//!
//! Exponential and power coefficients use their exact variables
//! (`s = (2/r) e^{r x / 2}` and `s = x^beta / beta`); other profiles are
//! integrated numerically and inverted by a monotone spline polished with
//! Newton steps.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientProfile, Domain, Shape};
use crate::discretize::{assemble, Boundary, DiscreteOperator, Grid};
use crate::error::{Error, Result};
use crate::export::write_table;
use crate::interp::MonotoneCubic;
use crate::linalg::CsrMatrix;
use crate::metric::MetricField;
use crate::quadrature::Rule;
use crate::spectral::lowest_eigenvalues;

/// Panels of the arclength table used for profiles without a closed form.
const TABLE_PANELS: usize = 4096;

/// How `V = sigma''/sigma` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialMethod {
    /// `V = a''/4 - a'^2 / (16 a)` from the profile's derivatives.
    #[default]
    Analytic,
    /// Fourth-order central differences of `sigma` in `s`.
    FiniteDifference,
}

#[derive(Debug, Clone)]
enum Variable {
    /// `s = x / sqrt(c)`.
    Linear { scale: f64 },
    /// `s = (2/r) exp(r (x + c) / 2)`.
    Exponential { rate: f64, shift: f64 },
    /// `s = (x + c)^beta / beta`.
    Power { beta: f64, shift: f64 },
    Numeric {
        metric: MetricField,
        base: f64,
        inverse: MonotoneCubic,
    },
}

/// Tables and closed forms for `s(x)`, `x(s)`, `sigma(s)` and `V(s)` on a window.
#[derive(Debug, Clone)]
pub struct LiouvilleTransform {
    profile: CoefficientProfile,
    x_window: (f64, f64),
    s_range: (f64, f64),
    variable: Variable,
    method: PotentialMethod,
}

/// Builds the transform with the analytic potential.
pub fn transform(profile: &CoefficientProfile, x_window: (f64, f64)) -> Result<LiouvilleTransform> {
    transform_with(profile, x_window, PotentialMethod::Analytic)
}

pub fn transform_with(
    profile: &CoefficientProfile,
    x_window: (f64, f64),
    method: PotentialMethod,
) -> Result<LiouvilleTransform> {
    if profile.is_matrix() {
        return Err(Error::Unsupported("Liouville transform of a matrix profile".into()));
    }
    if profile.smoothness() < 2 {
        return Err(Error::Smoothness {
            required: 2,
            available: profile.smoothness(),
        });
    }
    let (lo, hi) = x_window;
    if !(lo < hi) || lo.is_nan() || hi.is_nan() {
        return Err(Error::Argument(format!("empty x-window ({lo}, {hi})")));
    }
    if !profile.domain().contains_domain(&Domain::interval(lo, hi)) {
        return Err(Error::Domain {
            point: vec![lo, hi],
            domain: profile.domain().to_string(),
        });
    }
    let c = profile.shift[0];
    let variable = match profile.shape {
        Shape::Uniform { value } => Variable::Linear { scale: value.sqrt() },
        Shape::ExpDecay { rate } if rate == 0.0 => Variable::Linear { scale: 1.0 },
        Shape::ExpDecay { rate } => Variable::Exponential { rate, shift: c },
        Shape::Power { exponent } => Variable::Power {
            beta: 1.0 - exponent / 2.0,
            shift: c,
        },
        _ => {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::Argument(format!(
                    "numeric transform of {} needs a finite x-window",
                    profile.tag()
                )));
            }
            let metric = MetricField::closed_1d(profile, lo, hi, TABLE_PANELS)?;
            let base = 0f64.clamp(lo, hi);
            let s0 = metric.arclength(base)?;
            let xs: Vec<f64> = (0..=TABLE_PANELS)
                .map(|i| lo + (hi - lo) * i as f64 / TABLE_PANELS as f64)
                .collect();
            let ss = xs.iter().map(|x| metric.arclength(*x).map(|s| s - s0)).collect::<Result<Vec<f64>>>()?;
            let inverse = MonotoneCubic::new(ss, xs)
                .ok_or_else(|| Error::Degenerate(format!("s(x) of {} is not strictly increasing", profile.tag())))?;
            Variable::Numeric { metric, base, inverse }
        }
    };
    let mut tr = LiouvilleTransform {
        profile: profile.clone(),
        x_window,
        s_range: (0.0, 0.0),
        variable,
        method,
    };
    tr.s_range = (tr.s_limit(lo)?, tr.s_limit(hi)?);
    if !(tr.s_range.0 < tr.s_range.1) {
        return Err(Error::Degenerate(format!("s-range {:?} is empty", tr.s_range)));
    }
    Ok(tr)
}

impl LiouvilleTransform {
    pub fn profile(&self) -> &CoefficientProfile {
        &self.profile
    }

    pub fn x_window(&self) -> (f64, f64) {
        self.x_window
    }

    pub fn s_range(&self) -> (f64, f64) {
        self.s_range
    }

    pub fn method(&self) -> PotentialMethod {
        self.method
    }

    /// Whether `s(x)` has a closed form.
    pub fn is_closed_form(&self) -> bool {
        !matches!(self.variable, Variable::Numeric { .. })
    }

    /// `s` at a window endpoint, allowing infinite endpoints with finite limits.
    fn s_limit(&self, x: f64) -> Result<f64> {
        if x.is_finite() {
            return self.s_of_x(x);
        }
        Ok(match self.variable {
            Variable::Exponential { rate, .. } => {
                if (x < 0.0) == (rate > 0.0) {
                    0.0
                } else {
                    f64::INFINITY.copysign(rate)
                }
            }
            _ => x,
        })
    }

    fn check_x(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.x_window;
        let slack = 1e-12 * (hi - lo).min(1e12).max(1.0);
        if x >= lo - slack && x <= hi + slack {
            Ok(())
        } else {
            Err(Error::Domain {
                point: vec![x],
                domain: format!("[{lo}, {hi}]"),
            })
        }
    }

    fn check_s(&self, s: f64) -> Result<()> {
        let (lo, hi) = self.s_range;
        let slack = 1e-12 * (if (hi - lo).is_finite() { hi - lo } else { 1.0 }).max(1.0);
        if s >= lo - slack && s <= hi + slack {
            Ok(())
        } else {
            Err(Error::Domain {
                point: vec![s],
                domain: format!("s-range [{lo}, {hi}]"),
            })
        }
    }

    pub fn s_of_x(&self, x: f64) -> Result<f64> {
        self.check_x(x)?;
        Ok(match &self.variable {
            Variable::Linear { scale } => x / scale,
            Variable::Exponential { rate, shift } => 2.0 / rate * (0.5 * rate * (x + shift)).exp(),
            Variable::Power { beta, shift } => (x + shift).max(0.0).powf(*beta) / beta,
            Variable::Numeric { metric, base, .. } => {
                let (lo, hi) = self.x_window;
                metric.arclength(x.clamp(lo, hi))? - metric.arclength(*base)?
            }
        })
    }

    pub fn x_of_s(&self, s: f64) -> Result<f64> {
        self.check_s(s)?;
        Ok(match &self.variable {
            Variable::Linear { scale } => s * scale,
            Variable::Exponential { rate, shift } => 2.0 / rate * (0.5 * rate * s).ln() - shift,
            Variable::Power { beta, shift } => (beta * s.max(0.0)).powf(1.0 / beta) - shift,
            Variable::Numeric { inverse, .. } => {
                let (lo, hi) = self.x_window;
                let mut x = inverse.eval(s).clamp(lo, hi);
                // ds/dx = a^{-1/2}
                for _ in 0..4 {
                    let r = self.s_of_x(x)? - s;
                    let step = r * self.profile.value(x)?.sqrt();
                    x = (x - step).clamp(lo, hi);
                    if step.abs() <= 1e-15 * x.abs().max(1.0) {
                        break;
                    }
                }
                x
            }
        })
    }

    /// `sigma(s) = a(x(s))^{1/4}`.
    pub fn sigma(&self, s: f64) -> Result<f64> {
        let x = self.x_of_s(s)?;
        Ok(self.profile.value(x)?.powf(0.25))
    }

    /// `V(s)` with the transform's own method.
    pub fn potential(&self, s: f64) -> Result<f64> {
        match self.method {
            PotentialMethod::Analytic => self.potential_analytic(s),
            PotentialMethod::FiniteDifference => {
                let (lo, hi) = self.s_range;
                let room = (s - lo).min(hi - s);
                self.potential_fd(s, (1e-3 * s.abs().max(1.0)).min(room / 2.5))
            }
        }
    }

    /// `V = a''/4 - a'^2/(16 a)` evaluated at `x(s)`.
    pub fn potential_analytic(&self, s: f64) -> Result<f64> {
        if let Variable::Linear { .. } = self.variable {
            self.check_s(s)?;
            return Ok(0.0);
        }
        let x = self.x_of_s(s)?;
        let [a, da, dda] = self.profile.derivatives(x)?;
        let v = 0.25 * dda - da * da / (16.0 * a);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Singularity(s))
        }
    }

    /// `sigma''/sigma` by the five-point stencil with spacing `delta`.
    pub fn potential_fd(&self, s: f64, delta: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(Error::Singularity(s));
        }
        let f = |k: f64| self.sigma(s + k * delta);
        let (m2, m1, c0, p1, p2) = (f(-2.0)?, f(-1.0)?, f(0.0)?, f(1.0)?, f(2.0)?);
        let dd = (-m2 + 16.0 * m1 - 30.0 * c0 + 16.0 * p1 - p2) / (12.0 * delta * delta);
        let v = dd / c0;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Singularity(s))
        }
    }

    /// Samples `(x, s, sigma, V)` at `samples` points equally spaced in `s`,
    /// excluding the endpoints of the range.
    pub fn table(&self, samples: usize) -> Result<Vec<[f64; 4]>> {
        let (lo, hi) = self.s_range;
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Argument("tables need a finite s-range".into()));
        }
        (1..=samples)
            .map(|i| {
                let s = lo + (hi - lo) * i as f64 / (samples + 1) as f64;
                Ok([self.x_of_s(s)?, s, self.sigma(s)?, self.potential(s)?])
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W, samples: usize) -> Result<()> {
        let rows: Vec<Vec<f64>> = self.table(samples)?.into_iter().map(|r| r.to_vec()).collect();
        write_table(out, &["x", "s", "sigma", "V"], &rows)
    }
}

/// `K = -d^2/ds^2 + V(s)` on a Dirichlet grid in the `s` variable.
pub fn schrodinger_operator(tr: &LiouvilleTransform, grid_s: &Grid) -> Result<DiscreteOperator> {
    if grid_s.dim() != 1 || grid_s.periodic {
        return Err(Error::Unsupported("Schrodinger operators live on Dirichlet line grids".into()));
    }
    let (lo, hi) = tr.s_range;
    let ax = grid_s.axes[0];
    let h = grid_s.spacing(0);
    let slack = 1e-12 * (ax.upper - ax.lower);
    if ax.lower < lo - slack || ax.upper > hi + slack {
        return Err(Error::Domain {
            point: vec![ax.lower, ax.upper],
            domain: format!("s-range [{lo}, {hi}]"),
        });
    }
    let nodes = grid_s.axis_nodes(0);
    let n = nodes.len();
    let mut triplets = Vec::with_capacity(3 * n);
    for (j, s) in nodes.iter().enumerate() {
        let v = match tr.method {
            PotentialMethod::Analytic => tr.potential_analytic(*s)?,
            PotentialMethod::FiniteDifference => {
                let room = (s - lo).min(hi - s);
                tr.potential_fd(*s, h.min(room / 2.5))?
            }
        };
        if !v.is_finite() {
            return Err(Error::Singularity(*s));
        }
        triplets.push((j, j, 2.0 / (h * h) + v));
        if j + 1 < n {
            triplets.push((j, j + 1, -1.0 / (h * h)));
            triplets.push((j + 1, j, -1.0 / (h * h)));
        }
    }
    let tag = format!("schrodinger[{}]", tr.profile.tag());
    Ok(DiscreteOperator::new(
        grid_s.clone(),
        CsrMatrix::from_triplets(n, triplets),
        Boundary::Dirichlet,
        tag,
    ))
}

/// One refinement level of the two-representation comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceLevel {
    pub points: usize,
    pub x_eigenvalues: Vec<f64>,
    pub s_eigenvalues: Vec<f64>,
    pub relative_errors: Vec<f64>,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub levels: Vec<EquivalenceLevel>,
    /// Largest `| \int |f|^2 dx - \int |g|^2 sigma^2 ds |` over the sampled functions.
    pub isometry_error: f64,
    /// Whether the eigenvalue mismatch shrinks at every refinement step.
    pub refinement_decreasing: bool,
}

impl EquivalenceReport {
    /// Mismatch of the finest level below `rel` and the isometry below `iso`.
    pub fn agrees(&self, rel: f64, iso: f64) -> bool {
        self.levels.last().is_some_and(|l| l.max_relative_error < rel) && self.isometry_error <= iso
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut rows = Vec::new();
        for l in &self.levels {
            for (k, ((x, s), e)) in l.x_eigenvalues.iter().zip(&l.s_eigenvalues).zip(&l.relative_errors).enumerate() {
                rows.push(vec![l.points as f64, k as f64, *x, *s, *e]);
            }
        }
        write_table(out, &["n", "index", "x_eigenvalue", "s_eigenvalue", "relative_error"], &rows)
    }
}

/// Compares the lowest `count` eigenvalues of the divergence-form operator on
/// `x_window` with those of `K` on the image window, at each grid size, and
/// checks the weighted isometry on random smooth functions.
pub fn verify_equivalence(
    profile: &CoefficientProfile,
    x_window: (f64, f64),
    grids: &[usize],
    count: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    let (lo, hi) = x_window;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Argument("equivalence checks need a finite x-window".into()));
    }
    let tr = transform(profile, x_window)?;
    let (s_lo, s_hi) = tr.s_range;
    let mut levels = Vec::new();
    for &n in grids {
        let hx = assemble(profile, &Grid::line(lo, hi, n)?, Boundary::Dirichlet)?;
        let ks = schrodinger_operator(&tr, &Grid::line(s_lo, s_hi, n)?)?;
        let x_eigenvalues = lowest_eigenvalues(&hx, count)?;
        let s_eigenvalues = lowest_eigenvalues(&ks, count)?;
        let relative_errors: Vec<f64> = x_eigenvalues
            .iter()
            .zip(&s_eigenvalues)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
            .collect();
        let max_relative_error = relative_errors.iter().copied().fold(0.0, f64::max);
        levels.push(EquivalenceLevel {
            points: n,
            x_eigenvalues,
            s_eigenvalues,
            relative_errors,
            max_relative_error,
        });
    }
    let refinement_decreasing = levels
        .windows(2)
        .all(|w| w[1].max_relative_error < w[0].max_relative_error);
    let isometry_error = isometry_defect(&tr, 50, seed)?;
    Ok(EquivalenceReport {
        levels,
        isometry_error,
        refinement_decreasing,
    })
}

/// Largest `| \int |f|^2 dx - \int |f(x(s))|^2 sigma(s)^2 ds |` over `samples`
/// random sums of Gaussian bumps inside the window.
pub fn isometry_defect(tr: &LiouvilleTransform, samples: usize, seed: u64) -> Result<f64> {
    let (lo, hi) = tr.x_window;
    let (s_lo, s_hi) = tr.s_range;
    if !(lo.is_finite() && hi.is_finite() && s_lo.is_finite() && s_hi.is_finite()) {
        return Err(Error::Argument("isometry checks need finite windows".into()));
    }
    let rule = Rule::new(10);
    let len = hi - lo;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    // precompute x(s) and sigma^2 on the s quadrature nodes
    let panels = 400;
    let (nodes, weights) = crate::quadrature::gauss_legendre(10);
    let ws = (s_hi - s_lo) / panels as f64;
    let mut s_nodes = Vec::with_capacity(panels * nodes.len());
    for p in 0..panels {
        let a = s_lo + p as f64 * ws;
        for (z, w) in nodes.iter().zip(&weights) {
            let s = a + 0.5 * ws * (1.0 + z);
            let x = tr.x_of_s(s)?;
            let sig2 = tr.sigma(s)?.powi(2);
            s_nodes.push((x, 0.5 * ws * w * sig2));
        }
    }
    for _ in 0..samples {
        let bumps: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.random_range(-1.0..1.0),
                    lo + len * rng.random_range(0.2..0.8),
                    len * rng.random_range(0.03..0.15),
                )
            })
            .collect();
        let f = |x: f64| -> f64 {
            bumps
                .iter()
                .map(|(c, m, w)| c * (-((x - m) / w).powi(2) / 2.0).exp())
                .sum()
        };
        let lhs = rule.composite(|x| f(x).powi(2), lo, hi, panels);
        let rhs: f64 = s_nodes.iter().map(|(x, w)| w * f(*x).powi(2)).sum();
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}
