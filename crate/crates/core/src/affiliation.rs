//! Finite-dimensional diagnostics for membership of bounded operators in
//! the algebras `D` (norm-continuous conjugation by the phases
//! `V_k = exp(i k x)`) and `E` (additionally norm-continuous under
//! translations `U_s`).
//!
//! Sweeps measure `||V_k A V_{-k} - A||` and `||U_s A - A||` over parameter
//! lists. Membership is a statement about limits, so [`classify`] reads it
//! off the uniformity of the sweeps as the truncation window grows. The
//! module also builds the frequency weight of the regularizer construction,
//! splits matrices into cube bands and audits supports in the
//! bounded-support ideal.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientProfile;
use crate::discretize::{assemble, fourier_columns, Boundary, FourierMultiplier, Grid};
use crate::error::{Error, Result};
use crate::export::fmt_num;
use crate::linalg::{gram_lanczos_norm, opnorm, opnorm_exact, sym_eigen, CsrMatrix};
use crate::metric::{block, fit_shifted_gaussian, linear_fit, CubePartition};
use crate::spectral::{full_eigen, resolvent};
use crate::tolerances::Tolerances;

/// Conversion of real or complex matrices to complex ones.
pub trait ToComplex {
    fn to_complex(&self) -> DMatrix<Complex64>;
}

impl ToComplex for DMatrix<f64> {
    fn to_complex(&self) -> DMatrix<Complex64> {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

impl ToComplex for DMatrix<Complex64> {
    fn to_complex(&self) -> DMatrix<Complex64> {
        self.clone()
    }
}

/// `(parameter, norm)` samples of one sweep with the grid it ran on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub parameter: String,
    pub samples: Vec<(f64, f64)>,
    /// Half the length of the first grid axis.
    pub half_width: f64,
    pub points: usize,
    pub profile: String,
}

impl SweepResult {
    fn new(parameter: &str, grid: &Grid) -> Self {
        Self {
            parameter: parameter.into(),
            samples: Vec::new(),
            half_width: 0.5 * grid.length(0),
            points: grid.len(),
            profile: "matrix".into(),
        }
    }

    pub fn with_profile(mut self, tag: impl Into<String>) -> Self {
        self.profile = tag.into();
        self
    }

    pub fn max_norm(&self) -> f64 {
        self.samples.iter().map(|s| s.1).fold(0.0, f64::max)
    }

    /// Largest `norm / (slope |parameter|)` over nonzero parameters.
    pub fn envelope_ratio(&self, slope: f64) -> f64 {
        self.samples
            .iter()
            .filter(|s| s.0 != 0.0)
            .map(|s| s.1 / (slope * s.0.abs()))
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_sweeps(out, std::slice::from_ref(self))
    }
}

/// Writes several sweeps into one table.
pub fn write_sweeps<W: Write>(out: W, sweeps: &[SweepResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["parameter", "norm", "L", "n", "profile"])?;
    for s in sweeps {
        for (p, v) in &s.samples {
            w.write_record([fmt_num(*p), fmt_num(*v), fmt_num(s.half_width), s.points.to_string(), s.profile.clone()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn check_square(a: &DMatrix<Complex64>, grid: &Grid) -> Result<()> {
    if a.nrows() != grid.len() || a.ncols() != grid.len() {
        return Err(Error::Argument(format!(
            "{}x{} matrix on a {}-node grid",
            a.nrows(),
            a.ncols(),
            grid.len()
        )));
    }
    Ok(())
}

/// First coordinates of the grid nodes.
fn first_coordinates(grid: &Grid) -> Vec<f64> {
    (0..grid.len()).map(|j| grid.node(j)[0]).collect()
}

/// `V_k A V_{-k} - A` with `V_k = diag(exp(i k x_1))`.
fn phase_defect(a: &DMatrix<Complex64>, x: &[f64], k: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        a[(i, j)] * (Complex64::from_polar(1.0, k * (x[i] - x[j])) - 1.0)
    })
}

/// `||V_k A V_{-k} - A||` for each `k`, with phases along the first axis.
pub fn vk_sweep<M: ToComplex>(a: &M, grid: &Grid, ks: &[f64]) -> Result<SweepResult> {
    let a = a.to_complex();
    check_square(&a, grid)?;
    let x = first_coordinates(grid);
    let mut out = SweepResult::new("k", grid);
    for &k in ks {
        let v = if k == 0.0 { 0.0 } else { opnorm(&phase_defect(&a, &x, k)) };
        out.samples.push((k, v));
    }
    Ok(out)
}

/// `(U_s - I) m` for a shift by a whole number of cells along the first axis.
fn cyclic_row_defect<T: ComplexField<RealField = f64> + Copy>(m: &DMatrix<T>, grid: &Grid, cells: isize) -> DMatrix<T> {
    let n0 = grid.points(0);
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        let (i0, rest) = (i % n0, i / n0);
        let src = (i0 as isize + cells).rem_euclid(n0 as isize) as usize + n0 * rest;
        m[(src, j)] - m[(i, j)]
    })
}

/// Whole number of cells in a shift by `s` along the first axis, if any.
fn whole_cells(grid: &Grid, s: f64) -> Option<isize> {
    let c = s / grid.spacing(0);
    ((c - c.round()).abs() <= 1e-9 * c.abs().max(1.0)).then_some(c.round() as isize)
}

/// `||(U_s - I) m||` on a periodic grid: a row permutation for whole-cell
/// shifts, the Fourier phase otherwise.
pub fn translation_defect<T: ComplexField<RealField = f64> + Copy>(m: &DMatrix<T>, grid: &Grid, s: f64) -> Result<f64>
where
    DMatrix<T>: ToComplex,
{
    if !grid.periodic {
        return Err(Error::Unsupported("translations need a periodic grid".into()));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    if let Some(c) = whole_cells(grid, s) {
        return Ok(opnorm(&cyclic_row_defect(m, grid, c)));
    }
    let mut shift = vec![0.0; grid.dim()];
    shift[0] = s;
    let u = FourierMultiplier::translation(grid, &shift)?;
    let base = m.to_complex();
    let mut moved = base.clone();
    u.apply_columns(&mut moved);
    Ok(opnorm(&(moved - base)))
}

/// `||U_s A - A||` for each `s` on a periodic grid.
pub fn us_sweep<M: ToComplex>(a: &M, grid: &Grid, ss: &[f64]) -> Result<SweepResult> {
    if !grid.periodic {
        return Err(Error::Unsupported("translation sweeps need a periodic grid".into()));
    }
    let a = a.to_complex();
    check_square(&a, grid)?;
    let mut out = SweepResult::new("s", grid);
    for &s in ss {
        out.samples.push((s, translation_defect(&a, grid, s)?));
    }
    Ok(out)
}

/// Truncation windows, grid spacing and parameter lists of the
/// uniformity study and the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Half-widths `L` of the windows `(-L, L)`.
    pub half_widths: Vec<f64>,
    /// Grid spacing shared by every window.
    pub spacing: f64,
    pub k_list: Vec<f64>,
    pub s_list: Vec<f64>,
    /// Resolvent shift of the phase sweep.
    pub alpha: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            half_widths: vec![10.0, 20.0, 40.0, 80.0],
            spacing: 0.125,
            k_list: vec![0.05, 0.1, 0.2, 0.4],
            s_list: vec![0.25, 0.5, 1.0],
            alpha: 1.0,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.half_widths.is_empty() || self.half_widths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::Argument("half-widths must be positive and finite".into()));
        }
        if self.half_widths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Argument("half-widths must increase".into()));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::Argument(format!("spacing must be positive, got {}", self.spacing)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Argument(format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Window `(-L, L)` intersected with the profile's domain, trimmed at the
/// sides where the coefficient exceeds `cap`, and shortened at the left so
/// that its length is a whole number of cells.
pub fn study_window(profile: &CoefficientProfile, l: f64, spacing: f64, cap: f64) -> Result<(f64, f64)> {
    let (dlo, dhi) = profile.domain().first_axis();
    let mut lo = dlo.max(-l);
    let mut hi = dhi.min(l);
    let a = |x: f64| profile.value(x);
    if a(lo)? > cap {
        lo = cap_crossing(&a, lo, hi, cap)?;
    }
    if a(hi)? > cap {
        hi = cap_crossing(&a, hi, lo, cap)?;
    }
    let cells = ((hi - lo) / spacing + 1e-9).floor();
    if cells < 9.0 {
        return Err(Error::Degenerate(format!(
            "window ({lo}, {hi}) of {} is shorter than nine cells",
            profile.tag()
        )));
    }
    Ok((hi - cells * spacing, hi))
}

/// First point from `from` towards `to` where `a` drops to `cap`.
fn cap_crossing(a: &impl Fn(f64) -> Result<f64>, from: f64, to: f64, cap: f64) -> Result<f64> {
    let samples = 4000;
    let mut prev = from;
    for i in 1..=samples {
        let x = from + (to - from) * i as f64 / samples as f64;
        if a(x)? <= cap {
            let (mut bad, mut good) = (prev, x);
            for _ in 0..80 {
                let mid = 0.5 * (bad + good);
                if a(mid)? <= cap {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            return Ok(good);
        }
        prev = x;
    }
    Err(Error::Degenerate(format!("coefficient exceeds {cap} on the whole window")))
}

/// `V D` with `H = V diag(lambda) V^T`, for `D = (sqrt(lambda) + 1)^{-1}` and
/// `D = (lambda + alpha)^{-1}`: the translation defects of `(H^{1/2} + I)^{-1}`
/// and `(H + alpha)^{-1}` equal those of these factors.
fn resolvent_factors(profile: &CoefficientProfile, grid: &Grid, alpha: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let op = assemble(profile, grid, Boundary::Periodic)?;
    let (vals, vecs) = full_eigen(&op)?;
    let mut sqrt_factor = vecs.clone();
    let mut plain_factor = vecs;
    for (j, l) in vals.iter().enumerate() {
        let l = l.max(0.0);
        sqrt_factor.column_mut(j).scale_mut(1.0 / (l.sqrt() + 1.0));
        plain_factor.column_mut(j).scale_mut(1.0 / (l + alpha));
    }
    Ok((sqrt_factor, plain_factor))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityRow {
    pub half_width: f64,
    pub points: usize,
    /// `||(U_s - I)(H_L^{1/2} + I)^{-1}||`.
    pub sqrt_resolvent: f64,
    /// `||(U_s - I)(H_L + alpha)^{-1}||`.
    pub resolvent: f64,
}

/// Translation defects of the truncated resolvents as the window grows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityStudy {
    pub profile: String,
    pub s: f64,
    pub rows: Vec<UniformityRow>,
    /// Square-root resolvent defects never decrease with `L` (up to round-off).
    pub monotone: bool,
    /// Largest square-root resolvent defect.
    pub sup: f64,
    /// `(max - min) / max` of the square-root resolvent defects.
    pub relative_spread: f64,
}

impl UniformityStudy {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["L", "n", "sqrt_resolvent_norm", "resolvent_norm", "profile"])?;
        for r in &self.rows {
            w.write_record([
                fmt_num(r.half_width),
                r.points.to_string(),
                fmt_num(r.sqrt_resolvent),
                fmt_num(r.resolvent),
                self.profile.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// For each `L`, `||(U_s - I)(H_L^{1/2} + I)^{-1}||` with `H_L` assembled on a
/// periodic grid over the study window.
pub fn uniformity_study(
    profile: &CoefficientProfile,
    s: f64,
    config: &StudyConfig,
    tol: &Tolerances,
) -> Result<UniformityStudy> {
    config.validate()?;
    if config.half_widths.len() < 4 {
        return Err(Error::Argument("the uniformity study needs at least four window sizes".into()));
    }
    let mut rows = Vec::new();
    for &l in &config.half_widths {
        let (lo, hi) = study_window(profile, l, config.spacing, tol.coefficient_cap)?;
        let cells = ((hi - lo) / config.spacing).round() as usize;
        let grid = Grid::periodic_line(lo, hi, cells)?;
        let (sq, plain) = resolvent_factors(profile, &grid, config.alpha)?;
        rows.push(UniformityRow {
            half_width: l,
            points: grid.len(),
            sqrt_resolvent: translation_defect(&sq, &grid, s)?,
            resolvent: translation_defect(&plain, &grid, s)?,
        });
    }
    let norms: Vec<f64> = rows.iter().map(|r| r.sqrt_resolvent).collect();
    let sup = norms.iter().copied().fold(0.0, f64::max);
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(UniformityStudy {
        profile: profile.tag(),
        s,
        monotone: norms.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].max(1.0)),
        sup,
        relative_spread: if sup > 0.0 { (sup - min) / sup } else { 0.0 },
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "E_affiliated")]
    EAffiliated,
    #[serde(rename = "D_only")]
    DOnly,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::EAffiliated => "E_affiliated",
            Verdict::DOnly => "D_only",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Statistics and thresholds behind a verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    /// Largest `||V_k R V_{-k} - R|| / (slope |k|)` over all windows.
    pub v_envelope_ratio: f64,
    /// Largest `||(U_s - I) R_L|| / (slope |s|)` over all windows.
    pub u_envelope_ratio: f64,
    /// Largest translation defect over all windows and shifts.
    pub u_sup: f64,
    /// Slope of `log ||V_k R V_{-k} - R||` against `log k` on the largest window.
    pub v_decay_exponent: f64,
    pub envelope_slope: f64,
    pub theta_fail: f64,
    pub coefficient_cap: f64,
    pub windows: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffiliationVerdict {
    pub profile: String,
    pub verdict: Verdict,
    pub evidence: Evidence,
    pub v_sweeps: Vec<SweepResult>,
    pub u_sweeps: Vec<SweepResult>,
}

impl AffiliationVerdict {
    /// Plain-text `key = value` record of the verdict and its thresholds.
    pub fn write_record<W: Write>(&self, mut out: W) -> Result<()> {
        let e = &self.evidence;
        writeln!(out, "profile = {}", self.profile)?;
        writeln!(out, "verdict = {}", self.verdict)?;
        writeln!(out, "v_envelope_ratio = {}", fmt_num(e.v_envelope_ratio))?;
        writeln!(out, "u_envelope_ratio = {}", fmt_num(e.u_envelope_ratio))?;
        writeln!(out, "u_sup = {}", fmt_num(e.u_sup))?;
        writeln!(out, "v_decay_exponent = {}", fmt_num(e.v_decay_exponent))?;
        writeln!(out, "envelope_slope = {}", fmt_num(e.envelope_slope))?;
        writeln!(out, "theta_fail = {}", fmt_num(e.theta_fail))?;
        writeln!(out, "coefficient_cap = {}", fmt_num(e.coefficient_cap))?;
        for (lo, hi) in &e.windows {
            writeln!(out, "window = [{}, {}]", fmt_num(*lo), fmt_num(*hi))?;
        }
        writeln!(out, "thresholds = implementation choices for a limit statement")?;
        Ok(())
    }
}

/// Classifies the resolvent of `-div(a grad)` from sweeps over growing windows.
///
/// The phase sweep uses `(H + alpha)^{-1}` on Dirichlet grids, the
/// translation sweep `(H^{1/2} + I)^{-1}` on periodic grids. Both are
/// "uniformly small" when every sample lies under `slope |parameter|`.
/// `E_affiliated` needs both uniformly small; `D_only` needs the phase sweep
/// uniformly small and some translation defect above `theta_fail`.
pub fn classify(profile: &CoefficientProfile, config: &StudyConfig, tol: &Tolerances) -> Result<AffiliationVerdict> {
    config.validate()?;
    let mut v_sweeps = Vec::new();
    let mut u_sweeps = Vec::new();
    let mut windows = Vec::new();
    for &l in &config.half_widths {
        let (lo, hi) = study_window(profile, l, config.spacing, tol.coefficient_cap)?;
        windows.push((lo, hi));
        let cells = ((hi - lo) / config.spacing).round() as usize;

        let dirichlet = Grid::line(lo, hi, cells - 1)?;
        let op = assemble(profile, &dirichlet, Boundary::Dirichlet)?;
        let r = resolvent(&op, config.alpha)?;
        let mut v = vk_sweep(&r, &dirichlet, &config.k_list)?.with_profile(profile.tag());
        v.half_width = l;
        v_sweeps.push(v);

        let periodic = Grid::periodic_line(lo, hi, cells)?;
        let (sq, _) = resolvent_factors(profile, &periodic, config.alpha)?;
        let mut u = SweepResult::new("s", &periodic).with_profile(profile.tag());
        u.half_width = l;
        for &s in &config.s_list {
            u.samples.push((s, translation_defect(&sq, &periodic, s)?));
        }
        u_sweeps.push(u);
    }
    let slope = tol.envelope_slope;
    let v_ratio = v_sweeps.iter().map(|s| s.envelope_ratio(slope)).fold(0.0, f64::max);
    let u_ratio = u_sweeps.iter().map(|s| s.envelope_ratio(slope)).fold(0.0, f64::max);
    let u_sup = u_sweeps.iter().map(|s| s.max_norm()).fold(0.0, f64::max);
    let last: Vec<(f64, f64)> = v_sweeps
        .last()
        .map(|s| {
            s.samples
                .iter()
                .filter(|p| p.0 > 0.0 && p.1 > 0.0)
                .map(|p| (p.0.ln(), p.1.ln()))
                .collect()
        })
        .unwrap_or_default();
    let v_decay_exponent = if last.len() >= 2 { linear_fit(&last).0 } else { f64::NAN };
    let v_small = v_ratio <= 1.0;
    let verdict = if v_small && u_ratio <= 1.0 {
        Verdict::EAffiliated
    } else if v_small && u_sup > tol.theta_fail {
        Verdict::DOnly
    } else {
        Verdict::Inconclusive
    };
    Ok(AffiliationVerdict {
        profile: profile.tag(),
        verdict,
        evidence: Evidence {
            v_envelope_ratio: v_ratio,
            u_envelope_ratio: u_ratio,
            u_sup,
            v_decay_exponent,
            envelope_slope: slope,
            theta_fail: tol.theta_fail,
            coefficient_cap: tol.coefficient_cap,
            windows,
        },
        v_sweeps,
        u_sweeps,
    })
}

/// Form-difference sweep with the fitted model `c1 |k| + c2 k^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormSweep {
    pub sweep: SweepResult,
    pub c1: f64,
    pub c2: f64,
    /// Largest `|model - sample| / sample`.
    pub relative_residual: f64,
}

/// `||(H + I)^{-1/2} (L_k - L) (H + I)^{-1/2}||` for the gauge-transformed form
/// `L_k = V_{-k} H V_k` of the assembled operator, with a fit of
/// `c1 |k| + c2 k^2` to the samples.
pub fn form_commutator_sweep(profile: &CoefficientProfile, grid: &Grid, ks: &[f64]) -> Result<FormSweep> {
    let op = assemble(profile, grid, grid.default_boundary())?;
    let h = op.dense();
    let (vals, vecs) = sym_eigen(&h);
    let d: Vec<f64> = vals.iter().map(|l| 1.0 / (l.max(0.0) + 1.0).sqrt()).collect();
    let x = first_coordinates(grid);
    let vc = vecs.to_complex();
    let mut sweep = SweepResult::new("k", grid).with_profile(profile.tag());
    for &k in ks {
        if k == 0.0 {
            sweep.samples.push((0.0, 0.0));
            continue;
        }
        let hc = h.to_complex();
        let diff = phase_defect(&hc, &x, -k);
        let mut w = vc.ad_mul(&(diff * &vc));
        for i in 0..w.nrows() {
            for j in 0..w.ncols() {
                w[(i, j)] *= d[i] * d[j];
            }
        }
        sweep.samples.push((k, opnorm(&w)));
    }
    // weighted least squares on relative residuals
    let pts: Vec<(f64, f64)> = sweep.samples.iter().filter(|p| p.0 != 0.0 && p.1 > 0.0).copied().collect();
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, y) in &pts {
        let (u, v) = (k.abs() / y, k * k / y);
        s11 += u * u;
        s12 += u * v;
        s22 += v * v;
        b1 += u;
        b2 += v;
    }
    let det = s11 * s22 - s12 * s12;
    let (c1, c2) = if pts.len() >= 2 && det != 0.0 {
        ((b1 * s22 - b2 * s12) / det, (s11 * b2 - s12 * b1) / det)
    } else {
        (f64::NAN, f64::NAN)
    };
    let relative_residual = pts
        .iter()
        .map(|(k, y)| (c1 * k.abs() + c2 * k * k - y).abs() / y)
        .fold(0.0, f64::max);
    Ok(FormSweep {
        sweep,
        c1,
        c2,
        relative_residual,
    })
}

/// Frequency weight `f_M = 1 + sum_n (1 - exp(-t_n |k|^2))` with the times and norms that certify it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Regularizer {
    pub times: Vec<f64>,
    /// `|k|^2` for each grid mode.
    pub frequency_squares: Vec<f64>,
    /// `||(I - h_{t_n}(P)) A||` for each selected time.
    pub step_norms: Vec<f64>,
    /// `||f_m(P) A||` for `m = 0, ..., M`.
    pub partial_norms: Vec<f64>,
}

impl Regularizer {
    /// `f_m` on the grid modes.
    pub fn weight(&self, m: usize) -> Vec<f64> {
        self.frequency_squares
            .iter()
            .map(|k2| 1.0 + self.times[..m].iter().map(|t| 1.0 - (-t * k2).exp()).sum::<f64>())
            .collect()
    }

    /// `f = f_M` for the full budget.
    pub fn full_weight(&self) -> Vec<f64> {
        self.weight(self.times.len())
    }

    /// Checks `1 <= f_m <= m + 1`, `f_m <= 1 + |k|^2`, monotonicity in `m`
    /// and `||f_m(P) A|| < 2`; returns the first failure.
    pub fn check_bounds(&self) -> std::result::Result<(), String> {
        let mut prev = vec![1.0; self.frequency_squares.len()];
        for m in 0..=self.times.len() {
            let f = self.weight(m);
            for (j, (v, k2)) in f.iter().zip(&self.frequency_squares).enumerate() {
                if *v < 1.0 || *v > m as f64 + 1.0 + 1e-12 {
                    return Err(format!("f_{m} = {v} at mode {j} outside [1, {}]", m + 1));
                }
                if *v > 1.0 + k2 + 1e-12 {
                    return Err(format!("f_{m} = {v} exceeds 1 + |k|^2 = {} at mode {j}", 1.0 + k2));
                }
                if *v < prev[j] - 1e-15 {
                    return Err(format!("f_{m} decreases at mode {j}"));
                }
            }
            prev = f;
        }
        if let Some((m, v)) = self.partial_norms.iter().enumerate().find(|(_, v)| **v >= 2.0) {
            return Err(format!("||f_{m}(P) A|| = {v} is not below 2"));
        }
        Ok(())
    }
}

/// Selects `t_n <= 2^{-n}` with `||(I - exp(-t_n P^2)) A|| <= 2^{-n}` for
/// `n = 1..=budget`: `2^{-n}` itself when admissible, otherwise the largest
/// admissible time found by log-bisection down to the configured minimum.
/// Failing at the minimum is evidence that `A` is not in `E`.
pub fn build_regularizer<M: ToComplex>(a: &M, grid: &Grid, budget: usize, tol: &Tolerances) -> Result<Regularizer> {
    let a = a.to_complex();
    check_square(&a, grid)?;
    let fa = fourier_columns(grid, &a)?;
    let freq0 = grid.frequencies(0);
    let frequency_squares: Vec<f64> = if grid.dim() == 1 {
        freq0.iter().map(|k| k * k).collect()
    } else {
        let freq1 = grid.frequencies(1);
        freq1
            .iter()
            .flat_map(|k1| freq0.iter().map(move |k0| k0 * k0 + k1 * k1))
            .collect()
    };
    let weighted_norm = |w: &dyn Fn(f64) -> f64| -> f64 {
        let mut m = fa.clone();
        for (mut row, k2) in m.row_iter_mut().zip(&frequency_squares) {
            row.scale_mut(w(*k2));
        }
        opnorm(&m)
    };
    let defect = |t: f64| weighted_norm(&|k2: f64| 1.0 - (-t * k2).exp());
    let mut times = Vec::with_capacity(budget);
    let mut step_norms = Vec::with_capacity(budget);
    for n in 1..=budget {
        let target = 0.5f64.powi(n as i32);
        let t_max = target;
        let v = defect(t_max);
        if v <= target {
            times.push(t_max);
            step_norms.push(v);
            continue;
        }
        let t_min = tol.regularizer_t_min.min(t_max);
        let v_min = defect(t_min);
        if v_min > target {
            return Err(Error::NonMembership {
                step: n,
                detail: format!(
                    "||(I - h_t(P)) A|| = {v_min:.3e} > 2^-{n} already at t = {t_min:e}; \
                     the range of A is not regularized by any admissible time"
                ),
            });
        }
        let (mut good, mut bad, mut good_v) = (t_min, t_max, v_min);
        for _ in 0..tol.regularizer_bisections {
            if bad / good <= 1.001 {
                break;
            }
            let mid = (good * bad).sqrt();
            let vm = defect(mid);
            if vm <= target {
                good = mid;
                good_v = vm;
            } else {
                bad = mid;
            }
        }
        times.push(good);
        step_norms.push(good_v);
    }
    let mut reg = Regularizer {
        times,
        frequency_squares,
        step_norms,
        partial_norms: Vec::new(),
    };
    for m in 0..=budget {
        let f = reg.weight(m);
        let mut scaled = fa.clone();
        for (mut row, w) in scaled.row_iter_mut().zip(&f) {
            row.scale_mut(*w);
        }
        reg.partial_norms.push(opnorm(&scaled));
    }
    Ok(reg)
}

/// Splitting `A = sum_r B_r` with `B_r = sum_{n - m = r} P_m A P_n` over the cubes of a partition.
#[derive(Debug, Clone)]
pub struct BandDecomposition {
    pub partition: CubePartition,
    /// Displacements `r`, sorted by length.
    pub offsets: Vec<Vec<i64>>,
    pub bands: Vec<CsrMatrix>,
    /// `mu(r) = max_{n - m = r} ||P_m A P_n||`.
    pub block_max: Vec<f64>,
    /// `||B_r||`, measured independently of the blocks.
    pub band_norms: Vec<f64>,
    /// `||sum_r B_r - A||`.
    pub reconstruction_error: f64,
}

impl BandDecomposition {
    /// Whether `||B_r|| <= mu(r)` holds for every band up to relative round-off `rel`.
    pub fn band_bound_holds(&self, rel: f64) -> bool {
        self.band_norms
            .iter()
            .zip(&self.block_max)
            .all(|(b, m)| *b <= m * (1.0 + rel) + f64::MIN_POSITIVE)
    }

    /// `(|r|, mu(r))` maximized over displacements of equal length.
    pub fn radial_profile(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (r, m) in self.offsets.iter().zip(&self.block_max) {
            let len = r.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
            match out.iter_mut().find(|(l, _)| (l - len).abs() < 1e-9) {
                Some(e) => e.1 = e.1.max(*m),
                None => out.push((len, *m)),
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Fit of `log mu(r) ~ -(|r| - k)_+^2 / 4ct` at time `t` over bands above `floor`:
    /// returns `(c, k, r_squared)`.
    pub fn gaussian_tail_fit(&self, t: f64, floor: f64, k_max: f64) -> Option<(f64, f64, f64)> {
        let pts: Vec<(f64, f64)> = self
            .radial_profile()
            .into_iter()
            .filter(|(l, m)| *l > 0.0 && *m > floor)
            .map(|(l, m)| (l, m.ln()))
            .collect();
        fit_shifted_gaussian(&pts, k_max).map(|(k, gamma, r2)| (1.0 / (4.0 * t * gamma), k, r2))
    }
}

pub fn band_decompose(a: &DMatrix<f64>, partition: &CubePartition) -> Result<BandDecomposition> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Argument("band decomposition needs a square matrix".into()));
    }
    let covered: usize = partition.blocks.iter().map(|b| b.len()).sum();
    if covered != n {
        return Err(Error::Argument(format!("partition covers {covered} of {n} indices")));
    }
    let mut groups: BTreeMap<Vec<i64>, Vec<(usize, usize)>> = BTreeMap::new();
    for (i, m) in partition.centers.iter().enumerate() {
        for (j, c) in partition.centers.iter().enumerate() {
            let r: Vec<i64> = c.iter().zip(m).map(|(x, y)| x - y).collect();
            groups.entry(r).or_default().push((i, j));
        }
    }
    let mut entries: Vec<(Vec<i64>, Vec<(usize, usize)>)> = groups.into_iter().collect();
    entries.sort_by(|x, y| {
        let lx: i64 = x.0.iter().map(|v| v * v).sum();
        let ly: i64 = y.0.iter().map(|v| v * v).sum();
        lx.cmp(&ly).then(x.0.cmp(&y.0))
    });
    let mut out = BandDecomposition {
        partition: partition.clone(),
        offsets: Vec::new(),
        bands: Vec::new(),
        block_max: Vec::new(),
        band_norms: Vec::new(),
        reconstruction_error: 0.0,
    };
    let mut sum = DMatrix::<f64>::zeros(n, n);
    for (r, pairs) in entries {
        let mut triplets = Vec::new();
        let mut mu = 0.0f64;
        for (i, j) in pairs {
            let rows = &partition.blocks[i];
            let cols = &partition.blocks[j];
            mu = mu.max(opnorm_exact(&block(a, rows, cols)));
            for &p in rows {
                for &q in cols {
                    triplets.push((p, q, a[(p, q)]));
                }
            }
        }
        let band = CsrMatrix::from_triplets(n, triplets);
        let transpose = CsrMatrix::from_triplets(n, band.triplets().map(|(i, j, v)| (j, i, v)).collect());
        for (i, j, v) in band.triplets() {
            sum[(i, j)] += v;
        }
        let norm = gram_lanczos_norm(
            n,
            |x: &DVector<f64>| band.mul_vec(x),
            |y: &DVector<f64>| transpose.mul_vec(y),
            1e-13,
            4 * n + 100,
            0x5eed,
        )
        .value;
        out.offsets.push(r);
        out.bands.push(band);
        out.block_max.push(mu);
        out.band_norms.push(norm);
    }
    out.reconstruction_error = opnorm_exact(&(sum - a));
    Ok(out)
}

/// Support and range measurements for a product in the bounded-support ideal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdealAudit {
    pub radius: f64,
    pub range: f64,
    /// `max(|x_i|, |x_j|)` over the nonzero entries of `AB` and `BA`.
    pub support_ab: f64,
    pub support_ba: f64,
    pub within_bound: bool,
    /// `||A - I||`.
    pub distance_from_identity: f64,
}

fn support_radius(m: &DMatrix<f64>, norms: &[f64]) -> f64 {
    let mut r = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != 0.0 {
                r = r.max(norms[i]).max(norms[j]);
            }
        }
    }
    r
}

/// Checks that `A = P_r A P_r` (support in the ball of radius `r` about the
/// origin) and that `B` has range `s` (entries vanish between nodes further
/// apart than `s`), then measures the supports of `AB` and `BA`, which must
/// lie within radius `r + s`.
pub fn ideal_ops(a: &DMatrix<f64>, r: f64, b: &DMatrix<f64>, s: f64, grid: &Grid) -> Result<IdealAudit> {
    let n = grid.len();
    if a.shape() != (n, n) || b.shape() != (n, n) {
        return Err(Error::Argument(format!("operands must be {n}x{n}")));
    }
    let nodes = grid.nodes();
    let norms: Vec<f64> = nodes.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let dist = |i: usize, j: usize| -> f64 {
        nodes[i].iter().zip(&nodes[j]).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
    };
    for j in 0..n {
        for i in 0..n {
            if a[(i, j)] != 0.0 && (norms[i] > r || norms[j] > r) {
                return Err(Error::Precondition {
                    detail: format!("A has an entry outside the ball of radius {r}"),
                    row: i,
                    col: j,
                });
            }
            if b[(i, j)] != 0.0 && dist(i, j) > s {
                return Err(Error::Precondition {
                    detail: format!("B couples nodes further apart than {s}"),
                    row: i,
                    col: j,
                });
            }
        }
    }
    let support_ab = support_radius(&(a * b), &norms);
    let support_ba = support_radius(&(b * a), &norms);
    let bound = r + s;
    Ok(IdealAudit {
        radius: r,
        range: s,
        support_ab,
        support_ba,
        within_bound: support_ab <= bound && support_ba <= bound,
        distance_from_identity: opnorm_exact(&(a - DMatrix::identity(n, n))),
    })
}

/// Both sides of the translation identities for `S_x = U_x S U_{-x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShadeCheck {
    /// `||V_k S_x V_{-k} - S_x||`.
    pub phase_translated: f64,
    /// `||V_k S V_{-k} - S||`.
    pub phase: f64,
    /// `||(U_s - I) S_x||`.
    pub shift_translated: f64,
    /// `||(U_s - I) S||`.
    pub shift: f64,
}

impl ShadeCheck {
    pub fn max_relative_gap(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        rel(self.phase_translated, self.phase).max(rel(self.shift_translated, self.shift))
    }
}

/// Evaluates both translation identities on a periodic line for a
/// grid-compatible `k` (a multiple of `2 pi / length`) and a translation by
/// `cells` whole cells.
pub fn shade_identities<M: ToComplex>(s_mat: &M, grid: &Grid, k: f64, cells: isize, s: f64) -> Result<ShadeCheck> {
    if !grid.periodic || grid.dim() != 1 {
        return Err(Error::Unsupported("translation identities are checked on periodic lines".into()));
    }
    let m = k * grid.length(0) / (2.0 * std::f64::consts::PI);
    if (m - m.round()).abs() > 1e-9 * m.abs().max(1.0) {
        return Err(Error::Argument(format!("k = {k} is not a multiple of 2 pi / {}", grid.length(0))));
    }
    let sm = s_mat.to_complex();
    check_square(&sm, grid)?;
    let n = grid.len() as isize;
    let idx = |j: usize| (j as isize + cells).rem_euclid(n) as usize;
    let translated = DMatrix::from_fn(sm.nrows(), sm.ncols(), |i, j| sm[(idx(i), idx(j))]);
    let x = first_coordinates(grid);
    Ok(ShadeCheck {
        phase_translated: opnorm_exact(&phase_defect(&translated, &x, k)),
        phase: opnorm_exact(&phase_defect(&sm, &x, k)),
        shift_translated: translation_defect_exact(&translated, grid, s)?,
        shift: translation_defect_exact(&sm, grid, s)?,
    })
}

fn translation_defect_exact(m: &DMatrix<Complex64>, grid: &Grid, s: f64) -> Result<f64> {
    if let Some(c) = whole_cells(grid, s) {
        return Ok(opnorm_exact(&cyclic_row_defect(m, grid, c)));
    }
    let u = FourierMultiplier::translation(grid, &[s])?;
    let mut moved = m.clone();
    u.apply_columns(&mut moved);
    Ok(opnorm_exact(&(moved - m)))
}
