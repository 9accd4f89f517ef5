//! Limit operators at infinity and the comparison of their spectra with the
//! essential spectrum.
//!
//! Limit coefficient profiles come from
//! [`CoefficientProfile::asymptotic_profiles`] or are declared by the caller.
//! Constant limits contribute `[0, inf)`, periodic limits their Floquet
//! bands, divergent limits nothing, and the degenerate zero form `{0}` when
//! admitted.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coefficients::{AsymptoticLimit, CoefficientProfile, Direction, Limit, Shape};
use crate::discretize::Grid;
use crate::error::{Error, Result};
use crate::export::fmt_num;
use crate::linalg::sym_eigen;
use crate::spectral::{essential_spectrum_estimate, hausdorff, merge_intervals, EstimatorConfig, Interval, SpectrumEstimate};
use crate::tolerances::Tolerances;

/// Limit profiles of translates of a coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFamily {
    pub base: Option<CoefficientProfile>,
    pub limits: Vec<AsymptoticLimit>,
}

impl AsymptoticFamily {
    /// The built-in limits of `base`.
    pub fn from_profile(base: &CoefficientProfile) -> Result<Self> {
        Ok(Self {
            base: Some(base.clone()),
            limits: base.asymptotic_profiles()?,
        })
    }

    /// Limits supplied by the caller without a base profile.
    pub fn declared(limits: Vec<CoefficientProfile>) -> Self {
        Self {
            base: None,
            limits: limits
                .into_iter()
                .map(|p| AsymptoticLimit {
                    direction: Direction::Declared,
                    limit: Limit::Profile(p),
                })
                .collect(),
        }
    }

    /// Limits declared for `base`; for built-in shapes they must agree with
    /// the computed limits as a set.
    pub fn with_limits(base: &CoefficientProfile, limits: Vec<CoefficientProfile>) -> Result<Self> {
        let family = Self {
            base: Some(base.clone()),
            ..Self::declared(limits)
        };
        if !matches!(base.shape, Shape::Tabulated { .. }) {
            let computed = base.asymptotic_profiles()?;
            let same = |a: &[AsymptoticLimit], b: &[AsymptoticLimit]| a.iter().all(|x| b.iter().any(|y| y.limit == x.limit));
            if !(same(&computed, &family.limits) && same(&family.limits, &computed)) {
                return Err(Error::Argument(format!(
                    "declared limits do not match the limits of {}",
                    base.tag()
                )));
            }
        }
        Ok(family)
    }

    pub fn has_degenerate(&self) -> bool {
        self.limits.iter().any(AsymptoticLimit::is_degenerate)
    }
}

/// Parameters of [`union_spectrum`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnionConfig {
    /// Spectral window `[lo, hi]`.
    pub window: [f64; 2],
    /// Grid cells over one period of a periodic limit.
    pub floquet_cells: usize,
    /// Bloch phases sampled in `[0, pi]`.
    pub bloch_samples: usize,
    /// Admit the zero form as a limit, with spectrum `{0}`.
    pub allow_degenerate: bool,
    /// Estimator used for limits that are neither constant nor periodic.
    pub estimator: Option<EstimatorConfig>,
}

impl Default for UnionConfig {
    fn default() -> Self {
        Self {
            window: [0.0, 10.0],
            floquet_cells: 256,
            bloch_samples: 65,
            allow_degenerate: false,
            estimator: None,
        }
    }
}

fn is_constant(p: &CoefficientProfile) -> bool {
    match &p.shape {
        Shape::Uniform { .. } => true,
        Shape::ExpDecay { rate } => *rate == 0.0,
        Shape::MatrixDiag2D { first, second, .. } => is_constant(first) && is_constant(second),
        _ => false,
    }
}

/// Floquet bands of a periodic one-dimensional profile, discretized like the
/// periodic assembly on one period with twisted boundary `psi_n = e^{i theta} psi_0`.
pub fn floquet_bands(profile: &CoefficientProfile, cells: usize, bloch_samples: usize) -> Result<Vec<Interval>> {
    let period = profile
        .period()
        .ok_or_else(|| Error::Argument(format!("{} is not periodic", profile.tag())))?;
    if cells < crate::discretize::MIN_POINTS || bloch_samples < 2 {
        return Err(Error::Argument("Floquet sampling is too coarse".into()));
    }
    let h = period / cells as f64;
    let faces: Vec<f64> = (0..cells)
        .map(|j| profile.value((j as f64 + 0.5) * h).map(|a| a / (h * h)))
        .collect::<Result<_>>()?;
    let mut lo = vec![f64::INFINITY; cells];
    let mut hi = vec![f64::NEG_INFINITY; cells];
    for q in 0..bloch_samples {
        let theta = std::f64::consts::PI * q as f64 / (bloch_samples - 1) as f64;
        let mut m = DMatrix::<Complex64>::zeros(cells, cells);
        for (j, a) in faces.iter().enumerate() {
            let k = (j + 1) % cells;
            // the face from the last node to the first crosses the cell boundary
            let phase = if k == 0 { Complex64::from_polar(1.0, theta) } else { Complex64::new(1.0, 0.0) };
            m[(j, j)] += a;
            m[(k, k)] += a;
            m[(j, k)] -= phase * a;
            m[(k, j)] -= phase.conj() * a;
        }
        let mut vals: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        for (b, v) in vals.into_iter().enumerate() {
            lo[b] = lo[b].min(v);
            hi[b] = hi[b].max(v);
        }
    }
    // bands touching at a Bloch phase may be separated by round-off only
    let slack = 64.0 * f64::EPSILON * hi.iter().copied().fold(0.0, f64::max);
    let merged = merge_intervals(lo.into_iter().zip(hi).map(|(a, b)| Interval::new(a.max(0.0), b + slack)).collect());
    Ok(merged.into_iter().map(|iv| Interval::new(iv.lo, iv.hi - slack)).collect())
}

fn clip(set: Vec<Interval>, window: [f64; 2]) -> Vec<Interval> {
    let w = Interval::new(window[0], window[1]);
    set.into_iter().filter_map(|iv| iv.intersect(&w)).collect()
}

/// Spectrum of one limit operator inside the window.
pub fn limit_spectrum(limit: &AsymptoticLimit, config: &UnionConfig, tol: &Tolerances) -> Result<Vec<Interval>> {
    let profile = match &limit.limit {
        Limit::Divergent => return Ok(Vec::new()),
        Limit::Profile(p) => p,
    };
    if profile.is_degenerate() {
        if !config.allow_degenerate {
            return Err(Error::Degenerate(format!(
                "limit {} is the zero form; admit it explicitly to use spectrum {{0}}",
                profile.tag()
            )));
        }
        return Ok(clip(vec![Interval::new(0.0, 0.0)], config.window));
    }
    if is_constant(profile) {
        return Ok(clip(vec![Interval::new(0.0, f64::INFINITY)], config.window));
    }
    if profile.period().is_some() && profile.dim() == 1 {
        return Ok(clip(floquet_bands(profile, config.floquet_cells, config.bloch_samples)?, config.window));
    }
    let est = config.estimator.as_ref().ok_or_else(|| {
        Error::Unsupported(format!("limit {} needs an estimator configuration", profile.tag()))
    })?;
    let mut est = est.clone();
    est.window = config.window;
    Ok(essential_spectrum_estimate(profile, &est, tol)?.intervals)
}

/// Closure of the union of the limit spectra inside the window.
pub fn union_spectrum(family: &AsymptoticFamily, config: &UnionConfig, tol: &Tolerances) -> Result<SpectrumEstimate> {
    let mut all = Vec::new();
    for l in &family.limits {
        all.extend(limit_spectrum(l, config, tol)?);
    }
    Ok(SpectrumEstimate::from_intervals(all, 0.0))
}

/// Outcome of [`compare_essential`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EssentialComparison {
    pub profile: String,
    pub estimate: SpectrumEstimate,
    pub union: SpectrumEstimate,
    pub distance: f64,
    pub tolerance: f64,
    pub agree: bool,
    /// Number of limits that are the zero form.
    pub degenerate_limits: usize,
}

impl EssentialComparison {
    pub fn verdict(&self) -> &'static str {
        if self.agree {
            "agree"
        } else {
            "disagree"
        }
    }

    /// Interval table of both sides followed by the verdict line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["source", "interval_lo", "interval_hi"])?;
            for (src, set) in [("estimate", &self.estimate), ("union", &self.union)] {
                for iv in &set.intervals {
                    w.write_record([src.to_string(), fmt_num(iv.lo), fmt_num(iv.hi)])?;
                }
            }
            w.flush()?;
        }
        writeln!(
            out,
            "# verdict={} hausdorff={} tolerance={}",
            self.verdict(),
            fmt_num(self.distance),
            fmt_num(self.tolerance)
        )?;
        Ok(())
    }
}

/// Hausdorff distance between the essential-spectrum estimate of `base` and
/// the union of the limit spectra. Degenerate limits are admitted with
/// spectrum `{0}`, so that their failure is reported rather than refused.
/// The tolerance defaults to `hausdorff_factor` times the median eigenvalue
/// spacing on the finest truncation.
pub fn compare_essential(
    base: &CoefficientProfile,
    family: &AsymptoticFamily,
    estimator: &EstimatorConfig,
    tolerance: Option<f64>,
    tol: &Tolerances,
) -> Result<EssentialComparison> {
    if base.is_degenerate() {
        return Err(Error::Degenerate(format!("{} has the zero form", base.tag())));
    }
    let estimate = essential_spectrum_estimate(base, estimator, tol)?;
    let floquet_cells = family
        .limits
        .iter()
        .filter_map(|l| match &l.limit {
            Limit::Profile(p) => p.period(),
            Limit::Divergent => None,
        })
        .map(|p| (p * estimator.rule.cells_per_unit).round() as usize)
        .max()
        .unwrap_or(256)
        .max(crate::discretize::MIN_POINTS);
    let config = UnionConfig {
        window: estimator.window,
        floquet_cells,
        allow_degenerate: true,
        estimator: Some(estimator.clone()),
        ..UnionConfig::default()
    };
    let union = union_spectrum(family, &config, tol)?;
    let distance = hausdorff(&estimate.intervals, &union.intervals);
    let tolerance = tolerance.unwrap_or(tol.hausdorff_factor * estimate.median_spacing);
    Ok(EssentialComparison {
        profile: base.tag(),
        agree: distance <= tolerance,
        distance,
        tolerance,
        degenerate_limits: family.limits.iter().filter(|l| l.is_degenerate()).count(),
        estimate,
        union,
    })
}

/// Continuous functions vanishing at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayingFunction {
    /// `1 / (1 + x^2)`.
    Rational,
    /// `exp(-x^2)`.
    Gaussian,
    Zero,
}

impl DecayingFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            DecayingFunction::Rational => 1.0 / (1.0 + x * x),
            DecayingFunction::Gaussian => (-x * x).exp(),
            DecayingFunction::Zero => 0.0,
        }
    }

    /// Closure of the range over the real line.
    pub fn range(self) -> Interval {
        match self {
            DecayingFunction::Rational | DecayingFunction::Gaussian => Interval::new(0.0, 1.0),
            DecayingFunction::Zero => Interval::new(0.0, 0.0),
        }
    }

    /// `sup_{|x| <= l} |f(x + c)|`.
    pub fn translated_sup_bound(self, l: f64, c: f64) -> f64 {
        let gap = (c.abs() - l).max(0.0);
        self.eval(gap)
    }
}

/// Parameters of [`c0_counterexample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct C0Config {
    pub half_widths: Vec<f64>,
    pub cells_per_unit: f64,
    /// Offsets `c = L + margin` at which translates are sampled.
    pub margins: Vec<f64>,
    /// Sup-norm threshold at the largest margin.
    pub threshold: f64,
}

impl Default for C0Config {
    fn default() -> Self {
        Self {
            half_widths: vec![10.0, 20.0, 40.0, 80.0],
            cells_per_unit: 8.0,
            margins: vec![0.0, 10.0, 30.0],
            threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranslateRow {
    pub half_width: f64,
    pub offset: f64,
    /// `max_j |f(x_j + c)|` over the window grid.
    pub translated_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub half_width: f64,
    pub points: usize,
    pub spacing: f64,
    /// Hausdorff distance between the eigenvalues of `f(Q)` and the closed range.
    pub distance: f64,
}

/// Translates of `f(Q)` tend to zero while its spectrum fills the range of `f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct C0Report {
    pub function: DecayingFunction,
    pub translates: Vec<TranslateRow>,
    pub spectra: Vec<SpectrumRow>,
    /// Every translate at the largest margin is below the threshold.
    pub translates_vanish: bool,
    /// Range distances decrease and the last one is within the grid spacing.
    pub spectrum_converges: bool,
    pub threshold: f64,
}

impl C0Report {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "L", "parameter", "value"])?;
        for r in &self.translates {
            w.write_record(["translate_sup".into(), fmt_num(r.half_width), fmt_num(r.offset), fmt_num(r.translated_sup)])?;
        }
        for r in &self.spectra {
            w.write_record(["range_distance".into(), fmt_num(r.half_width), r.points.to_string(), fmt_num(r.distance)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Hausdorff distance between a finite point set and an interval.
fn points_to_interval(points: &[f64], iv: Interval) -> f64 {
    let pts: Vec<Interval> = points.iter().map(|p| Interval::new(*p, *p)).collect();
    hausdorff(&pts, &[iv])
}

/// Samples `sup |f(x + c)|` on growing windows and the spectrum of the
/// multiplier `f(Q)`, whose eigenvalues are the sampled values of `f`.
pub fn c0_counterexample(f: DecayingFunction, config: &C0Config) -> Result<C0Report> {
    if config.half_widths.is_empty() || config.margins.is_empty() {
        return Err(Error::Argument("need at least one window and one margin".into()));
    }
    let mut translates = Vec::new();
    let mut spectra = Vec::new();
    for &l in &config.half_widths {
        let points = ((2.0 * l * config.cells_per_unit).round() as usize).saturating_sub(1);
        let grid = Grid::line(-l, l, points)?;
        let xs = grid.axis_nodes(0);
        for &m in &config.margins {
            let c = l + m;
            let sup = xs.iter().map(|x| f.eval(x + c).abs()).fold(0.0, f64::max);
            translates.push(TranslateRow {
                half_width: l,
                offset: c,
                translated_sup: sup,
            });
        }
        let vals: Vec<f64> = xs.iter().map(|x| f.eval(*x)).collect();
        spectra.push(SpectrumRow {
            half_width: l,
            points,
            spacing: grid.spacing(0),
            distance: points_to_interval(&vals, f.range()),
        });
    }
    let last_margin = config.margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let translates_vanish = translates
        .iter()
        .filter(|r| r.offset - r.half_width == last_margin)
        .all(|r| r.translated_sup < config.threshold);
    let spectrum_converges = spectra.windows(2).all(|w| w[1].distance <= w[0].distance + 1e-15)
        && spectra.last().is_some_and(|r| r.distance <= r.spacing);
    Ok(C0Report {
        function: f,
        translates,
        spectra,
        translates_vanish,
        spectrum_converges,
        threshold: config.threshold,
    })
}

/// Spectra of the compressions of a matrix outside balls of growing radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfinitySpectrum {
    pub radii: Vec<f64>,
    /// Eigenvalue clusters of `(I - P_r) A (I - P_r)` on the range of `I - P_r`.
    pub sets: Vec<Vec<Interval>>,
    /// Hausdorff distances between consecutive sets.
    pub stability: Vec<f64>,
    /// Clusters at the largest radius.
    pub estimate: SpectrumEstimate,
}

/// Groups sorted values whose neighbours are within `2 resolution`.
fn clusters(vals: &[f64], resolution: f64) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::new();
    for &v in vals {
        match out.last_mut() {
            Some(last) if v - last.hi <= 2.0 * resolution => last.hi = v,
            _ => out.push(Interval::new(v, v)),
        }
    }
    out
}

/// Approximates the spectrum of the image of a symmetric `A` in the quotient
/// by the bounded-support ideal, from its compressions outside the balls of
/// radius `r` about `center`.
pub fn spectrum_at_infinity(
    a: &DMatrix<f64>,
    grid: &Grid,
    center: &[f64],
    radii: &[f64],
    resolution: f64,
) -> Result<InfinitySpectrum> {
    let n = grid.len();
    if a.shape() != (n, n) {
        return Err(Error::Argument(format!("matrix must be {n}x{n}")));
    }
    if center.len() != grid.dim() {
        return Err(Error::Argument("centre dimension does not match the grid".into()));
    }
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("radii must be nonempty and increasing".into()));
    }
    if (a - a.transpose()).amax() > 1e-12 * a.amax().max(f64::MIN_POSITIVE) {
        return Err(Error::Unsupported("spectrum at infinity is computed for symmetric matrices".into()));
    }
    let dist: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|x| x.iter().zip(center).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt())
        .collect();
    let mut sets = Vec::new();
    for &r in radii {
        let outside: Vec<usize> = (0..n).filter(|&i| dist[i] > r).collect();
        if outside.is_empty() {
            return Err(Error::Argument(format!("no grid node lies outside radius {r}")));
        }
        let m = DMatrix::from_fn(outside.len(), outside.len(), |i, j| a[(outside[i], outside[j])]);
        let (mut vals, _) = sym_eigen(&m);
        vals.sort_by(f64::total_cmp);
        sets.push(clusters(&vals, resolution));
    }
    let stability = sets.windows(2).map(|w| hausdorff(&w[0], &w[1])).collect();
    let estimate = SpectrumEstimate::from_intervals(sets.last().cloned().unwrap_or_default(), resolution);
    Ok(InfinitySpectrum {
        radii: radii.to_vec(),
        sets,
        stability,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::position_multiplier;
    use crate::spectral::GridRule;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn set(v: &[(f64, f64)]) -> Vec<Interval> {
        v.iter().map(|(a, b)| Interval::new(*a, *b)).collect()
    }

    #[test]
    fn constant_limits_fill_the_half_line() {
        let fam = AsymptoticFamily::declared(vec![
            CoefficientProfile::uniform(1.0).unwrap(),
            CoefficientProfile::uniform(4.0).unwrap(),
        ]);
        let u = union_spectrum(&fam, &UnionConfig::default(), &Tolerances::default()).unwrap();
        assert_eq!(u.intervals, set(&[(0.0, 10.0)]));
        let blend = CoefficientProfile::blend(1.0, 4.0, -1.0, 1.0).unwrap();
        let u = union_spectrum(&AsymptoticFamily::from_profile(&blend).unwrap(), &UnionConfig::default(), &Tolerances::default()).unwrap();
        assert_eq!(u.intervals, set(&[(0.0, 10.0)]));
    }

    #[test]
    fn degenerate_limits_need_consent() {
        let fam = AsymptoticFamily::from_profile(&CoefficientProfile::rational_bump(1.0, 1.0).unwrap()).unwrap();
        assert!(fam.has_degenerate());
        let tol = Tolerances::default();
        assert!(matches!(union_spectrum(&fam, &UnionConfig::default(), &tol), Err(Error::Degenerate(_))));
        let cfg = UnionConfig {
            allow_degenerate: true,
            ..UnionConfig::default()
        };
        assert_eq!(union_spectrum(&fam, &cfg, &tol).unwrap().intervals, set(&[(0.0, 0.0)]));
        // divergent limits contribute nothing
        let exp = AsymptoticFamily::from_profile(&CoefficientProfile::exp_decay(2.0).unwrap()).unwrap();
        assert_eq!(union_spectrum(&exp, &cfg, &tol).unwrap().intervals, set(&[(0.0, 0.0)]));
    }

    #[test]
    fn floquet_bands_of_a_constant_are_the_free_dispersion() {
        // a periodic profile with zero amplitude: bands of the discrete free operator
        let p = CoefficientProfile::periodic(1.0, 0.0, 2.0 * PI).unwrap();
        let bands = floquet_bands(&p, 64, 33).unwrap();
        let h = 2.0 * PI / 64.0;
        let top = 4.0 / (h * h);
        assert_eq!(bands.len(), 1);
        assert!(bands[0].lo.abs() < 1e-10 && (bands[0].hi - top).abs() < 1e-8 * top);
    }

    #[test]
    fn floquet_bands_match_long_periodic_truncations() {
        let p = CoefficientProfile::periodic(2.0, 1.0, 2.0 * PI).unwrap();
        let bands = clip(floquet_bands(&p, 64, 65).unwrap(), [0.0, 10.0]);
        assert!(bands.len() >= 2, "{bands:?}");
        // eigenvalues of a 24-period ring are Bloch eigenvalues at theta = 2 pi m / 24
        let periods = 24;
        let grid = Grid::periodic_line(0.0, 2.0 * PI * periods as f64, 64 * periods).unwrap();
        let op = crate::discretize::assemble(&p, &grid, crate::discretize::Boundary::Periodic).unwrap();
        let vals = crate::spectral::window_eigenvalues(&op, 0.0, 10.0).unwrap();
        for v in vals {
            assert!(bands.iter().any(|b| v >= b.lo - 1e-9 && v <= b.hi + 1e-9), "{v} outside {bands:?}");
        }
    }

    #[test]
    fn union_is_order_and_duplicate_invariant() {
        let a = CoefficientProfile::periodic(2.0, 1.0, 2.0 * PI).unwrap();
        let b = CoefficientProfile::uniform(3.0).unwrap();
        let cfg = UnionConfig {
            window: [0.0, 0.5],
            floquet_cells: 64,
            ..UnionConfig::default()
        };
        let tol = Tolerances::default();
        let one = union_spectrum(&AsymptoticFamily::declared(vec![a.clone(), b.clone()]), &cfg, &tol).unwrap();
        let two = union_spectrum(&AsymptoticFamily::declared(vec![b.clone(), a.clone(), b]), &cfg, &tol).unwrap();
        assert_eq!(one.intervals, two.intervals);
    }

    #[test]
    fn declared_limits_are_checked() {
        let blend = CoefficientProfile::blend(1.0, 4.0, -1.0, 1.0).unwrap();
        let ok = AsymptoticFamily::with_limits(
            &blend,
            vec![CoefficientProfile::uniform(4.0).unwrap(), CoefficientProfile::uniform(1.0).unwrap()],
        );
        assert!(ok.is_ok());
        let bad = AsymptoticFamily::with_limits(&blend, vec![CoefficientProfile::uniform(2.0).unwrap()]);
        assert!(matches!(bad, Err(Error::Argument(_))));
        // a compact modification of Uniform(1) has the limits of Uniform(1)
        let xs: Vec<f64> = (0..=40).map(|i| -2.0 + 0.1 * i as f64).collect();
        let vs: Vec<f64> = xs.iter().map(|x| 1.0 + 0.5 * (-x * x * 4.0).exp()).collect();
        let tab = CoefficientProfile::tabulated(xs, vs, vec![CoefficientProfile::uniform(1.0).unwrap()]).unwrap();
        let fam = AsymptoticFamily::from_profile(&tab).unwrap();
        let u = union_spectrum(&fam, &UnionConfig::default(), &Tolerances::default()).unwrap();
        assert_eq!(u.intervals, set(&[(0.0, 10.0)]));
    }

    fn estimator() -> EstimatorConfig {
        EstimatorConfig {
            half_widths: vec![10.0, 20.0, 40.0],
            rule: GridRule { cells_per_unit: 8.0 },
            window: [0.0, 10.0],
            center: 0.0,
        }
    }

    #[test]
    fn uniform_profiles_agree_with_their_limits() {
        let tol = Tolerances::default();
        let p = CoefficientProfile::uniform(2.0).unwrap();
        let fam = AsymptoticFamily::from_profile(&p).unwrap();
        let c = compare_essential(&p, &fam, &estimator(), None, &tol).unwrap();
        assert!(c.agree, "{} > {}", c.distance, c.tolerance);
        assert_eq!(c.verdict(), "agree");
    }

    #[test]
    fn c0_examples() {
        let cfg = C0Config::default();
        let r = c0_counterexample(DecayingFunction::Rational, &cfg).unwrap();
        for row in &r.translates {
            let bound = DecayingFunction::Rational.translated_sup_bound(row.half_width, row.offset);
            assert!(row.translated_sup <= bound + 1e-15);
        }
        assert!(r.spectrum_converges);
        let g = c0_counterexample(DecayingFunction::Gaussian, &cfg).unwrap();
        assert!(g.translates_vanish && g.spectrum_converges);
        let z = c0_counterexample(DecayingFunction::Zero, &cfg).unwrap();
        assert!(z.translates.iter().all(|r| r.translated_sup == 0.0));
        assert!(z.spectra.iter().all(|r| r.distance == 0.0));
    }

    #[test]
    fn point_set_distance() {
        assert!((points_to_interval(&[0.5, 0.1, 0.9], Interval::new(0.0, 1.0)) - 0.2).abs() < 1e-15);
        assert!((points_to_interval(&[1.5], Interval::new(0.0, 1.0)) - 1.5).abs() < 1e-15);
    }

    fn multiplier(grid: &Grid, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        position_multiplier(grid, |x| f(x[0])).unwrap().dense()
    }

    #[test]
    fn spectrum_at_infinity_examples() {
        let grid = Grid::line(-40.0, 40.0, 639).unwrap();
        let radii = [5.0, 10.0, 20.0];
        let c0 = spectrum_at_infinity(&multiplier(&grid, |x| 1.0 / (1.0 + x * x)), &grid, &[0.0], &radii, 0.01).unwrap();
        assert!(hausdorff(&c0.estimate.intervals, &set(&[(0.0, 0.0)])) <= 0.01);
        let s = spectrum_at_infinity(&multiplier(&grid, f64::sin), &grid, &[0.0], &radii, 0.01).unwrap();
        assert!(hausdorff(&s.estimate.intervals, &set(&[(-1.0, 1.0)])) <= 0.01, "{:?}", s.estimate.intervals);
        let mut bump = DMatrix::zeros(639, 639);
        let xs = grid.axis_nodes(0);
        for i in 0..639 {
            for j in 0..639 {
                if xs[i].abs() <= 2.0 && xs[j].abs() <= 2.0 {
                    bump[(i, j)] = 1.0 / (1.0 + (i as f64 - j as f64).abs());
                }
            }
        }
        let b = spectrum_at_infinity(&bump, &grid, &[0.0], &radii, 0.01).unwrap();
        assert_eq!(b.estimate.intervals, set(&[(0.0, 0.0)]));
        assert!(matches!(
            spectrum_at_infinity(&bump, &grid, &[0.0], &[50.0], 0.01),
            Err(Error::Argument(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn bounded_support_perturbations_are_invisible(seed in 0u64..1000, width in 0.5f64..2.4) {
            use rand::{Rng, SeedableRng};
            let grid = Grid::line(-20.0, 20.0, 159).unwrap();
            let xs = grid.axis_nodes(0);
            let a = multiplier(&grid, |x| (0.7 * x).cos());
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut b = DMatrix::zeros(159, 159);
            for i in 0..159 {
                for j in 0..=i {
                    if xs[i].abs() <= width && xs[j].abs() <= width {
                        let v: f64 = rng.random_range(-3.0..3.0);
                        b[(i, j)] = v;
                        b[(j, i)] = v;
                    }
                }
            }
            let radii = [5.0, 8.0];
            let x = spectrum_at_infinity(&a, &grid, &[0.0], &radii, 0.02).unwrap();
            let y = spectrum_at_infinity(&(&a + b), &grid, &[0.0], &radii, 0.02).unwrap();
            prop_assert!(hausdorff(&x.estimate.intervals, &y.estimate.intervals) <= 1e-12);
        }
    }
}
