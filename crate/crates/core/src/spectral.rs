//! Eigenpairs, resolvents, heat semigroups, operator norms and a
//! boundary-robust estimator of the essential spectrum.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientProfile;
use crate::discretize::{assemble, Boundary, DiscreteOperator, Grid};
use crate::error::{Error, Result};
use crate::export::fmt_num;
use crate::linalg::{self, chebyshev_heat, lanczos_lowest, spectral_function, sym_eigen};
use crate::tolerances::Tolerances;

pub use crate::linalg::{opnorm, opnorm_exact};

/// Largest dimension handled by dense eigendecompositions.
pub const DENSE_LIMIT: usize = 8192;
/// Largest dimension for which the heat semigroup uses an eigendecomposition.
pub const HEAT_EIGEN_LIMIT: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<DMatrix<f64>>,
    pub residuals: Vec<f64>,
}

/// Residual bound `1e-8 (1 + |lambda|)`, floored by the round-off of one
/// matrix-vector product with `H`.
pub fn residual_tolerance(lambda: f64, matrix_scale: f64) -> f64 {
    1e-8 * (1.0 + lambda.abs()) + 64.0 * f64::EPSILON * matrix_scale
}

impl SpectralData {
    /// Checks ordering, residuals and orthonormality.
    pub fn verify(&self, matrix_scale: f64) -> Result<()> {
        if self.eigenvalues.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Solver {
                iterations: 0,
                detail: "eigenvalues not sorted".into(),
            });
        }
        for (i, (l, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            if *r > residual_tolerance(*l, matrix_scale) {
                return Err(Error::Solver {
                    iterations: 0,
                    detail: format!("residual {r:e} of pair {i} (lambda = {l}) exceeds tolerance"),
                });
            }
        }
        if let Some(v) = &self.eigenvectors {
            let g = v.transpose() * v;
            let dev = (g - DMatrix::identity(v.ncols(), v.ncols())).amax();
            if dev > 1e-8 {
                return Err(Error::Solver {
                    iterations: 0,
                    detail: format!("eigenvector Gram matrix deviates from identity by {dev:e}"),
                });
            }
        }
        Ok(())
    }

    /// CSV rows `kind,index,value,residual`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "index", "value", "residual"])?;
        for (i, (l, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            w.write_record(["eigenvalue", &i.to_string(), &fmt_num(*l), &fmt_num(*r)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn residuals(op: &DiscreteOperator, vals: &[f64], vecs: &DMatrix<f64>) -> Vec<f64> {
    let hv = op.matrix.mul_dense(vecs);
    vals.iter()
        .enumerate()
        .map(|(c, l)| (hv.column(c) - vecs.column(c) * *l).norm())
        .collect()
}

/// Lowest `count` eigenpairs of `op`.
pub fn eigensolve(op: &DiscreteOperator, count: usize) -> Result<SpectralData> {
    let n = op.dim();
    if count > n {
        return Err(Error::Argument(format!("requested {count} eigenpairs of a {n}-dimensional operator")));
    }
    let (vals, vecs) = if let Some(t) = op.matrix.as_tridiagonal() {
        t.lowest_pairs(count)
    } else if n <= DENSE_LIMIT {
        let (vals, vecs) = sym_eigen(&op.dense());
        (vals[..count].to_vec(), vecs.columns(0, count).into_owned())
    } else {
        lanczos_lowest(&op.matrix, count, 1e-12)?
    };
    let res = residuals(op, &vals, &vecs);
    let data = SpectralData {
        eigenvalues: vals,
        eigenvectors: Some(vecs),
        residuals: res,
    };
    data.verify(op.matrix.max_abs())?;
    Ok(data)
}

/// Lowest `count` eigenvalues without eigenvectors.
pub fn lowest_eigenvalues(op: &DiscreteOperator, count: usize) -> Result<Vec<f64>> {
    if let Some(t) = op.matrix.as_tridiagonal() {
        return Ok(t.lowest(count.min(op.dim())));
    }
    Ok(eigensolve(op, count)?.eigenvalues)
}

/// All eigenvalues of `op` inside `[lo, hi)`.
pub fn window_eigenvalues(op: &DiscreteOperator, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if let Some(t) = op.matrix.as_tridiagonal() {
        return Ok(t.eigenvalues_in(lo, hi));
    }
    if op.dim() > DENSE_LIMIT {
        return Err(Error::Unsupported(format!(
            "window eigenvalues of a {}-dimensional non-tridiagonal operator",
            op.dim()
        )));
    }
    let (vals, _) = sym_eigen(&op.dense());
    Ok(vals.into_iter().filter(|v| *v >= lo && *v < hi).collect())
}

/// Full eigendecomposition, ascending.
pub fn full_eigen(op: &DiscreteOperator) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if op.dim() > DENSE_LIMIT {
        return Err(Error::Unsupported(format!(
            "full eigendecomposition above dimension {DENSE_LIMIT}"
        )));
    }
    Ok(sym_eigen(&op.dense()))
}

/// `(H + alpha I)^{-1}` as a dense symmetric matrix.
pub fn resolvent(op: &DiscreteOperator, alpha: f64) -> Result<DMatrix<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::Argument(format!("resolvent needs alpha > 0, got {alpha}")));
    }
    let n = op.dim();
    let mut out = if let Some(t) = op.matrix.as_tridiagonal() {
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for c in 0..n {
            e[c] = 1.0;
            let col = t.solve_shifted(-alpha, &e);
            m.column_mut(c).copy_from_slice(&col);
            e[c] = 0.0;
        }
        m
    } else {
        let shifted = op.dense() + DMatrix::identity(n, n) * alpha;
        let chol = shifted.cholesky().ok_or_else(|| Error::Solver {
            iterations: 0,
            detail: "H + alpha I is not positive definite".into(),
        })?;
        chol.inverse()
    };
    linalg::symmetrize(&mut out);
    Ok(out)
}

/// `exp(-t H)` as a dense matrix.
pub fn heat(op: &DiscreteOperator, t: f64) -> Result<DMatrix<f64>> {
    if !(t > 0.0) {
        return Err(Error::Argument(format!("heat semigroup needs t > 0, got {t}")));
    }
    let n = op.dim();
    if n <= HEAT_EIGEN_LIMIT {
        let (vals, vecs) = sym_eigen(&op.dense());
        Ok(spectral_function(&vals, &vecs, |l| (-t * l).exp()))
    } else {
        let (lo, hi) = op.matrix.gershgorin();
        let mut m = chebyshev_heat(&op.matrix, t, &DMatrix::identity(n, n), (lo.max(0.0).min(hi), hi));
        linalg::symmetrize(&mut m);
        Ok(m)
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }
}

/// Sorts and merges overlapping intervals.
pub fn merge_intervals(mut v: Vec<Interval>) -> Vec<Interval> {
    v.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut out: Vec<Interval> = Vec::with_capacity(v.len());
    for iv in v {
        match out.last_mut() {
            Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
            _ => out.push(iv),
        }
    }
    out
}

fn distance_to(x: f64, set: &[Interval]) -> f64 {
    set.iter()
        .map(|iv| {
            if iv.contains(x) {
                0.0
            } else {
                (iv.lo - x).abs().min((x - iv.hi).abs())
            }
        })
        .fold(f64::INFINITY, f64::min)
}

fn directed_hausdorff(a: &[Interval], b: &[Interval]) -> f64 {
    let mut candidates: Vec<f64> = a.iter().flat_map(|iv| [iv.lo, iv.hi]).collect();
    // the farthest point of A from B may sit in the middle of a gap of B
    for w in b.windows(2) {
        let mid = 0.5 * (w[0].hi + w[1].lo);
        if a.iter().any(|iv| iv.contains(mid)) {
            candidates.push(mid);
        }
    }
    candidates
        .into_iter()
        .map(|x| distance_to(x, b))
        .fold(0.0, f64::max)
}

/// Hausdorff distance between two finite unions of closed intervals.
pub fn hausdorff(a: &[Interval], b: &[Interval]) -> f64 {
    let a = merge_intervals(a.to_vec());
    let b = merge_intervals(b.to_vec());
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => directed_hausdorff(&a, &b).max(directed_hausdorff(&b, &a)),
    }
}

/// Rule mapping a half-width `L` to a grid on a window of length `2L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRule {
    /// Grid cells per unit length.
    pub cells_per_unit: f64,
}

impl GridRule {
    /// Interior node count for a window of the given length.
    pub fn points(&self, length: f64) -> usize {
        ((length * self.cells_per_unit).round() as usize).saturating_sub(1).max(crate::discretize::MIN_POINTS)
    }
}

/// Eigenvalue run observed for one truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEvidence {
    pub half_width: f64,
    pub boundary: Boundary,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub intervals: Vec<Interval>,
    pub evidence: Vec<Vec<ClusterEvidence>>,
    pub inconclusive: Vec<bool>,
    /// Median eigenvalue spacing on the finest truncation.
    pub median_spacing: f64,
}

impl SpectrumEstimate {
    pub fn from_intervals(intervals: Vec<Interval>, median_spacing: f64) -> Self {
        let intervals = merge_intervals(intervals);
        let k = intervals.len();
        Self {
            intervals,
            evidence: vec![Vec::new(); k],
            inconclusive: vec![false; k],
            median_spacing,
        }
    }

    pub fn is_conclusive(&self) -> bool {
        !self.inconclusive.iter().any(|b| *b)
    }

    /// CSV rows `interval_lo,interval_hi,evidence_count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["interval_lo", "interval_hi", "evidence_count"])?;
        for (iv, ev) in self.intervals.iter().zip(&self.evidence) {
            w.write_record([fmt_num(iv.lo), fmt_num(iv.hi), ev.len().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Splits sorted eigenvalues into runs whose gaps stay within
/// `factor` times the local median spacing; short runs are dropped.
pub fn eigenvalue_runs(vals: &[f64], factor: f64, min_size: usize) -> Vec<(Interval, usize)> {
    if vals.is_empty() {
        return Vec::new();
    }
    let gaps: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
    let radius = 4;
    let mut runs = Vec::new();
    let mut start = 0;
    for (i, g) in gaps.iter().enumerate() {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius + 1).min(gaps.len());
        let mut local: Vec<f64> = gaps[lo..hi].to_vec();
        let m = median(&mut local);
        if *g > factor * m {
            runs.push((start, i));
            start = i + 1;
        }
    }
    runs.push((start, vals.len() - 1));
    runs.into_iter()
        .filter(|(a, b)| b + 1 - a >= min_size)
        .map(|(a, b)| (Interval::new(vals[a], vals[b]), b + 1 - a))
        .collect()
}

/// Parameters of [`essential_spectrum_estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Increasing half-widths `L` of the truncation windows.
    pub half_widths: Vec<f64>,
    pub rule: GridRule,
    /// Spectral window `[lo, hi]`.
    pub window: [f64; 2],
    /// Centre of the truncation windows.
    #[serde(default)]
    pub center: f64,
}

/// Truncation interval of half-width `l`, moved inside the profile domain.
pub fn truncation_window(profile: &CoefficientProfile, center: f64, l: f64) -> (f64, f64) {
    let (dlo, dhi) = profile.domain().first_axis();
    let (mut lo, mut hi) = (center - l, center + l);
    if lo < dlo {
        lo = dlo;
        hi = dlo + 2.0 * l;
    }
    if hi > dhi {
        hi = dhi;
        lo = (dhi - 2.0 * l).max(dlo);
    }
    (lo, hi)
}

/// Estimates the essential spectrum inside a window from eigenvalue runs
/// that persist under growth of the truncation and under a change of
/// boundary condition.
pub fn essential_spectrum_estimate(
    profile: &CoefficientProfile,
    config: &EstimatorConfig,
    tol: &Tolerances,
) -> Result<SpectrumEstimate> {
    let ls = &config.half_widths;
    if ls.len() < 3 {
        return Err(Error::Argument(format!("need at least 3 truncation sizes, got {}", ls.len())));
    }
    if ls.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument("truncation sizes must increase".into()));
    }
    let [wlo, whi] = config.window;
    let mut per_l: Vec<Vec<Interval>> = Vec::new();
    let mut evidence: Vec<ClusterEvidence> = Vec::new();
    let mut medians: Vec<f64> = Vec::new();
    for &l in ls {
        let (lo, hi) = truncation_window(profile, config.center, l);
        let grid = Grid::line(lo, hi, config.rule.points(hi - lo))?;
        let mut runs_by_bc = Vec::new();
        for bc in [Boundary::Dirichlet, Boundary::Neumann] {
            let op = assemble(profile, &grid, bc)?;
            let vals = window_eigenvalues(&op, wlo, whi + f64::EPSILON * whi.abs())?;
            if bc == Boundary::Dirichlet {
                let mut gaps: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
                medians.push(median(&mut gaps));
            }
            let runs = eigenvalue_runs(&vals, tol.cluster_factor, tol.min_cluster_size);
            evidence.extend(runs.iter().map(|(iv, c)| ClusterEvidence {
                half_width: l,
                boundary: bc,
                lo: iv.lo,
                hi: iv.hi,
                count: *c,
            }));
            runs_by_bc.push(runs.into_iter().map(|r| r.0).collect::<Vec<_>>());
        }
        let mut both = Vec::new();
        for a in &runs_by_bc[0] {
            for b in &runs_by_bc[1] {
                if let Some(iv) = a.intersect(b) {
                    both.push(iv);
                }
            }
        }
        per_l.push(merge_intervals(both));
    }
    let k = per_l.len();
    let median_spacing = medians[k - 1];
    let mut out = SpectrumEstimate::from_intervals(per_l[k - 1].clone(), median_spacing);
    // endpoints may move by a few coarse-grid spacings between the two largest truncations
    let drift_tol = tol.cluster_factor * medians[k - 2];
    for (i, iv) in out.intervals.clone().iter().enumerate() {
        out.evidence[i] = evidence
            .iter()
            .filter(|e| Interval::new(e.lo, e.hi).overlaps(iv))
            .cloned()
            .collect();
        let matched: Vec<&Interval> = per_l[k - 2].iter().filter(|p| p.overlaps(iv)).collect();
        out.inconclusive[i] = match matched.as_slice() {
            [] => true,
            m => {
                let lo = m.iter().map(|p| p.lo).fold(f64::INFINITY, f64::min);
                let hi = m.iter().map(|p| p.hi).fold(f64::NEG_INFINITY, f64::max);
                !((lo - iv.lo).abs() <= drift_tol && (hi - iv.hi).abs() <= drift_tol)
            }
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::position_multiplier;
    use std::f64::consts::PI;

    fn uniform_op(n: usize) -> DiscreteOperator {
        assemble(
            &CoefficientProfile::uniform(1.0).unwrap(),
            &Grid::line(0.0, PI, n).unwrap(),
            Boundary::Dirichlet,
        )
        .unwrap()
    }

    #[test]
    fn sine_modes() {
        let d = eigensolve(&uniform_op(400), 3).unwrap();
        for (k, v) in d.eigenvalues.iter().enumerate() {
            let exact = ((k + 1) * (k + 1)) as f64;
            assert!((v - exact).abs() < 1e-3 * exact);
        }
    }

    #[test]
    fn diagonal_operator_eigenvalues_are_sorted_samples() {
        let g = Grid::line(-2.0, 2.0, 20).unwrap();
        let m = position_multiplier(&g, |x| (3.0 * x[0]).sin() + 2.0).unwrap();
        let d = eigensolve(&m, 20).unwrap();
        let mut expected: Vec<f64> = g.nodes().iter().map(|x| (3.0 * x[0]).sin() + 2.0).collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in d.eigenvalues.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn count_beyond_dimension_rejected() {
        assert!(matches!(eigensolve(&uniform_op(10), 11), Err(Error::Argument(_))));
    }

    #[test]
    fn resolvent_properties() {
        let op = uniform_op(100);
        let r = resolvent(&op, 1.0).unwrap();
        let h = op.dense();
        let check = (&h + DMatrix::identity(100, 100)) * &r - DMatrix::identity(100, 100);
        assert!(check.amax() < 1e-8);
        let lmin = lowest_eigenvalues(&op, 1).unwrap()[0];
        assert!((opnorm(&r) - 1.0 / (1.0 + lmin)).abs() < 1e-10);
        assert!((&r * &h - &h * &r).amax() < 1e-8);
        let zero = DiscreteOperator::new(
            op.grid.clone(),
            crate::linalg::CsrMatrix::from_triplets(100, vec![]),
            Boundary::Dirichlet,
            "zero",
        );
        assert!((resolvent(&zero, 1.0).unwrap() - DMatrix::identity(100, 100)).amax() < 1e-15);
        assert!(resolvent(&op, 0.0).is_err());
    }

    #[test]
    fn resolvent_spectral_mapping() {
        let p = CoefficientProfile::rational_bump(2.0, 1.0).unwrap();
        let op = assemble(&p, &Grid::line(-4.0, 4.0, 80).unwrap(), Boundary::Dirichlet).unwrap();
        let (vals, _) = full_eigen(&op).unwrap();
        let (rv, _) = sym_eigen(&resolvent(&op, 0.5).unwrap());
        let mut mapped: Vec<f64> = vals.iter().map(|l| 1.0 / (l + 0.5)).collect();
        mapped.sort_by(f64::total_cmp);
        for (a, b) in rv.iter().zip(&mapped) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn heat_properties() {
        let op = assemble(
            &CoefficientProfile::exp_decay(1.0).unwrap(),
            &Grid::line(-2.0, 2.0, 60).unwrap(),
            Boundary::Dirichlet,
        )
        .unwrap();
        let hn = opnorm(&op.dense());
        let small = heat(&op, 1e-6).unwrap();
        assert!((small - DMatrix::identity(60, 60)).amax() <= 1e-4 * hn);
        let (a, b) = (heat(&op, 0.3).unwrap(), heat(&op, 0.5).unwrap());
        assert!((&a * &b - heat(&op, 0.8).unwrap()).amax() < 1e-8);
        assert!(opnorm(&a) <= 1.0 + 1e-12);
        assert!(a.iter().all(|v| *v >= -1e-10));
    }

    #[test]
    fn laplace_transform_of_heat_is_resolvent() {
        let op = uniform_op(60);
        // Gauss-Legendre on [0, 40] split into panels
        let nodes = [-0.906179845938664, -0.5384693101056831, 0.0, 0.5384693101056831, 0.906179845938664];
        let weights = [0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665, 0.2369268850561891];
        let (vals, vecs) = full_eigen(&op).unwrap();
        let mut acc = DMatrix::zeros(60, 60);
        // geometric panels from 1e-9 to 40 resolve the stiff modes near t = 0
        let mut a: f64 = 1e-9;
        while a < 40.0 {
            let b = (a * 1.25).min(40.0);
            let w = b - a;
            for (x, wt) in nodes.iter().zip(&weights) {
                let t = a + 0.5 * w * (1.0 + x);
                acc += spectral_function(&vals, &vecs, |l| (-t * (l + 1.0)).exp()) * (0.5 * w * wt);
            }
            a = b;
        }
        assert!((acc - resolvent(&op, 1.0).unwrap()).amax() < 1e-4);
    }

    #[test]
    fn chebyshev_and_eigen_heat_agree() {
        let op = assemble(
            &CoefficientProfile::periodic(2.0, 1.0, 2.0 * PI).unwrap(),
            &Grid::line(-10.0, 10.0, 300).unwrap(),
            Boundary::Dirichlet,
        )
        .unwrap();
        let a = heat(&op, 0.2).unwrap();
        let b = chebyshev_heat(&op.matrix, 0.2, &DMatrix::identity(300, 300), op.matrix.gershgorin());
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn lanczos_path_matches_dense() {
        let g = Grid::rect([0.0, 0.0], [PI, PI], [30, 30], false).unwrap();
        let op = assemble(&CoefficientProfile::uniform(1.0).unwrap(), &g, Boundary::Dirichlet).unwrap();
        let (dense, _) = full_eigen(&op).unwrap();
        let (vals, _) = lanczos_lowest(&op.matrix, 4, 1e-12).unwrap();
        for (a, b) in vals.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-8 * b.abs().max(1.0));
        }
    }

    #[test]
    fn opnorm_shift_minus_identity_is_two() {
        let g = Grid::periodic_line(0.0, 2.0 * PI, 32).unwrap();
        let h = g.spacing(0);
        for m in [1.0, 3.0, 16.0] {
            let u = crate::discretize::FourierMultiplier::translation(&g, &[m * h]).unwrap().to_dense();
            let d = u - DMatrix::identity(32, 32).map(|v: f64| num_complex::Complex64::new(v, 0.0));
            assert!((opnorm(&d) - 2.0).abs() < 1e-6);
        }
    }

    #[test]
    fn hausdorff_examples() {
        let a = [Interval::new(0.0, 1.0), Interval::new(3.0, 4.0)];
        let b = [Interval::new(0.0, 4.0)];
        assert!((hausdorff(&a, &b) - 1.0).abs() < 1e-15);
        assert_eq!(hausdorff(&a, &a), 0.0);
        assert_eq!(hausdorff(&[Interval::new(0.0, 0.0)], &[Interval::new(0.0, 10.0)]), 10.0);
        assert!(hausdorff(&[], &b).is_infinite());
    }

    #[test]
    fn runs_split_at_gaps() {
        let mut v: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        v.extend((0..20).map(|i| 5.0 + i as f64 * 0.1));
        v.push(3.5);
        v.sort_by(f64::total_cmp);
        let runs = eigenvalue_runs(&v, 5.0, 3);
        assert_eq!(runs.len(), 2);
        assert!((runs[0].0.hi - 1.9).abs() < 1e-12);
        assert!((runs[1].0.lo - 5.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_essential_spectrum_fills_window() {
        let p = CoefficientProfile::uniform(1.0).unwrap();
        let cfg = EstimatorConfig {
            half_widths: vec![10.0, 20.0, 40.0],
            rule: GridRule { cells_per_unit: 10.0 },
            window: [0.0, 10.0],
            center: 0.0,
        };
        let est = essential_spectrum_estimate(&p, &cfg, &Tolerances::default()).unwrap();
        assert_eq!(est.intervals.len(), 1);
        let iv = est.intervals[0];
        assert!(iv.lo < 0.01 && iv.hi > 9.5, "{iv:?}");
        assert!(est.is_conclusive());
        let shifted = essential_spectrum_estimate(&p.translate(&[0.7]), &cfg, &Tolerances::default()).unwrap();
        assert!(hausdorff(&shifted.intervals, &est.intervals) < 3.0 * est.median_spacing);
    }
}
