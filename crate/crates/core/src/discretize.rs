//! Finite-difference realizations of `-div(a grad)` on truncated grids, with
//! position multipliers `phi(x)` and Fourier multipliers `g(P)`.
//!
//! One-dimensional operators use the three-point stencil with coefficients
//! sampled at cell faces. Two-dimensional operators sum a positive
//! semi-definite energy over grid cells: every cell contributes the
//! coefficient sampled at its centre, contracted against the averaged
//! difference quotients along both axes.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::coefficients::{Coefficient, CoefficientProfile};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Boundary realization at the ends of the truncation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Neumann,
    Periodic,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Dirichlet => "dirichlet",
            Boundary::Neumann => "neumann",
            Boundary::Periodic => "periodic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

/// Uniform tensor grid on a box.
///
/// Non-periodic grids carry `points` interior nodes with spacing
/// `(upper - lower) / (points + 1)`; periodic grids carry `points` nodes
/// starting at `lower` with spacing `(upper - lower) / points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub axes: Vec<Axis>,
    #[serde(default)]
    pub periodic: bool,
}

pub const MIN_POINTS: usize = 8;

impl Grid {
    pub fn new(axes: Vec<Axis>, periodic: bool) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::Argument(format!("grids have 1 or 2 axes, got {}", axes.len())));
        }
        for a in &axes {
            if a.points < MIN_POINTS {
                return Err(Error::Argument(format!(
                    "grids need at least {MIN_POINTS} points per axis, got {}",
                    a.points
                )));
            }
            if !(a.lower.is_finite() && a.upper.is_finite() && a.lower < a.upper) {
                return Err(Error::Argument(format!("invalid axis [{}, {}]", a.lower, a.upper)));
            }
        }
        Ok(Self { axes, periodic })
    }

    pub fn line(lower: f64, upper: f64, points: usize) -> Result<Self> {
        Self::new(vec![Axis { lower, upper, points }], false)
    }

    pub fn periodic_line(lower: f64, upper: f64, points: usize) -> Result<Self> {
        Self::new(vec![Axis { lower, upper, points }], true)
    }

    pub fn rect(lower: [f64; 2], upper: [f64; 2], points: [usize; 2], periodic: bool) -> Result<Self> {
        Self::new(
            (0..2)
                .map(|i| Axis {
                    lower: lower[i],
                    upper: upper[i],
                    points: points[i],
                })
                .collect(),
            periodic,
        )
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self, axis: usize) -> usize {
        self.axes[axis].points
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let a = &self.axes[axis];
        let cells = if self.periodic { a.points } else { a.points + 1 };
        (a.upper - a.lower) / cells as f64
    }

    /// Coordinate of node `j` along `axis`.
    pub fn coordinate(&self, axis: usize, j: usize) -> f64 {
        let offset = if self.periodic { 0.0 } else { 1.0 };
        self.axes[axis].lower + (j as f64 + offset) * self.spacing(axis)
    }

    pub fn axis_nodes(&self, axis: usize) -> Vec<f64> {
        (0..self.points(axis)).map(|j| self.coordinate(axis, j)).collect()
    }

    /// Node coordinates in storage order (first axis fastest).
    pub fn node(&self, index: usize) -> Vec<f64> {
        let n0 = self.points(0);
        match self.dim() {
            1 => vec![self.coordinate(0, index)],
            _ => vec![self.coordinate(0, index % n0), self.coordinate(1, index / n0)],
        }
    }

    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Period length along `axis` of a periodic grid.
    pub fn length(&self, axis: usize) -> f64 {
        self.axes[axis].upper - self.axes[axis].lower
    }

    /// Discrete frequencies `2 pi m / length`, in FFT storage order.
    pub fn frequencies(&self, axis: usize) -> Vec<f64> {
        let n = self.points(axis);
        let len = self.length(axis);
        (0..n)
            .map(|q| {
                let m = if q < n.div_ceil(2) { q as f64 } else { q as f64 - n as f64 };
                2.0 * std::f64::consts::PI * m / len
            })
            .collect()
    }

    /// Default boundary for the grid kind.
    pub fn default_boundary(&self) -> Boundary {
        if self.periodic {
            Boundary::Periodic
        } else {
            Boundary::Dirichlet
        }
    }
}

/// Symmetric matrix realization of a quadratic form on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    pub grid: Grid,
    pub matrix: CsrMatrix,
    pub boundary: Boundary,
    pub profile_tag: String,
    /// Non-fatal diagnostics from assembly.
    pub warnings: Vec<String>,
}

impl DiscreteOperator {
    pub fn new(grid: Grid, matrix: CsrMatrix, boundary: Boundary, profile_tag: impl Into<String>) -> Self {
        assert_eq!(grid.len(), matrix.dim());
        Self {
            grid,
            matrix,
            boundary,
            profile_tag: profile_tag.into(),
            warnings: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }

    /// Relative asymmetry `max|M - M^T| / max|M|`.
    pub fn relative_asymmetry(&self) -> f64 {
        let m = self.matrix.max_abs();
        if m == 0.0 {
            0.0
        } else {
            self.matrix.asymmetry() / m
        }
    }

    /// Writes `row col value` lines, one per stored entry.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {} {} {}", self.profile_tag, self.boundary, self.dim())?;
        for (i, j, v) in self.matrix.triplets() {
            writeln!(out, "{i} {j} {v:e}")?;
        }
        Ok(())
    }
}

fn sample(profile: &CoefficientProfile, x: &[f64]) -> Result<Coefficient> {
    let c = profile.evaluate(x)?;
    let ok = match c {
        Coefficient::Scalar(v) => v > 0.0 && v.is_finite(),
        Coefficient::Matrix(m) => m[(0, 0)] > 0.0 && m.determinant() > 0.0 && m.iter().all(|v| v.is_finite()),
    };
    if ok {
        Ok(c)
    } else {
        Err(Error::Degenerate(format!(
            "{} is not positive at {:?}",
            profile.tag(),
            x
        )))
    }
}

/// Assembles the discrete operator of `profile` on `grid`.
pub fn assemble(profile: &CoefficientProfile, grid: &Grid, boundary: Boundary) -> Result<DiscreteOperator> {
    if profile.is_degenerate() {
        return Err(Error::Degenerate(format!("{} has the zero form", profile.tag())));
    }
    if grid.periodic != (boundary == Boundary::Periodic) {
        return Err(Error::Argument(format!(
            "boundary {boundary} does not match a {} grid",
            if grid.periodic { "periodic" } else { "bounded" }
        )));
    }
    if profile.is_matrix() && grid.dim() == 1 {
        return Err(Error::Unsupported(format!("matrix profile {} on a one-dimensional grid", profile.tag())));
    }
    let matrix = match grid.dim() {
        1 => assemble_1d(profile, grid, boundary)?,
        _ => assemble_2d(profile, grid, boundary)?,
    };
    let mut op = DiscreteOperator::new(grid.clone(), matrix, boundary, profile.tag());
    if let Some(p) = profile.period() {
        let per_period = p / grid.spacing(0);
        if per_period < MIN_POINTS as f64 {
            op.warnings.push(format!(
                "grid resolves the coefficient period {p} with only {per_period:.1} points"
            ));
        }
    }
    Ok(op)
}

fn scalar(c: Coefficient) -> f64 {
    c.scalar().expect("scalar profile")
}

fn assemble_1d(profile: &CoefficientProfile, grid: &Grid, boundary: Boundary) -> Result<CsrMatrix> {
    let n = grid.points(0);
    let h = grid.spacing(0);
    let lower = grid.axes[0].lower;
    let inv = 1.0 / (h * h);
    let mut t = Vec::with_capacity(3 * n);
    if boundary == Boundary::Periodic {
        for j in 0..n {
            let a = scalar(sample(profile, &[lower + (j as f64 + 0.5) * h])?) * inv;
            let k = (j + 1) % n;
            t.extend([(j, j, a), (k, k, a), (j, k, -a), (k, j, -a)]);
        }
    } else {
        // face f sits between nodes f - 1 and f, f = 0..=n
        for f in 0..=n {
            let a = scalar(sample(profile, &[lower + (f as f64 + 0.5) * h])?) * inv;
            let left = f.checked_sub(1);
            let right = (f < n).then_some(f);
            match (left, right) {
                (Some(l), Some(r)) => t.extend([(l, l, a), (r, r, a), (l, r, -a), (r, l, -a)]),
                (Some(i), None) | (None, Some(i)) if boundary == Boundary::Dirichlet => t.push((i, i, a)),
                _ => {}
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n, t))
}

fn assemble_2d(profile: &CoefficientProfile, grid: &Grid, boundary: Boundary) -> Result<CsrMatrix> {
    let (n0, n1) = (grid.points(0), grid.points(1));
    let (hx, hy) = (grid.spacing(0), grid.spacing(1));
    let (lx, ly) = (grid.axes[0].lower, grid.axes[1].lower);
    let periodic = boundary == Boundary::Periodic;
    // node index for extended coordinates; None marks a boundary ghost
    let index = |i: isize, j: isize| -> Option<usize> {
        if periodic {
            let i = i.rem_euclid(n0 as isize) as usize;
            let j = j.rem_euclid(n1 as isize) as usize;
            Some(i + n0 * j)
        } else if i < 0 || j < 0 || i >= n0 as isize || j >= n1 as isize {
            None
        } else {
            Some(i as usize + n0 * j as usize)
        }
    };
    let (c0, c1, off) = if periodic {
        (0..n0 as isize, 0..n1 as isize, 0.5)
    } else {
        (-1..n0 as isize, -1..n1 as isize, 1.5)
    };
    let mut t = Vec::with_capacity(16 * grid.len());
    for cj in c1 {
        for ci in c0.clone() {
            let corners = [
                index(ci, cj),
                index(ci + 1, cj),
                index(ci, cj + 1),
                index(ci + 1, cj + 1),
            ];
            if corners.iter().all(Option::is_none) {
                continue;
            }
            if boundary == Boundary::Neumann && corners.iter().any(Option::is_none) {
                continue;
            }
            let centre = [lx + (ci as f64 + off) * hx, ly + (cj as f64 + off) * hy];
            let a: Matrix2<f64> = sample(profile, &centre)?.as_matrix();
            // difference vectors over corners (00, 10, 01, 11)
            let dx0 = [-1.0, 1.0, 0.0, 0.0];
            let dx1 = [0.0, 0.0, -1.0, 1.0];
            let dy0 = [-1.0, 0.0, 1.0, 0.0];
            let dy1 = [0.0, -1.0, 0.0, 1.0];
            let mut k = [[0.0f64; 4]; 4];
            for p in 0..4 {
                for q in 0..4 {
                    let xx = dx0[p] * dx0[q] + dx1[p] * dx1[q];
                    let yy = dy0[p] * dy0[q] + dy1[p] * dy1[q];
                    let mx = [0.5 * (dx0[p] + dx1[p]), 0.5 * (dx0[q] + dx1[q])];
                    let my = [0.5 * (dy0[p] + dy1[p]), 0.5 * (dy0[q] + dy1[q])];
                    let xy = mx[0] * my[1] + my[0] * mx[1];
                    k[p][q] = a[(0, 0)] * xx / (2.0 * hx * hx)
                        + a[(1, 1)] * yy / (2.0 * hy * hy)
                        + a[(0, 1)] * xy / (hx * hy);
                }
            }
            for p in 0..4 {
                let Some(r) = corners[p] else { continue };
                for q in 0..4 {
                    let Some(c) = corners[q] else { continue };
                    t.push((r, c, k[p][q]));
                }
            }
        }
    }
    let mut m = CsrMatrix::from_triplets(grid.len(), t);
    // cancellation leaves round-off on structurally zero entries
    let scale = m.max_abs();
    let cleaned: Vec<_> = m
        .triplets()
        .filter(|(_, _, v)| v.abs() > 1e-14 * scale)
        .collect();
    m = CsrMatrix::from_triplets(grid.len(), cleaned);
    Ok(m)
}

/// Diagonal operator `phi(x_j)` on the grid nodes.
pub fn position_multiplier(grid: &Grid, phi: impl Fn(&[f64]) -> f64) -> Result<DiscreteOperator> {
    let vals: Vec<f64> = grid.nodes().iter().map(|x| phi(x)).collect();
    if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
        return Err(Error::Argument(format!("multiplier not finite at node {:?}", grid.node(i))));
    }
    let t = vals.iter().enumerate().map(|(i, v)| (i, i, *v)).collect();
    Ok(DiscreteOperator::new(
        grid.clone(),
        CsrMatrix::from_triplets(grid.len(), t),
        grid.default_boundary(),
        "multiplier",
    ))
}

/// Diagonal of the phase multiplier `exp(i k . x)`.
pub fn phase_multiplier(grid: &Grid, k: &[f64]) -> DVector<Complex64> {
    DVector::from_iterator(
        grid.len(),
        grid.nodes().iter().map(|x| {
            let phase: f64 = x.iter().zip(k).map(|(a, b)| a * b).sum();
            Complex64::from_polar(1.0, phase)
        }),
    )
}

/// Fourier multiplier `g(P)` on a periodic grid: `F* diag(g(k)) F`.
#[derive(Debug, Clone)]
pub struct FourierMultiplier {
    grid: Grid,
    symbol: Vec<Complex64>,
}

impl FourierMultiplier {
    /// `g` receives the frequency vector of each discrete mode.
    pub fn new(grid: &Grid, g: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        if !grid.periodic {
            return Err(Error::Unsupported("Fourier multipliers need a periodic grid".into()));
        }
        let f0 = grid.frequencies(0);
        let symbol = match grid.dim() {
            1 => f0.iter().map(|k| g(&[*k])).collect(),
            _ => {
                let f1 = grid.frequencies(1);
                let mut s = Vec::with_capacity(grid.len());
                for k1 in &f1 {
                    for k0 in &f0 {
                        s.push(g(&[*k0, *k1]));
                    }
                }
                s
            }
        };
        Ok(Self {
            grid: grid.clone(),
            symbol,
        })
    }

    pub fn real(grid: &Grid, g: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::new(grid, |k| Complex64::new(g(k), 0.0))
    }

    /// Translation `(U_s f)(x) = f(x + s)` by a phase.
    pub fn translation(grid: &Grid, s: &[f64]) -> Result<Self> {
        Self::new(grid, |k| {
            let phase: f64 = k.iter().zip(s).map(|(a, b)| a * b).sum();
            Complex64::from_polar(1.0, phase)
        })
    }

    pub fn symbol(&self) -> &[Complex64] {
        &self.symbol
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Pointwise product of symbols.
    pub fn compose(&self, other: &FourierMultiplier) -> FourierMultiplier {
        FourierMultiplier {
            grid: self.grid.clone(),
            symbol: self.symbol.iter().zip(&other.symbol).map(|(a, b)| a * b).collect(),
        }
    }

    /// Applies the multiplier in place to every column of `m`.
    pub fn apply_columns(&self, m: &mut DMatrix<Complex64>) {
        let mut fft = Fft2::new(&self.grid);
        for mut col in m.column_iter_mut() {
            let mut buf: Vec<Complex64> = col.iter().copied().collect();
            fft.forward(&mut buf);
            buf.iter_mut().zip(&self.symbol).for_each(|(v, g)| *v *= g);
            fft.inverse(&mut buf);
            col.iter_mut().zip(buf).for_each(|(c, v)| *c = v);
        }
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut fft = Fft2::new(&self.grid);
        let mut buf = v.to_vec();
        fft.forward(&mut buf);
        buf.iter_mut().zip(&self.symbol).for_each(|(v, g)| *v *= g);
        fft.inverse(&mut buf);
        buf
    }

    /// Dense matrix of the multiplier.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.grid.len();
        let mut m = DMatrix::identity(n, n);
        self.apply_columns(&mut m);
        m
    }

    /// The multiplier when its symbol is real and even, i.e. the matrix is real symmetric.
    pub fn to_dense_real(&self) -> DMatrix<f64> {
        self.to_dense().map(|z| z.re)
    }
}

/// Unitary discrete Fourier transform of every column, with modes in the
/// order of [`FourierMultiplier::symbol`].
pub fn fourier_columns(grid: &Grid, m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if !grid.periodic {
        return Err(Error::Unsupported("Fourier transforms need a periodic grid".into()));
    }
    if m.nrows() != grid.len() {
        return Err(Error::Argument(format!("{} rows for a {}-node grid", m.nrows(), grid.len())));
    }
    let mut fft = Fft2::new(grid);
    let scale = 1.0 / (grid.len() as f64).sqrt();
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let mut buf: Vec<Complex64> = col.iter().copied().collect();
        fft.forward(&mut buf);
        col.iter_mut().zip(buf).for_each(|(c, v)| *c = v * scale);
    }
    Ok(out)
}

/// Normalized forward and inverse FFT over one or two axes.
struct Fft2 {
    n0: usize,
    n1: usize,
    f0: std::sync::Arc<dyn rustfft::Fft<f64>>,
    i0: std::sync::Arc<dyn rustfft::Fft<f64>>,
    f1: Option<(std::sync::Arc<dyn rustfft::Fft<f64>>, std::sync::Arc<dyn rustfft::Fft<f64>>)>,
}

impl Fft2 {
    fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let n0 = grid.points(0);
        let n1 = if grid.dim() == 2 { grid.points(1) } else { 1 };
        let f1 = (grid.dim() == 2).then(|| (planner.plan_fft_forward(n1), planner.plan_fft_inverse(n1)));
        Self {
            n0,
            n1,
            f0: planner.plan_fft_forward(n0),
            i0: planner.plan_fft_inverse(n0),
            f1,
        }
    }

    fn transform(&mut self, buf: &mut [Complex64], forward: bool) {
        let p0 = if forward { &self.f0 } else { &self.i0 };
        for row in buf.chunks_mut(self.n0) {
            p0.process(row);
        }
        if let Some((f, i)) = &self.f1 {
            let p1 = if forward { f } else { i };
            let mut col = vec![Complex64::new(0.0, 0.0); self.n1];
            for c in 0..self.n0 {
                for r in 0..self.n1 {
                    col[r] = buf[c + self.n0 * r];
                }
                p1.process(&mut col);
                for r in 0..self.n1 {
                    buf[c + self.n0 * r] = col[r];
                }
            }
        }
        if !forward {
            let s = 1.0 / (self.n0 * self.n1) as f64;
            buf.iter_mut().for_each(|v| *v *= s);
        }
    }

    fn forward(&mut self, buf: &mut [Complex64]) {
        self.transform(buf, true);
    }

    fn inverse(&mut self, buf: &mut [Complex64]) {
        self.transform(buf, false);
    }
}

/// Permutation matrix of the cyclic shift `(U f)_j = f_{j + m}` on a periodic line.
pub fn cyclic_shift(n: usize, m: isize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, n);
    for j in 0..n {
        let k = (j as isize + m).rem_euclid(n as isize) as usize;
        p[(j, k)] = 1.0;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigen;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_conventions() {
        let g = Grid::line(0.0, 1.0, 9).unwrap();
        assert!((g.spacing(0) - 0.1).abs() < 1e-15);
        assert!((g.coordinate(0, 0) - 0.1).abs() < 1e-15);
        let p = Grid::periodic_line(0.0, 1.0, 10).unwrap();
        assert!((p.spacing(0) - 0.1).abs() < 1e-15);
        assert_eq!(p.coordinate(0, 0), 0.0);
        assert!(Grid::line(0.0, 1.0, 7).is_err());
        assert!(Grid::line(1.0, 0.0, 8).is_err());
    }

    #[test]
    fn uniform_dirichlet_lowest_eigenvalue() {
        let p = CoefficientProfile::uniform(1.0).unwrap();
        let g = Grid::line(0.0, PI, 200).unwrap();
        let op = assemble(&p, &g, Boundary::Dirichlet).unwrap();
        let l = op.matrix.as_tridiagonal().unwrap().lowest(1)[0];
        assert!((l - 1.0).abs() < 1e-3);
    }

    #[test]
    fn assembly_is_linear_in_coefficient() {
        let g = Grid::line(-2.0, 3.0, 40).unwrap();
        let one = assemble(&CoefficientProfile::uniform(1.0).unwrap(), &g, Boundary::Dirichlet).unwrap();
        let c = assemble(&CoefficientProfile::uniform(2.5).unwrap(), &g, Boundary::Dirichlet).unwrap();
        assert!((one.dense() * 2.5 - c.dense()).amax() < 1e-12 * c.matrix.max_abs());
    }

    #[test]
    fn degenerate_profile_rejected() {
        let g = Grid::line(0.0, 1.0, 10).unwrap();
        let z = CoefficientProfile::uniform(0.0).unwrap();
        assert!(matches!(assemble(&z, &g, Boundary::Dirichlet), Err(Error::Degenerate(_))));
    }

    #[test]
    fn coarse_periodic_grid_warns() {
        let g = Grid::periodic_line(0.0, 40.0, 16).unwrap();
        let p = CoefficientProfile::periodic(2.0, 1.0, 2.0 * PI).unwrap();
        let op = assemble(&p, &g, Boundary::Periodic).unwrap();
        assert_eq!(op.warnings.len(), 1);
    }

    #[test]
    fn operator_invariants_hold() {
        let profiles = [
            CoefficientProfile::exp_decay(2.0).unwrap(),
            CoefficientProfile::rational_bump(1.0, 1.0).unwrap(),
            CoefficientProfile::periodic(2.0, 1.0, 2.0 * PI).unwrap(),
        ];
        for p in profiles {
            for b in [Boundary::Dirichlet, Boundary::Neumann] {
                let op = assemble(&p, &Grid::line(-3.0, 3.0, 60).unwrap(), b).unwrap();
                assert!(op.relative_asymmetry() <= 1e-12);
                let (vals, _) = sym_eigen(&op.dense());
                assert!(vals[0] >= -1e-8 * vals[vals.len() - 1]);
            }
        }
    }

    #[test]
    fn two_dimensional_matrix_profile_is_psd() {
        let m = CoefficientProfile::matrix_diag_2d(
            CoefficientProfile::uniform(1.0).unwrap(),
            CoefficientProfile::rational_bump(3.0, 1.0).unwrap(),
            0.7,
        )
        .unwrap();
        for (periodic, b) in [(false, Boundary::Dirichlet), (false, Boundary::Neumann), (true, Boundary::Periodic)] {
            let g = Grid::rect([-2.0, -2.0], [2.0, 2.0], [10, 12], periodic).unwrap();
            let op = assemble(&m, &g, b).unwrap();
            assert!(op.relative_asymmetry() <= 1e-12);
            let (vals, _) = sym_eigen(&op.dense());
            assert!(vals[0] >= -1e-8 * vals[vals.len() - 1], "{b}: {}", vals[0]);
            if b != Boundary::Dirichlet {
                // constants are in the kernel
                assert!(vals[0].abs() < 1e-8 * vals[vals.len() - 1]);
                assert!(vals[1] > 1e-6, "spurious null mode for {b}");
            }
        }
    }

    #[test]
    fn two_dimensional_diagonal_reduces_to_laplacian_spectrum() {
        // -Laplacian on (0, pi)^2: lowest eigenvalue 2
        let g = Grid::rect([0.0, 0.0], [PI, PI], [40, 40], false).unwrap();
        let op = assemble(&CoefficientProfile::uniform(1.0).unwrap(), &g, Boundary::Dirichlet).unwrap();
        let (vals, _) = sym_eigen(&op.dense());
        assert!((vals[0] - 2.0).abs() < 5e-3, "{}", vals[0]);
    }

    #[test]
    fn multipliers() {
        let g = Grid::periodic_line(0.0, 2.0 * PI, 16).unwrap();
        let id = FourierMultiplier::real(&g, |_| 1.0).unwrap().to_dense();
        assert!((id - DMatrix::identity(16, 16)).camax() < 1e-14);
        let h = g.spacing(0);
        let shift = FourierMultiplier::translation(&g, &[3.0 * h]).unwrap().to_dense();
        let exact = cyclic_shift(16, 3).map(|v| Complex64::new(v, 0.0));
        assert!((shift - exact).camax() < 1e-13);
        let bounded = Grid::line(0.0, 1.0, 16).unwrap();
        assert!(matches!(FourierMultiplier::real(&bounded, |_| 1.0), Err(Error::Unsupported(_))));
        let one = position_multiplier(&g, |_| 1.0).unwrap();
        assert_eq!(one.dense(), DMatrix::identity(16, 16));
    }

    #[test]
    fn position_multiplier_values() {
        let g = Grid::periodic_line(0.0, 8.0, 8).unwrap();
        let m = position_multiplier(&g, |x| 1.0 / (1.0 + x[0] * x[0])).unwrap();
        assert_eq!(m.matrix.get(0, 0), 1.0);
        assert_eq!(m.matrix.get(1, 1), 0.5);
    }

    #[test]
    fn translation_covariance_on_periodic_grid() {
        let g = Grid::periodic_line(-PI, PI, 64).unwrap();
        // coefficients commensurate with the box
        let p = CoefficientProfile::periodic(2.0, 1.0, 2.0 * PI).unwrap();
        let r = CoefficientProfile::periodic(3.0, -2.0, PI).unwrap();
        for prof in [p, r] {
            let h = g.spacing(0);
            for m in [1isize, 5, -7] {
                let a = assemble(&prof.translate(&[m as f64 * h]), &g, Boundary::Periodic).unwrap().dense();
                let u = cyclic_shift(64, m);
                let b = &u * assemble(&prof, &g, Boundary::Periodic).unwrap().dense() * u.transpose();
                assert!((a - &b).amax() <= 1e-12 * b.amax());
            }
        }
    }

    #[test]
    fn fourier_two_dimensional_shift() {
        let g = Grid::rect([0.0, 0.0], [1.0, 2.0], [8, 10], true).unwrap();
        let (hx, hy) = (g.spacing(0), g.spacing(1));
        let u = FourierMultiplier::translation(&g, &[2.0 * hx, hy]).unwrap();
        let v: Vec<Complex64> = (0..80).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let w = u.apply(&v);
        for j in 0..10 {
            for i in 0..8 {
                let src = (i + 2) % 8 + 8 * ((j + 1) % 10);
                assert!((w[i + 8 * j] - v[src]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn triplet_export() {
        let g = Grid::line(0.0, 1.0, 8).unwrap();
        let op = assemble(&CoefficientProfile::uniform(1.0).unwrap(), &g, Boundary::Dirichlet).unwrap();
        let mut buf = Vec::new();
        op.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 8 + 2 * 7);
    }

    proptest! {
        #[test]
        fn fourier_multipliers_compose(a in 0.0f64..3.0, b in -2.0f64..2.0) {
            let g = Grid::periodic_line(0.0, 5.0, 32).unwrap();
            let g1 = FourierMultiplier::real(&g, |k| (-a * k[0] * k[0]).exp()).unwrap();
            let g2 = FourierMultiplier::translation(&g, &[b]).unwrap();
            let lhs = g1.to_dense() * g2.to_dense();
            let rhs = g1.compose(&g2).to_dense();
            prop_assert!((lhs - rhs).camax() < 1e-13);
        }

        #[test]
        fn uniform_eigen_error_is_second_order(k in 1usize..4) {
            let p = CoefficientProfile::uniform(1.0).unwrap();
            let err = |n: usize| {
                let op = assemble(&p, &Grid::line(0.0, PI, n).unwrap(), Boundary::Dirichlet).unwrap();
                let v = op.matrix.as_tridiagonal().unwrap().lowest(k)[k - 1];
                (v - (k * k) as f64).abs()
            };
            let (e1, e2) = (err(63), err(127));
            prop_assert!((e1 / e2 - 4.0).abs() < 0.1);
        }
    }
}
