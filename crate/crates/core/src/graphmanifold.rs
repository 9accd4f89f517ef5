//! Weighted graphs as discrete metric-measure spaces: volume doubling,
//! local Poincaré constants, Gaussian and Hölder audits of the heat kernel,
//! and the error of truncating the kernel to a finite range.
//!
//! The graph Laplacian acts on `L^2(mu)` through the form
//! `sum_{edges} w_uv (f(u) - f(v))^2` with `w_uv = sqrt(mu_u mu_v) / len_uv^2`.
//! Kernels are taken with respect to `mu`: `(e^{-tL} f)(x) = sum_y h_t(x, y) f(y) mu(y)`.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::fmt_num;
use crate::linalg::{chebyshev_heat, opnorm, spectral_function, sym_eigen, symmetrize, CsrMatrix};
use crate::metric::{linear_fit, shortest_paths};
use crate::tolerances::Tolerances;

/// Largest vertex count for which kernels come from a dense eigendecomposition.
const DENSE_KERNEL_LIMIT: usize = 2048;

/// Vertex measure of a lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Uniform,
    /// Measure multiplied by `factor` on the right half of the lattice.
    HalfPlaneScaled { factor: f64 },
}

/// Description of a finite graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    /// `nx x ny` lattice with nearest-neighbour edges of length `spacing`
    /// and vertex measure `spacing^2` times the measure profile.
    Lattice {
        nx: usize,
        ny: usize,
        spacing: f64,
        #[serde(default = "uniform_measure")]
        measure: MeasureSpec,
    },
    /// Path of `n` vertices with edges of length `spacing` and measure `spacing`.
    Path { n: usize, spacing: f64 },
    /// Rooted tree of the given depth, unit lengths and unit measure.
    Tree { branching: usize, depth: usize },
}

fn uniform_measure() -> MeasureSpec {
    MeasureSpec::Uniform
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    measure: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, f64)>>,
    boundary: Vec<bool>,
}

impl WeightedGraph {
    /// Graph with vertex measures and `(u, v, length)` edges; vertices of
    /// less than maximal degree form the boundary.
    pub fn new(measure: Vec<f64>, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let n = measure.len();
        if n == 0 {
            return Err(Error::Argument("graph has no vertices".into()));
        }
        if let Some(m) = measure.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(Error::Argument(format!("vertex measure must be positive, got {m}")));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v, len) in &edges {
            if u >= n || v >= n || u == v {
                return Err(Error::Argument(format!("invalid edge ({u}, {v})")));
            }
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::Argument(format!("edge ({u}, {v}) has length {len}")));
            }
            adjacency[u].push((v, len));
            adjacency[v].push((u, len));
        }
        if shortest_paths(&adjacency, &[0], None).iter().any(|d| d.is_infinite()) {
            return Err(Error::Degenerate("graph is not connected".into()));
        }
        let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        let boundary = adjacency.iter().map(|a| a.len() < max_degree).collect();
        Ok(Self {
            measure,
            edges,
            adjacency,
            boundary,
        })
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Replaces the default boundary (vertices of less than maximal degree).
    pub fn with_boundary(mut self, boundary: Vec<bool>) -> Result<Self> {
        if boundary.len() != self.len() {
            return Err(Error::Argument("boundary flags must cover every vertex".into()));
        }
        self.boundary = boundary;
        Ok(self)
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    fn weight(&self, u: usize, v: usize, len: f64) -> f64 {
        (self.measure[u] * self.measure[v]).sqrt() / (len * len)
    }

    /// `sum_{edges} w_uv (f(u) - f(v))^2`.
    pub fn energy(&self, f: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|&(u, v, len)| self.weight(u, v, len) * (f[u] - f[v]).powi(2))
            .sum()
    }

    /// Unweighted form matrix `sum w_uv (e_u - e_v)(e_u - e_v)^T`.
    pub fn form_matrix(&self) -> CsrMatrix {
        let mut t = Vec::with_capacity(4 * self.edges.len());
        for &(u, v, len) in &self.edges {
            let w = self.weight(u, v, len);
            t.extend([(u, u, w), (v, v, w), (u, v, -w), (v, u, -w)]);
        }
        CsrMatrix::from_triplets(self.len(), t)
    }

    /// `M^{-1/2} A M^{-1/2}` with `A` the form matrix: the Laplacian on
    /// `L^2(mu)` in the orthonormal basis `e_x / sqrt(mu_x)`.
    pub fn laplacian(&self) -> CsrMatrix {
        let s: Vec<f64> = self.measure.iter().map(|m| 1.0 / m.sqrt()).collect();
        CsrMatrix::from_triplets(self.len(), self.form_matrix().triplets().map(|(i, j, v)| (i, j, v * s[i] * s[j])).collect())
    }

    pub fn distances_from(&self, x: usize) -> Vec<f64> {
        shortest_paths(&self.adjacency, &[x], None)
    }

    /// `mu(B_x(r))` with `B_x(r) = {y : d(x, y) <= r}`.
    pub fn volume(&self, dist_from_x: &[f64], r: f64) -> f64 {
        dist_from_x
            .iter()
            .zip(&self.measure)
            .filter(|(d, _)| **d <= r * (1.0 + 1e-12))
            .map(|(_, m)| m)
            .sum()
    }

    /// Whether the open ball of radius `r` reaches a boundary vertex.
    fn ball_touches_boundary(&self, dist_from_x: &[f64], r: f64) -> bool {
        dist_from_x
            .iter()
            .zip(&self.boundary)
            .any(|(d, b)| *b && *d < r * (1.0 - 1e-12))
    }

    /// `count` vertices spread evenly over the index range.
    pub fn sample_vertices(&self, count: usize) -> Vec<usize> {
        let n = self.len();
        let count = count.clamp(1, n);
        (0..count).map(|i| i * n / count + n / (2 * count)).collect()
    }

    /// `exp(-t L)` in the orthonormal basis; `h_t(x, y) = E(x, y) / sqrt(mu_x mu_y)`.
    pub fn heat_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        self.heat_columns(t, &(0..self.len()).collect::<Vec<_>>())
    }

    /// Columns `x` of `exp(-t L)` in the orthonormal basis.
    pub fn heat_columns(&self, t: f64, sources: &[usize]) -> Result<DMatrix<f64>> {
        if !(t > 0.0) {
            return Err(Error::Argument(format!("heat kernel needs t > 0, got {t}")));
        }
        let n = self.len();
        let s = self.laplacian();
        if n <= DENSE_KERNEL_LIMIT {
            let (vals, vecs) = sym_eigen(&s.to_dense());
            let full = spectral_function(&vals, &vecs, |l| (-t * l).exp());
            return Ok(DMatrix::from_fn(n, sources.len(), |i, j| full[(i, sources[j])]));
        }
        let mut x = DMatrix::zeros(n, sources.len());
        for (j, &src) in sources.iter().enumerate() {
            x[(src, j)] = 1.0;
        }
        let (_, hi) = s.gershgorin();
        let mut out = chebyshev_heat(&s, t, &x, (0.0, hi));
        if sources.len() == n {
            symmetrize(&mut out);
        }
        Ok(out)
    }

    /// `h_t(., x)` for each source `x`, from orthonormal-basis columns.
    fn kernel_columns(&self, e: &DMatrix<f64>, sources: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(e.nrows(), e.ncols(), |i, j| {
            e[(i, j)] / (self.measure[i] * self.measure[sources[j]]).sqrt()
        })
    }
}

/// Builds the graph described by `spec`.
pub fn build_graph(spec: &GraphSpec) -> Result<WeightedGraph> {
    match *spec {
        GraphSpec::Lattice { nx, ny, spacing, measure } => {
            if nx < 2 || ny < 2 || !(spacing > 0.0) {
                return Err(Error::Argument("lattice needs at least 2x2 vertices and positive spacing".into()));
            }
            let index = |i: usize, j: usize| i + nx * j;
            let mu = |i: usize| -> f64 {
                let base = spacing * spacing;
                match measure {
                    MeasureSpec::Uniform => base,
                    MeasureSpec::HalfPlaneScaled { factor } => {
                        if 2 * i >= nx {
                            base * factor
                        } else {
                            base
                        }
                    }
                }
            };
            let m: Vec<f64> = (0..ny).flat_map(|_| (0..nx).map(mu)).collect();
            let mut edges = Vec::new();
            for j in 0..ny {
                for i in 0..nx {
                    if i + 1 < nx {
                        edges.push((index(i, j), index(i + 1, j), spacing));
                    }
                    if j + 1 < ny {
                        edges.push((index(i, j), index(i, j + 1), spacing));
                    }
                }
            }
            WeightedGraph::new(m, edges)
        }
        GraphSpec::Path { n, spacing } => {
            if n < 2 || !(spacing > 0.0) {
                return Err(Error::Argument("path needs at least two vertices and positive spacing".into()));
            }
            WeightedGraph::new(vec![spacing; n], (0..n - 1).map(|i| (i, i + 1, spacing)).collect())
        }
        GraphSpec::Tree { branching, depth } => {
            if branching < 2 || depth == 0 {
                return Err(Error::Argument("tree needs branching >= 2 and depth >= 1".into()));
            }
            let mut edges = Vec::new();
            let mut level = vec![0usize];
            let mut count = 1usize;
            for _ in 0..depth {
                let mut next = Vec::with_capacity(level.len() * branching);
                for &p in &level {
                    for _ in 0..branching {
                        edges.push((p, count, 1.0));
                        next.push(count);
                        count += 1;
                    }
                }
                level = next;
            }
            // only the leaves truncate balls
            let leaves = (0..count).map(|v| v >= count - level.len()).collect();
            WeightedGraph::new(vec![1.0; count], edges)?.with_boundary(leaves)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingEstimate {
    /// `max V_x(2r) / V_x(r)` over admitted balls; `None` when every ball was boundary-affected.
    pub constant: Option<f64>,
    pub samples: usize,
    pub excluded: usize,
    /// Centre and radius attaining the maximum.
    pub worst: Option<(usize, f64)>,
}

/// Largest volume ratio `V_x(2r) / V_x(r)` over the given centres and radii,
/// skipping balls `B_x(2r)` that reach the boundary.
pub fn doubling_constant(g: &WeightedGraph, centers: &[usize], radii: &[f64]) -> Result<DoublingEstimate> {
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Argument("radii must be positive".into()));
    }
    let mut out = DoublingEstimate {
        constant: None,
        samples: 0,
        excluded: 0,
        worst: None,
    };
    for &x in centers {
        let d = g.distances_from(x);
        for &r in radii {
            if g.ball_touches_boundary(&d, 2.0 * r) {
                out.excluded += 1;
                continue;
            }
            out.samples += 1;
            let ratio = g.volume(&d, 2.0 * r) / g.volume(&d, r);
            if out.constant.is_none_or(|c| ratio > c) {
                out.constant = Some(ratio);
                out.worst = Some((x, r));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareSample {
    pub center: usize,
    pub radius: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareEstimate {
    /// Largest local constant; `None` when no ball was admitted.
    pub constant: Option<f64>,
    pub samples: Vec<PoincareSample>,
    pub skipped: Vec<String>,
}

/// Smallest `P` with `sum_{B_x(r)} |f - f_B|^2 mu <= P r^2 E_{B_x(2r)}(f)` for
/// all `f`, where `E_{B}` is the form restricted to edges inside `B`.
pub fn local_poincare(g: &WeightedGraph, x: usize, r: f64) -> std::result::Result<f64, String> {
    let d = g.distances_from(x);
    let outer: Vec<usize> = (0..g.len()).filter(|&v| d[v] <= 2.0 * r * (1.0 + 1e-12)).collect();
    let pos = |v: usize| outer.binary_search(&v).ok();
    let k = outer.len();
    let mut form = DMatrix::<f64>::zeros(k, k);
    for &(u, v, len) in g.edges() {
        if let (Some(a), Some(b)) = (pos(u), pos(v)) {
            let w = g.weight(u, v, len);
            form[(a, a)] += w;
            form[(b, b)] += w;
            form[(a, b)] -= w;
            form[(b, a)] -= w;
        }
    }
    let inner: Vec<f64> = outer
        .iter()
        .map(|&v| if d[v] <= r * (1.0 + 1e-12) { g.measure[v] } else { 0.0 })
        .collect();
    let vol: f64 = inner.iter().sum();
    // variance form on the inner ball; it vanishes on constants
    let var = DMatrix::from_fn(k, k, |i, j| if i == j { inner[i] } else { 0.0 } - inner[i] * inner[j] / vol);
    let (vals, vecs) = sym_eigen(&form);
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let nonzero: Vec<usize> = (0..k).filter(|&i| vals[i] > 1e-10 * scale).collect();
    if nonzero.len() + 1 != k {
        return Err(format!(
            "ball around {x} of radius {} has a form with {} null directions",
            2.0 * r,
            k - nonzero.len()
        ));
    }
    let w = DMatrix::from_fn(k, nonzero.len(), |i, j| vecs[(i, nonzero[j])] / vals[nonzero[j]].sqrt());
    let reduced = w.transpose() * var * &w;
    let (rv, _) = sym_eigen(&reduced);
    let top = rv.iter().copied().fold(0.0f64, f64::max);
    Ok(top / (r * r))
}

/// Largest local Poincaré constant over centres and radii whose ball
/// `B_x(2r)` avoids the boundary.
pub fn poincare_constant(g: &WeightedGraph, centers: &[usize], radii: &[f64]) -> Result<PoincareEstimate> {
    let mut out = PoincareEstimate {
        constant: None,
        samples: Vec::new(),
        skipped: Vec::new(),
    };
    for &x in centers {
        let d = g.distances_from(x);
        for &r in radii {
            if g.ball_touches_boundary(&d, 2.0 * r) {
                out.skipped.push(format!("ball around {x} of radius {} reaches the boundary", 2.0 * r));
                continue;
            }
            match local_poincare(g, x, r) {
                Ok(p) => {
                    out.constant = Some(out.constant.map_or(p, |c: f64| c.max(p)));
                    out.samples.push(PoincareSample {
                        center: x,
                        radius: r,
                        constant: p,
                    });
                }
                Err(note) => out.skipped.push(note),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelViolation {
    pub x: usize,
    pub y: usize,
    pub z: Option<usize>,
    pub ratio: f64,
}

/// Constants of a fitted kernel bound and its audit on held-out centres.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelAudit {
    pub t: f64,
    /// Constant of the bound: the smallest one admissible on the fitting centres.
    pub c: f64,
    /// Exponent: `a` of the Gaussian bound or `alpha` of the Hölder bound.
    pub exponent: f64,
    /// Least-squares intercept constant (Gaussian fit only).
    pub least_squares_c: Option<f64>,
    pub r_squared: Option<f64>,
    /// Largest ratio of a held-out sample to the bound.
    pub max_ratio: f64,
    pub pairs: usize,
    pub violations: Vec<KernelViolation>,
}

impl KernelAudit {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "C", "exponent", "max_ratio", "pairs", "violations", "r_squared"])?;
        w.write_record([
            fmt_num(self.t),
            fmt_num(self.c),
            fmt_num(self.exponent),
            fmt_num(self.max_ratio),
            self.pairs.to_string(),
            self.violations.len().to_string(),
            self.r_squared.map(fmt_num).unwrap_or_default(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Splits centres alternately into fitting and held-out halves.
fn split(centers: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let fit = centers.iter().step_by(2).copied().collect();
    let held = centers.iter().skip(1).step_by(2).copied().collect();
    (fit, held)
}

/// Fits `h_t(x, y) <= C V_x(sqrt t)^{-1} exp(-a d(x, y)^2 / t)`: `a` is the
/// least-squares slope of `log(h V)` against `-d^2 / t` over pairs above the
/// noise floor, `C` the smallest constant admissible on half of the centres,
/// and the bound is audited on the other half with the heat slack.
pub fn gaussian_fit(g: &WeightedGraph, t: f64, centers: &[usize], tol: &Tolerances) -> Result<KernelAudit> {
    if centers.len() < 2 {
        return Err(Error::Argument("the Gaussian fit needs at least two centres".into()));
    }
    let e = g.heat_columns(t, centers)?;
    let h = g.kernel_columns(&e, centers);
    let mut samples: Vec<Vec<(usize, f64, f64)>> = Vec::new(); // (y, -d^2/t, log(h V))
    for (j, &x) in centers.iter().enumerate() {
        let d = g.distances_from(x);
        let v = g.volume(&d, t.sqrt());
        samples.push(
            (0..g.len())
                .filter(|&y| h[(y, j)] > tol.noise_floor)
                .map(|y| (y, -d[y] * d[y] / t, (h[(y, j)] * v).ln()))
                .collect(),
        );
    }
    let all: Vec<(f64, f64)> = samples.iter().flatten().map(|s| (s.1, s.2)).collect();
    let (a, intercept) = linear_fit(&all);
    let mean = all.iter().map(|p| p.1).sum::<f64>() / all.len() as f64;
    let ss_tot: f64 = all.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let ss_res: f64 = all.iter().map(|p| (p.1 - intercept - a * p.0).powi(2)).sum();
    let (fit, held) = split(&(0..centers.len()).collect::<Vec<_>>());
    let log_ratio = |s: &(usize, f64, f64)| s.2 - a * s.1;
    let log_c = fit
        .iter()
        .flat_map(|&j| samples[j].iter().map(log_ratio))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut audit = KernelAudit {
        t,
        c: log_c.exp(),
        exponent: a,
        least_squares_c: Some(intercept.exp()),
        r_squared: Some(if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 }),
        max_ratio: 0.0,
        pairs: all.len(),
        violations: Vec::new(),
    };
    for &j in &held {
        for s in &samples[j] {
            let ratio = (log_ratio(s) - log_c).exp();
            audit.max_ratio = audit.max_ratio.max(ratio);
            if ratio > 1.0 + tol.heat_slack {
                audit.violations.push(KernelViolation {
                    x: centers[j],
                    y: s.0,
                    z: None,
                    ratio,
                });
            }
        }
    }
    Ok(audit)
}

/// Audits `|h_t(x, y) - h_t(x, z)| <= C t^{-alpha/2} d(y, z)^alpha h_{2t}(x, y)`
/// over pairs with `0 < d(y, z) <= sqrt t`. For each `alpha` on a grid in
/// `(0, 1]` the constant is the smallest admissible on half of the centres;
/// the reported `alpha` is the largest one whose bound holds on the other
/// half within the heat slack.
pub fn holder_audit(g: &WeightedGraph, t: f64, centers: &[usize], tol: &Tolerances) -> Result<KernelAudit> {
    if centers.len() < 2 {
        return Err(Error::Argument("the Hölder audit needs at least two centres".into()));
    }
    let h = g.kernel_columns(&g.heat_columns(t, centers)?, centers);
    let h2 = g.kernel_columns(&g.heat_columns(2.0 * t, centers)?, centers);
    let root = t.sqrt();
    // (centre column, y, z, |difference| / h_2t, d(y, z) / sqrt t)
    let mut samples: Vec<(usize, usize, usize, f64, f64)> = Vec::new();
    let mut near: Vec<Vec<(usize, f64)>> = Vec::with_capacity(g.len());
    for y in 0..g.len() {
        let d = shortest_paths(&g.adjacency, &[y], None);
        near.push((0..g.len()).filter(|&z| z != y && d[z] <= root * (1.0 + 1e-12)).map(|z| (z, d[z])).collect());
    }
    for j in 0..centers.len() {
        for y in 0..g.len() {
            if h[(y, j)] <= tol.noise_floor || h2[(y, j)] <= tol.noise_floor {
                continue;
            }
            for &(z, dyz) in &near[y] {
                let diff = (h[(y, j)] - h[(z, j)]).abs();
                samples.push((j, y, z, diff / h2[(y, j)], dyz / root));
            }
        }
    }
    let (fit, held) = split(&(0..centers.len()).collect::<Vec<_>>());
    let is_fit: Vec<bool> = (0..centers.len()).map(|j| fit.contains(&j)).collect();
    let _ = held;
    let constant = |alpha: f64| {
        samples
            .iter()
            .filter(|s| is_fit[s.0])
            .map(|s| s.3 / s.4.powf(alpha))
            .fold(0.0, f64::max)
    };
    let audit_for = |alpha: f64| {
        let c = constant(alpha);
        let mut audit = KernelAudit {
            t,
            c,
            exponent: alpha,
            least_squares_c: None,
            r_squared: None,
            max_ratio: 0.0,
            pairs: samples.len(),
            violations: Vec::new(),
        };
        for s in samples.iter().filter(|s| !is_fit[s.0]) {
            let ratio = s.3 / (c * s.4.powf(alpha));
            let ratio = if ratio.is_nan() { 0.0 } else { ratio };
            audit.max_ratio = audit.max_ratio.max(ratio);
            if ratio > 1.0 + tol.heat_slack {
                audit.violations.push(KernelViolation {
                    x: centers[s.0],
                    y: s.1,
                    z: Some(s.2),
                    ratio,
                });
            }
        }
        audit
    };
    let mut last = None;
    for step in (1..=20).rev() {
        let audit = audit_for(step as f64 / 20.0);
        if audit.passed() {
            return Ok(audit);
        }
        last = Some(audit);
    }
    Ok(last.expect("alpha grid is nonempty"))
}

/// Cutoff equal to 1 on `[0, r]`, 0 on `[r + 1, inf)`, linear in between.
pub fn cutoff(r: f64, d: f64) -> f64 {
    (r + 1.0 - d).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationRow {
    pub r: f64,
    /// `||e^{-L} - Op(h theta_r(d))||`.
    pub error: f64,
    /// `max_x sum_{d(x, y) >= r} |h(x, y)| sqrt(mu_x mu_y)`.
    pub schur_bound: f64,
}

/// Fit `log error = log K - a r^2 / 2` of the truncation errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationFit {
    pub rows: Vec<TruncationRow>,
    pub k: f64,
    pub a: f64,
    pub r_squared: f64,
}

impl TruncationFit {
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error <= w[0].error * (1.0 + 1e-9) + 1e-15)
    }

    pub fn within_schur_bound(&self) -> bool {
        self.rows.iter().all(|r| r.error <= r.schur_bound * (1.0 + 1e-9) + 1e-15)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "error", "schur_bound", "K", "a", "r_squared"])?;
        for r in &self.rows {
            w.write_record([
                fmt_num(r.r),
                fmt_num(r.error),
                fmt_num(r.schur_bound),
                fmt_num(self.k),
                fmt_num(self.a),
                fmt_num(self.r_squared),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Operator-norm error of replacing `e^{-L}` by the integral operator with
/// kernel `h_1(x, y) theta_r(d(x, y))`, for each radius, and the Gaussian fit
/// of the errors in `r`.
pub fn truncation_error(g: &WeightedGraph, radii: &[f64]) -> Result<TruncationFit> {
    if radii.is_empty() {
        return Err(Error::Argument("truncation needs at least one radius".into()));
    }
    let e = g.heat_matrix(1.0)?;
    let n = g.len();
    let dist: Vec<Vec<f64>> = (0..n).map(|x| g.distances_from(x)).collect();
    let mut rows = Vec::new();
    for &r in radii {
        let diff = DMatrix::from_fn(n, n, |x, y| e[(x, y)] * (1.0 - cutoff(r, dist[x][y])));
        let error = if diff.iter().all(|v| *v == 0.0) { 0.0 } else { opnorm(&diff) };
        let schur_bound = (0..n)
            .map(|x| (0..n).filter(|&y| dist[x][y] >= r).map(|y| e[(x, y)].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        rows.push(TruncationRow { r, error, schur_bound });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| (-0.5 * r.r * r.r, r.error.ln()))
        .collect();
    let (a, log_k, r_squared) = if pts.len() >= 2 {
        let (slope, intercept) = linear_fit(&pts);
        let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean).powi(2)).sum();
        let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (slope, intercept, if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 })
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    Ok(TruncationFit {
        rows,
        k: log_k.exp(),
        a,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn lattice(n: usize, spacing: f64) -> WeightedGraph {
        build_graph(&GraphSpec::Lattice {
            nx: n,
            ny: n,
            spacing,
            measure: MeasureSpec::Uniform,
        })
        .unwrap()
    }

    fn center_of(n: usize) -> usize {
        n / 2 + n * (n / 2)
    }

    #[test]
    fn unit_lattice_is_the_graph_laplacian() {
        let g = lattice(5, 1.0);
        let l = g.laplacian().to_dense();
        for i in 0..25 {
            let deg = g.adjacency[i].len() as f64;
            assert_eq!(l[(i, i)], deg);
            for &(j, _) in &g.adjacency[i] {
                assert_eq!(l[(i, j)], -1.0);
            }
        }
    }

    #[test]
    fn path_spectrum() {
        let n = 12;
        let g = build_graph(&GraphSpec::Path { n, spacing: 1.0 }).unwrap();
        let (vals, _) = sym_eigen(&g.laplacian().to_dense());
        for (k, v) in vals.iter().enumerate() {
            let want = 2.0 - 2.0 * (PI * k as f64 / n as f64).cos();
            assert!((v - want).abs() < 1e-12, "{k}: {v} vs {want}");
        }
    }

    #[test]
    fn disconnected_graphs_are_rejected() {
        let r = WeightedGraph::new(vec![1.0; 4], vec![(0, 1, 1.0), (2, 3, 1.0)]);
        assert!(matches!(r, Err(Error::Degenerate(_))));
        assert!(WeightedGraph::new(vec![1.0, 0.0], vec![(0, 1, 1.0)]).is_err());
    }

    #[test]
    fn doubling_examples() {
        let g = lattice(41, 1.0);
        let d = doubling_constant(&g, &[center_of(41)], &[6.0, 8.0]).unwrap();
        // Manhattan balls hold 2r^2 + 2r + 1 vertices
        let want = |r: f64| (8.0 * r * r + 4.0 * r + 1.0) / (2.0 * r * r + 2.0 * r + 1.0);
        assert!((d.constant.unwrap() - want(8.0)).abs() < 1e-12);
        let p = build_graph(&GraphSpec::Path { n: 101, spacing: 1.0 }).unwrap();
        let d = doubling_constant(&p, &[50], &[10.0, 20.0]).unwrap();
        assert!((d.constant.unwrap() - 81.0 / 41.0).abs() < 1e-12);
        let edge = doubling_constant(&p, &[0], &[5.0]).unwrap();
        assert_eq!((edge.constant, edge.excluded), (None, 1));
        let scaled = build_graph(&GraphSpec::Lattice {
            nx: 41,
            ny: 41,
            spacing: 1.0,
            measure: MeasureSpec::HalfPlaneScaled { factor: 8.0 },
        })
        .unwrap();
        let centers: Vec<usize> = (12..=20).map(|i| i + 41 * 20).collect();
        let plain = doubling_constant(&g, &centers, &[4.0]).unwrap().constant.unwrap();
        let heavy = doubling_constant(&scaled, &centers, &[4.0]).unwrap().constant.unwrap();
        assert!(heavy > 1.5 * plain, "{heavy} vs {plain}");
    }

    #[test]
    fn tree_volume_grows_exponentially() {
        let g = build_graph(&GraphSpec::Tree { branching: 2, depth: 10 }).unwrap();
        let d = doubling_constant(&g, &[0], &[1.0, 2.0, 4.0]).unwrap();
        // from the root V(r) = 2^{r+1} - 1
        assert!((d.constant.unwrap() - 511.0 / 31.0).abs() < 1e-12);
    }

    #[test]
    fn poincare_examples() {
        let p = build_graph(&GraphSpec::Path { n: 201, spacing: 1.0 }).unwrap();
        let a = local_poincare(&p, 100, 16.0).unwrap();
        let b = local_poincare(&p, 100, 32.0).unwrap();
        assert!((a - b).abs() < 0.1 * b, "{a} vs {b}");
        // restricting the energy to the inner interval gives 4 / pi^2 at most
        assert!(b <= 4.0 / (PI * PI) * 1.05 && b > 0.0);
        let g = lattice(31, 1.0);
        let centers: Vec<usize> = [(14, 15), (15, 15), (16, 14)].iter().map(|(i, j)| i + 31 * j).collect();
        let est = poincare_constant(&g, &centers, &[3.0]).unwrap();
        let vals: Vec<f64> = est.samples.iter().map(|s| s.constant).collect();
        let max = vals.iter().copied().fold(0.0, f64::max);
        assert!(vals.iter().all(|v| (v - max).abs() <= 0.2 * max), "{vals:?}");
    }

    #[test]
    fn kernel_is_symmetric_stochastic_and_a_semigroup() {
        let g = build_graph(&GraphSpec::Lattice {
            nx: 9,
            ny: 7,
            spacing: 0.5,
            measure: MeasureSpec::HalfPlaneScaled { factor: 3.0 },
        })
        .unwrap();
        let n = g.len();
        let all: Vec<usize> = (0..n).collect();
        let h = g.kernel_columns(&g.heat_matrix(0.3).unwrap(), &all);
        for x in 0..n {
            let mass: f64 = (0..n).map(|y| h[(x, y)] * g.measure[y]).sum();
            assert!((mass - 1.0).abs() < 1e-10);
            for y in 0..n {
                assert!((h[(x, y)] - h[(y, x)]).abs() < 1e-12);
            }
        }
        let e1 = g.heat_matrix(0.3).unwrap();
        let e2 = g.heat_matrix(0.5).unwrap();
        let e3 = g.heat_matrix(0.8).unwrap();
        assert!((e1 * e2 - e3).amax() < 1e-8);
    }

    #[test]
    fn chebyshev_and_dense_kernels_agree() {
        let g = lattice(12, 0.5);
        let dense = g.heat_columns(0.7, &[3, 77]).unwrap();
        let s = g.laplacian();
        let mut x = DMatrix::zeros(144, 2);
        x[(3, 0)] = 1.0;
        x[(77, 1)] = 1.0;
        let cheb = chebyshev_heat(&s, 0.7, &x, (0.0, s.gershgorin().1));
        assert!((dense - cheb).amax() < 1e-12);
    }

    #[test]
    fn gaussian_and_holder_audits_on_a_lattice() {
        let tol = Tolerances::default();
        let g = lattice(24, 0.5);
        let centers = g.sample_vertices(8);
        let a1 = gaussian_fit(&g, 1.0, &centers, &tol).unwrap();
        let a2 = gaussian_fit(&g, 2.0, &centers, &tol).unwrap();
        assert!(a1.exponent > 0.0 && a1.passed(), "{a1:?}");
        assert!((a1.exponent - a2.exponent).abs() <= 0.25 * a1.exponent, "{} vs {}", a1.exponent, a2.exponent);
        // on the diagonal the bound reads h(x, x) <= C / V_x(sqrt t)
        let e = g.heat_columns(1.0, &centers).unwrap();
        let h = g.kernel_columns(&e, &centers);
        for (j, &x) in centers.iter().enumerate().skip(1).step_by(2) {
            let v = g.volume(&g.distances_from(x), 1.0);
            assert!(h[(x, j)] * v <= a1.c * (1.0 + tol.heat_slack));
        }
        let hol = holder_audit(&g, 1.0, &centers, &tol).unwrap();
        assert!(hol.passed() && hol.exponent > 0.0 && hol.exponent <= 1.0, "{hol:?}");
    }

    #[test]
    fn truncation_errors_decay() {
        let g = lattice(16, 0.5);
        let fit = truncation_error(&g, &[1.0, 2.0, 3.0, 4.0, 40.0]).unwrap();
        assert!(fit.monotone() && fit.within_schur_bound(), "{fit:?}");
        assert_eq!(fit.rows.last().unwrap().error, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn cutoff_plateaus(r in 0.0f64..10.0, d in 0.0f64..20.0) {
            let c = cutoff(r, d);
            prop_assert!((0.0..=1.0).contains(&c));
            if d <= r { prop_assert_eq!(c, 1.0); }
            if d >= r + 1.0 { prop_assert_eq!(c, 0.0); }
        }

        #[test]
        fn doubling_ratio_at_least_one(r in 0.5f64..4.0, c in 0usize..81) {
            let g = lattice(9, 1.0);
            let d = g.distances_from(c);
            prop_assert!(g.volume(&d, 2.0 * r) >= g.volume(&d, r));
        }
    }
}
