//! The Riemannian metric `ds = a^{-1/2} dx` induced by a coefficient,
//! distances between node sets, and audits of Gaussian off-diagonal heat
//! bounds.
//!
//! One-dimensional metrics are tabulated as cumulative integrals of
//! `a^{-1/2}`. On grids the metric is the shortest-path distance of a
//! weighted graph whose edges carry the metric length of the segment between
//! neighbouring nodes.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coefficients::{Coefficient, CoefficientProfile, Domain};
use crate::discretize::{DiscreteOperator, Grid};
use crate::error::{Error, Result};
use crate::export::fmt_num;
use crate::linalg::opnorm_exact;
use crate::quadrature::Rule;
use crate::spectral;
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricMode {
    /// Cumulative integral table of `a^{-1/2}` on an interval.
    Closed1D,
    /// Shortest paths on a weighted grid graph.
    GraphND,
}

#[derive(Debug, Clone)]
struct LineTable {
    knots: Vec<f64>,
    cum: Vec<f64>,
    singular_lo: bool,
    singular_hi: bool,
}

#[derive(Debug, Clone)]
struct GridGraph {
    grid: Grid,
    adjacency: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone)]
enum Repr {
    Line(LineTable),
    Graph(GridGraph),
}

/// Distance oracle for the metric induced by a coefficient profile.
#[derive(Debug, Clone)]
pub struct MetricField {
    profile: CoefficientProfile,
    resolution: usize,
    repr: Repr,
    rule: Rule,
}

impl MetricField {
    /// Tabulates `s(x) = \int_lo^x a^{-1/2}` on `resolution` equal panels.
    /// Endpoints where `a` vanishes are treated as integrable singularities.
    pub fn closed_1d(profile: &CoefficientProfile, lo: f64, hi: f64, resolution: usize) -> Result<Self> {
        if profile.is_matrix() {
            return Err(Error::Unsupported("closed-form metric of a matrix profile".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Argument(format!("metric table needs a finite interval, got [{lo}, {hi}]")));
        }
        if resolution == 0 {
            return Err(Error::Argument("metric table needs at least one panel".into()));
        }
        if !profile.domain().contains_domain(&Domain::interval(lo, hi)) {
            return Err(Error::Domain {
                point: vec![lo, hi],
                domain: profile.domain().to_string(),
            });
        }
        let rule = Rule::new(8);
        let singular = |x: f64| profile.value(x).map(|a| a <= 0.0).unwrap_or(true);
        let singular_lo = singular(lo);
        let singular_hi = singular(hi);
        let knots: Vec<f64> = (0..=resolution)
            .map(|i| lo + (hi - lo) * i as f64 / resolution as f64)
            .collect();
        let mut field = Self {
            profile: profile.clone(),
            resolution,
            repr: Repr::Line(LineTable {
                knots: knots.clone(),
                cum: Vec::new(),
                singular_lo,
                singular_hi,
            }),
            rule,
        };
        let mut cum = vec![0.0; resolution + 1];
        for i in 0..resolution {
            cum[i + 1] = cum[i] + field.panel_integral(knots[i], knots[i + 1], i == 0 && singular_lo, i + 1 == resolution && singular_hi);
        }
        if let Repr::Line(t) = &mut field.repr {
            t.cum = cum;
        }
        Ok(field)
    }

    /// Graph metric on the nodes of `grid`: neighbours along each axis and,
    /// in two dimensions, along both diagonals. The edge from `x` to `x + v`
    /// has length `sqrt(v^T a(x + v/2)^{-1} v)`.
    pub fn graph(profile: &CoefficientProfile, grid: &Grid) -> Result<Self> {
        let dim = grid.dim();
        let steps: Vec<Vec<isize>> = if dim == 1 {
            vec![vec![1]]
        } else {
            vec![vec![1, 0], vec![0, 1], vec![1, 1], vec![1, -1]]
        };
        let n = grid.len();
        let shape: Vec<usize> = (0..dim).map(|a| grid.points(a)).collect();
        let mut adjacency = vec![Vec::new(); n];
        for idx in 0..n {
            let here = multi_index(idx, &shape);
            let x = grid.node(idx);
            for step in &steps {
                let mut there = vec![0usize; dim];
                let mut ok = true;
                for a in 0..dim {
                    let j = here[a] as isize + step[a];
                    let m = shape[a] as isize;
                    if grid.periodic {
                        there[a] = j.rem_euclid(m) as usize;
                    } else if (0..m).contains(&j) {
                        there[a] = j as usize;
                    } else {
                        ok = false;
                    }
                }
                if !ok {
                    continue;
                }
                let v: Vec<f64> = (0..dim).map(|a| step[a] as f64 * grid.spacing(a)).collect();
                let mid: Vec<f64> = (0..dim).map(|a| x[a] + 0.5 * v[a]).collect();
                let len = segment_length(profile, &mid, &v)?;
                let j = flat_index(&there, &shape);
                adjacency[idx].push((j, len));
                adjacency[j].push((idx, len));
            }
        }
        Ok(Self {
            profile: profile.clone(),
            resolution: n,
            repr: Repr::Graph(GridGraph {
                grid: grid.clone(),
                adjacency,
            }),
            rule: Rule::new(8),
        })
    }

    pub fn mode(&self) -> MetricMode {
        match self.repr {
            Repr::Line(_) => MetricMode::Closed1D,
            Repr::Graph(_) => MetricMode::GraphND,
        }
    }

    /// Table panels (1D) or graph nodes.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn profile(&self) -> &CoefficientProfile {
        &self.profile
    }

    fn density(&self, x: f64) -> f64 {
        match self.profile.value(x) {
            Ok(a) if a > 0.0 => a.powf(-0.5),
            _ => f64::INFINITY,
        }
    }

    fn panel_integral(&self, u: f64, v: f64, sing_u: bool, sing_v: bool) -> f64 {
        let f = |x: f64| self.density(x);
        match (sing_u, sing_v) {
            (false, false) => self.rule.integrate(f, u, v),
            (true, false) => self.rule.integrate_singular(f, u, v),
            (false, true) => -self.rule.integrate_singular(f, v, u),
            (true, true) => {
                let m = 0.5 * (u + v);
                self.rule.integrate_singular(f, u, m) - self.rule.integrate_singular(f, v, m)
            }
        }
    }

    /// `s(x) = \int_lo^x a^{-1/2}` for tabulated metrics.
    pub fn arclength(&self, x: f64) -> Result<f64> {
        let Repr::Line(t) = &self.repr else {
            return Err(Error::Unsupported("arclength of a graph metric".into()));
        };
        let (lo, hi) = (t.knots[0], t.knots[self.resolution]);
        let slack = 1e-12 * (hi - lo);
        if !(x >= lo - slack && x <= hi + slack) {
            return Err(Error::Domain {
                point: vec![x],
                domain: format!("[{lo}, {hi}]"),
            });
        }
        let x = x.clamp(lo, hi);
        let w = (hi - lo) / self.resolution as f64;
        let i = (((x - lo) / w).floor() as usize).min(self.resolution - 1);
        let (a, b) = (t.knots[i], t.knots[i + 1]);
        if x == a {
            return Ok(t.cum[i]);
        }
        if x == b {
            return Ok(t.cum[i + 1]);
        }
        let last = i + 1 == self.resolution;
        if last && t.singular_hi {
            Ok(t.cum[i + 1] - self.panel_integral(x, b, false, true))
        } else {
            Ok(t.cum[i] + self.panel_integral(a, x, i == 0 && t.singular_lo, false))
        }
    }

    /// Metric distance between two points. Graph metrics snap the points
    /// to the nearest grid nodes.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match &self.repr {
            Repr::Line(_) => Ok((self.arclength(y[0])? - self.arclength(x[0])?).abs()),
            Repr::Graph(g) => {
                let s = g.snap(x)?;
                let e = g.snap(y)?;
                Ok(g.dijkstra(&[s], Some(e))[e])
            }
        }
    }

    /// Distances from the node nearest to `x` to every graph node.
    pub fn distances_from(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.repr {
            Repr::Line(_) => Err(Error::Unsupported("node distances of a tabulated metric".into())),
            Repr::Graph(g) => Ok(g.dijkstra(&[g.snap(x)?], None)),
        }
    }

    /// `inf { d(x, y) : x in e, y in f }`, exact over the given points.
    pub fn set_distance(&self, e: &[Vec<f64>], f: &[Vec<f64>]) -> Result<f64> {
        if e.is_empty() || f.is_empty() {
            return Err(Error::Argument("set distance needs two nonempty sets".into()));
        }
        match &self.repr {
            Repr::Line(_) => {
                let mut se = e.iter().map(|x| self.arclength(x[0])).collect::<Result<Vec<f64>>>()?;
                se.sort_by(f64::total_cmp);
                let mut best = f64::INFINITY;
                for y in f {
                    let s = self.arclength(y[0])?;
                    let k = se.partition_point(|v| *v < s);
                    if k < se.len() {
                        best = best.min(se[k] - s);
                    }
                    if k > 0 {
                        best = best.min(s - se[k - 1]);
                    }
                }
                Ok(best)
            }
            Repr::Graph(g) => {
                let sources = e.iter().map(|x| g.snap(x)).collect::<Result<Vec<usize>>>()?;
                let targets = f.iter().map(|x| g.snap(x)).collect::<Result<Vec<usize>>>()?;
                let d = g.dijkstra(&sources, None);
                Ok(targets.iter().map(|j| d[*j]).fold(f64::INFINITY, f64::min))
            }
        }
    }
}

fn segment_length(profile: &CoefficientProfile, mid: &[f64], v: &[f64]) -> Result<f64> {
    let len = match profile.evaluate(mid)? {
        Coefficient::Scalar(a) => {
            let norm2: f64 = v.iter().map(|c| c * c).sum();
            (norm2 / a).sqrt()
        }
        Coefficient::Matrix(m) => {
            let inv = m
                .try_inverse()
                .ok_or_else(|| Error::Degenerate(format!("singular coefficient matrix at {mid:?}")))?;
            let w = nalgebra::Vector2::new(v[0], v[1]);
            w.dot(&(inv * w)).sqrt()
        }
    };
    if len.is_finite() {
        Ok(len)
    } else {
        Err(Error::Degenerate(format!("coefficient vanishes at {mid:?}")))
    }
}

fn multi_index(idx: usize, shape: &[usize]) -> Vec<usize> {
    let mut rest = idx;
    shape
        .iter()
        .map(|m| {
            let j = rest % m;
            rest /= m;
            j
        })
        .collect()
}

fn flat_index(multi: &[usize], shape: &[usize]) -> usize {
    multi.iter().zip(shape).rev().fold(0, |acc, (j, m)| acc * m + j)
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl GridGraph {
    fn snap(&self, x: &[f64]) -> Result<usize> {
        let dim = self.grid.dim();
        if x.len() != dim {
            return Err(Error::Argument(format!("point {x:?} has the wrong dimension for a {dim}D grid")));
        }
        let mut multi = vec![0usize; dim];
        for a in 0..dim {
            let ax = &self.grid.axes[a];
            let h = self.grid.spacing(a);
            if x[a] < ax.lower - h || x[a] > ax.upper + h {
                return Err(Error::Domain {
                    point: x.to_vec(),
                    domain: format!("grid axis {a} [{}, {}]", ax.lower, ax.upper),
                });
            }
            let j = ((x[a] - self.grid.coordinate(a, 0)) / h).round();
            multi[a] = j.clamp(0.0, (ax.points - 1) as f64) as usize;
        }
        let shape: Vec<usize> = (0..dim).map(|a| self.grid.points(a)).collect();
        Ok(flat_index(&multi, &shape))
    }

    /// Multi-source shortest paths; stops early once `target` is settled.
    fn dijkstra(&self, sources: &[usize], target: Option<usize>) -> Vec<f64> {
        shortest_paths(&self.adjacency, sources, target)
    }
}

/// Multi-source shortest-path lengths over an adjacency list of `(neighbour, length)`;
/// stops early once `target` is settled.
pub(crate) fn shortest_paths(adjacency: &[Vec<(usize, f64)>], sources: &[usize], target: Option<usize>) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adjacency.len()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Entry(0.0, s));
    }
    while let Some(Entry(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        if Some(u) == target {
            break;
        }
        for &(v, w) in &adjacency[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Entry(nd, v));
            }
        }
    }
    dist
}

/// Grid nodes grouped by the unit cube (centred at a lattice point) that contains them.
#[derive(Debug, Clone, PartialEq)]
pub struct CubePartition {
    pub centers: Vec<Vec<i64>>,
    pub blocks: Vec<Vec<usize>>,
}

impl CubePartition {
    /// Node `x` belongs to the cube centred at `round(x)`.
    pub fn new(grid: &Grid) -> Self {
        let mut map: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
        for idx in 0..grid.len() {
            let c: Vec<i64> = grid.node(idx).iter().map(|v| v.round() as i64).collect();
            map.entry(c).or_default().push(idx);
        }
        let (centers, blocks) = map.into_iter().unzip();
        Self { centers, blocks }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, |c| c.len())
    }

    pub fn block_of(&self, center: &[i64]) -> Option<&[usize]> {
        self.centers
            .binary_search_by(|c| c.as_slice().cmp(center))
            .ok()
            .map(|k| self.blocks[k].as_slice())
    }
}

/// The `rows x cols` block of a dense matrix.
pub fn block(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// One `(E, F, t)` line of a heat-bound audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatAuditRow {
    pub e_id: usize,
    pub f_id: usize,
    pub t: f64,
    pub distance: f64,
    pub measured: f64,
    pub bound: f64,
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatAudit {
    pub rows: Vec<HeatAuditRow>,
    pub slack: f64,
}

impl HeatAudit {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["E_id", "F_id", "t", "measured", "bound", "ratio", "pass"])?;
        for r in &self.rows {
            w.write_record([
                r.e_id.to_string(),
                r.f_id.to_string(),
                fmt_num(r.t),
                fmt_num(r.measured),
                fmt_num(r.bound),
                fmt_num(r.ratio),
                r.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Compares `||P_E exp(-tH) P_F||` with `exp(-d(E,F)^2 / 4t)` for node-index
/// sets of the operator's grid. A row fails when the measured norm exceeds
/// the bound by more than the relative slack plus the noise floor.
pub fn verify_heat_bound(
    op: &DiscreteOperator,
    metric: &MetricField,
    pairs: &[(Vec<usize>, Vec<usize>)],
    times: &[f64],
    tol: &Tolerances,
) -> Result<HeatAudit> {
    let n = op.dim();
    let mut distances = Vec::with_capacity(pairs.len());
    for (i, (e, f)) in pairs.iter().enumerate() {
        if e.is_empty() || f.is_empty() {
            return Err(Error::Argument(format!("pair {i} has an empty set")));
        }
        if let Some(bad) = e.iter().chain(f).find(|j| **j >= n) {
            return Err(Error::Argument(format!("pair {i} references node {bad} of a {n}-node grid")));
        }
        if e.iter().any(|j| f.contains(j)) {
            return Err(Error::Argument(format!("pair {i} is not disjoint")));
        }
        let pe: Vec<Vec<f64>> = e.iter().map(|j| op.grid.node(*j)).collect();
        let pf: Vec<Vec<f64>> = f.iter().map(|j| op.grid.node(*j)).collect();
        distances.push(metric.set_distance(&pe, &pf)?);
    }
    let mut rows = Vec::new();
    for &t in times {
        let semigroup = spectral::heat(op, t)?;
        for (i, (e, f)) in pairs.iter().enumerate() {
            let d = distances[i];
            let measured = opnorm_exact(&block(&semigroup, e, f));
            let bound = (-d * d / (4.0 * t)).exp();
            rows.push(HeatAuditRow {
                e_id: i,
                f_id: i,
                t,
                distance: d,
                measured,
                bound,
                ratio: measured / bound.max(f64::MIN_POSITIVE),
                pass: measured <= bound * (1.0 + tol.heat_slack) + tol.noise_floor,
            });
        }
    }
    Ok(HeatAudit {
        rows,
        slack: tol.heat_slack,
    })
}

/// `mu(r)` for one lattice displacement `r = n - m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockRow {
    pub r: Vec<i64>,
    pub length: f64,
    pub mu: f64,
}

/// Decay profile of the cube blocks of `exp(-tH)` and its Gaussian fit
/// `log mu(r) ~ -(|r| - k)_+^2 / 4ct`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockDecay {
    pub t: f64,
    pub rows: Vec<BlockRow>,
    pub fitted_c: f64,
    pub fitted_k: f64,
    pub r_squared: f64,
    /// Lattice constant used for the bound audit (cube diameter).
    pub audit_k: f64,
    /// Ellipticity upper bound used for the bound audit.
    pub audit_c: f64,
    pub violations: usize,
    /// Ratio of a geometric fit to the tail of `mu`; below one means summable.
    pub tail_ratio: f64,
    pub tail_sum: f64,
}

impl BlockDecay {
    /// `mu` at displacement `r`, if some cube pair realizes it.
    pub fn mu(&self, r: &[i64]) -> Option<f64> {
        self.rows.iter().find(|row| row.r == r).map(|row| row.mu)
    }

    /// The largest `mu` over displacements of length `|r|` (radial profile).
    pub fn radial(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for row in &self.rows {
            match out.iter_mut().find(|(l, _)| (*l - row.length).abs() < 1e-9) {
                Some(e) => e.1 = e.1.max(row.mu),
                None => out.push((row.length, row.mu)),
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "length", "mu"])?;
        for row in &self.rows {
            let r: Vec<String> = row.r.iter().map(|v| v.to_string()).collect();
            w.write_record([r.join(" "), fmt_num(row.length), fmt_num(row.mu)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Least-squares fit of `y ~ -gamma (x - k)_+^2` with `k` on a grid and
/// `gamma` in closed form. Returns `(k, gamma, r_squared)`.
pub fn fit_shifted_gaussian(points: &[(f64, f64)], k_max: f64) -> Option<(f64, f64, f64)> {
    if points.len() < 3 {
        return None;
    }
    let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let sst: f64 = points.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let mut best: Option<(f64, f64, f64)> = None;
    let steps = 1000;
    for s in 0..=steps {
        let k = k_max * s as f64 / steps as f64;
        let w: Vec<f64> = points.iter().map(|p| (p.0 - k).max(0.0).powi(2)).collect();
        let ww: f64 = w.iter().map(|v| v * v).sum();
        if ww <= 0.0 {
            continue;
        }
        let gamma = -points.iter().zip(&w).map(|(p, w)| p.1 * w).sum::<f64>() / ww;
        let sse: f64 = points.iter().zip(&w).map(|(p, w)| (p.1 + gamma * w).powi(2)).sum();
        if best.is_none_or(|b| sse < b.2) {
            best = Some((k, gamma, sse));
        }
    }
    best.map(|(k, gamma, sse)| {
        let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
        (k, gamma, r2)
    })
}

/// `mu(r) = max_{n - m = r} ||P_m exp(-tH) P_n||` over the cubes of
/// `partition`, the Gaussian fit of its decay and an audit of
/// `mu(r) <= exp(-(|r| - k)_+^2 / 4ct)` with `k` the cube diameter and
/// `c = upper` the ellipticity upper bound.
pub fn block_heat_decay(
    op: &DiscreteOperator,
    partition: &CubePartition,
    t: f64,
    upper: f64,
    tol: &Tolerances,
) -> Result<BlockDecay> {
    if !(upper.is_finite() && upper > 0.0) {
        return Err(Error::Argument(format!(
            "block decay needs a finite ellipticity upper bound, got {upper}"
        )));
    }
    if partition.is_empty() {
        return Err(Error::Argument("empty cube partition".into()));
    }
    let semigroup = spectral::heat(op, t)?;
    let mut mu: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (m, rows) in partition.centers.iter().zip(&partition.blocks) {
        for (c, cols) in partition.centers.iter().zip(&partition.blocks) {
            let r: Vec<i64> = c.iter().zip(m).map(|(a, b)| a - b).collect();
            let v = opnorm_exact(&block(&semigroup, rows, cols));
            let e = mu.entry(r).or_insert(0.0);
            *e = e.max(v);
        }
    }
    let mut rows: Vec<BlockRow> = mu
        .into_iter()
        .map(|(r, mu)| BlockRow {
            length: r.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt(),
            r,
            mu,
        })
        .collect();
    rows.sort_by(|a, b| a.length.total_cmp(&b.length).then(a.r.cmp(&b.r)));

    let dim = partition.dim().max(1);
    let audit_k = (dim as f64).sqrt();
    let violations = rows
        .iter()
        .filter(|row| {
            let gap = (row.length - audit_k).max(0.0);
            row.mu > (-gap * gap / (4.0 * upper * t)).exp() * (1.0 + tol.heat_slack) + tol.noise_floor
        })
        .count();

    let mut decay = BlockDecay {
        t,
        rows,
        fitted_c: f64::NAN,
        fitted_k: f64::NAN,
        r_squared: f64::NAN,
        audit_k,
        audit_c: upper,
        violations,
        tail_ratio: f64::NAN,
        tail_sum: f64::NAN,
    };
    let radial: Vec<(f64, f64)> = decay
        .radial()
        .into_iter()
        .filter(|(l, m)| *l > 0.0 && *m > tol.noise_floor)
        .map(|(l, m)| (l, m.ln()))
        .collect();
    if let Some((k, gamma, r2)) = fit_shifted_gaussian(&radial, 2.0 * audit_k) {
        decay.fitted_k = k;
        decay.fitted_c = 1.0 / (4.0 * t * gamma);
        decay.r_squared = r2;
    }
    let tail = &radial[radial.len() / 2..];
    if tail.len() >= 2 {
        let (slope, _) = linear_fit(tail);
        let q = slope.exp();
        decay.tail_ratio = q;
        let observed: f64 = decay.rows.iter().map(|r| r.mu).sum();
        let last = tail.last().map_or(0.0, |p| p.1.exp());
        decay.tail_sum = if q < 1.0 { observed + last * q / (1.0 - q) } else { f64::INFINITY };
    }
    Ok(decay)
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble, Boundary};
    use proptest::prelude::*;

    fn line_metric(p: &CoefficientProfile, lo: f64, hi: f64) -> MetricField {
        MetricField::closed_1d(p, lo, hi, 256).unwrap()
    }

    #[test]
    fn uniform_distance_is_euclidean() {
        let m = line_metric(&CoefficientProfile::uniform(1.0).unwrap(), -5.0, 5.0);
        assert_eq!(m.mode(), MetricMode::Closed1D);
        assert!((m.distance(&[-1.3], &[2.2]).unwrap() - 3.5).abs() < 1e-12);
        let m4 = line_metric(&CoefficientProfile::uniform(4.0).unwrap(), -5.0, 5.0);
        assert!((m4.distance(&[0.0], &[3.0]).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn exponential_distance() {
        let m = line_metric(&CoefficientProfile::exp_decay(2.0).unwrap(), -3.0, 2.0);
        let d = m.distance(&[0.0], &[1.0]).unwrap();
        assert!((d - (1f64.exp() - 1.0)).abs() < 1e-12, "{d}");
        assert!((d - 1.718).abs() < 1e-3);
        for (x, y) in [(-2.5, 0.3), (1.9, -0.4)] {
            let d = m.distance(&[x], &[y]).unwrap();
            assert!((d - (f64::exp(x) - f64::exp(y)).abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn power_distance_reaches_the_singular_end() {
        for alpha in [0.5, 1.0, 1.5] {
            let m = line_metric(&CoefficientProfile::power(alpha).unwrap(), 0.0, 4.0);
            let beta = 1.0 - alpha / 2.0;
            for (x, y) in [(0.0, 1.0), (0.0, 4.0), (0.3, 2.7), (0.01, 0.02)] {
                let want = (f64::powf(x, beta) - f64::powf(y, beta)).abs() / beta;
                let got = m.distance(&[x], &[y]).unwrap();
                assert!((got - want).abs() < 1e-9 * want.max(1.0), "alpha={alpha} {x} {y}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn set_distances() {
        let u = line_metric(&CoefficientProfile::uniform(1.0).unwrap(), -1.0, 6.0);
        let grid_pts = |lo: f64, hi: f64| -> Vec<Vec<f64>> { (0..=10).map(|i| vec![lo + (hi - lo) * i as f64 / 10.0]).collect() };
        assert!((u.set_distance(&grid_pts(0.0, 1.0), &grid_pts(3.0, 4.0)).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(u.set_distance(&grid_pts(0.0, 2.0), &grid_pts(1.0, 4.0)).unwrap(), 0.0);
        let e = line_metric(&CoefficientProfile::exp_decay(2.0).unwrap(), -1.0, 2.0);
        let d = e.set_distance(&[vec![0.0]], &[vec![3f64.ln()]]).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
        assert!(matches!(u.set_distance(&[], &grid_pts(0.0, 1.0)), Err(Error::Argument(_))));
    }

    #[test]
    fn graph_and_table_agree_in_one_dimension() {
        for p in [
            CoefficientProfile::exp_decay(2.0).unwrap(),
            CoefficientProfile::periodic(2.0, 1.0, 1.3).unwrap(),
            CoefficientProfile::rational_bump(1.0, 1.0).unwrap(),
        ] {
            let grid = Grid::line(-2.0, 1.0, 299).unwrap();
            let h = grid.spacing(0);
            let g = MetricField::graph(&p, &grid).unwrap();
            let t = line_metric(&p, -2.0, 1.0);
            let speed = grid.axis_nodes(0).iter().map(|x| p.value(*x).unwrap().powf(-0.5)).fold(0.0, f64::max);
            for (i, j) in [(0, 298), (17, 140), (200, 201)] {
                let (x, y) = (grid.node(i), grid.node(j));
                let a = g.distance(&x, &y).unwrap();
                let b = t.distance(&x, &y).unwrap();
                assert!((a - b).abs() <= 2.0 * h * speed, "{}: {a} vs {b}", p.tag());
            }
        }
    }

    #[test]
    fn two_dimensional_graph_metric() {
        let grid = Grid::rect([-2.0, -2.0], [2.0, 2.0], [39, 39], false).unwrap();
        let g = MetricField::graph(&CoefficientProfile::uniform(1.0).unwrap(), &grid).unwrap();
        let h = grid.spacing(0);
        // axis and diagonal moves are exact for the Euclidean metric
        assert!((g.distance(&[-1.5, 0.0], &[1.5, 0.0]).unwrap() - 3.0).abs() < 1e-12);
        assert!((g.distance(&[-1.0, -1.0], &[1.0, 1.0]).unwrap() - 8f64.sqrt()).abs() < 1e-12);
        // off-lattice directions overestimate by at most the octagonal factor
        let d = g.distance(&[-1.5, -0.5], &[1.5, 0.5]).unwrap();
        let e = 10f64.sqrt();
        assert!(d >= e - 2.0 * h && d <= e * 1.0824 + 2.0 * h, "{d}");
        // a matrix coefficient stretches distances along its weak axis
        let first = CoefficientProfile::uniform(4.0).unwrap();
        let second = CoefficientProfile::uniform(1.0).unwrap();
        let m = CoefficientProfile::matrix_diag_2d(first, second, 0.0).unwrap();
        let gm = MetricField::graph(&m, &grid).unwrap();
        assert!((gm.distance(&[-1.0, 0.0], &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((gm.distance(&[0.0, -1.0], &[0.0, 1.0]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cube_partition_covers_every_node_once() {
        let grid = Grid::line(-3.0, 3.0, 119).unwrap();
        let cp = CubePartition::new(&grid);
        assert_eq!(cp.centers, (-3..=3).map(|c| vec![c]).collect::<Vec<_>>());
        let mut seen = vec![0; grid.len()];
        for b in &cp.blocks {
            for j in b {
                seen[*j] += 1;
            }
        }
        assert!(seen.iter().all(|c| *c == 1));
        for (c, b) in cp.centers.iter().zip(&cp.blocks) {
            for j in b {
                assert!((grid.node(*j)[0] - c[0] as f64).abs() <= 0.5);
            }
        }
        let grid2 = Grid::rect([-1.0, -1.0], [1.0, 1.0], [15, 15], false).unwrap();
        let cp2 = CubePartition::new(&grid2);
        assert_eq!(cp2.len(), 9);
        assert_eq!(cp2.blocks.iter().map(|b| b.len()).sum::<usize>(), grid2.len());
        assert!(cp2.block_of(&[0, 0]).is_some());
    }

    #[test]
    fn heat_audit_examples() {
        let p = CoefficientProfile::uniform(1.0).unwrap();
        let grid = Grid::line(-4.0, 4.0, 399).unwrap();
        let op = assemble(&p, &grid, Boundary::Dirichlet).unwrap();
        let metric = line_metric(&p, -4.0, 4.0);
        let nodes = grid.axis_nodes(0);
        let select = |lo: f64, hi: f64| -> Vec<usize> { (0..nodes.len()).filter(|j| nodes[*j] >= lo && nodes[*j] <= hi).collect() };
        let e = select(-2.0, -1.0);
        let f = select(1.0, 2.0);
        let audit = verify_heat_bound(&op, &metric, &[(e.clone(), f.clone())], &[0.5, 1e3], &Tolerances::default()).unwrap();
        let row = &audit.rows[0];
        assert!((row.distance - 2.0).abs() < 0.05);
        assert!((row.bound - (-row.distance.powi(2) / 2.0).exp()).abs() < 1e-15);
        assert!(row.measured <= row.bound * 1.05, "{row:?}");
        // large times: bound tends to one and the semigroup is a contraction
        let late = &audit.rows[1];
        assert!(late.bound > 0.99 && late.measured <= 1.0 && late.pass);
        // adjacent sets have zero distance and bound one
        let audit = verify_heat_bound(&op, &metric, &[(select(-1.0, 0.0), select(0.01, 1.0))], &[0.1], &Tolerances::default()).unwrap();
        assert!(audit.rows[0].distance < 0.03 && audit.passed());
        // overlapping sets are rejected
        assert!(verify_heat_bound(&op, &metric, &[(e.clone(), e)], &[0.1], &Tolerances::default()).is_err());
        let mut buf = Vec::new();
        verify_heat_bound(&op, &metric, &[(select(-3.0, -2.0), f)], &[0.1], &Tolerances::default())
            .unwrap()
            .write_csv(&mut buf)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("E_id,F_id,t,measured,bound,ratio,pass\n0,0,0.1,"));
    }

    #[test]
    fn block_decay_on_uniform_line() {
        let p = CoefficientProfile::uniform(1.0).unwrap();
        let grid = Grid::line(-8.5, 8.5, 339).unwrap();
        let op = assemble(&p, &grid, Boundary::Dirichlet).unwrap();
        let cp = CubePartition::new(&grid);
        let d = block_heat_decay(&op, &cp, 0.1, 1.0, &Tolerances::default()).unwrap();
        assert!(d.mu(&[0]).unwrap() <= 1.0);
        for r in 1..10 {
            let (a, b) = (d.mu(&[r]).unwrap(), d.mu(&[-r]).unwrap());
            assert!((a - b).abs() <= 1e-12 * a.max(1e-300) + 1e-300, "r={r}");
        }
        assert_eq!(d.violations, 0);
        assert!(d.tail_ratio < 1.0 && d.tail_sum.is_finite());
    }

    #[test]
    fn shifted_gaussian_fit_recovers_parameters() {
        let pts: Vec<(f64, f64)> = (1..10).map(|r| (r as f64, -0.7 * (r as f64 - 0.6).powi(2))).collect();
        let (k, gamma, r2) = fit_shifted_gaussian(&pts, 2.0).unwrap();
        assert!((k - 0.6).abs() < 1e-9 && (gamma - 0.7).abs() < 1e-9 && r2 > 1.0 - 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn distance_is_a_metric(rate in 0.2f64..3.0, xs in proptest::collection::vec(-2.0f64..1.0, 30)) {
            let m = MetricField::closed_1d(&CoefficientProfile::exp_decay(rate).unwrap(), -2.0, 1.0, 64).unwrap();
            for w in xs.windows(3) {
                let (x, y, z) = ([w[0]], [w[1]], [w[2]]);
                let dxy = m.distance(&x, &y).unwrap();
                prop_assert!((dxy - m.distance(&y, &x).unwrap()).abs() < 1e-14);
                prop_assert_eq!(m.distance(&x, &x).unwrap(), 0.0);
                prop_assert!(m.distance(&x, &z).unwrap() <= dxy + m.distance(&y, &z).unwrap() + 1e-8);
            }
        }

        #[test]
        fn distance_dominates_scaled_euclidean(mean in 1.5f64..3.0, amp in 0.0f64..1.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let p = CoefficientProfile::periodic(mean, amp, 1.7).unwrap();
            let upper = p.ellipticity_bounds(&Domain::interval(-3.0, 3.0)).unwrap().upper;
            let m = MetricField::closed_1d(&p, -3.0, 3.0, 128).unwrap();
            prop_assert!(m.distance(&[x], &[y]).unwrap() >= upper.powf(-0.5) * (x - y).abs() - 1e-12);
        }

        #[test]
        fn graph_triangle_inequality(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let grid = Grid::rect([-1.0, -1.0], [1.0, 1.0], [12, 12], false).unwrap();
            let p = CoefficientProfile::periodic(2.0, 1.0, 0.9).unwrap();
            let g = MetricField::graph(&p, &grid).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut pt = || vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let (x, y, z) = (pt(), pt(), pt());
            let dxy = g.distance(&x, &y).unwrap();
            prop_assert!((dxy - g.distance(&y, &x).unwrap()).abs() < 1e-12);
            prop_assert!(g.distance(&x, &z).unwrap() <= dxy + g.distance(&y, &z).unwrap() + 1e-8);
        }
    }
}
