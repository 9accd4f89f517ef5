//! Linear-algebra kernels: compressed sparse rows, symmetric tridiagonal
//! bisection with inverse iteration, Krylov operator norms, and Chebyshev
//! expansions of the heat semigroup.

use nalgebra::{ComplexField, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Square sparse matrix in compressed-row form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n x n` matrix, summing duplicate entries and dropping exact zeros.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside {n}x{n}");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(i);
                cols.push(j);
                vals.push(v);
                last = Some((i, j));
            }
        }
        let mut kept_cols = Vec::with_capacity(cols.len());
        let mut kept_vals = Vec::with_capacity(vals.len());
        for ((i, j), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != 0.0 {
                row_ptr[i + 1] += 1;
                kept_cols.push(j);
                kept_vals.push(v);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols: kept_cols,
            vals: kept_vals,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let mut t = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        self.matvec(x.as_slice(), y.as_mut_slice());
        y
    }

    /// `self * x` for a dense block of columns.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.n);
        let mut y = DMatrix::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            let xc = x.column(c);
            let mut yc = y.column_mut(c);
            for i in 0..self.n {
                let mut s = 0.0;
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    s += self.vals[k] * xc[self.cols[k]];
                }
                yc[i] = s;
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |M_ij - M_ji|`.
    pub fn asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets().map(|(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum of a symmetric matrix.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut d = 0.0;
            let mut r = 0.0;
            for (j, v) in self.row(i) {
                if j == i {
                    d = v;
                } else {
                    r += v.abs();
                }
            }
            lo = lo.min(d - r);
            hi = hi.max(d + r);
        }
        if self.n == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    /// The symmetric tridiagonal form when the matrix has bandwidth at most one.
    pub fn as_tridiagonal(&self) -> Option<SymTridiag> {
        if self.bandwidth() > 1 {
            return None;
        }
        let diag = self.diagonal();
        let off = (0..self.n.saturating_sub(1)).map(|i| self.get(i, i + 1)).collect();
        Some(SymTridiag::new(diag, off))
    }

    /// `self + c I`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut t: Vec<_> = self.triplets().collect();
        t.extend((0..self.n).map(|i| (i, i, c)));
        Self::from_triplets(self.n, t)
    }
}

/// Real symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1));
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.dim() {
            let e2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            q = self.diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
            if q == 0.0 {
                q = -f64::MIN_POSITIVE.sqrt() * (1.0 + x.abs());
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection to relative precision.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let span = hi - lo;
        lo -= 1e-12 * span.abs() + f64::MIN_POSITIVE;
        hi += 1e-12 * span.abs() + f64::MIN_POSITIVE;
        self.bisect(k, lo, hi)
    }

    fn bisect(&self, k: usize, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..2200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// The `count` smallest eigenvalues in ascending order.
    pub fn lowest(&self, count: usize) -> Vec<f64> {
        let count = count.min(self.dim());
        let (glo, ghi) = self.gershgorin();
        let pad = 1e-12 * (ghi - glo).abs() + f64::MIN_POSITIVE;
        let mut out: Vec<f64> = Vec::with_capacity(count);
        for k in 0..count {
            let lo = out.last().map_or(glo - pad, |v| *v - pad.max(v.abs() * 1e-14));
            out.push(self.bisect(k, lo, ghi + pad));
        }
        out
    }

    /// All eigenvalues in `[lo, hi)`, ascending.
    pub fn eigenvalues_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let first = self.count_below(lo);
        let last = self.count_below(hi);
        let (glo, ghi) = self.gershgorin();
        let pad = 1e-12 * (ghi - glo).abs() + f64::MIN_POSITIVE;
        (first..last)
            .map(|k| self.bisect(k, lo.max(glo - pad), hi.min(ghi + pad)))
            .collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Solves `(T - shift I) y = b` by Gaussian elimination with partial pivoting.
    pub fn solve_shifted(&self, shift: f64, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let scale = self.diag.iter().chain(&self.off).fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let tiny = f64::EPSILON * scale;
        if n == 1 {
            let d = self.diag[0] - shift;
            return vec![b[0] / if d == 0.0 { tiny } else { d }];
        }
        let mut d: Vec<f64> = self.diag.iter().map(|v| v - shift).collect();
        let mut du = self.off.clone();
        let dl = self.off.clone();
        let mut du2 = vec![0.0; n - 2];
        let mut y = b.to_vec();
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let m = dl[i] / d[i];
                d[i + 1] -= m * du[i];
                y[i + 1] -= m * y[i];
            } else {
                // swap rows i and i + 1
                let m = d[i] / dl[i];
                d[i] = dl[i];
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - m * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -m;
                }
                y.swap(i, i + 1);
                y[i + 1] -= m * y[i];
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        y[n - 1] /= d[n - 1];
        y[n - 2] = (y[n - 2] - du[n - 2] * y[n - 1]) / d[n - 2];
        for i in (0..n - 2).rev() {
            y[i] = (y[i] - du[i] * y[i + 1] - du2[i] * y[i + 2]) / d[i];
        }
        y
    }

    /// Unit eigenvector for the eigenvalue estimate `lambda` by inverse
    /// iteration, orthogonalized against `against` (vectors of nearby eigenvalues).
    pub fn eigenvector(&self, lambda: f64, against: &[&[f64]], seed: u64) -> Vec<f64> {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (glo, ghi) = self.gershgorin();
        let shift = lambda + 4.0 * f64::EPSILON * lambda.abs().max(1e-300 + (ghi - glo).abs() * 1e-18);
        for _ in 0..4 {
            orthogonalize(&mut v, against);
            normalize(&mut v);
            v = self.solve_shifted(shift, &v);
        }
        orthogonalize(&mut v, against);
        normalize(&mut v);
        // fix sign: largest component positive
        let imax = (0..n).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap_or(0);
        if v[imax] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    }

    /// Lowest `count` eigenpairs, eigenvectors as columns.
    pub fn lowest_pairs(&self, count: usize) -> (Vec<f64>, DMatrix<f64>) {
        let vals = self.lowest(count);
        let n = self.dim();
        let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(vals.len());
        let (glo, ghi) = self.gershgorin();
        let cluster = 1e-8 * (ghi - glo).abs().max(f64::MIN_POSITIVE);
        for (k, &lam) in vals.iter().enumerate() {
            let near: Vec<&[f64]> = vals[..k]
                .iter()
                .zip(&vecs)
                .filter(|(mu, _)| (lam - **mu).abs() <= cluster)
                .map(|(_, v)| v.as_slice())
                .collect();
            let v = self.eigenvector(lam, &near, 0x5eed + k as u64);
            vecs.push(v);
        }
        let mut m = DMatrix::zeros(n, vals.len());
        for (c, v) in vecs.iter().enumerate() {
            m.column_mut(c).copy_from_slice(v);
        }
        (vals, m)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let nrm = dot(v, v).sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
}

fn orthogonalize(v: &mut [f64], against: &[&[f64]]) {
    for _ in 0..2 {
        for u in against {
            let c = dot(v, u);
            v.iter_mut().zip(u.iter()).for_each(|(x, y)| *x -= c * y);
        }
    }
}

/// Cholesky factor of a symmetric positive-definite band matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    // row i stores L[i][i - bw ..= i]
    rows: Vec<f64>,
}

impl BandCholesky {
    /// Factors `m + shift I`.
    pub fn new(m: &CsrMatrix, shift: f64) -> Result<Self> {
        let n = m.dim();
        let bw = m.bandwidth();
        let w = bw + 1;
        let mut rows = vec![0.0; n * w];
        for (i, j, v) in m.triplets() {
            if j <= i {
                rows[i * w + (j + bw - i)] = v;
            }
        }
        for i in 0..n {
            rows[i * w + bw] += shift;
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = rows[i * w + (j + bw - i)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= rows[i * w + (k + bw - i)] * rows[j * w + (k + bw - j)];
                }
                if j == i {
                    if s <= 0.0 {
                        return Err(Error::Solver {
                            iterations: i,
                            detail: format!("matrix not positive definite at pivot {i}"),
                        });
                    }
                    rows[i * w + bw] = s.sqrt();
                } else {
                    rows[i * w + (j + bw - i)] = s / rows[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, rows })
    }

    pub fn solve(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.rows[i * w + (k + bw - i)] * b[k];
            }
            b[i] = s / self.rows[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n.min(i + bw + 1) {
                s -= self.rows[k * w + (i + bw - k)] * b[k];
            }
            b[i] = s / self.rows[i * w + bw];
        }
    }
}

/// Lowest `count` eigenpairs of a sparse symmetric positive semi-definite
/// matrix by shift-invert Lanczos with full reorthogonalization.
pub fn lanczos_lowest(m: &CsrMatrix, count: usize, rel: f64) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.dim();
    let count = count.min(n);
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let mut shift = 1e-10 * scale;
    let chol = loop {
        match BandCholesky::new(m, shift) {
            Ok(c) => break c,
            Err(e) if shift > scale => return Err(e),
            Err(_) => shift *= 100.0,
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c);
    let mut q0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut q0);
    let mut steps = (2 * count + 40).min(n);
    loop {
        let mut basis: Vec<Vec<f64>> = vec![q0.clone()];
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        for j in 0..steps {
            let mut w = basis[j].clone();
            chol.solve(&mut w);
            let a = dot(&basis[j], &w);
            alpha.push(a);
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = dot(&w, &w).sqrt();
            if j + 1 == steps || b <= 1e-14 * a.abs() {
                beta.push(b);
                break;
            }
            beta.push(b);
            w.iter_mut().for_each(|x| *x /= b);
            basis.push(w);
        }
        let k = alpha.len();
        let t = SymTridiag::new(alpha, beta[..k - 1].to_vec());
        let (tv, tvec) = sym_eigen(&t.to_dense());
        let last_beta = beta[k - 1];
        let mut vals = Vec::with_capacity(count);
        let mut vecs = DMatrix::zeros(n, count);
        let mut ok = true;
        for c in 0..count.min(k) {
            let idx = k - 1 - c;
            let mu = tv[idx];
            let resid = last_beta * tvec[(k - 1, idx)].abs();
            if resid > rel * mu.abs() {
                ok = false;
            }
            vals.push(1.0 / mu - shift);
            let mut v = vec![0.0; n];
            for (q, y) in basis.iter().zip(tvec.column(idx).iter()) {
                v.iter_mut().zip(q).for_each(|(a, b)| *a += y * b);
            }
            normalize(&mut v);
            vecs.column_mut(c).copy_from_slice(&v);
        }
        if (ok && vals.len() == count) || steps >= n {
            if vals.len() < count {
                return Err(Error::Solver {
                    iterations: steps,
                    detail: format!("Krylov space exhausted with {} of {count} pairs", vals.len()),
                });
            }
            return Ok((vals, vecs));
        }
        steps = (steps * 2).min(n);
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(m.nrows(), order.len());
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// `V f(Lambda) V^T` from an eigendecomposition.
pub fn spectral_function(vals: &[f64], vecs: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut scaled = vecs.clone();
    for (c, &lam) in vals.iter().enumerate() {
        let w = f(lam);
        scaled.column_mut(c).scale_mut(w);
    }
    let mut out = &scaled * vecs.transpose();
    symmetrize(&mut out);
    out
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Result of a Krylov norm estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub matvecs: usize,
    pub converged: bool,
}

/// Largest singular value of the map `x -> apply(x)` with adjoint `adjoint`,
/// from Lanczos iterations on the Gram operator `M^H M`.
///
/// The iteration is restarted from the current Ritz vector every `block`
/// steps and stops once the Ritz residual falls below `rel` times the Ritz value.
pub fn gram_lanczos_norm<T, F, G>(
    ncols: usize,
    apply: F,
    adjoint: G,
    rel: f64,
    max_matvecs: usize,
    seed: u64,
) -> NormEstimate
where
    T: ComplexField<RealField = f64> + Copy,
    F: Fn(&DVector<T>) -> DVector<T>,
    G: Fn(&DVector<T>) -> DVector<T>,
{
    if ncols == 0 {
        return NormEstimate {
            value: 0.0,
            matvecs: 0,
            converged: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start: DVector<T> = DVector::from_fn(ncols, |_, _| {
        let re: f64 = rng.random_range(-1.0..1.0);
        let im: f64 = rng.random_range(-1.0..1.0);
        T::from_real(re) + T::from_real(im) * imaginary_unit::<T>()
    });
    let block = ncols.min(48);
    let mut matvecs = 0;
    let mut best = 0.0f64;
    let gram = |x: &DVector<T>| adjoint(&apply(x));
    loop {
        let nrm = start.norm();
        if nrm == 0.0 {
            return NormEstimate {
                value: 0.0,
                matvecs,
                converged: true,
            };
        }
        start.unscale_mut(nrm);
        let mut basis: Vec<DVector<T>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut last_beta = 0.0;
        for j in 0..block {
            let mut w = gram(&basis[j]);
            matvecs += 1;
            let a = basis[j].dotc(&w).real();
            alpha.push(a);
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dotc(&w);
                    w.axpy(-c, q, T::one());
                }
            }
            let b = w.norm();
            last_beta = b;
            if j + 1 == block || b <= 1e-14 * a.abs().max(f64::MIN_POSITIVE) {
                break;
            }
            beta.push(b);
            w.unscale_mut(b);
            basis.push(w);
        }
        let k = alpha.len();
        let t = SymTridiag::new(alpha.clone(), beta[..k - 1].to_vec());
        let theta = t.eigenvalue(k - 1).max(0.0);
        let y = if k == 1 { vec![1.0] } else { t.eigenvector(theta, &[], seed ^ 0x9e37) };
        let resid = last_beta * y[k - 1].abs();
        best = best.max(theta);
        let exhausted = k < block || k == ncols;
        if resid <= rel * theta || exhausted || matvecs >= max_matvecs || theta == 0.0 {
            return NormEstimate {
                value: best.sqrt(),
                matvecs,
                converged: resid <= rel * theta || exhausted || theta == 0.0,
            };
        }
        let mut x = DVector::zeros(ncols);
        for (q, c) in basis.iter().zip(&y) {
            x.axpy(T::from_real(*c), q, T::one());
        }
        start = x;
    }
}

fn imaginary_unit<T: ComplexField<RealField = f64>>() -> T {
    // Real fields have no imaginary unit; sqrt(-1) is NaN there, so test first.
    let i = T::from_real(-1.0).sqrt();
    if i.clone().is_finite() {
        i
    } else {
        T::zero()
    }
}

/// Operator 2-norm of a dense real or complex matrix by Lanczos on `M^H M`.
pub fn opnorm<T: ComplexField<RealField = f64> + Copy>(m: &DMatrix<T>) -> f64 {
    opnorm_with(m, 1e-10, 5000).value
}

pub fn opnorm_with<T: ComplexField<RealField = f64> + Copy>(
    m: &DMatrix<T>,
    rel: f64,
    max_matvecs: usize,
) -> NormEstimate {
    gram_lanczos_norm(
        m.ncols(),
        |x| m * x,
        |y| m.ad_mul(y),
        rel,
        max_matvecs,
        0x00c0_ffee,
    )
}

/// Operator 2-norm through a full singular value decomposition.
pub fn opnorm_exact<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0, |a: f64, b| a.max(*b))
}

/// Chebyshev coefficients of `f` on `[lo, hi]`, truncated once the tail is below `tol`.
pub fn chebyshev_coefficients(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Vec<f64> {
    let c = 0.5 * (hi + lo);
    let r = 0.5 * (hi - lo);
    // coefficients below rounding of the samples are never observed
    let tol = tol.max(64.0 * f64::EPSILON);
    let mut size = 32;
    loop {
        let theta: Vec<f64> = (0..size)
            .map(|j| std::f64::consts::PI * (j as f64 + 0.5) / size as f64)
            .collect();
        let vals: Vec<f64> = theta.iter().map(|t| f(c + r * t.cos())).collect();
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let coef: Vec<f64> = (0..size)
            .map(|k| {
                2.0 / size as f64
                    * vals
                        .iter()
                        .zip(&theta)
                        .map(|(v, t)| v * (k as f64 * t).cos())
                        .sum::<f64>()
            })
            .collect();
        let tail = coef[size - 8..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if tail <= tol * scale || size >= 1 << 16 {
            let keep = coef
                .iter()
                .rposition(|v| v.abs() > tol * scale * 1e-3)
                .map_or(1, |p| p + 1);
            return coef[..keep].to_vec();
        }
        size *= 2;
    }
}

/// `exp(-t H) X` for a symmetric sparse `H` with spectrum inside `bounds`.
pub fn chebyshev_heat(h: &CsrMatrix, t: f64, x: &DMatrix<f64>, bounds: (f64, f64)) -> DMatrix<f64> {
    let (lo, hi) = bounds;
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        return x * (-t * 0.5 * (lo + hi)).exp();
    }
    let coef = chebyshev_coefficients(|v| (-t * v).exp(), lo, hi, 1e-17);
    let c = 0.5 * (hi + lo);
    let r = 0.5 * (hi - lo);
    let step = |v: &DMatrix<f64>| (h.mul_dense(v) - v * c) / r;
    let mut prev = x.clone();
    let mut out = x * (0.5 * coef[0]);
    if coef.len() == 1 {
        return out;
    }
    let mut cur = step(x);
    out += &cur * coef[1];
    for ck in coef.iter().skip(2) {
        let next = step(&cur) * 2.0 - &prev;
        out += &next * *ck;
        prev = cur;
        cur = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::Rng;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn tridiagonal_bisection_matches_closed_form() {
        let n = 50;
        let t = laplacian(n);
        let vals = t.lowest(5);
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13, "{k}: {v} vs {exact}");
        }
        assert_eq!(t.eigenvalues_in(0.0, 4.0).len(), n);
    }

    #[test]
    fn inverse_iteration_residuals_small() {
        let t = SymTridiag::new(
            (0..200).map(|i| 2.0 + (i as f64 * 0.1).sin()).collect(),
            (0..199).map(|i| -1.0 - 0.3 * (i as f64 * 0.05).cos()).collect(),
        );
        let (vals, vecs) = t.lowest_pairs(6);
        for (k, lam) in vals.iter().enumerate() {
            let v: Vec<f64> = vecs.column(k).iter().copied().collect();
            let hv = t.matvec(&v);
            let r: f64 = hv.iter().zip(&v).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
            assert!(r < 1e-12, "residual {r}");
        }
        let g = vecs.transpose() * &vecs;
        assert!((g - DMatrix::identity(6, 6)).amax() < 1e-10);
    }

    #[test]
    fn shifted_solve_matches_dense() {
        let t = SymTridiag::new(vec![1.0, -2.0, 0.5, 3.0, 0.0], vec![0.7, -1.5, 2.0, 0.1]);
        let b = [1.0, 2.0, -1.0, 0.5, 3.0];
        let y = t.solve_shifted(0.3, &b);
        let dense = t.to_dense() - DMatrix::identity(5, 5) * 0.3;
        let exact = dense.lu().solve(&DVector::from_row_slice(&b)).unwrap();
        for i in 0..5 {
            assert!((y[i] - exact[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn csr_roundtrip_and_sums_duplicates() {
        let m = CsrMatrix::from_triplets(3, vec![(0, 0, 1.0), (0, 0, 2.0), (2, 1, -1.0), (1, 2, -1.0), (1, 1, 0.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.asymmetry(), 0.0);
        assert_eq!(CsrMatrix::from_dense(&m.to_dense()), m);
        assert_eq!(m.bandwidth(), 1);
    }

    #[test]
    fn opnorm_examples() {
        let id = DMatrix::<f64>::identity(7, 7);
        assert!((opnorm(&id) - 1.0).abs() < 1e-10);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -4.0]));
        assert!((opnorm(&d) - 4.0).abs() < 1e-10);
        let c = DMatrix::from_fn(5, 4, |i, j| Complex64::new((i + j) as f64, (i as f64) - 2.0 * j as f64));
        assert!((opnorm(&c) - opnorm_exact(&c)).abs() < 1e-8 * opnorm_exact(&c));
    }

    #[test]
    fn chebyshev_heat_matches_eigen() {
        let n = 40;
        let t = laplacian(n);
        let csr = CsrMatrix::from_dense(&t.to_dense());
        let (vals, vecs) = sym_eigen(&t.to_dense());
        for time in [0.01, 0.7, 5.0] {
            let exact = spectral_function(&vals, &vecs, |l| (-time * l).exp());
            let cheb = chebyshev_heat(&csr, time, &DMatrix::identity(n, n), csr.gershgorin());
            let err = (exact - cheb).amax();
            assert!(err < 1e-11, "time {time}: {err:e}");
        }
    }

    proptest! {
        #[test]
        fn lanczos_norm_agrees_with_svd(seed in 0u64..1000, r in 2usize..30, c in 2usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
            let exact = opnorm_exact(&m);
            prop_assert!((opnorm(&m) - exact).abs() <= 1e-6 * exact);
        }

        #[test]
        fn sturm_count_is_monotone(x in -1.0f64..5.0, dx in 0.0f64..2.0) {
            let t = laplacian(30);
            prop_assert!(t.count_below(x) <= t.count_below(x + dx));
        }
    }
}
