//! Plain-text cache of full eigendecompositions, keyed by profile, grid and
//! boundary. Values are written in shortest round-trip exponent form, so a
//! cached decomposition reads back bit for bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use divspec::{Boundary, CoefficientProfile, Grid};
use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

/// Ascending eigenvalues with eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

const MAGIC: &str = "divspec-eigen 1";

pub struct EigenCache {
    dir: PathBuf,
}

/// Cache key of an operator realization.
pub fn key(profile: &CoefficientProfile, grid: &Grid, boundary: Boundary) -> String {
    let mut s = serde_json::to_string(profile).expect("profile serializes");
    for axis in &grid.axes {
        let _ = write!(s, "|{:e},{:e},{}", axis.lower, axis.upper, axis.points);
    }
    let _ = write!(s, "|periodic={}|{boundary}", grid.periodic);
    hex::encode(Sha256::digest(s.as_bytes()))
}

impl EigenCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.eig"))
    }

    /// Returns `None` on a miss or an unreadable entry.
    pub fn load(&self, key: &str, n: usize) -> Option<Eigen> {
        let text = std::fs::read_to_string(self.path(key)).ok()?;
        parse(&text, n)
    }

    pub fn store(&self, key: &str, e: &Eigen) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let n = e.values.len();
        let mut text = format!("{MAGIC}\n{n}\n");
        push_row(&mut text, &e.values);
        for row in e.vectors.row_iter() {
            push_row(&mut text, &row.iter().copied().collect::<Vec<_>>());
        }
        // write-then-rename keeps a concurrent reader from seeing half a file
        let tmp = self.dir.join(format!("{key}.eig.tmp{}", std::process::id()));
        std::fs::write(&tmp, text)?;
        std::fs::rename(tmp, self.path(key))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

fn push_row(out: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:e}");
    }
    out.push('\n');
}

fn parse(text: &str, n: usize) -> Option<Eigen> {
    let mut lines = text.lines();
    if lines.next()? != MAGIC || lines.next()?.parse::<usize>().ok()? != n {
        return None;
    }
    let row = |l: Option<&str>| -> Option<Vec<f64>> {
        let v: Vec<f64> = l?.split(' ').map(|t| t.parse().ok()).collect::<Option<_>>()?;
        (v.len() == n).then_some(v)
    };
    let values = row(lines.next())?;
    let mut entries = Vec::with_capacity(n * n);
    for _ in 0..n {
        entries.extend(row(lines.next())?);
    }
    Some(Eigen {
        values,
        vectors: DMatrix::from_row_slice(n, n, &entries),
    })
}
