//! Command pipelines. Each run writes its tables into the output directory
//! and returns a [`ResultRecord`]; a failed run removes what it wrote.

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use divspec::affiliation::{classify, uniformity_study, write_sweeps, SweepResult, Verdict};
use divspec::asymptotic::{compare_essential, AsymptoticFamily};
use divspec::discretize::assemble;
use divspec::export::fmt_num;
use divspec::graphmanifold::{
    build_graph, doubling_constant, gaussian_fit, holder_audit, poincare_constant, truncation_error,
};
use divspec::liouville::{transform, verify_equivalence, LiouvilleTransform};
use divspec::metric::{verify_heat_bound, HeatAudit, MetricField};
use divspec::spectral::{eigensolve, eigenvalue_runs, full_eigen, SpectralData, DENSE_LIMIT};
use divspec::{CoefficientProfile, DiscreteOperator, Error, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cache::{self, Eigen, EigenCache};
use crate::config::{Agreement, Command, ConfigError, RunConfig};
use crate::record::{load_record, report, Check, ReportError, ResultRecord, Summary};
use crate::svg::{interval_plot, line_plot, Series};

/// Settings that come from the command line rather than the document.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub no_cache: bool,
    /// Directory against which relative paths in the config resolve.
    pub base_dir: PathBuf,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Report(ReportError),
    /// Output directory not creatable or not writable.
    Output { path: PathBuf, source: io::Error },
    Numerical { context: String, source: Error },
}

impl RunError {
    /// Process exit code: 2 for usage and configuration problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Report(_) | RunError::Output { .. } => 2,
            RunError::Numerical { source, .. } => match source {
                Error::InvalidProfile(_) | Error::Argument(_) | Error::Domain { .. } | Error::Unsupported(_) => 2,
                _ => 3,
            },
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Report(e) => write!(f, "{e}"),
            RunError::Output { path, source } => write!(f, "output directory {}: {source}", path.display()),
            RunError::Numerical { context, source } => write!(f, "{context}: {source}"),
        }
    }
}

impl std::error::Error for RunError {}

trait Context<T> {
    fn context(self, what: &str) -> Result<T, RunError>;
}

impl<T> Context<T> for divspec::Result<T> {
    fn context(self, what: &str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Numerical {
            context: what.into(),
            source,
        })
    }
}

/// Single writer for the output directory; remembers every file it wrote.
struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
    created: bool,
}

impl Output {
    fn open(dir: &Path) -> Result<Self, RunError> {
        let err = |source| RunError::Output {
            path: dir.to_path_buf(),
            source,
        };
        let created = !dir.exists();
        std::fs::create_dir_all(dir).map_err(err)?;
        let probe = dir.join(format!(".write-probe-{}", std::process::id()));
        std::fs::write(&probe, b"").map_err(err)?;
        std::fs::remove_file(&probe).map_err(err)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            created,
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| RunError::Numerical {
            context: format!("writing {}", path.display()),
            source: Error::Io(e),
        })?;
        self.written.push(path);
        Ok(())
    }

    /// Renders a table into memory first, so a failed table leaves no file.
    fn csv(
        &mut self,
        rec: &mut ResultRecord,
        name: &str,
        render: impl FnOnce(&mut Vec<u8>) -> divspec::Result<()>,
    ) -> Result<(), RunError> {
        let mut buf = Vec::new();
        render(&mut buf).context(&format!("rendering {name}"))?;
        self.write(name, &buf)?;
        rec.csv.push(name.into());
        Ok(())
    }

    fn artifact(&mut self, rec: &mut ResultRecord, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        self.write(name, bytes)?;
        rec.artifacts.push(name.into());
        Ok(())
    }

    fn remove_written(&self) {
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
        if self.created {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

/// Result of a run: the record, and the summary for `report`.
#[derive(Debug)]
pub struct Outcome {
    pub record: Option<ResultRecord>,
    pub summary: Option<Summary>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.record.as_ref().is_none_or(ResultRecord::passed) && self.summary.as_ref().is_none_or(|s| s.passed)
    }
}

/// Dispatches the configured command.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome, RunError> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let start = Instant::now();
    let mut out = Output::open(&opts.out)?;
    if cfg.command == Command::Report {
        return match run_report(&cfg, opts, &mut out) {
            Ok(summary) => Ok(Outcome {
                record: None,
                summary: Some(summary),
            }),
            Err(e) => {
                out.remove_written();
                Err(e)
            }
        };
    }
    let mut rec = ResultRecord::new(cfg.command.name(), cfg.digest(), cfg.seed);
    let cache_dir = cfg
        .cache_dir
        .as_ref()
        .map(|d| opts.base_dir.join(d))
        .unwrap_or_else(|| opts.out.join("cache"));
    let cache = (cfg.cache && !opts.no_cache).then(|| EigenCache::new(cache_dir));
    let result = match cfg.command {
        Command::Assemble => run_assemble(&cfg, &mut out, &mut rec),
        Command::Spectrum => run_spectrum(&cfg, cache.as_ref(), &mut out, &mut rec),
        Command::Affiliate => run_affiliate(&cfg, &mut out, &mut rec),
        Command::Liouville => run_liouville(&cfg, &mut out, &mut rec),
        Command::Asympt => run_asympt(&cfg, &mut out, &mut rec),
        Command::Heatbound => run_heatbound(&cfg, &mut out, &mut rec),
        Command::Manifold => run_manifold(&cfg, &mut out, &mut rec),
        Command::Report => unreachable!("handled above"),
    }
    .and_then(|()| {
        rec.wall_time_s = start.elapsed().as_secs_f64();
        let json = serde_json::to_string_pretty(&rec).expect("record serializes");
        out.write("record.json", json.as_bytes())
    });
    match result {
        Ok(()) => Ok(Outcome {
            record: Some(rec),
            summary: None,
        }),
        Err(e) => {
            out.remove_written();
            Err(e)
        }
    }
}

fn profile(cfg: &RunConfig) -> &CoefficientProfile {
    cfg.profile.as_ref().expect("validated config has a profile")
}

fn operator(cfg: &RunConfig) -> Result<DiscreteOperator, RunError> {
    let g = cfg.grid.as_ref().expect("validated config has a grid");
    let grid = g.build().context("building the grid")?;
    assemble(profile(cfg), &grid, g.boundary()).context("assembling the operator")
}

fn run_assemble(cfg: &RunConfig, out: &mut Output, rec: &mut ResultRecord) -> Result<(), RunError> {
    let op = operator(cfg)?;
    out.csv(rec, "operator.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["row", "col", "value"])?;
        for (i, j, v) in op.matrix.triplets() {
            w.write_record([i.to_string(), j.to_string(), fmt_num(v)])?;
        }
        w.flush()?;
        Ok(())
    })?;
    out.csv(rec, "nodes.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let dim = op.grid.dim();
        let header: Vec<String> = std::iter::once("index".to_string())
            .chain((0..dim).map(|d| format!("x{d}")))
            .collect();
        w.write_record(&header)?;
        for (i, x) in op.grid.nodes().iter().enumerate() {
            w.write_record(std::iter::once(i.to_string()).chain(x.iter().map(|v| fmt_num(*v))))?;
        }
        w.flush()?;
        Ok(())
    })?;
    let asym = op.relative_asymmetry();
    rec.verdicts.insert("dimension".into(), op.dim().to_string());
    rec.verdicts.insert("nonzeros".into(), op.matrix.nnz().to_string());
    rec.verdicts.insert("boundary".into(), op.boundary.to_string());
    if !op.warnings.is_empty() {
        rec.verdicts.insert("warnings".into(), op.warnings.join("; "));
    }
    rec.checks.push(Check::new(
        "symmetric",
        asym <= 1e-12,
        format!("relative asymmetry {}", fmt_num(asym)),
    ));
    Ok(())
}

/// Full eigendecomposition through the cache when it fits in memory.
fn cached_eigen(
    cfg: &RunConfig,
    op: &DiscreteOperator,
    cache: Option<&EigenCache>,
    rec: &mut ResultRecord,
) -> Result<Eigen, RunError> {
    let key = cache::key(profile(cfg), &op.grid, op.boundary);
    if let Some(hit) = cache.and_then(|c| c.load(&key, op.dim())) {
        rec.cache_hit = Some(true);
        return Ok(hit);
    }
    let (values, vectors) = full_eigen(op).context("eigendecomposition")?;
    let e = Eigen { values, vectors };
    if let Some(c) = cache {
        c.store(&key, &e).map_err(|source| RunError::Output {
            path: c.dir().to_path_buf(),
            source,
        })?;
        rec.cache_hit = Some(false);
    }
    Ok(e)
}

fn run_spectrum(
    cfg: &RunConfig,
    cache: Option<&EigenCache>,
    out: &mut Output,
    rec: &mut ResultRecord,
) -> Result<(), RunError> {
    let op = operator(cfg)?;
    let tol = &cfg.tolerances;
    let count = cfg.spectrum.as_ref().expect("filled").count.min(op.dim());
    let (data, all) = if op.dim() <= DENSE_LIMIT {
        let e = cached_eigen(cfg, &op, cache, rec)?;
        let vecs = e.vectors.columns(0, count).into_owned();
        let vals = e.values[..count].to_vec();
        let hv = op.matrix.mul_dense(&vecs);
        let residuals = (0..count).map(|c| (hv.column(c) - vecs.column(c) * vals[c]).norm()).collect();
        let data = SpectralData {
            eigenvalues: vals,
            eigenvectors: Some(vecs),
            residuals,
        };
        (data, e.values)
    } else {
        let data = eigensolve(&op, count).context("eigensolve")?;
        let vals = data.eigenvalues.clone();
        (data, vals)
    };
    let verified = data.verify(op.matrix.max_abs());
    out.csv(rec, "spectrum.csv", |buf| data.write_csv(buf))?;
    let runs = eigenvalue_runs(&all, tol.cluster_factor, tol.min_cluster_size);
    out.csv(rec, "intervals.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["interval_lo", "interval_hi", "eigenvalues"])?;
        for (iv, k) in &runs {
            w.write_record([fmt_num(iv.lo), fmt_num(iv.hi), k.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    if cfg.svg {
        let pts: Vec<(f64, f64)> = data.eigenvalues.iter().enumerate().map(|(i, v)| (i as f64, *v)).collect();
        let plot = line_plot(
            &format!("lowest eigenvalues, {}", op.profile_tag),
            "index",
            "eigenvalue",
            &[Series {
                label: op.boundary.to_string(),
                points: pts,
            }],
            false,
        );
        out.artifact(rec, "spectrum.svg", plot.as_bytes())?;
        let hi = all.last().copied().unwrap_or(1.0);
        let ivs = runs.iter().map(|(iv, _)| (iv.lo, iv.hi)).collect();
        let strip = interval_plot("eigenvalue runs", (all.first().copied().unwrap_or(0.0), hi), &[("runs".into(), ivs)]);
        out.artifact(rec, "intervals.svg", strip.as_bytes())?;
    }
    rec.verdicts.insert("lowest_eigenvalue".into(), fmt_num(data.eigenvalues[0]));
    rec.checks.push(Check::new(
        "eigenpairs_verified",
        verified.is_ok(),
        match verified {
            Ok(()) => format!("{count} eigenpairs pass residual and orthonormality checks"),
            Err(e) => e.to_string(),
        },
    ));
    Ok(())
}

fn sweep_plot(title: &str, param: &str, sweeps: &[SweepResult]) -> String {
    let series: Vec<Series> = sweeps
        .iter()
        .map(|s| Series {
            label: format!("L={}", fmt_num(s.half_width)),
            points: s.samples.clone(),
        })
        .collect();
    line_plot(title, param, "operator norm", &series, true)
}

fn run_affiliate(cfg: &RunConfig, out: &mut Output, rec: &mut ResultRecord) -> Result<(), RunError> {
    let sec = cfg.affiliate.as_ref().expect("filled");
    let p = profile(cfg);
    let study = sec.study();
    let tol = &cfg.tolerances;
    let (verdict, studies) = rayon::join(
        || classify(p, &study, tol),
        || {
            sec.uniformity_s
                .par_iter()
                .map(|s| uniformity_study(p, *s, &study, tol))
                .collect::<Vec<_>>()
        },
    );
    let v = verdict.context("classifying the resolvent")?;
    let mut text = Vec::new();
    v.write_record(&mut text).context("verdict record")?;
    out.artifact(rec, "verdict.txt", &text)?;
    out.csv(rec, "phase_sweep.csv", |buf| write_sweeps(buf, &v.v_sweeps))?;
    out.csv(rec, "translation_sweep.csv", |buf| write_sweeps(buf, &v.u_sweeps))?;
    for (s, study) in sec.uniformity_s.iter().zip(studies) {
        let study = study.context("uniformity study")?;
        out.csv(rec, &format!("uniformity_s{}.csv", fmt_num(*s)), |buf| study.write_csv(buf))?;
        rec.verdicts.insert(
            format!("uniformity_s{}", fmt_num(*s)),
            format!(
                "monotone={} sup={} relative_spread={}",
                study.monotone,
                fmt_num(study.sup),
                fmt_num(study.relative_spread)
            ),
        );
    }
    if cfg.svg {
        let phase = sweep_plot(&format!("phase defect, {}", v.profile), "k", &v.v_sweeps);
        out.artifact(rec, "phase_sweep.svg", phase.as_bytes())?;
        let shift = sweep_plot(&format!("translation defect, {}", v.profile), "s", &v.u_sweeps);
        out.artifact(rec, "translation_sweep.svg", shift.as_bytes())?;
    }
    rec.verdicts.insert("affiliation".into(), v.verdict.to_string());
    let detail = format!(
        "{} (v envelope ratio {}, u envelope ratio {}, u sup {})",
        v.verdict,
        fmt_num(v.evidence.v_envelope_ratio),
        fmt_num(v.evidence.u_envelope_ratio),
        fmt_num(v.evidence.u_sup)
    );
    match sec.expect {
        Some(want) => rec.checks.push(Check::new("expected_verdict", v.verdict == want, format!("expected {want}, got {detail}"))),
        None => rec.checks.push(Check::new("conclusive", v.verdict != Verdict::Inconclusive, detail)),
    }
    Ok(())
}

/// Largest relative gap between the closed-form and finite-difference
/// potentials at the table points, with stencil width a fixed fraction of
/// the distance to the nearer end of the range.
fn potential_routes(tr: &LiouvilleTransform, table: &[[f64; 4]]) -> Option<f64> {
    let (lo, hi) = tr.s_range();
    let mut worst: f64 = 0.0;
    for row in table {
        let s = row[1];
        let room = (s - lo).min(hi - s);
        let a = tr.potential_analytic(s).ok()?;
        let b = tr.potential_fd(s, 0.01 * room).ok()?;
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
    }
    Some(worst)
}

fn run_liouville(cfg: &RunConfig, out: &mut Output, rec: &mut ResultRecord) -> Result<(), RunError> {
    let sec = cfg.liouville.as_ref().expect("filled");
    let p = profile(cfg);
    let tr = transform(p, (sec.window[0], sec.window[1])).context("Liouville transform")?;
    let table = tr.table(sec.samples).context("tabulating the transform")?;
    out.csv(rec, "transform.csv", |buf| tr.write_csv(buf, sec.samples))?;
    let (s_lo, s_hi) = tr.s_range();
    rec.verdicts.insert("s_range".into(), format!("[{}, {}]", fmt_num(s_lo), fmt_num(s_hi)));
    rec.verdicts.insert("potential_method".into(), format!("{:?}", tr.method()));
    match potential_routes(&tr, &table) {
        Some(gap) => rec.checks.push(Check::new(
            "potential_routes",
            gap <= 1e-6,
            format!("closed-form and finite-difference potentials differ by at most {} (relative)", fmt_num(gap)),
        )),
        None => {
            rec.verdicts.insert("potential_routes".into(), "closed-form route unavailable".into());
        }
    }
    if cfg.svg {
        let pts = table.iter().map(|r| (r[1], r[3])).collect();
        let plot = line_plot(
            &format!("effective potential, {}", p.tag()),
            "s",
            "V(s)",
            &[Series {
                label: "V".into(),
                points: pts,
            }],
            false,
        );
        out.artifact(rec, "potential.svg", plot.as_bytes())?;
    }
    if !sec.levels.is_empty() {
        let w = sec.equivalence_window.unwrap_or(sec.window);
        let report = verify_equivalence(p, (w[0], w[1]), &sec.levels, sec.eigen_count, cfg.seed)
            .context("two-representation comparison")?;
        out.csv(rec, "equivalence.csv", |buf| report.write_csv(buf))?;
        let finest = report.levels.last().expect("levels nonempty");
        rec.checks.push(Check::new(
            "eigenvalue_equivalence",
            finest.max_relative_error < sec.max_relative_error,
            format!(
                "max relative mismatch {} at n={} (limit {})",
                fmt_num(finest.max_relative_error),
                finest.points,
                fmt_num(sec.max_relative_error)
            ),
        ));
        if report.levels.len() > 1 {
            rec.checks.push(Check::new(
                "refinement_decreasing",
                report.refinement_decreasing,
                report
                    .levels
                    .iter()
                    .map(|l| format!("n={}: {}", l.points, fmt_num(l.max_relative_error)))
                    .collect::<Vec<_>>()
                    .join(", "),
            ));
        }
        rec.verdicts.insert("isometry_error".into(), fmt_num(report.isometry_error));
    }
    Ok(())
}

fn run_asympt(cfg: &RunConfig, out: &mut Output, rec: &mut ResultRecord) -> Result<(), RunError> {
    let sec = cfg.asympt.as_ref().expect("filled");
    let p = profile(cfg);
    let family = AsymptoticFamily::from_profile(p).context("asymptotic limits")?;
    let cmp = compare_essential(p, &family, &sec.estimator(), sec.tolerance, &cfg.tolerances)
        .context("essential-spectrum comparison")?;
    out.csv(rec, "essential.csv", |buf| cmp.write_csv(buf))?;
    out.csv(rec, "limits.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["direction", "limit"])?;
        for l in &family.limits {
            w.write_record([format!("{:?}", l.direction), format!("{:?}", l.limit)])?;
        }
        w.flush()?;
        Ok(())
    })?;
    if cfg.svg {
        let ivs = |s: &divspec::spectral::SpectrumEstimate| s.intervals.iter().map(|iv| (iv.lo, iv.hi)).collect();
        let plot = interval_plot(
            &format!("essential spectrum vs union of limit spectra, {}", cmp.profile),
            (sec.window[0], sec.window[1]),
            &[("estimate".into(), ivs(&cmp.estimate)), ("union".into(), ivs(&cmp.union))],
        );
        out.artifact(rec, "essential.svg", plot.as_bytes())?;
    }
    rec.verdicts.insert("union_formula".into(), cmp.verdict().into());
    rec.verdicts.insert("degenerate_limits".into(), cmp.degenerate_limits.to_string());
    let want = sec.expect == Agreement::Agree;
    rec.checks.push(Check::new(
        "expected_outcome",
        cmp.agree == want,
        format!(
            "{} (hausdorff {} against tolerance {}), expected {}",
            cmp.verdict(),
            fmt_num(cmp.distance),
            fmt_num(cmp.tolerance),
            if want { "agree" } else { "disagree" }
        ),
    ));
    Ok(())
}

/// `count` disjoint pairs of contiguous node ranges, each at most a sixth
/// of the grid long.
pub fn random_pairs(n: usize, count: usize, seed: u64) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_len = (n / 6).max(2);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let le = rng.random_range(1..max_len);
        let lf = rng.random_range(1..max_len);
        let a = rng.random_range(0..=n - le);
        let b = rng.random_range(0..=n - lf);
        if a + le <= b || b + lf <= a {
            out.push(((a..a + le).collect(), (b..b + lf).collect()));
        }
    }
    out
}

fn metric_for(p: &CoefficientProfile, grid: &Grid, resolution: usize) -> divspec::Result<MetricField> {
    if grid.dim() == 1 {
        let a = grid.axes[0];
        MetricField::closed_1d(p, a.lower, a.upper, resolution)
    } else {
        MetricField::graph(p, grid)
    }
}

fn run_heatbound(cfg: &RunConfig, out: &mut Output, rec: &mut ResultRecord) -> Result<(), RunError> {
    let sec = cfg.heatbound.as_ref().expect("filled");
    let op = operator(cfg)?;
    let metric = metric_for(profile(cfg), &op.grid, sec.metric_resolution).context("metric field")?;
    let pairs = random_pairs(op.dim(), sec.pairs, cfg.seed);
    let parts: Vec<divspec::Result<HeatAudit>> = sec
        .times
        .par_iter()
        .map(|t| verify_heat_bound(&op, &metric, &pairs, &[*t], &cfg.tolerances))
        .collect();
    let mut audit = HeatAudit {
        rows: Vec::new(),
        slack: cfg.tolerances.heat_slack,
    };
    for part in parts {
        audit.rows.extend(part.context("heat-bound audit")?.rows);
    }
    out.csv(rec, "heat_audit.csv", |buf| audit.write_csv(buf))?;
    if cfg.svg {
        let series: Vec<Series> = sec
            .times
            .iter()
            .map(|t| {
                let mut pts: Vec<(f64, f64)> =
                    audit.rows.iter().filter(|r| r.t == *t).map(|r| (r.distance, r.measured)).collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                Series {
                    label: format!("t={}", fmt_num(*t)),
                    points: pts,
                }
            })
            .collect();
        let plot = line_plot("block norms against metric distance", "d(E, F)", "||P_E exp(-tH) P_F||", &series, true);
        out.artifact(rec, "heat_audit.svg", plot.as_bytes())?;
    }
    let violations = audit.violations();
    let detail = match audit.rows.iter().find(|r| !r.pass) {
        None => format!(
            "0 violations in {} rows (slack {})",
            audit.rows.len(),
            fmt_num(audit.slack)
        ),
        Some(r) => format!(
            "{violations} violations in {} rows; first: row E_id={} F_id={} t={} d={} measured={} bound={} ratio={}",
            audit.rows.len(),
            r.e_id,
            r.f_id,
            fmt_num(r.t),
            fmt_num(r.distance),
            fmt_num(r.measured),
            fmt_num(r.bound),
            fmt_num(r.ratio)
        ),
    };
    rec.checks.push(Check::new("heat_bound", violations == 0, detail));
    Ok(())
}

fn run_manifold(cfg: &RunConfig, out: &mut Output, rec: &mut ResultRecord) -> Result<(), RunError> {
    let sec = cfg.manifold.as_ref().expect("filled");
    let tol = &cfg.tolerances;
    let g = build_graph(&sec.graph).context("building the graph")?;
    let centers = g.sample_vertices(sec.centers);
    let (trunc, (gauss, holder)) = rayon::join(
        || truncation_error(&g, &sec.radii),
        || {
            rayon::join(
                || gaussian_fit(&g, sec.t, &centers, tol),
                || holder_audit(&g, sec.t, &centers, tol),
            )
        },
    );
    let trunc = trunc.context("truncation errors")?;
    let gauss = gauss.context("Gaussian fit")?;
    let holder = holder.context("Hölder audit")?;
    out.csv(rec, "truncation.csv", |buf| trunc.write_csv(buf))?;
    out.csv(rec, "gaussian.csv", |buf| gauss.write_csv(buf))?;
    out.csv(rec, "holder.csv", |buf| holder.write_csv(buf))?;
    if !sec.ball_radii.is_empty() {
        let doubling = doubling_constant(&g, &centers, &sec.ball_radii).context("doubling constant")?;
        let poincare = poincare_constant(&g, &centers, &sec.ball_radii).context("Poincaré constant")?;
        out.csv(rec, "geometry.csv", |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["quantity", "constant", "samples", "excluded"])?;
            let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_else(|| "none".into());
            w.write_record([
                "doubling".into(),
                opt(doubling.constant),
                doubling.samples.to_string(),
                doubling.excluded.to_string(),
            ])?;
            w.write_record([
                "poincare".into(),
                opt(poincare.constant),
                poincare.samples.len().to_string(),
                poincare.skipped.len().to_string(),
            ])?;
            w.flush()?;
            Ok(())
        })?;
    }
    if cfg.svg {
        let plot = line_plot(
            "truncation error of the heat kernel",
            "r",
            "operator norm",
            &[
                Series {
                    label: "error".into(),
                    points: trunc.rows.iter().map(|r| (r.r, r.error)).collect(),
                },
                Series {
                    label: "Schur bound".into(),
                    points: trunc.rows.iter().map(|r| (r.r, r.schur_bound)).collect(),
                },
            ],
            true,
        );
        out.artifact(rec, "truncation.svg", plot.as_bytes())?;
    }
    rec.verdicts.insert("vertices".into(), g.len().to_string());
    rec.checks.push(Check::new(
        "truncation_fit",
        trunc.r_squared >= sec.min_r_squared && trunc.a > 0.0,
        format!(
            "K={} a={} R2={} (need R2 >= {} and a > 0)",
            fmt_num(trunc.k),
            fmt_num(trunc.a),
            fmt_num(trunc.r_squared),
            fmt_num(sec.min_r_squared)
        ),
    ));
    for (name, a) in [("gaussian_bound", &gauss), ("holder_bound", &holder)] {
        rec.checks.push(Check::new(
            name,
            a.passed(),
            format!(
                "C={} exponent={} max ratio {} with {} violations in {} held-out pairs",
                fmt_num(a.c),
                fmt_num(a.exponent),
                fmt_num(a.max_ratio),
                a.violations.len(),
                a.pairs
            ),
        ));
    }
    Ok(())
}

fn run_report(cfg: &RunConfig, opts: &RunOptions, out: &mut Output) -> Result<Summary, RunError> {
    let sec = cfg.report.as_ref().expect("filled");
    let mut records = Vec::new();
    for path in &sec.records {
        let full = opts.base_dir.join(path);
        let r = load_record(&full).map_err(RunError::Report)?;
        records.push((path.display().to_string(), r));
    }
    let summary = report(&records).map_err(RunError::Report)?;
    out.write("summary.txt", summary.text.as_bytes())?;
    Ok(summary)
}
