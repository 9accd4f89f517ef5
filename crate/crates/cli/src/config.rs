//! Run configuration: a TOML document with a `command` key, the shared
//! `[profile]`, `[grid]` and `[tolerances]` sections and one section per
//! command. Parsing is strict: unknown keys and sections that do not apply
//! to the command are errors.

use std::fmt;
use std::path::PathBuf;

use divspec::graphmanifold::GraphSpec;
use divspec::{Boundary, CoefficientProfile, Grid, Tolerances};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Assemble,
    Spectrum,
    Affiliate,
    Liouville,
    Asympt,
    Heatbound,
    Manifold,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Assemble => "assemble",
            Command::Spectrum => "spectrum",
            Command::Affiliate => "affiliate",
            Command::Liouville => "liouville",
            Command::Asympt => "asympt",
            Command::Heatbound => "heatbound",
            Command::Manifold => "manifold",
            Command::Report => "report",
        }
    }

    pub fn parse(name: &str) -> Option<Command> {
        ALL_COMMANDS.iter().copied().find(|c| c.name() == name)
    }

    fn needs_profile(self) -> bool {
        !matches!(self, Command::Manifold | Command::Report)
    }

    fn needs_grid(self) -> bool {
        matches!(self, Command::Assemble | Command::Spectrum | Command::Heatbound)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const ALL_COMMANDS: [Command; 8] = [
    Command::Assemble,
    Command::Spectrum,
    Command::Affiliate,
    Command::Liouville,
    Command::Asympt,
    Command::Heatbound,
    Command::Manifold,
    Command::Report,
];

/// A number for a line grid or a pair for a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAxis<T> {
    One(T),
    Two([T; 2]),
}

impl<T: Copy> PerAxis<T> {
    fn dim(&self) -> usize {
        match self {
            PerAxis::One(_) => 1,
            PerAxis::Two(_) => 2,
        }
    }

    fn pair(&self) -> [T; 2] {
        match self {
            PerAxis::One(v) => [*v, *v],
            PerAxis::Two(p) => *p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lo: PerAxis<f64>,
    pub hi: PerAxis<f64>,
    /// Interior nodes (Dirichlet) or nodes per period (periodic), per axis.
    pub n: PerAxis<usize>,
    #[serde(default)]
    pub periodic: bool,
    /// Defaults to `periodic` on periodic grids and `dirichlet` otherwise.
    #[serde(default)]
    pub boundary: Option<Boundary>,
}

impl GridSection {
    pub fn build(&self) -> divspec::Result<Grid> {
        let dim = self.lo.dim();
        if self.hi.dim() != dim || self.n.dim() != dim {
            return Err(divspec::Error::Argument("grid.lo, grid.hi and grid.n need the same dimension".into()));
        }
        match (self.lo, self.hi, self.n) {
            (PerAxis::One(lo), PerAxis::One(hi), PerAxis::One(n)) => {
                if self.periodic {
                    Grid::periodic_line(lo, hi, n)
                } else {
                    Grid::line(lo, hi, n)
                }
            }
            _ => Grid::rect(self.lo.pair(), self.hi.pair(), self.n.pair(), self.periodic),
        }
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary.unwrap_or(if self.periodic {
            Boundary::Periodic
        } else {
            Boundary::Dirichlet
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    /// Lowest eigenpairs written to `spectrum.csv`.
    pub count: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { count: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AffiliateSection {
    pub half_widths: Vec<f64>,
    pub spacing: f64,
    pub k_list: Vec<f64>,
    pub s_list: Vec<f64>,
    pub alpha: f64,
    /// Shifts for which the sqrt-resolvent uniformity study is tabulated.
    pub uniformity_s: Vec<f64>,
    /// Verdict the run must reproduce, if any.
    pub expect: Option<divspec::affiliation::Verdict>,
}

impl Default for AffiliateSection {
    fn default() -> Self {
        let s = divspec::affiliation::StudyConfig::default();
        Self {
            half_widths: s.half_widths,
            spacing: s.spacing,
            k_list: s.k_list,
            s_list: s.s_list,
            alpha: s.alpha,
            uniformity_s: Vec::new(),
            expect: None,
        }
    }
}

impl AffiliateSection {
    pub fn study(&self) -> divspec::affiliation::StudyConfig {
        divspec::affiliation::StudyConfig {
            half_widths: self.half_widths.clone(),
            spacing: self.spacing,
            k_list: self.k_list.clone(),
            s_list: self.s_list.clone(),
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiouvilleSection {
    /// `x`-window of the transform; infinite ends are allowed.
    pub window: [f64; 2],
    /// Rows of `transform.csv`.
    pub samples: usize,
    /// Grid sizes of the two-representation comparison; empty to skip it.
    pub levels: Vec<usize>,
    /// Finite `x`-window of the comparison; defaults to `window`.
    pub equivalence_window: Option<[f64; 2]>,
    pub eigen_count: usize,
    /// Largest admissible relative eigenvalue mismatch on the finest level.
    pub max_relative_error: f64,
}

impl Default for LiouvilleSection {
    fn default() -> Self {
        Self {
            window: [f64::NEG_INFINITY, 0.0],
            samples: 200,
            levels: Vec::new(),
            equivalence_window: None,
            eigen_count: 5,
            max_relative_error: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agreement {
    Agree,
    Disagree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptSection {
    pub half_widths: Vec<f64>,
    pub cells_per_unit: f64,
    pub window: [f64; 2],
    pub center: f64,
    /// Hausdorff tolerance; defaults to a multiple of the eigenvalue spacing.
    pub tolerance: Option<f64>,
    /// Outcome the comparison must reproduce; defaults to agreement.
    pub expect: Agreement,
}

impl Default for AsymptSection {
    fn default() -> Self {
        Self {
            half_widths: vec![20.0, 40.0, 80.0],
            cells_per_unit: 8.0,
            window: [0.0, 10.0],
            center: 0.0,
            tolerance: None,
            expect: Agreement::Agree,
        }
    }
}

impl AsymptSection {
    pub fn estimator(&self) -> divspec::spectral::EstimatorConfig {
        divspec::spectral::EstimatorConfig {
            half_widths: self.half_widths.clone(),
            rule: divspec::spectral::GridRule {
                cells_per_unit: self.cells_per_unit,
            },
            window: self.window,
            center: self.center,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatboundSection {
    /// Random disjoint `(E, F)` pairs of contiguous node ranges.
    pub pairs: usize,
    pub times: Vec<f64>,
    /// Quadrature resolution of the 1D arclength.
    pub metric_resolution: usize,
}

impl Default for HeatboundSection {
    fn default() -> Self {
        Self {
            pairs: 20,
            times: vec![0.05, 0.1, 0.5, 1.0],
            metric_resolution: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManifoldSection {
    pub graph: GraphSpec,
    pub t: f64,
    /// Truncation radii of the `K e^{-a r^2 / 2}` fit.
    pub radii: Vec<f64>,
    /// Number of evenly spread audit centres.
    pub centers: usize,
    pub min_r_squared: f64,
    /// Radii of the doubling and Poincaré estimates; empty to skip them.
    pub ball_radii: Vec<f64>,
}

impl Default for ManifoldSection {
    fn default() -> Self {
        Self {
            graph: GraphSpec::Lattice {
                nx: 64,
                ny: 64,
                spacing: 0.25,
                measure: divspec::graphmanifold::MeasureSpec::Uniform,
            },
            t: 1.0,
            radii: vec![2.0, 3.0, 4.0, 5.0, 6.0],
            centers: 16,
            min_r_squared: 0.95,
            ball_radii: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    /// Paths of `record.json` files or of run directories containing one,
    /// relative to the configuration file.
    #[serde(default)]
    pub records: Vec<PathBuf>,
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the command line `--out` takes precedence.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    /// Reuse cached eigendecompositions.
    #[serde(default = "yes", skip_serializing)]
    pub cache: bool,
    /// Cache directory; defaults to `<out>/cache`.
    #[serde(default, skip_serializing)]
    pub cache_dir: Option<PathBuf>,
    /// Write SVG plots next to the CSV tables.
    #[serde(default = "yes", skip_serializing)]
    pub svg: bool,
    pub profile: Option<CoefficientProfile>,
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub spectrum: Option<SpectrumSection>,
    pub affiliate: Option<AffiliateSection>,
    pub liouville: Option<LiouvilleSection>,
    pub asympt: Option<AsymptSection>,
    pub heatbound: Option<HeatboundSection>,
    pub manifold: Option<ManifoldSection>,
    pub report: Option<ReportSection>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// Malformed document or a key the schema does not know.
    Syntax { line: usize, column: usize, message: String },
    /// Well-formed document with an unusable value.
    Semantic { key: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, column, message } => {
                write!(f, "config error at line {line}, column {column}: {message}")
            }
            ConfigError::Semantic { key, message } => write!(f, "config error in `{key}`: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn semantic(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Semantic {
        key: key.into(),
        message: message.into(),
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(semantic(key, format!("must be positive, got {v}")))
    }
}

fn nonempty_positive(key: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.is_empty() {
        return Err(semantic(key, "must not be empty"));
    }
    v.iter().try_for_each(|x| positive(key, *x))
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ConfigError::Syntax {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    cfg.fill_defaults();
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    fn fill_defaults(&mut self) {
        match self.command {
            Command::Spectrum => _ = self.spectrum.get_or_insert_with(Default::default),
            Command::Affiliate => _ = self.affiliate.get_or_insert_with(Default::default),
            Command::Liouville => _ = self.liouville.get_or_insert_with(Default::default),
            Command::Asympt => _ = self.asympt.get_or_insert_with(Default::default),
            Command::Heatbound => _ = self.heatbound.get_or_insert_with(Default::default),
            Command::Manifold => _ = self.manifold.get_or_insert_with(Default::default),
            Command::Report => _ = self.report.get_or_insert_with(|| ReportSection { records: Vec::new() }),
            Command::Assemble => {}
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let cmd = self.command;
        let sections = [
            ("spectrum", self.spectrum.is_some(), Command::Spectrum),
            ("affiliate", self.affiliate.is_some(), Command::Affiliate),
            ("liouville", self.liouville.is_some(), Command::Liouville),
            ("asympt", self.asympt.is_some(), Command::Asympt),
            ("heatbound", self.heatbound.is_some(), Command::Heatbound),
            ("manifold", self.manifold.is_some(), Command::Manifold),
            ("report", self.report.is_some(), Command::Report),
        ];
        for (name, present, owner) in sections {
            if present && owner != cmd {
                return Err(semantic(name, format!("section does not apply to command `{cmd}`")));
            }
        }
        self.tolerances.validate().map_err(|m| semantic("tolerances", m))?;
        match (&self.profile, cmd.needs_profile()) {
            (Some(p), _) => p.validate().map_err(|e| semantic("profile", e.to_string()))?,
            (None, true) => return Err(semantic("profile", format!("command `{cmd}` needs a [profile] section"))),
            (None, false) => {}
        }
        if !cmd.needs_profile() && self.profile.is_some() {
            return Err(semantic("profile", format!("section does not apply to command `{cmd}`")));
        }
        match (&self.grid, cmd.needs_grid()) {
            (Some(g), true) => {
                let grid = g.build().map_err(|e| semantic("grid", e.to_string()))?;
                if g.periodic != (g.boundary() == Boundary::Periodic) {
                    return Err(semantic("grid.boundary", "periodic grids take exactly the periodic boundary"));
                }
                if let Some(p) = &self.profile {
                    if p.dim() != grid.dim() {
                        return Err(semantic(
                            "grid",
                            format!("profile is {}-dimensional, grid is {}-dimensional", p.dim(), grid.dim()),
                        ));
                    }
                }
            }
            (None, true) => return Err(semantic("grid", format!("command `{cmd}` needs a [grid] section"))),
            (Some(_), false) => return Err(semantic("grid", format!("section does not apply to command `{cmd}`"))),
            (None, false) => {}
        }
        if let Some(s) = &self.spectrum {
            if s.count == 0 {
                return Err(semantic("spectrum.count", "must be positive"));
            }
        }
        if let Some(a) = &self.affiliate {
            a.study().validate().map_err(|e| semantic("affiliate", e.to_string()))?;
            a.uniformity_s.iter().try_for_each(|s| positive("affiliate.uniformity_s", *s))?;
        }
        if let Some(l) = &self.liouville {
            if !(l.window[0] < l.window[1]) {
                return Err(semantic("liouville.window", "needs lo < hi"));
            }
            if l.samples == 0 {
                return Err(semantic("liouville.samples", "must be positive"));
            }
            if !l.levels.is_empty() {
                let w = l.equivalence_window.unwrap_or(l.window);
                if !(w[0].is_finite() && w[1].is_finite() && w[0] < w[1]) {
                    return Err(semantic(
                        "liouville.equivalence_window",
                        "the eigenvalue comparison needs a finite window",
                    ));
                }
                if l.eigen_count == 0 || l.levels.iter().any(|n| *n < l.eigen_count) {
                    return Err(semantic("liouville.levels", "every level needs at least eigen_count points"));
                }
            }
            positive("liouville.max_relative_error", l.max_relative_error)?;
        }
        if let Some(a) = &self.asympt {
            nonempty_positive("asympt.half_widths", &a.half_widths)?;
            positive("asympt.cells_per_unit", a.cells_per_unit)?;
            if !(a.window[0] < a.window[1]) {
                return Err(semantic("asympt.window", "needs lo < hi"));
            }
            if let Some(t) = a.tolerance {
                positive("asympt.tolerance", t)?;
            }
        }
        if let Some(h) = &self.heatbound {
            if h.pairs == 0 {
                return Err(semantic("heatbound.pairs", "must be positive"));
            }
            nonempty_positive("heatbound.times", &h.times)?;
            if h.metric_resolution < 2 {
                return Err(semantic("heatbound.metric_resolution", "must be at least 2"));
            }
            let n = self.grid.as_ref().and_then(|g| g.build().ok()).map_or(0, |g| g.len());
            if n < 12 {
                return Err(semantic("grid.n", "heat-bound pairs need at least 12 nodes"));
            }
        }
        if let Some(m) = &self.manifold {
            positive("manifold.t", m.t)?;
            nonempty_positive("manifold.radii", &m.radii)?;
            if m.centers < 2 {
                return Err(semantic("manifold.centers", "must be at least 2"));
            }
            if !(m.min_r_squared > 0.0 && m.min_r_squared <= 1.0) {
                return Err(semantic("manifold.min_r_squared", "must lie in (0, 1]"));
            }
            m.ball_radii.iter().try_for_each(|r| positive("manifold.ball_radii", *r))?;
        }
        Ok(())
    }

    /// SHA-256 of the normalized inputs and the seed. Defaults are filled in
    /// and keys sorted before hashing, so key order and spelled-out defaults
    /// do not change the digest; output and cache settings are excluded.
    pub fn digest(&self) -> String {
        let value = toml::Value::try_from(self).expect("configuration serializes");
        let mut canonical = String::new();
        write_canonical(&value, &mut canonical);
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Compact text of a value with table keys sorted at every level.
fn write_canonical(v: &toml::Value, out: &mut String) {
    use toml::Value;
    match v {
        Value::Table(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{k:?}:"));
                write_canonical(&map[k.as_str()], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(x, out);
            }
            out.push(']');
        }
        Value::String(s) => out.push_str(&format!("{s:?}")),
        Value::Integer(i) => out.push_str(&i.to_string()),
        Value::Float(f) => out.push_str(&format!("{f:e}")),
        Value::Boolean(b) => out.push_str(&b.to_string()),
        Value::Datetime(d) => out.push_str(&d.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
command = "spectrum"

[profile]
kind = "Uniform"
value = 1.0

[grid]
lo = 0.0
hi = 1.0
n = 256
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.command, Command::Spectrum);
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.spectrum, Some(SpectrumSection::default()));
        assert_eq!(cfg.grid.as_ref().unwrap().boundary(), Boundary::Dirichlet);
        assert_eq!(cfg.profile, Some(CoefficientProfile::uniform(1.0).unwrap()));
        assert!(cfg.cache && cfg.svg);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("n = 256", "n = 256\nsolverr = \"lanczos\"");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("solverr"), "{err}");
        match err {
            ConfigError::Syntax { line, .. } => assert_eq!(line, 12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_inside_profile_is_named() {
        let text = MINIMAL.replace("value = 1.0", "value = 1.0\nvalu = 2.0");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("valu"), "{err}");
    }

    #[test]
    fn eps_disc_overrides_heat_slack() {
        let text = format!("{MINIMAL}\n[tolerances]\neps_disc = 0.03\n");
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.tolerances.heat_slack, 0.03);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_config("command = \"spectrum\"\n[grid\n").unwrap_err();
        match err {
            ConfigError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 6)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn semantic_errors_name_the_key() {
        let text = format!("{MINIMAL}\n[tolerances]\nheat_slack = -1.0\n");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(&err, ConfigError::Semantic { key, .. } if key == "tolerances"));
        assert!(err.to_string().contains("heat_slack"));

        let text = format!("{MINIMAL}\n[heatbound]\npairs = 3\n");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(&err, ConfigError::Semantic { key, .. } if key == "heatbound"), "{err}");

        let err = parse_config("command = \"spectrum\"\n[grid]\nlo = 0.0\nhi = 1.0\nn = 16\n").unwrap_err();
        assert!(matches!(&err, ConfigError::Semantic { key, .. } if key == "profile"), "{err}");
    }

    #[test]
    fn unknown_command_is_rejected() {
        let err = parse_config(&MINIMAL.replace("\"spectrum\"", "\"spectra\"")).unwrap_err();
        assert!(err.to_string().contains("spectra"));
    }

    #[test]
    fn two_dimensional_grids() {
        let text = r#"
command = "assemble"
[profile]
kind = "Uniform"
value = 1.0
[grid]
lo = [-1.0, -1.0]
hi = [1.0, 1.0]
n = [15, 17]
"#;
        let err = parse_config(text).unwrap_err();
        assert!(matches!(&err, ConfigError::Semantic { key, .. } if key == "grid"), "{err}");
        let text = r#"
command = "assemble"
[profile]
kind = "MatrixDiag2D"
first = { kind = "Uniform", value = 1.0 }
second = { kind = "Uniform", value = 2.0 }
angle = 0.3
[grid]
lo = [-1.0, -1.0]
hi = [1.0, 1.0]
n = [15, 17]
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.grid.unwrap().build().unwrap().len(), 15 * 17);
        let rect = r#"
command = "assemble"
[profile]
kind = "Uniform"
value = 1.0
domain = { lo = [-1.0, -1.0], hi = [1.0, 1.0] }
[grid]
lo = [-1.0, -1.0]
hi = [1.0, 1.0]
n = [15, 17]
"#;
        assert_eq!(parse_config(rect).unwrap().profile.unwrap().dim(), 2);
    }

    #[test]
    fn digest_ignores_key_order_and_spelled_out_defaults() {
        let a = parse_config(MINIMAL).unwrap();
        let reordered = r#"
[grid]
n = 256
hi = 1.0
lo = 0.0

[profile]
value = 1.0
kind = "Uniform"

[tolerances]
heat_slack = 0.05
"#;
        let b = parse_config(&format!("command = \"spectrum\"\nout = \"elsewhere\"\ncache = false\n{reordered}")).unwrap();
        assert_eq!(a.digest(), b.digest());
        let mut c = a.clone();
        c.seed = 1;
        assert_ne!(a.digest(), c.digest());
        let d = parse_config(&MINIMAL.replace("n = 256", "n = 255")).unwrap();
        assert_ne!(a.digest(), d.digest());
    }

    #[test]
    fn infinite_windows_parse() {
        let text = r#"
command = "liouville"
[profile]
kind = "ExpDecay"
rate = 2.0
[liouville]
window = [-inf, 0.0]
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.liouville.unwrap().window, [f64::NEG_INFINITY, 0.0]);
        let d = parse_config(text).unwrap().digest();
        assert_eq!(d.len(), 64);
    }
}
