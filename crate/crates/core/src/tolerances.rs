//! Numerical thresholds shared by the audits and estimators.
//!
//! Every default below can be overridden from a run configuration.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative slack allowed on continuum inequalities audited on a grid.
    #[serde(alias = "eps_disc")]
    pub heat_slack: f64,
    /// Absolute floor below which measured norms are treated as round-off.
    pub noise_floor: f64,
    /// Cluster tolerance in units of the local mean eigenvalue spacing.
    pub cluster_factor: f64,
    /// Minimum number of eigenvalues for a run to count as a spectral interval.
    pub min_cluster_size: usize,
    /// Hausdorff tolerance in units of the median eigenvalue spacing.
    pub hausdorff_factor: f64,
    /// Slope of the linear envelope a sweep must stay under to count as uniformly small.
    pub envelope_slope: f64,
    /// Translation-sweep level above which uniformity is considered broken.
    pub theta_fail: f64,
    /// Largest coefficient value admitted in truncated windows.
    pub coefficient_cap: f64,
    /// Relative accuracy requested from the power iteration.
    pub opnorm_rel: f64,
    /// Maximum power-iteration steps.
    pub opnorm_max_iter: usize,
    /// Lower end of the regularizer time search.
    pub regularizer_t_min: f64,
    /// Bisection budget of the regularizer time search.
    pub regularizer_bisections: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            heat_slack: 0.05,
            noise_floor: 1e-12,
            cluster_factor: 5.0,
            min_cluster_size: 3,
            hausdorff_factor: 3.0,
            envelope_slope: 1.0,
            theta_fail: 1.0,
            coefficient_cap: 1e4,
            opnorm_rel: 1e-10,
            opnorm_max_iter: 5000,
            regularizer_t_min: 1e-8,
            regularizer_bisections: 60,
        }
    }
}

impl Tolerances {
    /// Rejects non-positive overrides, naming the offending field.
    pub fn validate(&self) -> Result<(), String> {
        let reals = [
            ("heat_slack", self.heat_slack),
            ("noise_floor", self.noise_floor),
            ("cluster_factor", self.cluster_factor),
            ("hausdorff_factor", self.hausdorff_factor),
            ("envelope_slope", self.envelope_slope),
            ("theta_fail", self.theta_fail),
            ("coefficient_cap", self.coefficient_cap),
            ("opnorm_rel", self.opnorm_rel),
            ("regularizer_t_min", self.regularizer_t_min),
        ];
        for (name, v) in reals {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("tolerance `{name}` must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("min_cluster_size", self.min_cluster_size),
            ("opnorm_max_iter", self.opnorm_max_iter),
            ("regularizer_bisections", self.regularizer_bisections),
        ] {
            if v == 0 {
                return Err(format!("tolerance `{name}` must be positive"));
            }
        }
        Ok(())
    }
}
