//! Central tolerance record.
//!
//! Every numerical threshold used across the crate is read from one
//! [`Tolerances`] value. The process-wide instance is built from defaults and
//! can be overridden through the `CTL_LAB_TOL` environment variable, which
//! holds a JSON object with any subset of the fields, e.g.
//! `CTL_LAB_TOL='{"dare_step_rel": 1e-13, "dare_max_iter": 2000000}'`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Name of the environment variable that overrides [`Tolerances::global`].
pub const TOLERANCE_ENV: &str = "CTL_LAB_TOL";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative factor in the numerical-rank threshold
    /// `max(rows, cols) * sigma_max * rank_rel`.
    pub rank_rel: f64,
    /// Reciprocal condition estimate below which `solve` refuses a system.
    pub rcond_min: f64,
    /// Maximum Francis QR iterations per eigenvalue before giving up.
    pub eig_max_iter: usize,
    /// Maximum sweeps of the Jacobi SVD / symmetric eigen iterations.
    pub jacobi_max_sweeps: usize,
    /// Relative step change that stops the Riccati fixed-point iteration.
    pub dare_step_rel: f64,
    /// Iteration cap of the Riccati fixed-point iteration.
    pub dare_max_iter: usize,
    /// Accepted relative DARE residual after convergence.
    pub dare_residual: f64,
    /// Relative change that stops the Lyapunov doubling iteration.
    pub lyap_step_rel: f64,
    /// Absolute magnitude beyond which a simulated state counts as diverged.
    pub divergence_cutoff: f64,
    /// Number of unit-circle grid points used by the H-infinity evaluation.
    pub hinf_grid: usize,
    /// Relative angular tolerance of the golden-section refinement.
    pub hinf_refine_rel: f64,
    /// Slack used when a spectral radius is compared against 1.
    pub stability_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_rel: 1e-12,
            rcond_min: 1e-15,
            eig_max_iter: 60,
            jacobi_max_sweeps: 80,
            dare_step_rel: 1e-12,
            dare_max_iter: 1_000_000,
            dare_residual: 1e-9,
            lyap_step_rel: 1e-15,
            divergence_cutoff: 1e150,
            hinf_grid: 2048,
            hinf_refine_rel: 1e-6,
            stability_margin: 1e-9,
        }
    }
}

impl Tolerances {
    /// Apply a JSON object of overrides on top of the defaults.
    pub fn from_json_overrides(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Process-wide tolerances: defaults, overridden by `CTL_LAB_TOL` if set.
    ///
    /// A malformed override is reported on stderr once and ignored.
    pub fn global() -> &'static Tolerances {
        static GLOBAL: OnceLock<Tolerances> = OnceLock::new();
        GLOBAL.get_or_init(|| match std::env::var(TOLERANCE_ENV) {
            Ok(text) if !text.trim().is_empty() => Self::from_json_overrides(&text)
                .unwrap_or_else(|e| {
                    eprintln!("ignoring malformed {TOLERANCE_ENV}: {e}");
                    Self::default()
                }),
            _ => Self::default(),
        })
    }

    /// Numerical-rank threshold for a `rows x cols` matrix with largest
    /// singular value `sigma_max`.
    pub fn rank_threshold(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        rows.max(cols) as f64 * sigma_max * self.rank_rel
    }
}
