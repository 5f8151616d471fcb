//! Learning side: least-squares identification, robust gain synthesis with
//! an H-infinity certificate, the identify-then-stabilize pipeline and a
//! certainty-equivalence online LQR simulator.

mod hinf;
mod ident;
mod online;
mod pipeline;
mod synth;

pub use hinf::{hinf_norm, power_series_envelope};
pub use ident::{error_radii, least_squares_id, normal_equations, quantile, IdEstimate, NormalEquations};
pub use online::{ce_online_lqr, policy_regret, CeController, CeOptions, RegretRecord};
pub use pipeline::{calibrate_radii, excitation_policy, run_stab_pipeline, Radii, StabOutcome};
pub use synth::{
    feasibility_radius, jury_phi1, robustness_weight, synth_robust_gain, SynthesisMethod, SynthesisResult,
};

use crate::numkernel::LinalgError;
use crate::riccati::RiccatiError;
use crate::sysmodel::SysError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error("regressors are not persistently excited")]
    DegenerateExcitation,
    #[error("matrix is not stable (spectral radius {radius})")]
    Unstable { radius: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    System(#[from] SysError),
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
}
