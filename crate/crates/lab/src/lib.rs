//! Experiment harness around `ctl-core`: JSON configurations, parameter
//! sweeps, the bound verification suite and CSV results.

pub mod config;
pub mod result;
pub mod suite;
pub mod sweeps;

use ctl_core::bounds::BoundsError;
use ctl_core::ctrbl::CtrblError;
use ctl_core::instances::InstanceError;
use ctl_core::learnpipe::LearnError;
use ctl_core::riccati::RiccatiError;
use ctl_core::sysmodel::SysError;
use ctl_core::LinalgError;

pub use config::{parse_config, ExperimentConfig, ExperimentKind, Grid};
pub use result::{ExperimentResult, Provenance, Row};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Core(String),
}

macro_rules! core_error {
    ($($t:ty),*) => {$(
        impl From<$t> for LabError {
            fn from(e: $t) -> Self {
                LabError::Core(e.to_string())
            }
        }
    )*};
}

core_error!(BoundsError, CtrblError, InstanceError, LearnError, RiccatiError, SysError, LinalgError);

/// Run whichever experiment the configuration names.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, LabError> {
    match cfg.kind {
        ExperimentKind::StabSweep => sweeps::run_stab_sweep(cfg),
        ExperimentKind::RegretSweep => sweeps::run_regret_sweep(cfg),
        ExperimentKind::LemmaSuite => suite::run_lemma_suite(cfg),
        ExperimentKind::BoundTable => sweeps::run_bound_table(cfg),
    }
}
