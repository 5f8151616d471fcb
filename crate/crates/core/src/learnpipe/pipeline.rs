use serde::Serialize;

use super::{error_radii, least_squares_id, synth_robust_gain, LearnError};
use crate::numkernel::{self, Matrix};
use crate::sysmodel::{self, LinearSystem, Policy};

/// Error radii handed to the synthesis step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Radii {
    pub eps_a: f64,
    pub eps_b: f64,
}

/// Outcome of one identify-then-stabilize run. Failures are recorded, not
/// raised.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabOutcome {
    /// Certainty-equivalent candidate gain, when identification and the
    /// nominal Riccati solve succeeded.
    pub candidate: Option<Matrix>,
    pub cert_value: f64,
    pub feasible: bool,
    /// Certified and stabilizing on the true plant.
    pub stabilized: bool,
    /// The candidate stabilizes the true plant, certified or not.
    pub candidate_stabilizes: bool,
    pub error: Option<String>,
}

impl StabOutcome {
    fn failed(msg: String) -> Self {
        Self {
            candidate: None,
            cert_value: f64::INFINITY,
            feasible: false,
            stabilized: false,
            candidate_stabilizes: false,
            error: Some(msg),
        }
    }

    /// The returned gain, `None` meaning infeasible.
    pub fn gain(&self) -> Option<&Matrix> {
        if self.feasible {
            self.candidate.as_ref()
        } else {
            None
        }
    }
}

/// Per-coordinate excitation variance `sigma_u^2 / p`.
pub fn excitation_policy(sys: &LinearSystem, sigma_u2: f64) -> Policy {
    Policy::white_noise(sigma_u2 / sys.p() as f64)
}

/// Radii as the `quantile` of identification errors on the true plant.
pub fn calibrate_radii(
    sys_true: &LinearSystem,
    sigma_u2: f64,
    samples: usize,
    trials: usize,
    quantile: f64,
    seed: u64,
) -> Result<Radii, LearnError> {
    let pol = excitation_policy(sys_true, sigma_u2);
    let (eps_a, eps_b) = error_radii(sys_true, &pol, samples, trials, quantile, seed)?;
    Ok(Radii { eps_a, eps_b })
}

fn try_pipeline(
    sys_true: &LinearSystem,
    sigma_u2: f64,
    samples: usize,
    seed: u64,
    radii: Radii,
) -> Result<StabOutcome, LearnError> {
    let traj = sysmodel::simulate(sys_true, &excitation_policy(sys_true, sigma_u2), samples, seed)?;
    let est = least_squares_id(&traj)?.with_radii(radii.eps_a, radii.eps_b);
    let res = synth_robust_gain(&est, radii.eps_a, radii.eps_b)?;
    let rho = numkernel::spectral_radius(&sys_true.closed_loop(&res.k)?)?;
    let candidate_stabilizes = res.nominal_solved && rho < 1.0;
    Ok(StabOutcome {
        stabilized: res.feasible && rho < 1.0,
        candidate_stabilizes,
        feasible: res.feasible,
        cert_value: res.cert_value,
        candidate: res.nominal_solved.then_some(res.k),
        error: None,
    })
}

/// White-noise excitation, least-squares identification and robust
/// synthesis against fixed radii.
pub fn run_stab_pipeline(sys_true: &LinearSystem, sigma_u2: f64, samples: usize, seed: u64, radii: Radii) -> StabOutcome {
    try_pipeline(sys_true, sigma_u2, samples, seed, radii).unwrap_or_else(|e| StabOutcome::failed(e.to_string()))
}
