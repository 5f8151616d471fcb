use serde::Serialize;

use super::{LearnError, NormalEquations};
use crate::numkernel::{self, Matrix};
use crate::riccati;
use crate::sysmodel::{
    self, CeSchedule, Controller, CostSpec, GaussianStream, History, LinearSystem, Policy, SysError,
};

/// Certainty-equivalence controller: plays the LQR gain of the latest
/// least-squares model plus decaying exploration noise.
pub struct CeController {
    schedule: CeSchedule,
    p: usize,
    gain: Matrix,
    data: NormalEquations,
    next_refit: usize,
    epoch_len: usize,
}

fn lqr_gain(a: &Matrix, b: &Matrix, cost: &CostSpec) -> Option<Matrix> {
    let sys = LinearSystem::new(a.clone(), b.clone(), Matrix::identity(a.rows())).ok()?;
    riccati::solve_dare(&sys, cost).ok().map(|s| s.k_star)
}

impl CeController {
    pub fn new(schedule: CeSchedule, p: usize) -> Self {
        let n = schedule.initial_gain.cols();
        let mut gain = schedule.initial_gain.clone();
        if let Some((a, b)) = &schedule.frozen_model {
            if let Some(k) = lqr_gain(a, b, &schedule.cost) {
                gain = k;
            }
        }
        let first = schedule.first_epoch.max(1);
        Self {
            p,
            gain,
            data: NormalEquations::new(n, p),
            next_refit: first,
            epoch_len: first,
            schedule,
        }
    }

    pub fn gain(&self) -> &Matrix {
        &self.gain
    }

    fn refit(&mut self) {
        if let Ok(est) = self.data.solve() {
            if let Some(k) = lqr_gain(&est.a_hat, &est.b_hat, &self.schedule.cost) {
                self.gain = k;
            }
        }
    }
}

impl Controller for CeController {
    fn act(&mut self, history: &History<'_>, aux: &mut GaussianStream) -> Vec<f64> {
        let t = history.t();
        if self.schedule.frozen_model.is_none() {
            if t > 0 {
                self.data
                    .push(&history.states[t - 1], &history.inputs[t - 1], &history.states[t]);
            }
            if t == self.next_refit {
                self.refit();
                self.epoch_len *= 2;
                self.next_refit += self.epoch_len;
            }
        }
        let mut u = self.gain.mul_vec(history.state());
        if self.schedule.explore {
            let sd = CeSchedule::exploration_variance(t).sqrt();
            for (ui, z) in u.iter_mut().zip(aux.normal_vec(self.p, sd)) {
                *ui += z;
            }
        }
        u
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretRecord {
    pub horizon: usize,
    /// `cost_sum - T J*`; NaN for a diverged run.
    pub regret: f64,
    /// Stage costs plus the terminal cost `x_T' P x_T`.
    pub cost_sum: f64,
    pub policy_kind: &'static str,
    pub seed: u64,
    pub diverged: bool,
}

/// Regret of `policy` on the true plant with terminal weight `P`.
pub fn policy_regret(
    sys_true: &LinearSystem,
    cost: &CostSpec,
    policy: &Policy,
    horizon: usize,
    seed: u64,
) -> Result<RegretRecord, LearnError> {
    let sol = riccati::solve_dare(sys_true, cost)?;
    let j_star = riccati::average_cost_from(&sol, sys_true);
    let terminal = cost.with_terminal(sol.p.clone())?;
    match sysmodel::simulate(sys_true, policy, horizon, seed) {
        Ok(traj) => {
            let cost_sum = sysmodel::rollout_cost(&traj, &terminal)?;
            Ok(RegretRecord {
                horizon,
                regret: cost_sum - horizon as f64 * j_star,
                cost_sum,
                policy_kind: policy.name(),
                seed,
                diverged: false,
            })
        }
        Err(SysError::Diverged { .. }) => Ok(RegretRecord {
            horizon,
            regret: f64::NAN,
            cost_sum: f64::INFINITY,
            policy_kind: policy.name(),
            seed,
            diverged: true,
        }),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeOptions {
    pub explore: bool,
    /// Freeze the model at the true dynamics.
    pub oracle: bool,
    pub first_epoch: usize,
}

impl Default for CeOptions {
    fn default() -> Self {
        Self {
            explore: true,
            oracle: false,
            first_epoch: 32,
        }
    }
}

/// Certainty-equivalence online LQR started from the stabilizing gain `k0`.
pub fn ce_online_lqr(
    sys_true: &LinearSystem,
    cost: &CostSpec,
    horizon: usize,
    k0: &Matrix,
    seed: u64,
    opts: CeOptions,
) -> Result<RegretRecord, LearnError> {
    let radius = numkernel::spectral_radius(&sys_true.closed_loop(k0)?)?;
    if radius >= 1.0 {
        return Err(LearnError::Unstable { radius });
    }
    let schedule = CeSchedule {
        initial_gain: k0.clone(),
        first_epoch: opts.first_epoch,
        cost: cost.clone(),
        explore: opts.explore,
        frozen_model: opts.oracle.then(|| (sys_true.a().clone(), sys_true.b().clone())),
    };
    policy_regret(sys_true, cost, &Policy::certainty_equivalent(schedule), horizon, seed)
}
