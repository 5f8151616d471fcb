//! Closed-form lower bounds: Gaussian and trajectory KL divergences, the
//! two-point testing threshold, the stabilization sample-complexity bound,
//! the local minimax regret bound and the exponential quantities behind it.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::instances::{self, InstanceError, StabPair, Subsystem};
use crate::numkernel::{self, LinalgError, Matrix};
use crate::riccati::{self, RiccatiError};
use crate::sysmodel::{self, CostSpec, LinearSystem, Policy, PolicyKind, SysError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("unsupported policy: {0}")]
    UnsupportedPolicy(&'static str),
    #[error("integer overflow evaluating {0}")]
    Overflow(&'static str),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    System(#[from] SysError),
}

fn param(msg: impl Into<String>) -> BoundsError {
    BoundsError::Parameter(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LowerBoundKind {
    StabSampleComplexity,
    RegretTwoSubsystem,
    RegretFL,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub kind: LowerBoundKind,
    pub inputs: BTreeMap<String, Value>,
    pub value: f64,
    pub intermediate: BTreeMap<String, f64>,
}

/// KL divergence in nats between `N(mu2, s2)` and `N(mu1, s2)`.
pub fn gaussian_kl(mu1: f64, mu2: f64, sigma2: f64) -> Result<f64, BoundsError> {
    if !(sigma2 > 0.0) {
        return Err(param(format!("variance must be positive, got {sigma2}")));
    }
    Ok((mu1 - mu2).powi(2) / (2.0 * sigma2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BirgeThreshold {
    /// `(1-d) ln((1-d)/d) + d ln(d/(1-d))`.
    pub exact: f64,
    /// `ln(1/(3d))`.
    pub simplified: f64,
}

/// KL budget needed to tell two hypotheses apart with error `delta`.
pub fn birge_threshold(delta: f64) -> Result<BirgeThreshold, BoundsError> {
    if !(0.0..0.5).contains(&delta) {
        return Err(param(format!("delta must lie in [0, 1/2), got {delta}")));
    }
    let q = 1.0 - delta;
    let exact = if delta == 0.0 {
        f64::INFINITY
    } else {
        (q - delta) * (q / delta).ln()
    };
    Ok(BirgeThreshold {
        exact,
        simplified: (1.0 / (3.0 * delta)).ln(),
    })
}

fn stab_bound_real(mu: f64, kappa: usize, delta: f64, sigma_u2: f64) -> Result<f64, BoundsError> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(param(format!("mu must lie in (0, 1), got {mu}")));
    }
    if kappa < 2 {
        return Err(param(format!("kappa must be at least 2, got {kappa}")));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(param(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    if !(sigma_u2 > 0.0) {
        return Err(param(format!("input variance must be positive, got {sigma_u2}")));
    }
    let log_term = birge_threshold(delta)?.simplified.max(0.0);
    let ratio = (1.0 - mu) / mu;
    Ok(0.5 * mu.powi(-(2 * kappa as i32 - 2)) * ratio * ratio * log_term / sigma_u2)
}

/// Smallest excitation length `N` compatible with stabilizing both members
/// of the hard pair with probability `1 - delta`.
pub fn stab_sample_lower_bound(mu: f64, kappa: usize, delta: f64, sigma_u2: f64) -> Result<u64, BoundsError> {
    let v = stab_bound_real(mu, kappa, delta, sigma_u2)?;
    if !v.is_finite() || v > u64::MAX as f64 {
        return Err(BoundsError::Overflow("sample lower bound"));
    }
    Ok(v.ceil() as u64)
}

pub fn stab_sample_report(mu: f64, kappa: usize, delta: f64, sigma_u2: f64) -> Result<LowerBoundReport, BoundsError> {
    let real = stab_bound_real(mu, kappa, delta, sigma_u2)?;
    let n_min = stab_sample_lower_bound(mu, kappa, delta, sigma_u2)?;
    let birge = birge_threshold(delta)?;
    Ok(LowerBoundReport {
        kind: LowerBoundKind::StabSampleComplexity,
        inputs: BTreeMap::from([
            ("mu".into(), json!(mu)),
            ("kappa".into(), json!(kappa)),
            ("delta".into(), json!(delta)),
            ("sigma_u2".into(), json!(sigma_u2)),
        ]),
        value: n_min as f64,
        intermediate: BTreeMap::from([
            ("real_bound".into(), real),
            ("birge_exact".into(), birge.exact),
            ("birge_simplified".into(), birge.simplified),
        ]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryKl {
    pub analytic: f64,
    pub mc: f64,
    pub stderr: f64,
    pub envelope: f64,
    pub rollouts: usize,
}

/// `E x_{j,2}^2` for `j = 0..=horizon` under white-noise input of variance `s2`.
fn second_state_variance(pair: &StabPair, s2: f64, horizon: usize) -> Vec<f64> {
    let a = pair.s1.a();
    let mut impulse = pair.s1.b().col_vec(0);
    let mut acc = 0.0;
    let mut out = vec![0.0];
    for _ in 0..horizon {
        acc += impulse[1] * impulse[1];
        out.push(s2 * acc);
        impulse = a.mul_vec(&impulse);
    }
    out
}

/// `2 mu^2 sum_{k=1}^N E x_{k-1,2}^2`.
pub fn traj_kl_analytic(pair: &StabPair, input_variance: f64, horizon: usize) -> f64 {
    let v = second_state_variance(pair, input_variance, horizon);
    2.0 * pair.mu * pair.mu * v[..horizon].iter().sum::<f64>()
}

/// `2 mu^2 N s2 (alpha+mu)^{2n-2} / (1-alpha-mu)^2`.
pub fn traj_kl_envelope(pair: &StabPair, input_variance: f64, horizon: usize) -> f64 {
    let (mu, al) = (pair.mu, pair.alpha);
    2.0 * mu * mu * horizon as f64 * input_variance * (al + mu).powi(2 * pair.n as i32 - 2)
        / (1.0 - al - mu).powi(2)
}

/// Trajectory KL between the two members under a white-noise policy, in
/// closed form and as a Monte-Carlo mean of the log-likelihood ratio over
/// rollouts of `S1`.
pub fn traj_kl_s1_s2(
    pair: &StabPair,
    policy: &Policy,
    horizon: usize,
    rollouts: usize,
    seed: u64,
) -> Result<TrajectoryKl, BoundsError> {
    let PolicyKind::WhiteNoise { variance } = policy.kind else {
        return Err(BoundsError::UnsupportedPolicy(policy.name()));
    };
    let mu = pair.mu;
    let llr: Vec<f64> = (0..rollouts as u64)
        .into_par_iter()
        .map(|i| {
            let seed_i = sysmodel::substream_seed(seed, i);
            let traj = sysmodel::simulate(&pair.s1, policy, horizon, seed_i)?;
            // only the first coordinate's transition law differs: mean +mu x2 vs -mu x2
            Ok((0..horizon)
                .map(|k| {
                    let x = &traj.states[k];
                    let r = traj.states[k + 1][0] - x[0];
                    let m = mu * x[1];
                    0.5 * ((r + m).powi(2) - (r - m).powi(2))
                })
                .sum::<f64>())
        })
        .collect::<Result<_, SysError>>()?;
    let count = llr.len().max(1) as f64;
    let mc = llr.iter().sum::<f64>() / count;
    let var = llr.iter().map(|v| (v - mc).powi(2)).sum::<f64>() / (count - 1.0).max(1.0);
    Ok(TrajectoryKl {
        analytic: traj_kl_analytic(pair, variance, horizon),
        mc,
        stderr: (var / count).sqrt(),
        envelope: traj_kl_envelope(pair, variance, horizon),
        rollouts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretFl {
    pub f: f64,
    pub l: f64,
    /// `(1/(2 sqrt 2)) sqrt(F/L)`, zero when `L = 0`.
    pub bound: f64,
}

/// Ingredients of the local minimax regret bound along the direction `delta`.
///
/// The noise-free part of the stationary covariance is `Sigma_x - HH'`.
pub fn regret_f_l(sys: &LinearSystem, cost: &CostSpec, delta: &Matrix) -> Result<RegretFl, BoundsError> {
    if delta.shape() != sys.b().shape() {
        return Err(param(format!(
            "direction has shape {:?}, expected {:?}",
            delta.shape(),
            sys.b().shape()
        )));
    }
    let sol = riccati::solve_dare(sys, cost)?;
    let p = &sol.p;
    let sigma = riccati::closed_loop_covariance(sys, &sol.k_star)?;
    let excess = &sigma - &sys.noise_covariance();
    let g = numkernel::inverse(&riccati::input_hessian(sys, cost, p))?;
    let pd = p * delta;
    let inner = &(&pd.transpose() * &excess) * &pd;
    let f = (&g * &inner).trace();
    let dk = numkernel::spectral_norm(&delta.matmul(&sol.k_star)?)?;
    let dn = numkernel::spectral_norm(delta)?;
    let l = sys.n() as f64 * (dk * dk + dn * dn) * numkernel::spectral_norm(&g)?;
    let bound = if l > 0.0 {
        (f.max(0.0) / l).sqrt() / (2.0 * std::f64::consts::SQRT_2)
    } else {
        0.0
    };
    Ok(RegretFl { f, l, bound })
}

/// `dK*/dtheta = -(B'PB+R)^{-1} Delta' P (A + B K*)` along the family that
/// keeps the closed loop fixed.
pub fn gain_derivative(sys: &LinearSystem, cost: &CostSpec, delta: &Matrix) -> Result<Matrix, BoundsError> {
    let sol = riccati::solve_dare(sys, cost)?;
    let cl = sys.closed_loop(&sol.k_star)?;
    let rhs = &(&delta.transpose() * &sol.p) * &cl;
    Ok(numkernel::solve(&riccati::input_hessian(sys, cost, &sol.p), &rhs)?.scale(-1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Delta1Choice {
    /// Top eigenvector of `P0 (S0 - I) P0`.
    TopEigenvector,
    Given(Vec<f64>),
}

/// `(1/(4 sqrt n)) sqrt(d' X d)` for a given `X = P0 (S0 - I) P0`.
pub fn two_subsystem_bound_from(n: usize, product: &Matrix, delta1: &[f64]) -> f64 {
    let q = product.quad_form(delta1).max(0.0);
    q.sqrt() / (4.0 * (n as f64).sqrt())
}

pub fn two_subsystem_bound(n: usize, choice: &Delta1Choice) -> Result<f64, BoundsError> {
    Ok(two_subsystem_report(n, choice)?.value)
}

pub fn two_subsystem_report(n: usize, choice: &Delta1Choice) -> Result<LowerBoundReport, BoundsError> {
    let comp = instances::make_integrator_composite(n)?;
    let product = instances::chain_product_matrix(&comp.subsystem)?;
    let delta1 = match choice {
        Delta1Choice::TopEigenvector => comp.delta1.clone(),
        Delta1Choice::Given(d) => {
            if d.len() != n - 1 {
                return Err(param(format!("delta1 must have length {}, got {}", n - 1, d.len())));
            }
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(param(format!("delta1 must have unit norm, got {norm}")));
            }
            d.clone()
        }
    };
    let value = two_subsystem_bound_from(n, &product, &delta1);
    Ok(LowerBoundReport {
        kind: LowerBoundKind::RegretTwoSubsystem,
        inputs: BTreeMap::from([("n".into(), json!(n)), ("delta1".into(), json!(delta1))]),
        value,
        intermediate: BTreeMap::from([
            ("quadratic_form".into(), product.quad_form(&delta1)),
            ("product_norm".into(), numkernel::spectral_norm(&product)?),
            ("power_floor".into(), 2f64.powf((n as f64 - 2.0) / 2.0) / (4.0 * (n as f64).sqrt())),
        ]),
    })
}

pub fn regret_fl_report(sys: &LinearSystem, cost: &CostSpec, delta: &Matrix) -> Result<LowerBoundReport, BoundsError> {
    let fl = regret_f_l(sys, cost, delta)?;
    Ok(LowerBoundReport {
        kind: LowerBoundKind::RegretFL,
        inputs: BTreeMap::from([("n".into(), json!(sys.n())), ("delta".into(), json!(delta))]),
        value: fl.bound,
        intermediate: BTreeMap::from([("F".into(), fl.f), ("L".into(), fl.l)]),
    })
}

/// `C(2j, j)` in exact integer arithmetic.
pub fn central_binomial(j: u32) -> Result<u128, BoundsError> {
    let mut c: u128 = 1;
    for i in 1..=u128::from(j) {
        // C(2i,i) = C(2i-2,i-1) * 2(2i-1) / i, exact at every step
        c = c
            .checked_mul(2 * (2 * i - 1))
            .ok_or(BoundsError::Overflow("central binomial"))?
            / i;
    }
    Ok(c)
}

/// `sum_{j=1}^{n-1} C(2j, j)`.
pub fn central_binomial_sum(n: u32) -> Result<u128, BoundsError> {
    (1..n).try_fold(0u128, |acc, j| {
        acc.checked_add(central_binomial(j)?)
            .ok_or(BoundsError::Overflow("binomial sum"))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorExponent {
    pub numeric: f64,
    pub binomial_sum: u128,
    pub power: u128,
}

/// `|P0 (S0 - I) P0|_2` on the `(n-1)`-integrator with its combinatorial floors.
pub fn integrator_exponent_quantity(n: usize) -> Result<IntegratorExponent, BoundsError> {
    if n < 3 {
        return Err(param(format!("n must be at least 3, got {n}")));
    }
    let n32 = u32::try_from(n).map_err(|_| BoundsError::Overflow("dimension"))?;
    let sub = integrator_subsystem(n - 1)?;
    let product = instances::chain_product_matrix(&sub)?;
    Ok(IntegratorExponent {
        numeric: numkernel::spectral_norm(&product)?,
        binomial_sum: central_binomial_sum(n32)?,
        power: 1u128
            .checked_shl(n32 - 1)
            .ok_or(BoundsError::Overflow("power of two"))?,
    })
}

fn integrator_subsystem(m: usize) -> Result<Subsystem, BoundsError> {
    Ok(instances::make_integrator_composite(m + 1)?.subsystem)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StableExponent {
    /// `B0' P0 B0 + R0`.
    pub riccati_corner: f64,
    /// `2^{2n-4} + 1`.
    pub lemma_bound: f64,
    pub product_norm: f64,
}

/// Riccati growth on the stable chain `rho I + 2N` of size `n - 1`.
pub fn stable_exponent_quantity(n: usize, rho: f64) -> Result<StableExponent, BoundsError> {
    if n < 4 {
        return Err(param(format!("n must be at least 4, got {n}")));
    }
    let comp = instances::make_stable_chain(n, rho)?;
    let sub = &comp.subsystem.sys;
    let m = sub.n();
    let cost = CostSpec::identity(m, 1);
    let sol = riccati::solve_dare(sub, &cost)?;
    let corner = riccati::input_hessian(sub, &cost, &sol.p)[(0, 0)];
    let product = instances::chain_product_matrix(&comp.subsystem)?;
    Ok(StableExponent {
        riccati_corner: corner,
        lemma_bound: 2f64.powi(2 * n as i32 - 4) + 1.0,
        product_norm: numkernel::spectral_norm(&product)?,
    })
}
