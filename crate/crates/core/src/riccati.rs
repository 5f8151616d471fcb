//! Discrete-time LQR: the Riccati difference recursion and its fixed point,
//! the optimal gain, Lyapunov covariances, and closed-form bounds on the
//! Riccati solution and the closed-loop margins.

use serde::Serialize;

use crate::ctrbl::{self, ControllabilityReport, CtrblError};
use crate::numkernel::{self, LinalgError, Matrix};
use crate::sysmodel::{CostSpec, LinearSystem, SysError};
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RiccatiError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    System(#[from] SysError),
    #[error(transparent)]
    Controllability(#[from] CtrblError),
    #[error("Riccati iteration did not converge in {iterations} iterations (last relative step {step:e})")]
    NoConvergence { iterations: usize, step: f64 },
    #[error("Riccati residual {residual:e} exceeds tolerance")]
    Residual { residual: f64 },
    #[error("closed loop is not stable (spectral radius {radius})")]
    Unstable { radius: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct RiccatiSolution {
    pub p: Matrix,
    pub k_star: Matrix,
    pub iterations: usize,
    pub residual: f64,
    pub closed_loop_radius: f64,
}

/// `B'PB + R`.
pub fn input_hessian(sys: &LinearSystem, cost: &CostSpec, p: &Matrix) -> Matrix {
    let bt = sys.b().transpose();
    (&(&(&bt * p) * sys.b()) + &cost.r).symmetrize()
}

/// `-(B'PB + R)^{-1} B'PA`.
pub fn optimal_gain(sys: &LinearSystem, cost: &CostSpec, p: &Matrix) -> Result<Matrix, RiccatiError> {
    let bpa = &(&sys.b().transpose() * p) * sys.a();
    Ok(numkernel::solve(&input_hessian(sys, cost, p), &bpa)?.scale(-1.0))
}

/// One backward step `A'PA + Q - A'PB (B'PB+R)^{-1} B'PA`.
pub fn riccati_step(p_next: &Matrix, sys: &LinearSystem, cost: &CostSpec) -> Result<Matrix, RiccatiError> {
    cost.check_dims(sys)?;
    let at = sys.a().transpose();
    let pa = p_next * sys.a();
    let bpa = &sys.b().transpose() * &pa;
    let gain = numkernel::solve(&input_hessian(sys, cost, p_next), &bpa)?;
    let out = &(&(&at * &pa) + &cost.q) - &(&bpa.transpose() * &gain);
    Ok(out.symmetrize())
}

/// `|P - step(P)|_F / (1 + |P|_F)`.
pub fn dare_residual(p: &Matrix, sys: &LinearSystem, cost: &CostSpec) -> Result<f64, RiccatiError> {
    let next = riccati_step(p, sys, cost)?;
    Ok((p - &next).frobenius_norm() / (1.0 + p.frobenius_norm()))
}

/// Stabilizing DARE solution by iterating the difference recursion from `Q`.
pub fn solve_dare(sys: &LinearSystem, cost: &CostSpec) -> Result<RiccatiSolution, RiccatiError> {
    cost.check_dims(sys)?;
    ctrbl::controllability_index(sys)?;
    let tol = Tolerances::global();
    let mut p = cost.q.symmetrize();
    let mut iterations = 0;
    let mut step = f64::INFINITY;
    while iterations < tol.dare_max_iter {
        let next = riccati_step(&p, sys, cost)?;
        iterations += 1;
        step = (&next - &p).frobenius_norm() / next.frobenius_norm().max(f64::MIN_POSITIVE);
        p = next;
        if !p.is_finite() {
            return Err(LinalgError::NonFinite.into());
        }
        if step <= tol.dare_step_rel {
            break;
        }
    }
    if step > tol.dare_step_rel {
        return Err(RiccatiError::NoConvergence { iterations, step });
    }
    let residual = dare_residual(&p, sys, cost)?;
    if residual > tol.dare_residual {
        return Err(RiccatiError::Residual { residual });
    }
    let k_star = optimal_gain(sys, cost, &p)?;
    let closed_loop_radius = numkernel::spectral_radius(&sys.closed_loop(&k_star)?)?;
    if closed_loop_radius >= 1.0 {
        return Err(RiccatiError::Unstable {
            radius: closed_loop_radius,
        });
    }
    Ok(RiccatiSolution {
        p,
        k_star,
        iterations,
        residual,
        closed_loop_radius,
    })
}

/// Solution of `S = F S F' + W` for stable `F`, by squaring.
pub fn solve_lyapunov(f: &Matrix, w: &Matrix) -> Result<Matrix, RiccatiError> {
    let radius = numkernel::spectral_radius(f)?;
    if radius >= 1.0 {
        return Err(RiccatiError::Unstable { radius });
    }
    if w.shape() != f.shape() {
        return Err(LinalgError::DimensionMismatch {
            op: "lyapunov",
            left: f.shape(),
            right: w.shape(),
        }
        .into());
    }
    let tol = Tolerances::global().lyap_step_rel;
    let mut sigma = w.symmetrize();
    let mut fk = f.clone();
    // after k squarings sigma holds the first 2^k terms of the series
    for round in 0..64 {
        let incr = &(&fk * &sigma) * &fk.transpose();
        sigma = (&sigma + &incr).symmetrize();
        if !sigma.is_finite() {
            return Err(LinalgError::NonFinite.into());
        }
        if incr.frobenius_norm() <= tol * sigma.frobenius_norm() {
            return Ok(sigma);
        }
        fk = &fk * &fk;
        if round == 63 {
            break;
        }
    }
    Err(RiccatiError::NoConvergence {
        iterations: 64,
        step: f64::NAN,
    })
}

/// Closed-loop stationary state covariance under `u = K x`.
pub fn closed_loop_covariance(sys: &LinearSystem, k: &Matrix) -> Result<Matrix, RiccatiError> {
    solve_lyapunov(&sys.closed_loop(k)?, &sys.noise_covariance())
}

/// `J* = tr(P HH')`.
pub fn optimal_average_cost(sys: &LinearSystem, cost: &CostSpec) -> Result<f64, RiccatiError> {
    let sol = solve_dare(sys, cost)?;
    Ok(average_cost_from(&sol, sys))
}

pub fn average_cost_from(sol: &RiccatiSolution, sys: &LinearSystem) -> f64 {
    (&sol.p * &sys.noise_covariance()).trace()
}

/// `(|R|/s)(M^{2k} + 2k^2 |Q| M^{4k}) + 2k^2 |Q| M^{2k}` with
/// `s = sigma_min(Gamma_kappa)`.
pub fn riccati_upper_bound(report: &ControllabilityReport, cost: &CostSpec) -> Result<f64, RiccatiError> {
    let q = numkernel::spectral_norm(&cost.q)?;
    let r = numkernel::spectral_norm(&cost.r)?;
    let k = report.kappa as i32;
    let m = report.bound_m;
    let kk = 2.0 * f64::from(k * k);
    let m2k = m.powi(2 * k);
    Ok((r / report.sigma_min_gramian) * (m2k + kk * q * m.powi(4 * k)) + kk * q * m2k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginBounds {
    /// `sqrt(1 - 1/|P|)`, upper bound on `rho(A + B K*)`.
    pub radius_bound: f64,
    /// `2 |P|^{3/2}`, upper bound on the closed-loop resolvent H-infinity norm.
    pub hinf_bound: f64,
}

pub fn margin_bounds(sol: &RiccatiSolution) -> Result<MarginBounds, RiccatiError> {
    let pn = numkernel::spectral_norm(&sol.p)?;
    Ok(MarginBounds {
        radius_bound: (1.0 - 1.0 / pn).max(0.0).sqrt(),
        hinf_bound: 2.0 * pn.powf(1.5),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, h: f64) -> LinearSystem {
        LinearSystem::new(Matrix::diag(&[a]), Matrix::diag(&[b]), Matrix::diag(&[h])).unwrap()
    }

    #[test]
    fn step_cases() {
        let zero_a = LinearSystem::new(Matrix::zeros(2, 2), Matrix::identity(2), Matrix::identity(2)).unwrap();
        let cost = CostSpec::stage(Matrix::diag(&[2.0, 3.0]), Matrix::identity(2)).unwrap();
        let p = riccati_step(&Matrix::diag(&[7.0, 1.0]), &zero_a, &cost).unwrap();
        assert_eq!(p, cost.q);
        let p = riccati_step(&Matrix::identity(1), &scalar(1.0, 1.0, 1.0), &CostSpec::identity(1, 1)).unwrap();
        assert!((p[(0, 0)] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn golden_ratio_dare() {
        let sol = solve_dare(&scalar(1.0, 1.0, 1.0), &CostSpec::identity(1, 1)).unwrap();
        // root of P^2 - P - 1 = 0
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((sol.p[(0, 0)] - phi).abs() < 1e-12);
        assert!((sol.k_star[(0, 0)] + phi / (phi + 1.0)).abs() < 1e-12);
        assert!(sol.closed_loop_radius < 1.0);
    }

    #[test]
    fn zero_dynamics_dare() {
        let sys = LinearSystem::new(Matrix::zeros(3, 3), Matrix::identity(3), Matrix::identity(3)).unwrap();
        let sol = solve_dare(&sys, &CostSpec::identity(3, 3)).unwrap();
        assert_eq!(sol.p, Matrix::identity(3));
        assert_eq!(sol.k_star.max_abs(), 0.0);
        assert!((optimal_average_cost(&sys, &CostSpec::identity(3, 3)).unwrap() - 3.0).abs() < 1e-15);
        let mb = margin_bounds(&sol).unwrap();
        assert_eq!(mb.radius_bound, 0.0);
        assert_eq!(sol.closed_loop_radius, 0.0);
    }

    #[test]
    fn noiseless_average_cost_is_zero() {
        let sys = scalar(1.0, 1.0, 0.0);
        assert_eq!(optimal_average_cost(&sys, &CostSpec::identity(1, 1)).unwrap(), 0.0);
    }

    #[test]
    fn not_controllable_rejected() {
        let sys = LinearSystem::new(Matrix::identity(2), Matrix::unit(2, 0), Matrix::identity(2)).unwrap();
        assert!(matches!(
            solve_dare(&sys, &CostSpec::identity(2, 1)),
            Err(RiccatiError::Controllability(_))
        ));
    }

    #[test]
    fn lyapunov_cases() {
        let w = Matrix::diag(&[1.0, 2.0]);
        assert_eq!(solve_lyapunov(&Matrix::zeros(2, 2), &w).unwrap(), w);
        let s = solve_lyapunov(&Matrix::diag(&[0.5]), &Matrix::identity(1)).unwrap();
        assert!((s[(0, 0)] - 4.0 / 3.0).abs() < 1e-15);
        assert!(solve_lyapunov(&Matrix::diag(&[1.0]), &Matrix::identity(1)).is_err());
    }

    #[test]
    fn upper_bound_identity_case() {
        let sys = LinearSystem::new(Matrix::zeros(2, 2), Matrix::identity(2), Matrix::identity(2)).unwrap();
        let rep = ctrbl::analyze(&sys).unwrap();
        let cost = CostSpec::identity(2, 2);
        assert!((riccati_upper_bound(&rep, &cost).unwrap() - 5.0).abs() < 1e-14);
    }
}
