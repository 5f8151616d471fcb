use serde::Serialize;

use super::{hinf_norm, IdEstimate, LearnError};
use crate::instances::StabPair;
use crate::numkernel::{self, Matrix};
use crate::riccati;
use crate::sysmodel::{CostSpec, LinearSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SynthesisMethod {
    CeLqrCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisResult {
    pub k: Matrix,
    /// `|[sqrt2 eps_A Phi; sqrt2 eps_B K Phi]|_Hinf` with `Phi = (zI - A_hat - B_hat K)^{-1}`.
    pub cert_value: f64,
    pub feasible: bool,
    /// The nominal Riccati equation was solved, so `k` is a real candidate.
    pub nominal_solved: bool,
    pub method: SynthesisMethod,
}

impl SynthesisResult {
    fn infeasible(k: Matrix, nominal_solved: bool) -> Self {
        Self {
            k,
            cert_value: f64::INFINITY,
            feasible: false,
            nominal_solved,
            method: SynthesisMethod::CeLqrCandidate,
        }
    }
}

/// `[sqrt2 eps_a I; sqrt2 eps_b K]`.
pub fn robustness_weight(k: &Matrix, eps_a: f64, eps_b: f64) -> Matrix {
    let n = k.cols();
    let top = Matrix::identity(n).scale(2f64.sqrt() * eps_a);
    let bottom = k.scale(2f64.sqrt() * eps_b);
    Matrix::vcat(&[&top, &bottom]).expect("blocks share the state dimension")
}

/// Certainty-equivalent LQR gain of the estimate (`Q = I`, `R = I`) checked
/// against the robust stability certificate for the given radii.
///
/// A failing Riccati solve, an unstable nominal loop or non-finite radii
/// yield an infeasible result rather than an error.
pub fn synth_robust_gain(est: &IdEstimate, eps_a: f64, eps_b: f64) -> Result<SynthesisResult, LearnError> {
    est.a_hat.ensure_finite()?;
    est.b_hat.ensure_finite()?;
    let (n, p) = (est.a_hat.rows(), est.b_hat.cols());
    let nominal = LinearSystem::new(est.a_hat.clone(), est.b_hat.clone(), Matrix::identity(n))?;
    let sol = match riccati::solve_dare(&nominal, &CostSpec::identity(n, p)) {
        Ok(sol) => sol,
        Err(_) => return Ok(SynthesisResult::infeasible(Matrix::zeros(p, n), false)),
    };
    if !(eps_a.is_finite() && eps_b.is_finite()) {
        return Ok(SynthesisResult::infeasible(sol.k_star, true));
    }
    let cl = nominal.closed_loop(&sol.k_star)?;
    let weight = robustness_weight(&sol.k_star, eps_a, eps_b);
    let cert_value = match hinf_norm(&cl, Some(&weight)) {
        Ok(v) => v,
        Err(LearnError::Unstable { .. }) => return Ok(SynthesisResult::infeasible(sol.k_star, true)),
        Err(e) => return Err(e),
    };
    Ok(SynthesisResult {
        k: sol.k_star,
        cert_value,
        feasible: cert_value < 1.0,
        nominal_solved: true,
        method: SynthesisMethod::CeLqrCandidate,
    })
}

/// `1 / (5 (1 + |K*|) |(zI - A - BK*)^{-1}|_Hinf)` for `Q = I`, `R = I`.
pub fn feasibility_radius(sys: &LinearSystem) -> Result<f64, LearnError> {
    let sol = riccati::solve_dare(sys, &CostSpec::identity(sys.n(), sys.p()))?;
    let cl = sys.closed_loop(&sol.k_star)?;
    let kn = numkernel::spectral_norm(&sol.k_star)?;
    Ok(1.0 / (5.0 * (1.0 + kn) * hinf_norm(&cl, None)?))
}

/// `(det(I - A1 - BK), det(I - A2 - BK))`, the characteristic polynomials of
/// both closed loops at `z = 1`.
pub fn jury_phi1(pair: &StabPair, k: &Matrix) -> Result<(f64, f64), LearnError> {
    let n = pair.n;
    if k.shape() != (1, n) {
        return Err(LearnError::Parameter(format!("gain must be 1x{n}, got {:?}", k.shape())));
    }
    let eye = Matrix::identity(n);
    let phi = |s: &LinearSystem| -> Result<f64, LearnError> {
        Ok(numkernel::determinant(&(&eye - &s.closed_loop(k)?))?)
    };
    Ok((phi(&pair.s1)?, phi(&pair.s2)?))
}
