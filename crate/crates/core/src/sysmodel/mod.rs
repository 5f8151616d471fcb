//! Linear stochastic systems `x' = A x + B u + H w`, quadratic costs,
//! policies and seeded trajectory simulation.

mod policy;
mod rng;
mod simulate;

use serde::{Deserialize, Serialize};

use crate::numkernel::{self, LinalgError, Matrix};
use crate::tolerance::Tolerances;

pub use policy::{CeSchedule, Controller, CustomPolicy, History, Policy, PolicyKind};
pub use rng::{substream_seed, GaussianStream};
pub use simulate::{
    check_energy_budget, empirical_input_energy, input_energy_profile, rollout_cost, simulate,
    Trajectory,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SysError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{0}")]
    Shape(String),
    #[error("assumption violated: {0}")]
    Assumption(String),
    #[error("state diverged at step {step} (|x| > {cutoff:e})")]
    Diverged { step: usize, cutoff: f64 },
    #[error("invalid cost: {0}")]
    Cost(String),
}

/// Dynamics matrices `(A, B, H)` with the norm cap `M = max(|A|, |B|, |H|)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearSystem {
    a: Matrix,
    b: Matrix,
    h: Matrix,
    bound_m: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    a: Matrix,
    b: Matrix,
    h: Matrix,
    #[serde(default)]
    bound_m: Option<f64>,
}

impl<'de> Deserialize<'de> for LinearSystem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawSystem::deserialize(d)?;
        let sys = LinearSystem::new(raw.a, raw.b, raw.h).map_err(serde::de::Error::custom)?;
        match raw.bound_m {
            Some(m) => sys.with_bound(m).map_err(serde::de::Error::custom),
            None => Ok(sys),
        }
    }
}

impl LinearSystem {
    /// Checks shapes and finiteness; `boundM` is set to the exact max norm.
    pub fn new(a: Matrix, b: Matrix, h: Matrix) -> Result<Self, SysError> {
        a.ensure_finite()?;
        b.ensure_finite()?;
        h.ensure_finite()?;
        if !a.is_square() {
            return Err(LinalgError::NotSquare(a.shape()).into());
        }
        let n = a.rows();
        if b.rows() != n || h.rows() != n {
            return Err(SysError::Shape(format!(
                "A is {n}x{n} but B is {:?} and H is {:?}",
                b.shape(),
                h.shape()
            )));
        }
        let bound_m = numkernel::spectral_norm(&a)?
            .max(numkernel::spectral_norm(&b)?)
            .max(numkernel::spectral_norm(&h)?);
        Ok(Self { a, b, h, bound_m })
    }

    /// Replace the norm cap with a looser one; it may not undercut the true norms.
    pub fn with_bound(mut self, bound_m: f64) -> Result<Self, SysError> {
        if !(bound_m.is_finite() && bound_m >= self.bound_m * (1.0 - 1e-12)) {
            return Err(SysError::Assumption(format!(
                "boundM {bound_m} is below max(|A|,|B|,|H|) = {}",
                self.bound_m
            )));
        }
        self.bound_m = bound_m;
        Ok(self)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn bound_m(&self) -> f64 {
        self.bound_m
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn p(&self) -> usize {
        self.b.cols()
    }

    pub fn r(&self) -> usize {
        self.h.cols()
    }

    /// `HH'`, the state noise covariance.
    pub fn noise_covariance(&self) -> Matrix {
        &self.h * &self.h.transpose()
    }

    /// Full column rank of `B` and `H` (a zero `H` is allowed) and `rho(A) <= 1`.
    pub fn check_assumptions(&self) -> Result<(), SysError> {
        let p = self.p();
        if p > self.n() || numkernel::rank(&self.b)? != p {
            return Err(SysError::Assumption("B must have full column rank".into()));
        }
        let rh = numkernel::rank(&self.h)?;
        if rh != 0 && rh != self.r() {
            return Err(SysError::Assumption("H must have full column rank".into()));
        }
        let rho = numkernel::spectral_radius(&self.a)?;
        if rho > 1.0 + Tolerances::global().stability_margin {
            return Err(SysError::Assumption(format!("rho(A) = {rho} exceeds 1")));
        }
        Ok(())
    }

    /// Same `H`, new `(A, B)`.
    pub fn with_dynamics(&self, a: Matrix, b: Matrix) -> Result<Self, SysError> {
        Self::new(a, b, self.h.clone())
    }

    /// `A + B K`.
    pub fn closed_loop(&self, k: &Matrix) -> Result<Matrix, SysError> {
        let bk = self.b.matmul(k)?;
        if bk.shape() != self.a.shape() {
            return Err(SysError::Shape(format!("gain has shape {:?}", k.shape())));
        }
        Ok(&self.a + &bk)
    }

    /// Orthogonal change of coordinates `(U'AU, U'B, U'H)`.
    pub fn transform(&self, u: &Matrix) -> Result<Self, SysError> {
        let ut = u.transpose();
        Self::new(
            ut.matmul(&self.a)?.matmul(u)?,
            ut.matmul(&self.b)?,
            ut.matmul(&self.h)?,
        )
    }
}

/// Quadratic stage and terminal weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub q: Matrix,
    pub r: Matrix,
    pub q_terminal: Matrix,
}

fn check_symmetric(m: &Matrix, name: &str) -> Result<(), SysError> {
    if !m.is_square() {
        return Err(SysError::Cost(format!("{name} must be square")));
    }
    let scale = 1.0 + m.max_abs();
    if (m - &m.transpose()).max_abs() > 1e-12 * scale {
        return Err(SysError::Cost(format!("{name} must be symmetric")));
    }
    Ok(())
}

impl CostSpec {
    /// Validates symmetry, `Q, Q_T >= 0` and `R > 0`.
    pub fn new(q: Matrix, r: Matrix, q_terminal: Matrix) -> Result<Self, SysError> {
        check_symmetric(&q, "Q")?;
        check_symmetric(&r, "R")?;
        check_symmetric(&q_terminal, "Q_T")?;
        if q.shape() != q_terminal.shape() {
            return Err(SysError::Cost("Q and Q_T differ in shape".into()));
        }
        for (m, name) in [(&q, "Q"), (&q_terminal, "Q_T")] {
            let tol = Tolerances::global().rank_rel * m.rows() as f64 * (1.0 + m.max_abs());
            if !numkernel::is_psd(m, tol)? {
                return Err(SysError::Cost(format!("{name} must be positive semidefinite")));
            }
        }
        let (vals, _) = numkernel::symmetric_eigen(&r)?;
        if vals[0] <= 0.0 {
            return Err(SysError::Cost("R must be positive definite".into()));
        }
        Ok(Self { q, r, q_terminal })
    }

    /// `Q`, `R` with terminal weight `Q_T = Q`.
    pub fn stage(q: Matrix, r: Matrix) -> Result<Self, SysError> {
        let qt = q.clone();
        Self::new(q, r, qt)
    }

    /// `Q = I_n`, `R = I_p`, `Q_T = I_n`.
    pub fn identity(n: usize, p: usize) -> Self {
        Self {
            q: Matrix::identity(n),
            r: Matrix::identity(p),
            q_terminal: Matrix::identity(n),
        }
    }

    pub fn with_terminal(&self, q_terminal: Matrix) -> Result<Self, SysError> {
        Self::new(self.q.clone(), self.r.clone(), q_terminal.symmetrize())
    }

    pub fn check_dims(&self, sys: &LinearSystem) -> Result<(), SysError> {
        if self.q.rows() != sys.n() || self.r.rows() != sys.p() {
            return Err(SysError::Shape(format!(
                "cost is for n={}, p={} but system has n={}, p={}",
                self.q.rows(),
                self.r.rows(),
                sys.n(),
                sys.p()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_is_max_norm() {
        let sys = LinearSystem::new(
            Matrix::diag(&[0.5, -0.9]),
            Matrix::column(&[0.0, 2.0]),
            Matrix::identity(2),
        )
        .unwrap();
        assert!((sys.bound_m() - 2.0).abs() < 1e-14);
        assert!(sys.clone().with_bound(1.0).is_err());
        assert_eq!(sys.clone().with_bound(3.0).unwrap().bound_m(), 3.0);
    }

    #[test]
    fn shape_and_assumption_checks() {
        assert!(LinearSystem::new(Matrix::identity(2), Matrix::zeros(3, 1), Matrix::identity(2)).is_err());
        let zero_b = LinearSystem::new(Matrix::zeros(2, 2), Matrix::zeros(2, 1), Matrix::identity(2)).unwrap();
        assert!(zero_b.check_assumptions().is_err());
        let explosive = LinearSystem::new(Matrix::diag(&[1.1]), Matrix::identity(1), Matrix::identity(1)).unwrap();
        assert!(explosive.check_assumptions().is_err());
        let ok = LinearSystem::new(Matrix::diag(&[1.0]), Matrix::identity(1), Matrix::zeros(1, 1)).unwrap();
        assert!(ok.check_assumptions().is_ok());
    }

    #[test]
    fn system_json_round_trip() {
        let sys = LinearSystem::new(
            Matrix::from_rows(&[[1.0, 0.5], [0.0, 0.0]]).unwrap(),
            Matrix::column(&[0.0, 0.5]),
            Matrix::column(&[1.0, 0.0]),
        )
        .unwrap();
        let text = serde_json::to_string(&sys).unwrap();
        let back: LinearSystem = serde_json::from_str(&text).unwrap();
        assert_eq!(back, sys);
        let bad = r#"{"a": [[1.0]], "b": [[1.0],[2.0]], "h": [[1.0]]}"#;
        assert!(serde_json::from_str::<LinearSystem>(bad).is_err());
    }

    #[test]
    fn cost_validation() {
        assert!(CostSpec::stage(Matrix::identity(2), Matrix::zeros(1, 1)).is_err());
        let asym = Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!(CostSpec::stage(asym, Matrix::identity(1)).is_err());
        let indefinite = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(CostSpec::stage(indefinite, Matrix::identity(1)).is_err());
        assert!(CostSpec::stage(Matrix::zeros(2, 2), Matrix::identity(1)).is_ok());
    }
}
