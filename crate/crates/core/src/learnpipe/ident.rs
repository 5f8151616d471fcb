use rayon::prelude::*;
use serde::Serialize;

use super::LearnError;
use crate::numkernel::{self, Matrix};
use crate::sysmodel::{self, LinearSystem, Policy, Trajectory};

/// Least-squares model `(A_hat, B_hat)` with the error radii it is trusted to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdEstimate {
    pub a_hat: Matrix,
    pub b_hat: Matrix,
    pub eps_a: f64,
    pub eps_b: f64,
    pub samples_used: usize,
}

impl IdEstimate {
    pub fn with_radii(mut self, eps_a: f64, eps_b: f64) -> Self {
        self.eps_a = eps_a;
        self.eps_b = eps_b;
        self
    }

    /// `|[A - A_hat, B - B_hat]|_2`.
    pub fn joint_error(&self, truth: &LinearSystem) -> Result<f64, LearnError> {
        let da = truth.a() - &self.a_hat;
        let db = truth.b() - &self.b_hat;
        Ok(numkernel::spectral_norm(&Matrix::hcat(&[&da, &db])?)?)
    }
}

/// Running sums of the normal equations `sum z z'` and `sum z x_next'`
/// with regressor `z = [x; u]`.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    n: usize,
    p: usize,
    gram: Matrix,
    cross: Matrix,
    samples: usize,
}

impl NormalEquations {
    pub fn new(n: usize, p: usize) -> Self {
        Self {
            n,
            p,
            gram: Matrix::zeros(n + p, n + p),
            cross: Matrix::zeros(n + p, n),
            samples: 0,
        }
    }

    pub fn push(&mut self, x: &[f64], u: &[f64], x_next: &[f64]) {
        let z: Vec<f64> = x.iter().chain(u).copied().collect();
        let d = z.len();
        for i in 0..d {
            if z[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                self.gram[(i, j)] += z[i] * z[j];
            }
            for j in 0..self.n {
                self.cross[(i, j)] += z[i] * x_next[j];
            }
        }
        self.samples += 1;
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Minimizer of `sum |x_next - F x - G u|^2`.
    pub fn solve(&self) -> Result<IdEstimate, LearnError> {
        let d = self.n + self.p;
        let s = numkernel::singular_values(&self.gram)?;
        if numkernel::rank_from_singular_values(&s, d, d) < d {
            return Err(LearnError::DegenerateExcitation);
        }
        let theta_t = numkernel::solve(&self.gram, &self.cross).map_err(|e| match e {
            numkernel::LinalgError::Singular | numkernel::LinalgError::IllConditioned { .. } => {
                LearnError::DegenerateExcitation
            }
            other => other.into(),
        })?;
        let theta = theta_t.transpose();
        Ok(IdEstimate {
            a_hat: theta.block(0, self.n, 0, self.n),
            b_hat: theta.block(0, self.n, self.n, d),
            eps_a: 0.0,
            eps_b: 0.0,
            samples_used: self.samples,
        })
    }

    /// Gradient of the least-squares objective at `[A_hat, B_hat]`, up to a factor 2.
    pub fn gradient(&self, est: &IdEstimate) -> Result<Matrix, LearnError> {
        let theta = Matrix::hcat(&[&est.a_hat, &est.b_hat])?;
        Ok(&(&theta * &self.gram) - &self.cross.transpose())
    }
}

pub fn normal_equations(traj: &Trajectory) -> NormalEquations {
    let n = traj.states[0].len();
    let p = traj.inputs.first().map_or(0, Vec::len);
    let mut ne = NormalEquations::new(n, p);
    for t in 0..traj.horizon() {
        ne.push(&traj.states[t], &traj.inputs[t], &traj.states[t + 1]);
    }
    ne
}

/// Least-squares identification from one trajectory; radii are left at zero.
pub fn least_squares_id(traj: &Trajectory) -> Result<IdEstimate, LearnError> {
    normal_equations(traj).solve()
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// `quantile` of `|A - A_hat|_2` and `|B - B_hat|_2` over seeded trials.
///
/// Trials whose data are degenerate count as infinite error.
pub fn error_radii(
    sys_true: &LinearSystem,
    policy: &Policy,
    samples: usize,
    trials: usize,
    q: f64,
    seed: u64,
) -> Result<(f64, f64), LearnError> {
    if trials < 30 {
        return Err(LearnError::Parameter(format!("error_radii needs at least 30 trials, got {trials}")));
    }
    let errs: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let traj = sysmodel::simulate(sys_true, policy, samples, sysmodel::substream_seed(seed, i))?;
            match least_squares_id(&traj) {
                Ok(est) => Ok((
                    numkernel::spectral_norm(&(sys_true.a() - &est.a_hat))?,
                    numkernel::spectral_norm(&(sys_true.b() - &est.b_hat))?,
                )),
                Err(LearnError::DegenerateExcitation) => Ok((f64::INFINITY, f64::INFINITY)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, LearnError>>()?;
    let ea: Vec<f64> = errs.iter().map(|e| e.0).collect();
    let eb: Vec<f64> = errs.iter().map(|e| e.1).collect();
    Ok((quantile(&ea, q), quantile(&eb, q)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plant(h: Matrix) -> LinearSystem {
        let a = Matrix::from_rows(&[[0.9, 0.2, 0.0], [0.0, 0.5, 0.3], [0.1, 0.0, 0.7]]).unwrap();
        let b = Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0], [1.0, 0.0]]).unwrap();
        LinearSystem::new(a, b, h).unwrap()
    }

    #[test]
    fn noise_free_recovery() {
        let sys = plant(Matrix::zeros(3, 1));
        let traj = sysmodel::simulate(&sys, &Policy::white_noise(1.0), 12, 4).unwrap();
        let est = least_squares_id(&traj).unwrap();
        assert!((&est.a_hat - sys.a()).max_abs() < 1e-8);
        assert!((&est.b_hat - sys.b()).max_abs() < 1e-8);
        assert_eq!(est.samples_used, 12);
    }

    #[test]
    fn zero_excitation_is_degenerate() {
        let sys = plant(Matrix::zeros(3, 1));
        let traj = sysmodel::simulate(&sys, &Policy::white_noise(0.0), 50, 4).unwrap();
        assert_eq!(least_squares_id(&traj), Err(LearnError::DegenerateExcitation));
    }

    #[test]
    fn gradient_vanishes_at_estimate() {
        let sys = plant(Matrix::identity(3));
        let traj = sysmodel::simulate(&sys, &Policy::white_noise(1.0), 400, 8).unwrap();
        let ne = normal_equations(&traj);
        let est = ne.solve().unwrap();
        assert!(ne.gradient(&est).unwrap().frobenius_norm() <= 1e-8);
    }

    #[test]
    fn deterministic_radii_vanish() {
        let sys = plant(Matrix::zeros(3, 1));
        let (ea, eb) = error_radii(&sys, &Policy::white_noise(1.0), 20, 30, 0.99, 1).unwrap();
        assert!(ea < 1e-8 && eb < 1e-8);
        assert!(error_radii(&sys, &Policy::white_noise(1.0), 20, 29, 0.99, 1).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
        assert_eq!(quantile(&[4.0], 0.99), 4.0);
    }
}
