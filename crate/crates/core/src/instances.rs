//! Constructors for the hard instances: the sign-ambiguous stabilization
//! pair, the integrator composite, the stable chain, and the perturbation
//! family that keeps the optimal closed loop fixed.

use serde::Serialize;

use crate::numkernel::{self, LinalgError, Matrix};
use crate::riccati::{self, RiccatiError};
use crate::sysmodel::{CostSpec, GaussianStream, LinearSystem, SysError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InstanceError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    System(#[from] SysError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Riccati(#[from] RiccatiError),
}

fn param(msg: impl Into<String>) -> InstanceError {
    InstanceError::Parameter(msg.into())
}

/// Two systems identical except for the sign of the coupling from the
/// second state into the marginally stable first state.
#[derive(Debug, Clone, Serialize)]
pub struct StabPair {
    pub s1: LinearSystem,
    pub s2: LinearSystem,
    pub mu: f64,
    pub alpha: f64,
    pub n: usize,
}

impl StabPair {
    /// Member `0` is `S1` (coupling `+mu`), member `1` is `S2`.
    pub fn member(&self, i: usize) -> &LinearSystem {
        if i == 0 {
            &self.s1
        } else {
            &self.s2
        }
    }
}

fn stab_system(n: usize, mu: f64, alpha: f64, sign: f64) -> Result<LinearSystem, InstanceError> {
    let mut a = Matrix::zeros(n, n);
    a[(0, 0)] = 1.0;
    a[(0, 1)] = sign * mu;
    for i in 1..n {
        a[(i, i)] = alpha;
        if i + 1 < n {
            a[(i, i + 1)] = mu;
        }
    }
    let b = Matrix::unit(n, n - 1).scale(mu);
    Ok(LinearSystem::new(a, b, Matrix::unit(n, 0))?)
}

pub fn make_stab_pair(n: usize, mu: f64, alpha: f64) -> Result<StabPair, InstanceError> {
    if n < 2 {
        return Err(param(format!("n must be at least 2, got {n}")));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(param(format!("mu must lie in (0, 1), got {mu}")));
    }
    if !(alpha >= 0.0 && alpha + mu < 1.0) {
        return Err(param(format!("need alpha >= 0 and alpha + mu < 1, got alpha = {alpha}")));
    }
    Ok(StabPair {
        s1: stab_system(n, mu, alpha, 1.0)?,
        s2: stab_system(n, mu, alpha, -1.0)?,
        mu,
        alpha,
        n,
    })
}

/// `I + N` of size `m` (ones on the diagonal and superdiagonal).
pub fn integrator_chain(m: usize) -> Matrix {
    Matrix::from_fn(m, m, |i, j| if i == j || j == i + 1 { 1.0 } else { 0.0 })
}

/// `rho I + 2 N` of size `m`.
pub fn stable_chain_block(m: usize, rho: f64) -> Matrix {
    Matrix::from_fn(m, m, |i, j| {
        if i == j {
            rho
        } else if j == i + 1 {
            2.0
        } else {
            0.0
        }
    })
}

/// Memoryless scalar block next to a single-input chain `(a0, e_last)`,
/// with full-rank noise.
fn composite(a0: &Matrix) -> Result<LinearSystem, InstanceError> {
    let m = a0.rows();
    let n = m + 1;
    let a = Matrix::block_diag(&[&Matrix::zeros(1, 1), a0]);
    let mut b = Matrix::zeros(n, 2);
    b[(0, 0)] = 1.0;
    b[(n - 1, 1)] = 1.0;
    Ok(LinearSystem::new(a, b, Matrix::identity(n))?)
}

/// The `n - 1` state chain alone, with unit noise.
#[derive(Debug, Clone, Serialize)]
pub struct Subsystem {
    pub sys: LinearSystem,
}

impl Subsystem {
    fn new(a0: Matrix) -> Result<Self, InstanceError> {
        let m = a0.rows();
        Ok(Self {
            sys: LinearSystem::new(a0, Matrix::unit(m, m - 1), Matrix::identity(m))?,
        })
    }
}

/// `Delta = [[0, 0], [delta1, 0]]`: `delta1` occupies rows `1..n` of the
/// first input column.
pub fn structured_delta(delta1: &[f64]) -> Matrix {
    let n = delta1.len() + 1;
    let mut d = Matrix::zeros(n, 2);
    for (i, v) in delta1.iter().enumerate() {
        d[(i + 1, 0)] = *v;
    }
    d
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegratorComposite {
    pub sys: LinearSystem,
    pub subsystem: Subsystem,
    /// Unit-norm direction maximizing `d' P0 (S0 - I) P0 d` on the chain.
    pub delta1: Vec<f64>,
    pub delta: Matrix,
}

/// `P0 (S0 - I) P0` for a chain subsystem with `Q = I`, `R = 1`.
pub fn chain_product_matrix(sub: &Subsystem) -> Result<Matrix, InstanceError> {
    let m = sub.sys.n();
    let sol = riccati::solve_dare(&sub.sys, &CostSpec::identity(m, 1))?;
    let sigma = riccati::closed_loop_covariance(&sub.sys, &sol.k_star)?;
    let inner = &sigma - &Matrix::identity(m);
    Ok((&(&sol.p * &inner) * &sol.p).symmetrize())
}

fn top_direction(m: &Matrix) -> Result<Vec<f64>, InstanceError> {
    let (vals, vecs) = numkernel::symmetric_eigen(m)?;
    let mut v = vecs.col_vec(vals.len() - 1);
    // fix the sign so the largest entry is positive
    let (imax, _) = v
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
    if v[imax] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(v)
}

fn composite_with_chain(a0: Matrix) -> Result<IntegratorComposite, InstanceError> {
    let sys = composite(&a0)?;
    let subsystem = Subsystem::new(a0)?;
    let delta1 = top_direction(&chain_product_matrix(&subsystem)?)?;
    let delta = structured_delta(&delta1);
    Ok(IntegratorComposite {
        sys,
        subsystem,
        delta1,
        delta,
    })
}

/// Memoryless scalar block plus an `(n-1)`-th order discrete integrator.
pub fn make_integrator_composite(n: usize) -> Result<IntegratorComposite, InstanceError> {
    if n < 3 {
        return Err(param(format!("n must be at least 3, got {n}")));
    }
    composite_with_chain(integrator_chain(n - 1))
}

/// Memoryless scalar block plus the stable chain `rho I + 2 N` of size `n-1`.
pub fn make_stable_chain(n: usize, rho: f64) -> Result<IntegratorComposite, InstanceError> {
    if n < 3 {
        return Err(param(format!("n must be at least 3, got {n}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(param(format!("rho must lie in (0, 1), got {rho}")));
    }
    composite_with_chain(stable_chain_block(n - 1, rho))
}

/// Append `extra` directly actuated memoryless states.
pub fn pad_memoryless(sys: &LinearSystem, extra: usize) -> Result<LinearSystem, InstanceError> {
    if extra == 0 {
        return Ok(sys.clone());
    }
    let a = Matrix::block_diag(&[sys.a(), &Matrix::zeros(extra, extra)]);
    let b = Matrix::block_diag(&[sys.b(), &Matrix::identity(extra)]);
    let h = Matrix::block_diag(&[sys.h(), &Matrix::identity(extra)]);
    Ok(LinearSystem::new(a, b, h)?)
}

/// `A(theta) = A - theta Delta K*`, `B(theta) = B + theta Delta`, which
/// leaves `A + B K*` unchanged.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaFamily {
    pub base: LinearSystem,
    pub delta: Matrix,
    pub theta: f64,
    pub k_star_base: Matrix,
    pub system: LinearSystem,
}

/// Family member at `theta`; `K*` is the base gain for `Q = I`, `R = I`.
pub fn make_theta_family(sys: &LinearSystem, delta: &Matrix, theta: f64) -> Result<ThetaFamily, InstanceError> {
    let cost = CostSpec::identity(sys.n(), sys.p());
    let k = riccati::solve_dare(sys, &cost)?.k_star;
    theta_member(sys, delta, &k, theta)
}

/// Family member for an already computed base gain.
pub fn theta_member(sys: &LinearSystem, delta: &Matrix, k_star: &Matrix, theta: f64) -> Result<ThetaFamily, InstanceError> {
    if delta.shape() != sys.b().shape() {
        return Err(param(format!(
            "perturbation direction has shape {:?}, B has {:?}",
            delta.shape(),
            sys.b().shape()
        )));
    }
    let dk = delta.matmul(k_star)?;
    let a = sys.a() - &dk.scale(theta);
    let b = sys.b() + &delta.scale(theta);
    Ok(ThetaFamily {
        base: sys.clone(),
        delta: delta.clone(),
        theta,
        k_star_base: k_star.clone(),
        system: sys.with_dynamics(a, b)?,
    })
}

/// Random controllable system built in staircase form: nonincreasing block
/// sizes starting at `p`, Gaussian blocks, `A` rescaled to spectral radius
/// in `[0.2, 1]`, `H = I`, all rotated by a random orthogonal matrix.
pub fn random_coupled(n: usize, p: usize, seed: u64) -> Result<LinearSystem, InstanceError> {
    if n == 0 || p == 0 || p > n {
        return Err(param(format!("need 1 <= p <= n, got n = {n}, p = {p}")));
    }
    let mut rng = GaussianStream::new(seed);
    let mut sizes = vec![p];
    let mut left = n - p;
    while left > 0 {
        let cap = (*sizes.last().unwrap()).min(left);
        let next = 1 + (rng.next_u64() % cap as u64) as usize;
        sizes.push(next);
        left -= next;
    }
    let mut offsets = vec![0usize];
    for s in &sizes {
        offsets.push(offsets.last().unwrap() + s);
    }
    let block_row = |i: usize| offsets.iter().rposition(|&o| o <= i).unwrap().min(sizes.len() - 1);
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        let bi = block_row(i);
        let first_col = if bi == 0 { 0 } else { offsets[bi - 1] };
        for j in first_col..n {
            a[(i, j)] = rng.standard_normal();
        }
    }
    let mut b = Matrix::zeros(n, p);
    for i in 0..p {
        for j in 0..p {
            b[(i, j)] = rng.standard_normal();
        }
    }
    let rho = numkernel::spectral_radius(&a)?;
    let target = 0.2 + 0.8 * rng.uniform();
    if rho > 0.0 {
        a = a.scale(target / rho);
    }
    let g = Matrix::from_fn(n, n, |_, _| rng.standard_normal());
    let (u, _) = numkernel::qr(&g)?;
    let ut = u.transpose();
    Ok(LinearSystem::new(&(&u * &a) * &ut, &u * &b, Matrix::identity(n))?)
}

/// `|[A1 - A2, B1 - B2]|_2`.
pub fn dilation_distance(s1: &LinearSystem, s2: &LinearSystem) -> Result<f64, InstanceError> {
    if s1.a().shape() != s2.a().shape() || s1.b().shape() != s2.b().shape() {
        return Err(param("systems differ in dimensions"));
    }
    let da = s1.a() - s2.a();
    let db = s1.b() - s2.b();
    Ok(numkernel::spectral_norm(&Matrix::hcat(&[&da, &db])?)?)
}
