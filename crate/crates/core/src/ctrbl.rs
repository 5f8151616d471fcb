//! Controllability structure of a pair `(A, B)`: controllability matrices,
//! the controllability index, Gramians, the block staircase form and the
//! robust-coupling coefficient read off it.

use serde::Serialize;

use crate::numkernel::{self, LinalgError, Matrix};
use crate::sysmodel::LinearSystem;
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CtrblError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("pair is not controllable (rank of the controllability matrix is {rank} < {n})")]
    NotControllable { rank: usize, n: usize },
    #[error("controllability horizon must be at least 1")]
    ZeroHorizon,
}

/// `[B, AB, ..., A^{k-1} B]`.
pub fn controllability_matrix(sys: &LinearSystem, k: usize) -> Result<Matrix, CtrblError> {
    if k == 0 {
        return Err(CtrblError::ZeroHorizon);
    }
    let (n, p) = (sys.n(), sys.p());
    let mut out = Matrix::zeros(n, k * p);
    let mut block = sys.b().clone();
    for i in 0..k {
        out.set_block(0, i * p, &block);
        if i + 1 < k {
            block = sys.a().matmul(&block)?;
        }
    }
    Ok(out)
}

/// `rank(C_k)` for `k = 1..n`.
pub fn rank_profile(sys: &LinearSystem) -> Result<Vec<usize>, CtrblError> {
    let c = controllability_matrix(sys, sys.n())?;
    let p = sys.p();
    (1..=sys.n())
        .map(|k| Ok(numkernel::rank(&c.block(0, sys.n(), 0, k * p))?))
        .collect()
}

/// Smallest `k` with `rank(C_k) = n`.
pub fn controllability_index(sys: &LinearSystem) -> Result<usize, CtrblError> {
    let ranks = rank_profile(sys)?;
    let n = sys.n();
    ranks
        .iter()
        .position(|&r| r == n)
        .map(|i| i + 1)
        .ok_or(CtrblError::NotControllable {
            rank: *ranks.last().unwrap_or(&0),
            n,
        })
}

/// `sum_{t<k} A^t B B' (A')^t`.
pub fn gramian(sys: &LinearSystem, k: usize) -> Result<Matrix, CtrblError> {
    let c = controllability_matrix(sys, k)?;
    Ok((&c * &c.transpose()).symmetrize())
}

/// Orthogonal similarity `(U'AU, U'B)` exposing the block chain of a
/// controllable pair.
#[derive(Debug, Clone, Serialize)]
pub struct StaircaseForm {
    pub u: Matrix,
    pub block_sizes: Vec<usize>,
    pub a_hat: Matrix,
    pub b_hat: Matrix,
    /// `A_{i+1,i}`, of shape `p_{i+1} x p_i`.
    pub subdiag_blocks: Vec<Matrix>,
    /// Top `p_1 x p` block of `U'B`.
    pub b1: Matrix,
    /// Singular values of `B_1` followed by those of each subdiagonal block.
    #[serde(skip)]
    block_singular_values: Vec<Vec<f64>>,
}

impl StaircaseForm {
    /// Entries of `U'AU` below the first block subdiagonal and of `U'B` below
    /// the first block, as a max-abs value.
    pub fn pattern_defect(&self) -> f64 {
        let mut offsets = vec![0usize];
        for s in &self.block_sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        let n = self.a_hat.rows();
        let mut worst: f64 = 0.0;
        for (bi, w) in offsets.windows(2).enumerate() {
            // rows of block row bi may only touch block columns >= bi - 1
            let first_col = if bi >= 1 { offsets[bi - 1] } else { 0 };
            for i in w[0]..w[1] {
                for j in 0..first_col {
                    worst = worst.max(self.a_hat[(i, j)].abs());
                }
            }
        }
        let p1 = self.block_sizes.first().copied().unwrap_or(0);
        for i in p1..n {
            for j in 0..self.b_hat.cols() {
                worst = worst.max(self.b_hat[(i, j)].abs());
            }
        }
        worst
    }
}

fn block_threshold(rows: usize, cols: usize, sigma_max: f64, scale: f64) -> f64 {
    Tolerances::global().rank_threshold(rows, cols, sigma_max.max(scale))
}

/// Staircase form by iterative block deflation.
pub fn staircase(sys: &LinearSystem) -> Result<StaircaseForm, CtrblError> {
    let (n, p) = (sys.n(), sys.p());
    let scale = sys.bound_m();
    let mut a = sys.a().clone();
    let mut b = sys.b().clone();
    let mut u = Matrix::identity(n);

    let (w, sig) = numkernel::left_basis(&b)?;
    let tau = block_threshold(n, p, sig[0], scale);
    let p1 = sig.iter().filter(|&&s| s > tau).count();
    if p1 == 0 {
        return Err(CtrblError::NotControllable { rank: 0, n });
    }
    let wt = w.transpose();
    a = wt.matmul(&a)?.matmul(&w)?;
    b = wt.matmul(&b)?;
    u = u.matmul(&w)?;
    let mut sizes = vec![p1];
    let mut singular = vec![sig[..p.min(n)].to_vec()];

    let mut col0 = 0;
    let mut off = p1;
    while off < n {
        let pi = *sizes.last().unwrap();
        let blk = a.block(off, n, col0, col0 + pi);
        let (w, sig) = numkernel::left_basis(&blk)?;
        let tau = block_threshold(n - off, pi, sig[0], scale);
        let next = sig.iter().filter(|&&s| s > tau).count();
        if next == 0 {
            return Err(CtrblError::NotControllable { rank: off, n });
        }
        let mut full = Matrix::identity(n);
        full.set_block(off, off, &w);
        let ft = full.transpose();
        a = ft.matmul(&a)?.matmul(&full)?;
        b = ft.matmul(&b)?;
        u = u.matmul(&full)?;
        singular.push(sig[..pi.min(n - off)].to_vec());
        sizes.push(next);
        col0 = off;
        off += next;
    }

    let mut offsets = vec![0usize];
    for s in &sizes {
        offsets.push(offsets.last().unwrap() + s);
    }
    let subdiag_blocks = (1..sizes.len())
        .map(|i| a.block(offsets[i], offsets[i + 1], offsets[i - 1], offsets[i]))
        .collect();
    let b1 = b.block(0, sizes[0], 0, p);
    Ok(StaircaseForm {
        u,
        block_sizes: sizes,
        a_hat: a,
        b_hat: b,
        subdiag_blocks,
        b1,
        block_singular_values: singular,
    })
}

/// `min(sigma_p(B_1), min_i sigma_{p_{i+1}}(A_{i+1,i}))`, zero when a
/// required block is rank deficient.
pub fn coupling_from_staircase(form: &StaircaseForm) -> f64 {
    let p = form.b1.cols();
    let mut mu = f64::INFINITY;
    let b1_sig = &form.block_singular_values[0];
    mu = mu.min(if p <= b1_sig.len() && form.block_sizes[0] == p {
        b1_sig[p - 1]
    } else {
        0.0
    });
    for (i, sig) in form.block_singular_values.iter().enumerate().skip(1) {
        let need = form.block_sizes[i];
        mu = mu.min(if need <= sig.len() { sig[need - 1] } else { 0.0 });
    }
    mu
}

pub fn coupling_coefficient(sys: &LinearSystem) -> Result<f64, CtrblError> {
    Ok(coupling_from_staircase(&staircase(sys)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct ControllabilityReport {
    pub kappa: usize,
    /// `rank(C_k)` for `k = 1..kappa`.
    pub ranks: Vec<usize>,
    pub gramian: Matrix,
    pub sigma_min_gramian: f64,
    pub mu: f64,
    pub bound_m: f64,
    pub staircase: StaircaseForm,
}

/// Full controllability analysis of a controllable system.
pub fn analyze(sys: &LinearSystem) -> Result<ControllabilityReport, CtrblError> {
    let kappa = controllability_index(sys)?;
    let ranks = rank_profile(sys)?[..kappa].to_vec();
    let c = controllability_matrix(sys, kappa)?;
    let sig = numkernel::singular_values(&c)?;
    let smin = sig[sys.n() - 1];
    let form = staircase(sys)?;
    Ok(ControllabilityReport {
        kappa,
        ranks,
        gramian: (&c * &c.transpose()).symmetrize(),
        sigma_min_gramian: smin * smin,
        mu: coupling_from_staircase(&form),
        bound_m: sys.bound_m(),
        staircase: form,
    })
}

/// Both sides of `1/sigma_min(Gamma_kappa) <= mu^-2 (3M/mu)^(2 kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GramianBoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn gramian_bound_from_report(report: &ControllabilityReport) -> GramianBoundCheck {
    let (mu, m, k) = (report.mu, report.bound_m, report.kappa as i32);
    let lhs = 1.0 / report.sigma_min_gramian;
    let rhs = mu.powi(-2) * (3.0 * m / mu).powi(2 * k);
    GramianBoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs,
    }
}

pub fn check_gramian_lower_bound(sys: &LinearSystem) -> Result<GramianBoundCheck, CtrblError> {
    Ok(gramian_bound_from_report(&analyze(sys)?))
}
