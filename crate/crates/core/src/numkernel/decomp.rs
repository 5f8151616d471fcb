use super::{LinalgError, Matrix};
use crate::tolerance::Tolerances;

/// Householder QR of a tall matrix.
///
/// Returns the thin factors `(Q, R)` with `Q` of shape `rows x cols`,
/// orthonormal columns, and `R` upper triangular with a nonnegative diagonal.
pub fn qr(m: &Matrix) -> Result<(Matrix, Matrix), LinalgError> {
    let (q, r) = qr_full(m)?;
    let c = m.cols();
    Ok((q.block(0, m.rows(), 0, c), r.block(0, c, 0, c)))
}

/// Full Householder QR: `Q` is `rows x rows` orthogonal, `R` is `rows x cols`.
pub fn qr_full(m: &Matrix) -> Result<(Matrix, Matrix), LinalgError> {
    m.ensure_finite()?;
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(LinalgError::DimensionMismatch {
            op: "qr (needs rows >= cols)",
            left: m.shape(),
            right: (cols, cols),
        });
    }
    let mut r = m.clone();
    let mut reflectors: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    for k in 0..cols.min(rows.saturating_sub(1)) {
        let norm = (k..rows).map(|i| r[(i, k)].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[(k, k)] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        for j in k..cols {
            let dot: f64 = v.iter().enumerate().map(|(i, vi)| vi * r[(k + i, j)]).sum();
            let f = beta * dot;
            for (i, vi) in v.iter().enumerate() {
                r[(k + i, j)] -= f * vi;
            }
        }
        for i in (k + 1)..rows {
            r[(i, k)] = 0.0;
        }
        reflectors.push((k, v, beta));
    }
    let mut q = Matrix::identity(rows);
    for (k, v, beta) in reflectors.iter().rev() {
        for j in 0..rows {
            let dot: f64 = v.iter().enumerate().map(|(i, vi)| vi * q[(k + i, j)]).sum();
            let f = beta * dot;
            for (i, vi) in v.iter().enumerate() {
                q[(k + i, j)] -= f * vi;
            }
        }
    }
    for k in 0..cols.min(rows) {
        if r[(k, k)] < 0.0 {
            for j in 0..cols {
                r[(k, j)] = -r[(k, j)];
            }
            for i in 0..rows {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }
    Ok((q, r))
}

/// One-sided (Hestenes) Jacobi orthogonalisation of the columns of `a`.
///
/// Returns the rotated columns `a V` (stored column-wise) and the orthogonal
/// `V` of size `cols x cols`. Works for any shape.
fn hestenes(a: &Matrix) -> Result<(Vec<Vec<f64>>, Matrix), LinalgError> {
    let (rows, cols) = a.shape();
    let mut w: Vec<Vec<f64>> = (0..cols).map(|j| a.col_vec(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let max_sweeps = Tolerances::global().jacobi_max_sweeps;
    let eps = f64::EPSILON;
    let orth_tol = (rows as f64).sqrt() * eps;
    // columns below this squared norm are at rounding level and left alone
    let floor = {
        let fro2: f64 = w.iter().flatten().map(|x| x * x).sum();
        eps * eps * fro2
    };
    let mut converged = cols < 2;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (alpha, beta, gamma) = {
                    let (wp, wq) = (&w[p], &w[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for i in 0..rows {
                        alpha += wp[i] * wp[i];
                        beta += wq[i] * wq[i];
                        gamma += wp[i] * wq[i];
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0 || gamma.abs() <= orth_tol * (alpha * beta).sqrt() || alpha.min(beta) <= floor {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = w.split_at_mut(q);
                let (wp, wq) = (&mut lo[p], &mut hi[0]);
                for i in 0..rows {
                    let (x, y) = (wp[i], wq[i]);
                    wp[i] = c * x - s * y;
                    wq[i] = s * x + c * y;
                }
                let (lo, hi) = v.split_at_mut(q);
                let (vp, vq) = (&mut lo[p], &mut hi[0]);
                for i in 0..cols {
                    let (x, y) = (vp[i], vq[i]);
                    vp[i] = c * x - s * y;
                    vq[i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence {
            what: "jacobi svd",
            iterations: max_sweeps,
        });
    }
    let v = Matrix::from_fn(cols, cols, |i, j| v[j][i]);
    Ok((w, v))
}

/// Thin singular value decomposition `m = U diag(s) V'`, `s` nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

pub fn svd(m: &Matrix) -> Result<Svd, LinalgError> {
    m.ensure_finite()?;
    if m.rows() < m.cols() {
        let t = svd(&m.transpose())?;
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    let (w, v) = hestenes(m)?;
    let rows = m.rows();
    let mut order: Vec<(usize, f64)> = w
        .iter()
        .enumerate()
        .map(|(j, col)| (j, col.iter().map(|x| x * x).sum::<f64>().sqrt()))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let k = order.len();
    let mut u = Matrix::zeros(rows, k);
    let mut vs = Matrix::zeros(v.rows(), k);
    let mut s = Vec::with_capacity(k);
    for (dst, &(src, sigma)) in order.iter().enumerate() {
        s.push(sigma);
        if sigma > 0.0 {
            for i in 0..rows {
                u[(i, dst)] = w[src][i] / sigma;
            }
        }
        for i in 0..v.rows() {
            vs[(i, dst)] = v[(i, src)];
        }
    }
    Ok(Svd { u, s, v: vs })
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>, LinalgError> {
    Ok(svd(m)?.s)
}

/// Complete orthonormal basis of the row space `R^rows` ordered by the
/// singular values of `m` along each direction.
///
/// Returns `(W, sigma)` with `W` orthogonal (`rows x rows`) such that the
/// `i`-th row of `W' m` has norm `sigma[i]`, nonincreasing, and those rows
/// are mutually orthogonal.
pub fn left_basis(m: &Matrix) -> Result<(Matrix, Vec<f64>), LinalgError> {
    m.ensure_finite()?;
    let (w, v) = hestenes(&m.transpose())?;
    let mut order: Vec<(usize, f64)> = w
        .iter()
        .enumerate()
        .map(|(j, col)| (j, col.iter().map(|x| x * x).sum::<f64>().sqrt()))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let n = v.rows();
    let mut basis = Matrix::zeros(n, n);
    for (dst, &(src, _)) in order.iter().enumerate() {
        for i in 0..n {
            basis[(i, dst)] = v[(i, src)];
        }
    }
    Ok((basis, order.into_iter().map(|(_, s)| s).collect()))
}

/// Numerical rank under the shared relative threshold.
pub fn rank(m: &Matrix) -> Result<usize, LinalgError> {
    let s = singular_values(m)?;
    Ok(rank_from_singular_values(&s, m.rows(), m.cols()))
}

pub fn rank_from_singular_values(s: &[f64], rows: usize, cols: usize) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    let tau = Tolerances::global().rank_threshold(rows, cols, smax);
    s.iter().filter(|&&x| x > tau).count()
}

pub fn spectral_norm(m: &Matrix) -> Result<f64, LinalgError> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

pub fn frobenius_norm(m: &Matrix) -> f64 {
    m.frobenius_norm()
}

/// Moore-Penrose pseudoinverse with the shared relative rank threshold.
pub fn pinv(m: &Matrix) -> Result<Matrix, LinalgError> {
    let Svd { u, s, v } = svd(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let tau = Tolerances::global().rank_threshold(m.rows(), m.cols(), smax);
    let mut out = Matrix::zeros(m.cols(), m.rows());
    for (k, &sk) in s.iter().enumerate() {
        if sk <= tau || sk == 0.0 {
            continue;
        }
        for i in 0..m.cols() {
            let vik = v[(i, k)] / sk;
            if vik == 0.0 {
                continue;
            }
            for j in 0..m.rows() {
                out[(i, j)] += vik * u[(j, k)];
            }
        }
    }
    Ok(out)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Only the upper triangle's symmetrised part is used. Eigenvalues are
/// returned in nondecreasing order with matching eigenvector columns.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix), LinalgError> {
    m.ensure_finite()?;
    if !m.is_square() {
        return Err(LinalgError::NotSquare(m.shape()));
    }
    let n = m.rows();
    let mut a = m.symmetrize();
    let mut v = Matrix::identity(n);
    let max_sweeps = Tolerances::global().jacobi_max_sweeps;
    let mut converged = n < 2;
    for _ in 0..max_sweeps {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        let diag: f64 = (0..n).map(|i| a[(i, i)].powi(2)).sum();
        if off <= (f64::EPSILON * f64::EPSILON) * diag || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence {
            what: "symmetric jacobi",
            iterations: max_sweeps,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((values, vectors))
}

/// True iff the smallest eigenvalue of the symmetric part is at least `-tol`.
pub fn is_psd(m: &Matrix, tol: f64) -> Result<bool, LinalgError> {
    let (values, _) = symmetric_eigen(m)?;
    Ok(values.first().map_or(true, |&l| l >= -tol))
}

/// `m^k` by repeated squaring; `m^0 = I`.
pub fn mat_pow(m: &Matrix, mut k: u32) -> Result<Matrix, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare(m.shape()));
    }
    let mut result = Matrix::identity(m.rows());
    let mut base = m.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    Ok(result)
}
