use num_complex::Complex64;

use super::{LinalgError, Matrix};
use crate::tolerance::Tolerances;

/// Real Schur decomposition `m = Z T Z'` with `T` quasi upper triangular
/// (1x1 blocks for real eigenvalues, 2x2 blocks for complex pairs).
#[derive(Debug, Clone)]
pub struct RealSchur {
    pub t: Matrix,
    pub z: Matrix,
}

impl RealSchur {
    /// Eigenvalues read off the diagonal blocks, in Schur order.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let t = &self.t;
        let n = t.rows();
        let mut out = Vec::with_capacity(n);
        let mut i = 0;
        while i < n {
            if i + 1 < n && t[(i + 1, i)] != 0.0 {
                let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
                let re = 0.5 * (a + d);
                let disc = 0.25 * (a - d) * (a - d) + b * c;
                let im = (-disc).max(0.0).sqrt();
                out.push(Complex64::new(re, im));
                out.push(Complex64::new(re, -im));
                i += 2;
            } else {
                out.push(Complex64::new(t[(i, i)], 0.0));
                i += 1;
            }
        }
        out
    }
}

/// Householder vector for `x`: returns `(v, beta)` with
/// `(I - beta v v') x = -sign(x0) |x| e_1`.
fn house(x: &[f64]) -> (Vec<f64>, f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut v = x.to_vec();
    if norm == 0.0 {
        return (v, 0.0);
    }
    let alpha = if x[0] >= 0.0 { -norm } else { norm };
    v[0] -= alpha;
    let vtv: f64 = v.iter().map(|a| a * a).sum();
    if vtv == 0.0 {
        return (v, 0.0);
    }
    (v, 2.0 / vtv)
}

/// Apply `(I - beta v v')` from the left to rows `r0..r0+len(v)`, columns `cols`.
fn reflect_rows(m: &mut Matrix, v: &[f64], beta: f64, r0: usize, cols: std::ops::Range<usize>) {
    if beta == 0.0 {
        return;
    }
    for j in cols {
        let dot: f64 = v.iter().enumerate().map(|(i, vi)| vi * m[(r0 + i, j)]).sum();
        let f = beta * dot;
        for (i, vi) in v.iter().enumerate() {
            m[(r0 + i, j)] -= f * vi;
        }
    }
}

/// Apply `(I - beta v v')` from the right to columns `c0..c0+len(v)`, rows `rows`.
fn reflect_cols(m: &mut Matrix, v: &[f64], beta: f64, c0: usize, rows: std::ops::Range<usize>) {
    if beta == 0.0 {
        return;
    }
    for i in rows {
        let dot: f64 = v.iter().enumerate().map(|(j, vj)| vj * m[(i, c0 + j)]).sum();
        let f = beta * dot;
        for (j, vj) in v.iter().enumerate() {
            m[(i, c0 + j)] -= f * vj;
        }
    }
}

/// Orthogonal reduction to upper Hessenberg form, `m = Q H Q'`.
pub fn hessenberg(m: &Matrix) -> Result<(Matrix, Matrix), LinalgError> {
    m.ensure_finite()?;
    if !m.is_square() {
        return Err(LinalgError::NotSquare(m.shape()));
    }
    let n = m.rows();
    let mut h = m.clone();
    let mut q = Matrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = ((k + 1)..n).map(|i| h[(i, k)]).collect();
        let (v, beta) = house(&x);
        reflect_rows(&mut h, &v, beta, k + 1, 0..n);
        reflect_cols(&mut h, &v, beta, k + 1, 0..n);
        reflect_cols(&mut q, &v, beta, k + 1, 0..n);
        for i in (k + 2)..n {
            h[(i, k)] = 0.0;
        }
    }
    Ok((h, q))
}

/// Rotate a 2x2 diagonal block with real eigenvalues into upper triangular form.
fn split_real_block(t: &mut Matrix, z: &mut Matrix, p: usize) {
    let n = t.rows();
    let q = p + 1;
    let (a, b, c, d) = (t[(p, p)], t[(p, q)], t[(q, p)], t[(q, q)]);
    if c == 0.0 {
        return;
    }
    let half = 0.5 * (a - d);
    let disc = half * half + b * c;
    if disc < 0.0 {
        return;
    }
    let sq = disc.sqrt();
    let lambda = 0.5 * (a + d) + if half >= 0.0 { sq } else { -sq };
    // eigenvector of [[a,b],[c,d]] for lambda
    let (v1, v2) = {
        let cand1 = (b, lambda - a);
        let cand2 = (lambda - d, c);
        let n1 = cand1.0.hypot(cand1.1);
        let n2 = cand2.0.hypot(cand2.1);
        if n1 >= n2 {
            (cand1.0 / n1, cand1.1 / n1)
        } else {
            (cand2.0 / n2, cand2.1 / n2)
        }
    };
    // G = [[v1, -v2], [v2, v1]]; T <- G' T G, Z <- Z G
    for j in 0..n {
        let (x, y) = (t[(p, j)], t[(q, j)]);
        t[(p, j)] = v1 * x + v2 * y;
        t[(q, j)] = -v2 * x + v1 * y;
    }
    for i in 0..n {
        let (x, y) = (t[(i, p)], t[(i, q)]);
        t[(i, p)] = v1 * x + v2 * y;
        t[(i, q)] = -v2 * x + v1 * y;
    }
    for i in 0..n {
        let (x, y) = (z[(i, p)], z[(i, q)]);
        z[(i, p)] = v1 * x + v2 * y;
        z[(i, q)] = -v2 * x + v1 * y;
    }
    t[(q, p)] = 0.0;
}

/// One implicit double-shift Francis step on the active window `lo..=hi`.
fn francis_step(t: &mut Matrix, z: &mut Matrix, lo: usize, hi: usize, shift: Option<(f64, f64)>) {
    let n = t.rows();
    let (s, p) = shift.unwrap_or_else(|| {
        let (a, b, c, d) = (t[(hi - 1, hi - 1)], t[(hi - 1, hi)], t[(hi, hi - 1)], t[(hi, hi)]);
        (a + d, a * d - b * c)
    });
    let h = |t: &Matrix, i: usize, j: usize| t[(i, j)];
    let mut x = h(t, lo, lo) * h(t, lo, lo) + h(t, lo, lo + 1) * h(t, lo + 1, lo) - s * h(t, lo, lo) + p;
    let mut y = h(t, lo + 1, lo) * (h(t, lo, lo) + h(t, lo + 1, lo + 1) - s);
    let mut w = h(t, lo + 1, lo) * h(t, lo + 2, lo + 1);
    for k in lo..=(hi - 2) {
        let (v, beta) = house(&[x, y, w]);
        let c0 = if k > lo { k - 1 } else { lo };
        reflect_rows(t, &v, beta, k, c0..n);
        let r1 = (k + 3).min(hi);
        reflect_cols(t, &v, beta, k, 0..(r1 + 1));
        reflect_cols(z, &v, beta, k, 0..n);
        if k > lo {
            t[(k + 1, k - 1)] = 0.0;
            t[(k + 2, k - 1)] = 0.0;
        }
        x = t[(k + 1, k)];
        y = t[(k + 2, k)];
        if k + 3 <= hi {
            w = t[(k + 3, k)];
        }
    }
    let (v, beta) = house(&[x, y]);
    let k = hi - 1;
    reflect_rows(t, &v, beta, k, (k - 1)..n);
    reflect_cols(t, &v, beta, k, 0..(hi + 1));
    reflect_cols(z, &v, beta, k, 0..n);
    t[(hi, hi - 2)] = 0.0;
}

/// Real Schur form via Hessenberg reduction and shifted (Francis) QR.
pub fn real_schur(m: &Matrix) -> Result<RealSchur, LinalgError> {
    let (mut t, mut z) = hessenberg(m)?;
    let n = t.rows();
    if n == 0 {
        return Ok(RealSchur { t, z });
    }
    let max_iter = Tolerances::global().eig_max_iter;
    let eps = f64::EPSILON;
    let norm = t.max_abs();
    let mut hi = n - 1;
    let mut iter = 0usize;
    loop {
        let mut lo = hi;
        while lo > 0 {
            let mut s = t[(lo - 1, lo - 1)].abs() + t[(lo, lo)].abs();
            if s == 0.0 {
                s = norm;
            }
            if t[(lo, lo - 1)].abs() <= eps * s {
                t[(lo, lo - 1)] = 0.0;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            if hi == 0 {
                break;
            }
            hi -= 1;
            iter = 0;
        } else if lo + 1 == hi {
            split_real_block(&mut t, &mut z, lo);
            if hi < 2 {
                break;
            }
            hi -= 2;
            iter = 0;
        } else {
            iter += 1;
            if iter > max_iter {
                return Err(LinalgError::NoConvergence {
                    what: "francis qr",
                    iterations: iter,
                });
            }
            let shift = if iter % 10 == 0 {
                let w = t[(hi, hi - 1)].abs() + t[(hi - 1, hi - 2)].abs();
                Some((1.5 * w, w * w))
            } else {
                None
            };
            francis_step(&mut t, &mut z, lo, hi, shift);
        }
    }
    for i in 0..n {
        for j in 0..i.saturating_sub(1) {
            t[(i, j)] = 0.0;
        }
    }
    Ok(RealSchur { t, z })
}

/// All `n` eigenvalues (with multiplicity) of a square matrix.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>, LinalgError> {
    Ok(real_schur(m)?.eigenvalues())
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &Matrix) -> Result<f64, LinalgError> {
    Ok(eigenvalues(m)?.iter().map(|l| l.norm()).fold(0.0, f64::max))
}
