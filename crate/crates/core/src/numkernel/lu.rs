use super::{LinalgError, Matrix};
use crate::tolerance::Tolerances;

/// LU factorisation with partial pivoting, `P A = L U` packed in one matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self, LinalgError> {
        a.ensure_finite()?;
        if !a.is_square() {
            return Err(LinalgError::NotSquare(a.shape()));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let (piv, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax == 0.0 {
                singular = true;
                continue;
            }
            if piv != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f == 0.0 {
                    continue;
                }
                for j in (k + 1)..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
        Ok(Self {
            lu,
            perm,
            sign,
            singular,
        })
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn determinant(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        (0..self.lu.rows()).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.lu.rows();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
    }

    /// Solve `A X = B` without any conditioning check.
    pub fn solve_unchecked(&self, b: &Matrix) -> Matrix {
        let n = self.lu.rows();
        let mut out = Matrix::zeros(n, b.cols());
        let mut col = vec![0.0; n];
        for j in 0..b.cols() {
            for i in 0..n {
                col[i] = b[(self.perm[i], j)];
            }
            self.solve_in_place(&mut col);
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    /// Reciprocal 1-norm condition number, `1 / (|A|_1 |A^-1|_1)`.
    pub fn rcond(&self, a: &Matrix) -> f64 {
        if self.singular {
            return 0.0;
        }
        let inv = self.solve_unchecked(&Matrix::identity(a.rows()));
        let norm1 = |m: &Matrix| {
            (0..m.cols())
                .map(|j| (0..m.rows()).map(|i| m[(i, j)].abs()).sum::<f64>())
                .fold(0.0_f64, f64::max)
        };
        let denom = norm1(a) * norm1(&inv);
        if denom.is_finite() && denom > 0.0 {
            1.0 / denom
        } else {
            0.0
        }
    }
}

/// Solve `A X = B` for square nonsingular `A`.
///
/// Fails with [`LinalgError::Singular`] on an exactly zero pivot and with
/// [`LinalgError::IllConditioned`] when the reciprocal condition estimate is
/// below the configured threshold.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    b.ensure_finite()?;
    if a.rows() != b.rows() {
        return Err(LinalgError::DimensionMismatch {
            op: "solve",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let lu = Lu::new(a)?;
    if lu.is_singular() {
        return Err(LinalgError::Singular);
    }
    let rcond = lu.rcond(a);
    if rcond < Tolerances::global().rcond_min {
        return Err(LinalgError::IllConditioned { rcond });
    }
    let x = lu.solve_unchecked(b);
    x.ensure_finite()?;
    Ok(x)
}

pub fn inverse(a: &Matrix) -> Result<Matrix, LinalgError> {
    solve(a, &Matrix::identity(a.rows()))
}

pub fn determinant(a: &Matrix) -> Result<f64, LinalgError> {
    Ok(Lu::new(a)?.determinant())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_diagonal() {
        let b = Matrix::column(&[1.0, -2.0, 3.0]);
        assert_eq!(solve(&Matrix::identity(3), &b).unwrap(), b);
        let x = solve(&Matrix::diag(&[2.0, 4.0]), &Matrix::identity(2)).unwrap();
        assert_eq!(x, Matrix::diag(&[0.5, 0.25]));
    }

    #[test]
    fn singular_detected() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(
            solve(&a, &Matrix::identity(2)),
            Err(LinalgError::Singular) | Err(LinalgError::IllConditioned { .. })
        ));
        let a = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0 + 1e-17]]).unwrap();
        assert!(solve(&a, &Matrix::identity(2)).is_err());
    }

    #[test]
    fn determinant_with_pivoting() {
        let a = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(determinant(&a).unwrap(), -1.0);
        let a = Matrix::from_rows(&[[2.0, 0.0, 1.0], [1.0, 3.0, 0.0], [0.0, 1.0, 4.0]]).unwrap();
        // 2*(12-0) - 0 + 1*(1-0) = 25
        assert!((determinant(&a).unwrap() - 25.0).abs() < 1e-12);
    }
}
