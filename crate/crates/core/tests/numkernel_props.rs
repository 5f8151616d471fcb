use ctl_core::numkernel::{self, Matrix};
use proptest::prelude::*;

fn matrix(rows: std::ops::RangeInclusive<usize>, cols: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Matrix> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |d| Matrix::from_vec(r, c, d).unwrap())
    })
}

fn square(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Matrix> {
    n.prop_flat_map(|n| prop::collection::vec(-5.0f64..5.0, n * n).prop_map(move |d| Matrix::from_vec(n, n, d).unwrap()))
}

fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn qr_reconstructs(m in matrix(1..=50, 1..=50)) {
        let m = if m.rows() < m.cols() { m.transpose() } else { m };
        let (q, r) = numkernel::qr(&m).unwrap();
        let scale = 1.0 + m.max_abs();
        prop_assert!(max_diff(&(&q * &r), &m) <= 1e-12 * scale * m.rows() as f64);
        let qtq = &q.transpose() * &q;
        prop_assert!(max_diff(&qtq, &Matrix::identity(m.cols())) <= 1e-12 * m.rows() as f64);
        for i in 0..r.rows() {
            prop_assert!(r[(i, i)] >= 0.0);
            for j in 0..i {
                prop_assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn eigenvalues_match_trace_and_determinant(m in square(1..=20)) {
        let ev = numkernel::eigenvalues(&m).unwrap();
        prop_assert_eq!(ev.len(), m.rows());
        let sum: num_complex::Complex64 = ev.iter().sum();
        let prod: num_complex::Complex64 = ev.iter().product();
        let scale = 1.0 + numkernel::frobenius_norm(&m);
        prop_assert!((sum.re - m.trace()).abs() <= 1e-9 * scale * m.rows() as f64);
        prop_assert!(sum.im.abs() <= 1e-9 * scale * m.rows() as f64);
        let det = numkernel::determinant(&m).unwrap();
        let mag = 1.0 + det.abs().max(ev.iter().map(|z| z.norm()).product::<f64>());
        prop_assert!((prod.re - det).abs() <= 1e-8 * mag, "prod {prod} det {det}");
    }

    #[test]
    fn singular_values_invariant_under_transpose(m in matrix(1..=12, 1..=12)) {
        let a = numkernel::singular_values(&m).unwrap();
        let b = numkernel::singular_values(&m.transpose()).unwrap();
        let k = a.len().min(b.len());
        let s0 = a.first().copied().unwrap_or(0.0);
        for i in 0..k {
            prop_assert!((a[i] - b[i]).abs() <= 1e-12 * (1.0 + s0) * 12.0);
        }
        for w in a.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn svd_reconstructs(m in matrix(1..=15, 1..=15)) {
        let s = numkernel::svd(&m).unwrap();
        let us = Matrix::from_fn(s.u.rows(), s.s.len(), |i, j| s.u[(i, j)] * s.s[j]);
        let back = &us * &s.v.transpose();
        prop_assert!(max_diff(&back, &m) <= 1e-11 * (1.0 + m.max_abs()) * 15.0);
    }

    #[test]
    fn spectral_radius_below_norm(m in square(1..=12)) {
        let rho = numkernel::spectral_radius(&m).unwrap();
        let norm = numkernel::spectral_norm(&m).unwrap();
        prop_assert!(rho <= norm * (1.0 + 1e-10) + 1e-12);
    }

    #[test]
    fn pinv_penrose_identities(m in matrix(1..=8, 1..=8)) {
        let x = numkernel::pinv(&m).unwrap();
        let scale = 1.0 + m.max_abs() * x.max_abs();
        let mxm = &(&m * &x) * &m;
        prop_assert!(max_diff(&mxm, &m) <= 1e-9 * scale * (1.0 + m.max_abs()));
        let xmx = &(&x * &m) * &x;
        prop_assert!(max_diff(&xmx, &x) <= 1e-9 * scale * (1.0 + x.max_abs()));
        let mx = &m * &x;
        prop_assert!(max_diff(&mx, &mx.transpose()) <= 1e-9 * scale);
        let xm = &x * &m;
        prop_assert!(max_diff(&xm, &xm.transpose()) <= 1e-9 * scale);
    }

    #[test]
    fn symmetric_eigen_reconstructs(m in square(1..=12)) {
        let s = m.symmetrize();
        let (vals, vecs) = numkernel::symmetric_eigen(&s).unwrap();
        for w in vals.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        let back = &(&vecs * &Matrix::diag(&vals)) * &vecs.transpose();
        prop_assert!(max_diff(&back, &s) <= 1e-10 * (1.0 + s.max_abs()) * 12.0);
    }

    #[test]
    fn rank_of_product_is_bounded(a in matrix(1..=8, 1..=8), k in 1usize..=8) {
        // A * (k x cols) slice has rank at most min(rank A, k)
        let b = Matrix::from_fn(a.cols(), k, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let ra = numkernel::rank(&a).unwrap();
        let rab = numkernel::rank(&(&a * &b)).unwrap();
        prop_assert!(rab <= ra.min(k));
    }
}

#[test]
fn rank_is_monotone_in_columns() {
    let rows = [[1.0, 2.0, 3.0, 1.0], [2.0, 4.0, 6.0, 0.0], [0.0, 1.0, 1.0, 1.0]];
    let m = Matrix::from_rows(&rows).unwrap();
    let mut last = 0;
    for c in 1..=4 {
        let r = numkernel::rank(&m.block(0, 3, 0, c)).unwrap();
        assert!(r >= last);
        last = r;
    }
    assert_eq!(last, 3);
}

#[test]
fn solve_residual_on_dense_system() {
    let a = Matrix::from_fn(6, 6, |i, j| 1.0 / (1.0 + i as f64 + j as f64) + if i == j { 2.0 } else { 0.0 });
    let b = Matrix::from_fn(6, 2, |i, j| (i as f64 - 2.5) * (j as f64 + 1.0));
    let x = numkernel::solve(&a, &b).unwrap();
    let r = &(&a * &x) - &b;
    assert!(r.frobenius_norm() <= 1e-10);
}

#[test]
fn pinv_of_repeated_column() {
    let x = numkernel::pinv(&Matrix::column(&[1.0, 1.0])).unwrap();
    assert_eq!(x.shape(), (1, 2));
    assert!((x[(0, 0)] - 0.5).abs() < 1e-15);
    assert!((x[(0, 1)] - 0.5).abs() < 1e-15);
}

#[test]
fn singular_solve_is_reported() {
    let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
    assert!(numkernel::solve(&a, &Matrix::column(&[1.0, 1.0])).is_err());
}
