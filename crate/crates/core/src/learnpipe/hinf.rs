use super::LearnError;
use crate::numkernel::{self, Matrix};
use crate::tolerance::Tolerances;

/// `|W (e^{iw} I - F)^{-1}|_2` through the real embedding of the complex
/// resolvent.
fn weighted_resolvent_norm(f: &Matrix, weight: Option<&Matrix>, omega: f64) -> Result<f64, LearnError> {
    let n = f.rows();
    let (c, s) = (omega.cos(), omega.sin());
    let mut e = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let re = if i == j { c } else { 0.0 } - f[(i, j)];
            e[(i, j)] = re;
            e[(i + n, j + n)] = re;
        }
        e[(i, i + n)] = -s;
        e[(i + n, i)] = s;
    }
    let inv = numkernel::inverse(&e)?;
    let m = match weight {
        Some(w) => &Matrix::block_diag(&[w, w]) * &inv,
        None => inv,
    };
    Ok(numkernel::spectral_norm(&m)?)
}

/// `sup_{|z|=1} |W (zI - F)^{-1}|_2` for stable `F`.
///
/// Evaluated on an equispaced unit-circle grid (the upper half suffices by
/// conjugate symmetry), then refined by golden-section search around the
/// best grid point.
pub fn hinf_norm(f: &Matrix, weight: Option<&Matrix>) -> Result<f64, LearnError> {
    let radius = numkernel::spectral_radius(f)?;
    if radius >= 1.0 {
        return Err(LearnError::Unstable { radius });
    }
    if let Some(w) = weight {
        if w.cols() != f.rows() {
            return Err(LearnError::Parameter(format!(
                "weight has {} columns, state dimension is {}",
                w.cols(),
                f.rows()
            )));
        }
        if w.max_abs() == 0.0 {
            return Ok(0.0);
        }
    }
    let tol = Tolerances::global();
    let grid = tol.hinf_grid.max(4);
    let step = 2.0 * std::f64::consts::PI / grid as f64;
    let half = grid / 2;
    let mut best = (0usize, f64::NEG_INFINITY);
    for k in 0..=half {
        let v = weighted_resolvent_norm(f, weight, k as f64 * step)?;
        if v > best.1 {
            best = (k, v);
        }
    }
    let (k, grid_max) = best;
    let mut lo = (k as f64 - 1.0) * step;
    let mut hi = (k as f64 + 1.0) * step;
    lo = lo.max(0.0);
    hi = hi.min(std::f64::consts::PI);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = weighted_resolvent_norm(f, weight, x1)?;
    let mut f2 = weighted_resolvent_norm(f, weight, x2)?;
    let target = tol.hinf_refine_rel * step.max(k as f64 * step);
    while hi - lo > target {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = weighted_resolvent_norm(f, weight, x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = weighted_resolvent_norm(f, weight, x2)?;
        }
    }
    Ok(grid_max.max(f1).max(f2))
}

/// `sum_{t<terms} |F^t|_2`, an upper envelope of the resolvent norm.
pub fn power_series_envelope(f: &Matrix, terms: usize) -> Result<f64, LearnError> {
    let mut pw = Matrix::identity(f.rows());
    let mut total = 0.0;
    for _ in 0..terms {
        let s = numkernel::spectral_norm(&pw)?;
        total += s;
        if s < 1e-18 * total {
            break;
        }
        pw = &pw * f;
    }
    Ok(total)
}
