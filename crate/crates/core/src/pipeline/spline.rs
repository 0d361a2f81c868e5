//! Natural cubic spline resampling, kept as a reference against which the
//! linear minute-grid interpolation is compared. It is not used by the
//! pipeline: splines can overshoot the bracketing knots and leave the
//! physiological range.

use crate::{Error, Result};

/// Natural cubic spline through `(xs, ys)` evaluated at `query`.
/// `xs` must be strictly increasing with at least two knots.
pub fn natural_cubic_spline(xs: &[f64], ys: &[f64], query: &[f64]) -> Result<Vec<f64>> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(Error::invalid("spline needs at least two knots with matching values"));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("spline knots must be strictly increasing"));
    }
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    // Second derivatives m; m[0] = m[n-1] = 0. Tridiagonal system for the interior.
    let mut m = vec![0.0; n];
    if n > 2 {
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut upper = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            upper[i] = h[i + 1];
            rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
        }
        for i in 1..k {
            let f = h[i] / diag[i - 1];
            diag[i] -= f * upper[i - 1];
            rhs[i] -= f * rhs[i - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for i in (0..k - 1).rev() {
            m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
        }
    }
    Ok(query
        .iter()
        .map(|&x| {
            let i = xs.partition_point(|&k| k <= x).clamp(1, n - 1) - 1;
            let (x0, x1, hi) = (xs[i], xs[i + 1], h[i]);
            let (a, b) = ((x1 - x) / hi, (x - x0) / hi);
            a * ys[i]
                + b * ys[i + 1]
                + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * hi * hi / 6.0
        })
        .collect())
}
