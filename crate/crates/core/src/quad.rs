//! One-dimensional quadrature helpers.

use crate::error::{DyadicError, Result};

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    // Seed with a few panels so that narrow features are not stepped over.
    let panels = 16;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == panels { b } else { lo + h };
        let fa = f(lo);
        let fm = f(0.5 * (lo + hi));
        let fb = f(hi);
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_rec(&f, lo, hi, fa, fm, fb, whole, tol / panels as f64, MAX_DEPTH)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(DyadicError::Numeric(format!(
            "non-finite integrand on [{a:e}, {b:e}]"
        )));
    }
    if depth == 0 || delta.abs() <= 15.0 * tol || (b - a).abs() <= f64::EPSILON * a.abs().max(b.abs()) {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// Composite trapezoid rule on a sampled grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// `n + 1` equally spaced points from `a` to `b`, endpoints exact.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = (0..=n)
        .map(|i| a + (b - a) * (i as f64 / n as f64))
        .collect();
    out[n] = b;
    out
}
