//! Time-ordered exponentials of 3x3 matrix paths.
//!
//! The fundamental solution of `h' = M(t) h` on `[a, b]` is approximated by the
//! exponential-midpoint product
//!
//! ```text
//! P_n = exp(dt M(t_{n-1/2})) ... exp(dt M(t_{1/2}))
//! ```
//!
//! (later factors on the left). The rule is time-symmetric, so its error
//! expansion contains only even powers of `dt` and repeated step halving can be
//! Richardson-extrapolated.

use std::fmt;
use std::sync::Arc;

use crate::error::{DyadicError, Result};
use crate::linalg::{expm, spectral_norm, Mat3};
use crate::quad::adaptive_simpson;

/// Initial number of sub-steps.
const START_STEPS: usize = 16;
/// Largest number of sub-steps before giving up.
pub const MAX_STEPS: usize = 1 << 20;
/// Absolute tolerance used for the L1 norms of paths.
const L1_TOL: f64 = 1e-12;

type PathFn = Arc<dyn Fn(f64) -> Mat3 + Send + Sync>;

/// A matrix-valued function on a closed interval.
#[derive(Clone)]
pub struct MatrixPath {
    a: f64,
    b: f64,
    eval: PathFn,
    l1_norm: f64,
}

impl fmt::Debug for MatrixPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixPath")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("l1_norm", &self.l1_norm)
            .finish()
    }
}

impl MatrixPath {
    pub fn new<F>(a: f64, b: f64, eval: F) -> Result<Self>
    where
        F: Fn(f64) -> Mat3 + Send + Sync + 'static,
    {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(DyadicError::Domain(format!("invalid interval [{a}, {b}]")));
        }
        let eval: PathFn = Arc::new(eval);
        let f = eval.clone();
        let l1_norm = adaptive_simpson(|t| spectral_norm(&f(t)), a, b, L1_TOL)?;
        Ok(MatrixPath { a, b, eval, l1_norm })
    }

    pub fn constant(a: f64, b: f64, m: Mat3) -> Result<Self> {
        Self::new(a, b, move |_| m)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn eval(&self, t: f64) -> Mat3 {
        (self.eval)(t)
    }

    /// `int_a^b |M(t)| dt` in the spectral norm.
    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    /// The same function restricted to `[a, b]` inside the current interval.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self> {
        if a < self.a || b > self.b {
            return Err(DyadicError::Contract(format!(
                "[{a}, {b}] is not inside [{}, {}]",
                self.a, self.b
            )));
        }
        let f = self.eval.clone();
        Self::new(a, b, move |t| f(t))
    }
}

/// Exponential-midpoint product with `n` equal steps.
pub fn midpoint_product(path: &MatrixPath, n: usize) -> Mat3 {
    let dt = (path.b - path.a) / n as f64;
    let mut p = Mat3::identity();
    for i in 0..n {
        let mid = path.a + (i as f64 + 0.5) * dt;
        p = expm(&(path.eval(mid) * dt)) * p;
    }
    p
}

/// Result of [`texp_with_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TexpResult {
    pub matrix: Mat3,
    /// Spectral-norm difference between the last two extrapolated iterates.
    pub error_estimate: f64,
    pub steps: usize,
}

/// Time-ordered exponential to tolerance `tol`, measured as
/// `tol * max(1, |B|)` in the spectral norm.
pub fn texp(path: &MatrixPath, tol: f64) -> Result<Mat3> {
    texp_with_estimate(path, tol).map(|r| r.matrix)
}

pub fn texp_with_estimate(path: &MatrixPath, tol: f64) -> Result<TexpResult> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(DyadicError::Domain(format!("tol must be > 0, got {tol}")));
    }
    // Romberg tableau on the step-halving sequence; rows hold extrapolants.
    let mut prev_row: Vec<Mat3> = vec![midpoint_product(path, START_STEPS)];
    let mut n = START_STEPS;
    loop {
        n *= 2;
        if n > MAX_STEPS {
            let last = prev_row.last().copied().unwrap_or_else(Mat3::identity);
            let before = prev_row.first().copied().unwrap_or_else(Mat3::identity);
            return Err(DyadicError::Numeric(format!(
                "time-ordered exponential did not converge within {MAX_STEPS} steps; \
                 last iterates {:?} and {:?}",
                last.as_slice(),
                before.as_slice()
            )));
        }
        let mut row: Vec<Mat3> = Vec::with_capacity(prev_row.len() + 1);
        row.push(midpoint_product(path, n));
        let mut factor = 1.0;
        for (m, prev) in prev_row.iter().enumerate() {
            factor *= 4.0;
            let r = row[m] + (row[m] - prev) / (factor - 1.0);
            row.push(r);
        }
        let best = *row.last().unwrap();
        let err = spectral_norm(&(best - prev_row.last().unwrap()));
        if !best.iter().all(|x| x.is_finite()) {
            return Err(DyadicError::Numeric(
                "time-ordered exponential overflowed".into(),
            ));
        }
        if err < tol * spectral_norm(&best).max(1.0) {
            return Ok(TexpResult {
                matrix: best,
                error_estimate: err,
                steps: n,
            });
        }
        prev_row = row;
    }
}

/// `exp(max(|M1|_L1, |M2|_L1)) * int |M1 - M2| dt`, an upper bound for
/// `|texp(M1) - texp(M2)|`.
pub fn texp_continuity_bound(path1: &MatrixPath, path2: &MatrixPath) -> Result<f64> {
    if path1.interval() != path2.interval() {
        return Err(DyadicError::Contract(format!(
            "interval mismatch: {:?} vs {:?}",
            path1.interval(),
            path2.interval()
        )));
    }
    let (a, b) = path1.interval();
    let diff = adaptive_simpson(
        |t| spectral_norm(&(path1.eval(t) - path2.eval(t))),
        a,
        b,
        L1_TOL,
    )?;
    let l = path1.l1_norm().max(path2.l1_norm());
    Ok(l.exp() * diff)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_path_is_identity() {
        let path = MatrixPath::constant(0.0, 1.0, Mat3::zeros()).unwrap();
        assert_eq!(texp(&path, 1e-12).unwrap(), Mat3::identity());
        assert_eq!(path.l1_norm(), 0.0);
    }

    #[test]
    fn constant_path_matches_expm() {
        let m = Mat3::new(0.3, -1.0, 0.2, 0.5, -0.4, 1.1, 0.0, -0.7, 0.1);
        let path = MatrixPath::constant(0.0, 1.0, m).unwrap();
        let b = texp(&path, 1e-12).unwrap();
        assert!(spectral_norm(&(b - expm(&m))) < 1e-12);
    }

    #[test]
    fn diagonal_path_closed_form() {
        let path = MatrixPath::new(0.0, 2.0, |t| Mat3::from_diagonal(&[t.sin(), -t, t * t].into()))
            .unwrap();
        let b = texp(&path, 1e-12).unwrap();
        let exact = [1.0 - 2f64.cos(), -2.0, 8.0 / 3.0];
        for (i, e) in exact.iter().enumerate() {
            assert!((b[(i, i)] - e.exp()).abs() < 1e-10 * e.exp().max(1.0));
        }
    }

    #[test]
    fn ordering_is_later_on_left() {
        // piecewise constant non-commuting path
        let m1 = Mat3::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let m2 = Mat3::new(0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let smooth = move |t: f64| {
            let s = 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
            m1 * s + m2 * (1.0 - s)
        };
        let whole = texp(&MatrixPath::new(0.0, 1.0, smooth).unwrap(), 1e-12).unwrap();
        let first = texp(&MatrixPath::new(0.0, 0.4, smooth).unwrap(), 1e-12).unwrap();
        let second = texp(&MatrixPath::new(0.4, 1.0, smooth).unwrap(), 1e-12).unwrap();
        assert!(spectral_norm(&(whole - second * first)) < 1e-10);
        assert!(spectral_norm(&(whole - first * second)) > 1e-3);
    }

    #[test]
    fn bound_vanishes_for_identical_paths() {
        let m = Mat3::new(0.3, -1.0, 0.2, 0.5, -0.4, 1.1, 0.0, -0.7, 0.1);
        let p = MatrixPath::constant(0.0, 1.0, m).unwrap();
        assert_eq!(texp_continuity_bound(&p, &p.clone()).unwrap(), 0.0);
        let q = MatrixPath::constant(0.0, 2.0, m).unwrap();
        assert!(matches!(
            texp_continuity_bound(&p, &q),
            Err(DyadicError::Contract(_))
        ));
    }

    #[test]
    fn shifted_identity_perturbation() {
        let m = Mat3::new(0.3, -1.0, 0.2, 0.5, -0.4, 1.1, 0.0, -0.7, 0.1);
        let eps = 1e-3;
        let p1 = MatrixPath::constant(0.0, 1.0, m).unwrap();
        let p2 = MatrixPath::constant(0.0, 1.0, m + Mat3::identity() * eps).unwrap();
        let bound = texp_continuity_bound(&p1, &p2).unwrap();
        let actual = spectral_norm(&(expm(&m) * (eps.exp() - 1.0)));
        assert!((bound / p1.l1_norm().max(p2.l1_norm()).exp() - eps).abs() < 1e-12);
        assert!(actual <= bound);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let p = MatrixPath::constant(0.0, 1.0, Mat3::zeros()).unwrap();
        assert!(texp(&p, 0.0).is_err());
        assert!(MatrixPath::constant(1.0, 1.0, Mat3::zeros()).is_err());
    }
}
