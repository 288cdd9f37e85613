//! Constant-coefficient analysis of the three-mode gluing system.
//!
//! With constant coefficients `p = q/2`, the three-mode system is `h' = q A h`
//! where
//!
//! ```text
//!     | 1 - lambda^-2/q   -1/2        0           |
//! A = | 1                 -1/q        lambda^beta |
//!     | 0                 -2 lambda^b -lambda^2/q |
//! ```
//!
//! `A` tends to `A0` as `q -> inf`. The endpoint map `B = exp(qA)` shares the
//! eigenvectors of `A`; the top-right 2x2 block `B~` of `B` has a real
//! eigenvalue `rho` whose size grows like `exp(q kappa)`. [`find_q`] walks a
//! geometric grid of `q` and returns the first value at which every
//! inequality of the constant-coefficient argument is verified numerically.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DyadicError, Result};
use crate::linalg::{expm, spectral_norm, Mat3};
use crate::model::Params;

/// First point of the coupling-strength search grid.
pub const Q_GRID_START: f64 = 1.0;
/// Ratio between successive grid points.
pub const Q_GRID_RATIO: f64 = 1.25;
/// Largest coupling strength the search will try.
pub const Q_GRID_CAP: f64 = 2000.0;
/// Above this value of `q kappa` the exponential is assembled from the eigenbasis.
pub const EIGEN_EXP_SWITCH: f64 = 700.0;

/// Real eigenvalue, upper complex eigenvalue and the normalized real eigenbasis
/// `v1`, `v2 +- i v3` with `x1 = x2 = 1`, `x3 = 0`. Vectors are `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenBasis {
    pub kappa: f64,
    pub w_re: f64,
    pub w_im: f64,
    pub v1: [f64; 3],
    pub v2: [f64; 3],
    pub v3: [f64; 3],
}

impl EigenBasis {
    pub fn w(&self) -> Complex64 {
        Complex64::new(self.w_re, self.w_im)
    }

    /// Columns `v1, v2, v3`.
    pub fn matrix(&self) -> Mat3 {
        Mat3::from_columns(&[
            self.v1.into(),
            self.v2.into(),
            self.v3.into(),
        ])
    }

    /// `|v1| + |v2| + |v3|` (Euclidean norms).
    pub fn vector_norm_sum(&self) -> f64 {
        [self.v1, self.v2, self.v3]
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .sum()
    }

    /// `z3 - y1 y3`.
    pub fn gap(&self) -> f64 {
        self.v3[2] - self.v1[1] * self.v3[1]
    }

    /// Largest eigen-residual `|M v - s v| / |v|` over the three eigenpairs of `m`.
    pub fn max_residual(&self, m: &Mat3) -> f64 {
        let v1: nalgebra::Vector3<f64> = self.v1.into();
        let r1 = (m * v1 - v1 * self.kappa).norm() / v1.norm();
        let v2: nalgebra::Vector3<f64> = self.v2.into();
        let v3: nalgebra::Vector3<f64> = self.v3.into();
        // (M - w)(v2 + i v3) = 0 splits into real and imaginary parts
        let re = m * v2 - v2 * self.w_re + v3 * self.w_im;
        let im = m * v3 - v3 * self.w_re - v2 * self.w_im;
        let r2 = (re.norm_squared() + im.norm_squared()).sqrt()
            / (v2.norm_squared() + v3.norm_squared()).sqrt();
        r1.max(r2)
    }
}

/// `chi(alpha) = alpha^3 - alpha^2 + (1/2 + 2 lambda^(2 beta)) alpha - 2 lambda^(2 beta)`,
/// the characteristic polynomial of `A0`. The large coefficient is grouped
/// with `alpha - 1` so that `chi(1) = 1/2` holds exactly in floating point.
pub fn char_poly_a0(alpha: f64, p: &Params) -> f64 {
    let l2b = p.lambda.powf(2.0 * p.beta);
    ((alpha - 1.0) * alpha + 0.5) * alpha + 2.0 * l2b * (alpha - 1.0)
}

/// Derivative of [`char_poly_a0`].
pub fn char_poly_a0_deriv(alpha: f64, p: &Params) -> f64 {
    let l2b = p.lambda.powf(2.0 * p.beta);
    3.0 * alpha * alpha - 2.0 * alpha + 0.5 + 2.0 * l2b
}

/// The limit matrix `A0`.
pub fn matrix_a0(p: &Params) -> Mat3 {
    let lb = p.lambda.powf(p.beta);
    Mat3::new(1.0, -0.5, 0.0, 1.0, 0.0, lb, 0.0, -2.0 * lb, 0.0)
}

/// The matrix `A(q)`; `q A(q)` is the constant-coefficient system matrix with `p = q/2`.
pub fn matrix_a(q: f64, p: &Params) -> Result<Mat3> {
    if !(q.is_finite() && q > 0.0) {
        return Err(DyadicError::Domain(format!("q must be > 0, got {q}")));
    }
    let lb = p.lambda.powf(p.beta);
    let l2 = p.lambda * p.lambda;
    Ok(Mat3::new(
        1.0 - 1.0 / (l2 * q),
        -0.5,
        0.0,
        1.0,
        -1.0 / q,
        lb,
        0.0,
        -2.0 * lb,
        -l2 / q,
    ))
}

/// Eigen-data of `A0`: the real root is bracketed in `(3/4, 1)` and refined by
/// safeguarded Newton iteration; the complex pair follows from Vieta.
pub fn eig_a0(p: &Params) -> Result<EigenBasis> {
    p.validate()?;
    let (mut lo, mut hi) = (0.75, 1.0);
    if !(char_poly_a0(lo, p) < 0.0 && char_poly_a0(hi, p) > 0.0) {
        return Err(DyadicError::Numeric(
            "characteristic polynomial does not change sign on (3/4, 1)".into(),
        ));
    }
    let mut x = 0.5 * (lo + hi);
    let mut converged = false;
    for _ in 0..200 {
        let fx = char_poly_a0(x, p);
        if fx == 0.0 {
            converged = true;
            break;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / char_poly_a0_deriv(x, p);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() {
            x = next;
            converged = true;
            break;
        }
        x = next;
    }
    if !converged {
        return Err(DyadicError::Numeric(
            "root finder for the real eigenvalue of A0 did not converge".into(),
        ));
    }
    let kappa = x;
    // trace(A0) = 1 and det(A0) = 2 lambda^(2 beta)
    let l2b = p.lambda.powf(2.0 * p.beta);
    let sum = 1.0 - kappa;
    let prod = 2.0 * l2b / kappa;
    let disc = prod - 0.25 * sum * sum;
    if disc <= 0.0 {
        return Err(DyadicError::Numeric("A0 has no complex eigenvalue pair".into()));
    }
    let w = Complex64::new(0.5 * sum, disc.sqrt());
    basis_from_eigenvalues(&matrix_a0(p), kappa, w)
}

/// Eigen-data of a real 3x3 matrix with one real eigenvalue and a complex
/// pair, normalized as in [`EigenBasis`].
pub fn eigen_basis(m: &Mat3) -> Result<EigenBasis> {
    // chi(x) = x^3 + c2 x^2 + c1 x + c0
    let c2 = -m.trace();
    let c1 = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)] + m[(0, 0)] * m[(2, 2)]
        - m[(0, 2)] * m[(2, 0)]
        + m[(1, 1)] * m[(2, 2)]
        - m[(1, 2)] * m[(2, 1)];
    let c0 = -m.determinant();
    let poly = |x: f64| ((x + c2) * x + c1) * x + c0;
    let dpoly = |x: f64| (3.0 * x + 2.0 * c2) * x + c1;

    let bound = 1.0 + c2.abs().max(c1.abs()).max(c0.abs());
    let (mut lo, mut hi) = (-bound, bound);
    if poly(lo) > 0.0 || poly(hi) < 0.0 {
        return Err(DyadicError::Numeric("failed to bracket a real eigenvalue".into()));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if poly(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut kappa = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = dpoly(kappa);
        if d != 0.0 {
            let step = poly(kappa) / d;
            if step.is_finite() && step.abs() < 1e-6 * (1.0 + kappa.abs()) {
                kappa -= step;
            }
        }
    }
    let b1 = c2 + kappa;
    let b0 = c1 + kappa * b1;
    let disc = b1 * b1 - 4.0 * b0;
    if disc >= 0.0 {
        return Err(DyadicError::Numeric(
            "spectrum is real; no complex eigenvalue pair".into(),
        ));
    }
    let mut w = Complex64::new(-0.5 * b1, 0.5 * (-disc).sqrt());
    let cpoly = |x: Complex64| ((x + c2) * x + c1) * x + c0;
    let cdpoly = |x: Complex64| (x * 3.0 + 2.0 * c2) * x + c1;
    for _ in 0..3 {
        let d = cdpoly(w);
        if d.norm() > 0.0 {
            let step = cpoly(w) / d;
            if step.norm() < 1e-6 * (1.0 + w.norm()) {
                w -= step;
            }
        }
    }
    basis_from_eigenvalues(m, kappa, w)
}

fn null_vector(m: &Mat3, s: Complex64) -> Result<[Complex64; 3]> {
    let row = |i: usize| -> [Complex64; 3] {
        let mut r = [Complex64::new(0.0, 0.0); 3];
        for (j, rj) in r.iter_mut().enumerate() {
            *rj = Complex64::new(m[(i, j)], 0.0);
            if i == j {
                *rj -= s;
            }
        }
        r
    };
    let cross = |a: [Complex64; 3], b: [Complex64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let rows = [row(0), row(1), row(2)];
    let mut best = cross(rows[0], rows[1]);
    let norm = |v: &[Complex64; 3]| v.iter().map(|c| c.norm_sqr()).sum::<f64>();
    for (i, j) in [(0, 2), (1, 2)] {
        let c = cross(rows[i], rows[j]);
        if norm(&c) > norm(&best) {
            best = c;
        }
    }
    let scale = norm(&best).sqrt();
    if !(scale > 0.0) || best[0].norm() <= 1e-12 * scale {
        return Err(DyadicError::Numeric(
            "eigenvector cannot be normalized to a unit first component".into(),
        ));
    }
    let x = best[0];
    Ok([best[0] / x, best[1] / x, best[2] / x])
}

fn basis_from_eigenvalues(m: &Mat3, kappa: f64, w: Complex64) -> Result<EigenBasis> {
    let w = if w.im < 0.0 { w.conj() } else { w };
    let r = null_vector(m, Complex64::new(kappa, 0.0))?;
    let c = null_vector(m, w)?;
    Ok(EigenBasis {
        kappa,
        w_re: w.re,
        w_im: w.im,
        v1: [1.0, r[1].re, r[2].re],
        v2: [1.0, c[1].re, c[2].re],
        v3: [0.0, c[1].im, c[2].im],
    })
}

/// Constants derived from the limit matrix `A0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub basis0: EigenBasis,
    /// `2 (|v1^0| + |v2^0| + |v3^0|)`.
    pub mu: f64,
    /// `min(z3^0/2 - y1^0 y3^0 / 4, 1/2)`.
    pub nu: f64,
}

impl LimitConstants {
    pub fn new(p: &Params) -> Result<Self> {
        let basis0 = eig_a0(p)?;
        let mu = 2.0 * basis0.vector_norm_sum();
        let nu = (0.5 * basis0.v3[2] - 0.25 * basis0.v1[1] * basis0.v3[1]).min(0.5);
        Ok(LimitConstants { basis0, mu, nu })
    }

    /// `nu^2 / (100 mu^4)`.
    pub fn omega_max(&self) -> f64 {
        self.nu * self.nu / (100.0 * self.mu.powi(4))
    }

    /// `5 mu^3 R / (2 nu)`.
    pub fn k_threshold(&self, r: f64) -> f64 {
        5.0 * self.mu.powi(3) * r / (2.0 * self.nu)
    }
}

/// Bounds on the eigen-data of `A(q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorollaryChecks {
    /// `3/4 < kappa < 1`.
    pub kappa_in_range: bool,
    /// `Re w < 1/8`.
    pub re_w_below_eighth: bool,
    /// `Re w > 0`. Reported only: it holds for `A0` but only for very large `q`
    /// for `A(q)`, and no later inequality depends on it.
    pub re_w_positive: bool,
    pub im_w_positive: bool,
    /// `y1 > y1^0 / 2`.
    pub y1_half_bound: bool,
    /// `y3 < y3^0 / 2`.
    pub y3_half_bound: bool,
    /// `z3 > z3^0 / 2`.
    pub z3_half_bound: bool,
    /// `|v1| + |v2| + |v3| <= mu`.
    pub basis_norm_within_mu: bool,
    /// `z3 - y1 y3 >= nu`.
    pub gap_at_least_nu: bool,
}

impl CorollaryChecks {
    pub fn passes(&self) -> bool {
        self.kappa_in_range
            && self.re_w_below_eighth
            && self.im_w_positive
            && self.y1_half_bound
            && self.y3_half_bound
            && self.z3_half_bound
            && self.basis_norm_within_mu
            && self.gap_at_least_nu
    }

    fn first_failure(&self) -> Option<&'static str> {
        [
            (self.kappa_in_range, "kappa_in_range"),
            (self.re_w_below_eighth, "re_w_below_eighth"),
            (self.im_w_positive, "im_w_positive"),
            (self.y1_half_bound, "y1_half_bound"),
            (self.y3_half_bound, "y3_half_bound"),
            (self.z3_half_bound, "z3_half_bound"),
            (self.basis_norm_within_mu, "basis_norm_within_mu"),
            (self.gap_at_least_nu, "gap_at_least_nu"),
        ]
        .into_iter()
        .find(|(ok, _)| !ok)
        .map(|(_, name)| name)
    }
}

/// Eigen-data of `A(q)` together with the bound checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ACheck {
    pub basis: EigenBasis,
    pub limits: LimitConstants,
    pub checks: CorollaryChecks,
}

pub fn eig_a(q: f64, p: &Params) -> Result<ACheck> {
    let limits = LimitConstants::new(p)?;
    eig_a_with(q, p, &limits)
}

fn eig_a_with(q: f64, p: &Params, limits: &LimitConstants) -> Result<ACheck> {
    let basis = eigen_basis(&matrix_a(q, p)?)?;
    let b0 = &limits.basis0;
    let checks = CorollaryChecks {
        kappa_in_range: basis.kappa > 0.75 && basis.kappa < 1.0,
        re_w_below_eighth: basis.w_re < 0.125,
        re_w_positive: basis.w_re > 0.0,
        im_w_positive: basis.w_im > 0.0,
        y1_half_bound: basis.v1[1] > 0.5 * b0.v1[1],
        y3_half_bound: basis.v3[1] < 0.5 * b0.v3[1],
        z3_half_bound: basis.v3[2] > 0.5 * b0.v3[2],
        basis_norm_within_mu: basis.vector_norm_sum() <= limits.mu,
        gap_at_least_nu: basis.gap() >= limits.nu,
    };
    Ok(ACheck {
        basis,
        limits: *limits,
        checks,
    })
}

/// Coefficients and roots of `U rho^2 + V rho + W = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoQuadratic {
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub discriminant: f64,
    /// Root of larger modulus (real part when the roots are complex).
    pub rho1: f64,
    pub rho2: f64,
    pub real_roots: bool,
}

/// Quadratic for the eigenvalues of `B~` written in the eigenbasis of `A`.
///
/// Internally everything is divided by `k` (and `k^2`) so that only the ratios
/// `a/k`, `b/k` enter; the roots are scaled back at the end.
pub fn rho_quadratic(basis: &EigenBasis, k: f64, a: f64, b: f64) -> Result<RhoQuadratic> {
    if !(k.is_finite() && k > 0.0) {
        return Err(DyadicError::Domain(format!("k must be positive and finite, got {k}")));
    }
    rho_quadratic_scaled(basis, k, a / k, b / k)
}

fn rho_quadratic_scaled(basis: &EigenBasis, k: f64, ar: f64, br: f64) -> Result<RhoQuadratic> {
    let (y1, y2, y3) = (basis.v1[1], basis.v2[1], basis.v3[1]);
    let (z1, z2, z3) = (basis.v1[2], basis.v2[2], basis.v3[2]);
    let u = basis.matrix().determinant();
    let scale = basis.vector_norm_sum().powi(3);
    if u.abs() <= 1e-14 * scale {
        return Err(DyadicError::Numeric(
            "eigenbasis is degenerate (det(v1, v2, v3) = 0)".into(),
        ));
    }
    let v = (1.0 - ar) * (z3 - y1 * y3) + br * (y1 * y2 - y2 * y2 - y3 * y3 + z2 - z1);
    let w = (ar * ar + br * br) * y3 - (ar * y3 + br * y2 - br * y1);
    let disc = v * v - 4.0 * u * w;
    let (r1, r2, real_roots) = if disc > 0.0 {
        let sq = disc.sqrt();
        let big = if v >= 0.0 {
            (-v - sq) / (2.0 * u)
        } else {
            (-v + sq) / (2.0 * u)
        };
        let small = if big != 0.0 { w / (u * big) } else { 0.0 };
        (big, small, true)
    } else {
        let re = -v / (2.0 * u);
        (re, re, false)
    };
    let (r1, r2) = if r1.abs() > r2.abs() || (r1.abs() == r2.abs() && r1 >= r2) {
        (r1, r2)
    } else {
        (r2, r1)
    };
    Ok(RhoQuadratic {
        u,
        v: v * k,
        w: w * k * k,
        discriminant: disc * k * k,
        rho1: r1 * k,
        rho2: r2 * k,
        real_roots,
    })
}

/// `exp(q A)`. For `q kappa` beyond [`EIGEN_EXP_SWITCH`] the result is assembled
/// from the eigenbasis, `B = P diag(k, [[a, b], [-b, a]]) P^-1`.
pub fn exp_qa(q: f64, p: &Params, basis: &EigenBasis) -> Result<Mat3> {
    let a = matrix_a(q, p)?;
    if q * basis.kappa <= EIGEN_EXP_SWITCH {
        return Ok(expm(&(a * q)));
    }
    let pm = basis.matrix();
    let inv = pm
        .try_inverse()
        .ok_or_else(|| DyadicError::Numeric("eigenbasis is singular".into()))?;
    let k = (q * basis.kappa).exp();
    let ab = (basis.w() * q).exp();
    let d = Mat3::new(k, 0.0, 0.0, 0.0, ab.re, ab.im, 0.0, -ab.im, ab.re);
    Ok(pm * d * inv)
}

/// Real eigenvalues of the block `B~ = [[b12, b13], [b22, b23]]`, larger modulus first.
pub fn btilde_eigenvalues(b: &Mat3) -> Option<(f64, f64)> {
    let (a11, a12, a21, a22) = (b[(0, 1)], b[(0, 2)], b[(1, 1)], b[(1, 2)]);
    let tr = a11 + a22;
    let det = a11 * a22 - a12 * a21;
    let disc = tr * tr - 4.0 * det;
    if !(disc > 0.0) {
        return None;
    }
    let sq = disc.sqrt();
    let big = if tr >= 0.0 { 0.5 * (tr + sq) } else { 0.5 * (tr - sq) };
    let small = if big != 0.0 { det / big } else { 0.0 };
    Some((big, small))
}

/// Unit eigenvector `(y, z)` of `B~` for the eigenvalue `rho`, sign fixed by
/// `y >= 0` (and `z > 0` when `y = 0`).
pub fn btilde_eigenvector(b: &Mat3, rho: f64) -> (f64, f64) {
    let (a11, a12, a21, a22) = (b[(0, 1)], b[(0, 2)], b[(1, 1)], b[(1, 2)]);
    // null vectors of the two rows of B~ - rho I
    let c1 = (a12, rho - a11);
    let c2 = (rho - a22, a21);
    let n1 = c1.0.hypot(c1.1);
    let n2 = c2.0.hypot(c2.1);
    let (mut y, mut z, n) = if n1 >= n2 { (c1.0, c1.1, n1) } else { (c2.0, c2.1, n2) };
    if n > 0.0 {
        y /= n;
        z /= n;
    } else {
        y = 1.0;
        z = 0.0;
    }
    if y < 0.0 || (y == 0.0 && z < 0.0) {
        y = -y;
        z = -z;
    }
    (y, z)
}

/// Relative eigen-residual `|B~ (y,z) - rho (y,z)| / (|B| |(y,z)|)`.
pub fn btilde_residual(b: &Mat3, rho: f64, y: f64, z: f64) -> f64 {
    let r1 = b[(0, 1)] * y + b[(0, 2)] * z - rho * y;
    let r2 = b[(1, 1)] * y + b[(1, 2)] * z - rho * z;
    r1.hypot(r2) / (spectral_norm(b) * y.hypot(z))
}

/// Every gate of the constant-coefficient construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralChecks {
    #[serde(flatten)]
    pub corollary: CorollaryChecks,
    /// `k > 5 mu^3 R / (2 nu)`.
    pub k_exceeds_threshold: bool,
    /// `max(|a|, |b|) < omega k` with `omega = nu^2/(100 mu^4)`.
    pub omega_bound: bool,
    pub discriminant_positive: bool,
    /// `max(|rho1|, |rho2|) > R`.
    pub rho_exceeds_r: bool,
    /// `B~ (y, z) = rho (y, z)` within `1e-8` relative.
    pub btilde_eigenpair: bool,
}

impl SpectralChecks {
    pub fn passes(&self) -> bool {
        self.corollary.passes()
            && self.k_exceeds_threshold
            && self.omega_bound
            && self.discriminant_positive
            && self.rho_exceeds_r
            && self.btilde_eigenpair
    }

    pub fn first_failure(&self) -> Option<&'static str> {
        self.corollary.first_failure().or_else(|| {
            [
                (self.k_exceeds_threshold, "k_exceeds_threshold"),
                (self.omega_bound, "omega_bound"),
                (self.discriminant_positive, "discriminant_positive"),
                (self.rho_exceeds_r, "rho_exceeds_r"),
                (self.btilde_eigenpair, "btilde_eigenpair"),
            ]
            .into_iter()
            .find(|(ok, _)| !ok)
            .map(|(_, name)| name)
        })
    }
}

/// Full constant-coefficient report at one coupling strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub lambda: f64,
    pub beta: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub q: f64,
    pub kappa: f64,
    pub w_re: f64,
    pub w_im: f64,
    pub v1: [f64; 3],
    pub v2: [f64; 3],
    pub v3: [f64; 3],
    pub kappa0: f64,
    pub w0_re: f64,
    pub w0_im: f64,
    pub mu: f64,
    pub nu: f64,
    pub k: f64,
    pub a: f64,
    pub b: f64,
    /// Measured `max(|a|, |b|) / k`.
    pub omega: f64,
    /// `nu^2 / (100 mu^4)`.
    pub omega_max: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub discriminant: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho: f64,
    pub y: f64,
    pub z: f64,
    /// `B = exp(qA)`, row major.
    pub b_matrix: [[f64; 3]; 3],
    pub btilde_residual: f64,
    #[serde(flatten)]
    pub checks: SpectralChecks,
    pub pass: bool,
}

impl SpectralReport {
    pub fn b(&self) -> Mat3 {
        let m = &self.b_matrix;
        Mat3::new(
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        )
    }

    pub fn basis(&self) -> EigenBasis {
        EigenBasis {
            kappa: self.kappa,
            w_re: self.w_re,
            w_im: self.w_im,
            v1: self.v1,
            v2: self.v2,
            v3: self.v3,
        }
    }
}

/// Evaluate every gate at a fixed `q` (no search).
pub fn evaluate_q(q: f64, p: &Params, r: f64) -> Result<SpectralReport> {
    let limits = LimitConstants::new(p)?;
    evaluate_q_with(q, p, r, &limits)
}

fn evaluate_q_with(q: f64, p: &Params, r: f64, limits: &LimitConstants) -> Result<SpectralReport> {
    if !(r.is_finite() && r > 0.0) {
        return Err(DyadicError::Domain(format!("R must be > 0, got {r}")));
    }
    let ac = eig_a_with(q, p, limits)?;
    let basis = ac.basis;
    let ln_k = q * basis.kappa;
    let k = ln_k.exp();
    // a/k + i b/k = exp(q (w - kappa)); never overflows
    let ratio = (Complex64::new(basis.w_re - basis.kappa, basis.w_im) * q).exp();
    let quad = rho_quadratic_scaled(&basis, k, ratio.re, ratio.im)?;
    let omega = ratio.re.abs().max(ratio.im.abs());
    let bmat = exp_qa(q, p, &basis)?;
    let rho = quad.rho1;
    let (y, z) = btilde_eigenvector(&bmat, rho);
    let resid = btilde_residual(&bmat, rho, y, z);
    let checks = SpectralChecks {
        corollary: ac.checks,
        k_exceeds_threshold: ln_k > limits.k_threshold(r).ln(),
        omega_bound: omega < limits.omega_max(),
        discriminant_positive: quad.real_roots,
        rho_exceeds_r: quad.real_roots && quad.rho1.abs().max(quad.rho2.abs()) > r,
        btilde_eigenpair: resid <= 1e-8,
    };
    let mut b_matrix = [[0.0; 3]; 3];
    for (i, row) in b_matrix.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = bmat[(i, j)];
        }
    }
    Ok(SpectralReport {
        lambda: p.lambda,
        beta: p.beta,
        r,
        q,
        kappa: basis.kappa,
        w_re: basis.w_re,
        w_im: basis.w_im,
        v1: basis.v1,
        v2: basis.v2,
        v3: basis.v3,
        kappa0: limits.basis0.kappa,
        w0_re: limits.basis0.w_re,
        w0_im: limits.basis0.w_im,
        mu: limits.mu,
        nu: limits.nu,
        k,
        a: ratio.re * k,
        b: ratio.im * k,
        omega,
        omega_max: limits.omega_max(),
        u: quad.u,
        v: quad.v,
        w: quad.w,
        discriminant: quad.discriminant,
        rho1: quad.rho1,
        rho2: quad.rho2,
        rho,
        y,
        z,
        b_matrix,
        btilde_residual: resid,
        pass: checks.passes(),
        checks,
    })
}

/// One rejected grid point of [`find_q`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedCandidate {
    pub q: f64,
    pub reason: String,
}

/// Search failure: the first failing gate of every candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchTrace(pub Vec<RejectedCandidate>);

impl fmt::Display for SearchTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "q={:.6}: {}", c.q, c.reason)?;
        }
        Ok(())
    }
}

/// Points `q0 * 1.25^j` up to the cap.
pub fn q_grid() -> impl Iterator<Item = f64> {
    (0..)
        .map(|j| Q_GRID_START * Q_GRID_RATIO.powi(j))
        .take_while(|&q| q <= Q_GRID_CAP)
}

/// Smallest grid value of `q` at which every gate passes for threshold `r`.
pub fn find_q(p: &Params, r: f64) -> Result<SpectralReport> {
    if !(r.is_finite() && r > 0.0) {
        return Err(DyadicError::Domain(format!("R must be > 0, got {r}")));
    }
    let limits = LimitConstants::new(p)?;
    let mut trace = Vec::new();
    for q in q_grid() {
        match evaluate_q_with(q, p, r, &limits) {
            Ok(rep) if rep.pass => return Ok(rep),
            Ok(rep) => trace.push(RejectedCandidate {
                q,
                reason: rep.checks.first_failure().unwrap_or("unknown").to_string(),
            }),
            Err(e) => trace.push(RejectedCandidate {
                q,
                reason: e.to_string(),
            }),
        }
    }
    Err(DyadicError::Search(format!(
        "no q <= {Q_GRID_CAP} passes every gate: {}",
        SearchTrace(trace)
    )))
}
