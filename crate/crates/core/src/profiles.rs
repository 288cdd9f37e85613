//! Compactly supported smooth plateau profiles and their calibration.

use serde::{Deserialize, Serialize};

use crate::error::{DyadicError, Result};
use crate::linalg::{spectral_norm, Mat3};
use crate::model::Params;
use crate::spectral::{btilde_eigenvalues, btilde_eigenvector, btilde_residual, SpectralReport};
use crate::texp::{texp_continuity_bound, texp_with_estimate, MatrixPath};

/// First ramp width tried by [`calibrate_profiles`].
pub const EPS_START: f64 = 0.05;
/// Calibration gives up below this ramp width.
pub const EPS_MIN: f64 = 1e-6;
/// Tolerance for the time-ordered exponential during calibration.
pub const CALIBRATION_TEXP_TOL: f64 = 1e-11;

fn sigma(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth step on `[0, 1]`: 0 below, 1 above, all derivatives vanish at both ends.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = sigma(s);
    a / (a + sigma(1.0 - s))
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_deriv(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let a = sigma(s);
    let b = sigma(1.0 - s);
    let d = a + b;
    a * b * (1.0 / (s * s) + 1.0 / ((1.0 - s) * (1.0 - s))) / (d * d)
}

/// `c * phi_eps(tau)`: zero outside `(0, 1)`, equal to `c` on `[eps, 1 - eps]`,
/// smooth monotone ramps in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothProfile {
    pub plateau: f64,
    pub eps: f64,
}

impl SmoothProfile {
    pub fn eval(&self, tau: f64) -> f64 {
        if tau <= 0.0 || tau >= 1.0 {
            return 0.0;
        }
        let s = tau.min(1.0 - tau) / self.eps;
        self.plateau * smooth_step(s)
    }

    pub fn deriv(&self, tau: f64) -> f64 {
        if tau <= 0.0 || tau >= 1.0 {
            return 0.0;
        }
        if tau <= 0.5 {
            self.plateau * smooth_step_deriv(tau / self.eps) / self.eps
        } else {
            -self.plateau * smooth_step_deriv((1.0 - tau) / self.eps) / self.eps
        }
    }

    /// `int_0^1 |c - c phi_eps| = |c| eps`; exact because `step(s) + step(1-s) = 1`.
    pub fn l1_distance(&self) -> f64 {
        self.plateau.abs() * self.eps
    }
}

pub fn make_profile(c: f64, eps: f64) -> Result<SmoothProfile> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(DyadicError::Domain(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    if !c.is_finite() {
        return Err(DyadicError::Input(format!("plateau must be finite, got {c}")));
    }
    Ok(SmoothProfile { plateau: c, eps })
}

/// Coefficient matrix of the three-mode system at given values of `p`, `q`.
pub fn system_matrix(p_val: f64, q_val: f64, params: &Params) -> Mat3 {
    let lb = params.lambda.powf(params.beta);
    let l2 = params.lambda * params.lambda;
    Mat3::new(
        -1.0 / l2 + q_val,
        -p_val,
        0.0,
        2.0 * p_val,
        -1.0,
        lb * q_val,
        0.0,
        -2.0 * lb * q_val,
        -l2,
    )
}

/// `tau -> M(p(tau), q(tau))` on `[0, 1]`.
pub fn coefficient_path(
    pp: &SmoothProfile,
    qp: &SmoothProfile,
    params: &Params,
) -> Result<MatrixPath> {
    let (pp, qp, params) = (*pp, *qp, params.clone());
    MatrixPath::new(0.0, 1.0, move |t| {
        system_matrix(pp.eval(t), qp.eval(t), &params)
    })
}

/// One ramp width tried during calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStep {
    pub eps: f64,
    /// Largest-modulus eigenvalue of `B~`, if real.
    pub rho: Option<f64>,
    pub measured_difference: f64,
    pub passed: bool,
}

/// Calibrated profiles and the perturbed endpoint data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub p: SmoothProfile,
    pub q: SmoothProfile,
    pub eps: f64,
    pub margin: f64,
    pub rho: f64,
    pub rho_other: f64,
    pub y: f64,
    pub z: f64,
    /// Values from the constant-coefficient report.
    pub rho_star: f64,
    pub y_star: f64,
    pub z_star: f64,
    /// `|(y, z) - (y*, z*)|`.
    pub eigenvector_shift: f64,
    /// `B = texp(M(p, q))`, row major.
    pub b_matrix: [[f64; 3]; 3],
    pub texp_error: f64,
    pub texp_steps: usize,
    pub btilde_residual: f64,
    /// A priori continuity bound on `|B - B*|`.
    pub apriori_bound: f64,
    /// Measured `|B - B*|`.
    pub measured_difference: f64,
    pub trace: Vec<CalibrationStep>,
}

impl Calibration {
    pub fn b(&self) -> Mat3 {
        let m = &self.b_matrix;
        Mat3::new(
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        )
    }
}

/// Halve the ramp width from [`EPS_START`] until the directly computed
/// `B = texp(M(p, q))` has a real `B~` eigenvalue with `|rho| > (1 + margin) R`.
pub fn calibrate_profiles(
    report: &SpectralReport,
    params: &Params,
    margin: f64,
) -> Result<Calibration> {
    calibrate_profiles_from(report, params, margin, EPS_START)
}

/// [`calibrate_profiles`] starting from a given ramp width.
pub fn calibrate_profiles_from(
    report: &SpectralReport,
    params: &Params,
    margin: f64,
    eps_start: f64,
) -> Result<Calibration> {
    if !(eps_start > 0.0 && eps_start <= EPS_START) {
        return Err(DyadicError::Domain(format!(
            "starting ramp width must lie in (0, {EPS_START}], got {eps_start}"
        )));
    }
    if !report.pass {
        return Err(DyadicError::Precondition(
            "spectral report does not pass every gate".into(),
        ));
    }
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(DyadicError::Domain(format!("margin must be > 0, got {margin}")));
    }
    let r = params.rho_threshold;
    let q_star = report.q;
    let b_star = report.b();
    let m_star = system_matrix(0.5 * q_star, q_star, params);
    let const_path = MatrixPath::constant(0.0, 1.0, m_star)?;
    let mut trace = Vec::new();
    let mut eps = eps_start;
    while eps >= EPS_MIN {
        let pp = make_profile(0.5 * q_star, eps)?;
        let qp = make_profile(q_star, eps)?;
        let path = coefficient_path(&pp, &qp, params)?;
        let tx = texp_with_estimate(&path, CALIBRATION_TEXP_TOL)?;
        let b = tx.matrix;
        let measured = spectral_norm(&(b - b_star));
        let roots = btilde_eigenvalues(&b);
        let passed = matches!(roots, Some((rho, _)) if rho.abs() > (1.0 + margin) * r);
        trace.push(CalibrationStep {
            eps,
            rho: roots.map(|x| x.0),
            measured_difference: measured,
            passed,
        });
        if let (true, Some((rho, rho_other))) = (passed, roots) {
            let (y, z) = btilde_eigenvector(&b, rho);
            let mut b_matrix = [[0.0; 3]; 3];
            for (i, row) in b_matrix.iter_mut().enumerate() {
                for (j, x) in row.iter_mut().enumerate() {
                    *x = b[(i, j)];
                }
            }
            return Ok(Calibration {
                p: pp,
                q: qp,
                eps,
                margin,
                rho,
                rho_other,
                y,
                z,
                rho_star: report.rho,
                y_star: report.y,
                z_star: report.z,
                eigenvector_shift: (y - report.y).hypot(z - report.z),
                b_matrix,
                texp_error: tx.error_estimate,
                texp_steps: tx.steps,
                btilde_residual: btilde_residual(&b, rho, y, z),
                apriori_bound: texp_continuity_bound(&path, &const_path)?,
                measured_difference: measured,
                trace,
            });
        }
        eps *= 0.5;
    }
    let summary: Vec<String> = trace
        .iter()
        .map(|s| format!("eps={:e}: rho={:?}", s.eps, s.rho))
        .collect();
    Err(DyadicError::Calibration(format!(
        "no ramp width >= {EPS_MIN:e} gives |rho| > (1 + {margin}) R; trace: {}",
        summary.join("; ")
    )))
}
