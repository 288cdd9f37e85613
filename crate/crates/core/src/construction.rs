//! Self-similar construction of two solutions sharing one forcing.
//!
//! A single solution `h` of the three-mode system on `[0, 1]` is rescaled onto
//! every shell. With `t_n = 1/((lambda^2 - 1) lambda^(2n))`, shell `n` is
//! switched on at `t_{n+1}`:
//!
//! ```text
//! v_n = lambda^((2-b)(n+1)) p(tau)    on [t_{n+1}, t_n),  tau = lambda^(2n+2) (t - t_{n+1})
//!     = -lambda^((2-b)n) q(tau)       on [t_n, t_{n-1}),  tau = lambda^(2n) (t - t_n)
//! g_n = rho^(-n-1) h1(tau)            on [t_{n+1}, t_n)
//!     = rho^(-n) h2(tau)              on [t_n, t_{n-1})
//!     = rho^(-n+1) h3(tau)            on [t_{n-1}, t_{n-2})
//!     = rho^(-n+1) h3(1) exp(-lambda^(2n) (t - t_{n-2}))  afterwards
//! ```
//!
//! and the forcing is read off the `v` equation. Both `v + g` and `v - g` then
//! solve the shell system with that forcing.
//!
//! The middle branch of `g_n` relies on the coupling `v_{n-1} g_{n-1}` from the
//! shell below, which does not exist for `n = 1`. On `[t_1, T]` shells 1 and 2
//! therefore follow a second solution `h~` of the three-mode system with
//! `p = 0` and the same initial data; it agrees with `h` at `tau = 0`, so
//! `g_1` and `g_2` stay continuous at `t_1`, and `t_0 = T` ends the horizon.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{DyadicError, Result};
use crate::model::Params;
use crate::profiles::{Calibration, SmoothProfile};

/// Initial number of RK4 steps for the three-mode system.
pub const H_START_STEPS: usize = 1 << 12;
/// Largest number of RK4 steps.
pub const H_MAX_STEPS: usize = 1 << 22;
/// Simpson panels per grid cell in forcing-norm quadrature (even).
pub const FORCING_PANELS: usize = 4096;

type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
struct Coefficients {
    p: SmoothProfile,
    q: SmoothProfile,
    lb: f64,
    l2: f64,
}

impl Coefficients {
    fn rhs(&self, tau: f64, h: &Vec3) -> Vec3 {
        let (pv, qv) = (self.p.eval(tau), self.q.eval(tau));
        [
            (qv - 1.0 / self.l2) * h[0] - pv * h[1],
            2.0 * pv * h[0] - h[1] + self.lb * qv * h[2],
            -2.0 * self.lb * qv * h[1] - self.l2 * h[2],
        ]
    }
}

fn axpy(h: &Vec3, a: f64, k: &Vec3) -> Vec3 {
    [h[0] + a * k[0], h[1] + a * k[1], h[2] + a * k[2]]
}

fn rk4(c: &Coefficients, init: Vec3, n: usize) -> (Vec<Vec3>, Vec<Vec3>) {
    let dt = 1.0 / n as f64;
    let mut states = Vec::with_capacity(n + 1);
    let mut derivs = Vec::with_capacity(n + 1);
    let mut h = init;
    let mut k1 = c.rhs(0.0, &h);
    states.push(h);
    derivs.push(k1);
    for i in 0..n {
        let t = i as f64 * dt;
        let k2 = c.rhs(t + 0.5 * dt, &axpy(&h, 0.5 * dt, &k1));
        let k3 = c.rhs(t + 0.5 * dt, &axpy(&h, 0.5 * dt, &k2));
        let k4 = c.rhs(t + dt, &axpy(&h, dt, &k3));
        for j in 0..3 {
            h[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        k1 = c.rhs((i + 1) as f64 * dt, &h);
        states.push(h);
        derivs.push(k1);
    }
    (states, derivs)
}

/// Dense solution of the three-mode system on `[0, 1]` with `h(0) = (0, y, z)`.
#[derive(Debug, Clone)]
pub struct HSolution {
    coeffs: Coefficients,
    states: Vec<Vec3>,
    derivs: Vec<Vec3>,
    pub initial: Vec3,
    pub endpoint: Vec3,
    /// Step-halving estimate of the endpoint error (max norm).
    pub err_estimate: f64,
    pub steps: usize,
}

impl HSolution {
    fn locate(&self, tau: f64) -> (usize, f64) {
        let n = self.steps;
        let x = tau.clamp(0.0, 1.0) * n as f64;
        let i = (x.floor() as usize).min(n - 1);
        (i, x - i as f64)
    }

    /// Cubic Hermite interpolant through the RK4 nodes; `tau` is clamped to `[0, 1]`.
    pub fn eval(&self, tau: f64) -> Vec3 {
        if tau <= 0.0 {
            return self.initial;
        }
        if tau >= 1.0 {
            return self.endpoint;
        }
        let (i, s) = self.locate(tau);
        let dt = 1.0 / self.steps as f64;
        let (h0, h1) = (&self.states[i], &self.states[i + 1]);
        let (d0, d1) = (&self.derivs[i], &self.derivs[i + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let b00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let b10 = s3 - 2.0 * s2 + s;
        let b01 = -2.0 * s3 + 3.0 * s2;
        let b11 = s3 - s2;
        let mut out = [0.0; 3];
        for j in 0..3 {
            out[j] = b00 * h0[j] + b10 * dt * d0[j] + b01 * h1[j] + b11 * dt * d1[j];
        }
        out
    }

    /// `h'(tau)` from the right-hand side at the interpolated state.
    pub fn deriv(&self, tau: f64) -> Vec3 {
        let tau = tau.clamp(0.0, 1.0);
        self.coeffs.rhs(tau, &self.eval(tau))
    }

    /// Derivative of the Hermite interpolant itself.
    pub fn interpolant_deriv(&self, tau: f64) -> Vec3 {
        let (i, s) = self.locate(tau);
        let dt = 1.0 / self.steps as f64;
        let (h0, h1) = (&self.states[i], &self.states[i + 1]);
        let (d0, d1) = (&self.derivs[i], &self.derivs[i + 1]);
        let s2 = s * s;
        let mut out = [0.0; 3];
        for j in 0..3 {
            out[j] = ((6.0 * s2 - 6.0 * s) * (h0[j] - h1[j])) / dt
                + (3.0 * s2 - 4.0 * s + 1.0) * d0[j]
                + (3.0 * s2 - 2.0 * s) * d1[j];
        }
        out
    }

    /// Largest `|interpolant' - rhs(interpolant)|` over cell midpoints,
    /// relative to `max |h'|`.
    pub fn derivative_consistency(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for d in &self.derivs {
            scale = scale.max(d.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        }
        for i in 0..self.steps {
            let tau = (i as f64 + 0.5) / self.steps as f64;
            let a = self.interpolant_deriv(tau);
            let b = self.deriv(tau);
            for j in 0..3 {
                worst = worst.max((a[j] - b[j]).abs());
            }
        }
        worst / scale.max(f64::MIN_POSITIVE)
    }

    pub fn max_abs(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// The `p` profile switched off (same ramp width), for the top shells.
pub fn top_profile(p: &SmoothProfile) -> SmoothProfile {
    SmoothProfile {
        plateau: 0.0,
        eps: p.eps,
    }
}

/// Solve the three-mode system with coefficient profiles `pp`, `qp` by RK4,
/// doubling the step count until the endpoint changes by at most
/// `tol * max(1, max |h|)`.
pub fn solve_h(
    pp: &SmoothProfile,
    qp: &SmoothProfile,
    y: f64,
    z: f64,
    params: &Params,
    tol: f64,
) -> Result<HSolution> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(DyadicError::Domain(format!("tol must be > 0, got {tol}")));
    }
    if !(y.is_finite() && z.is_finite()) {
        return Err(DyadicError::Input("initial data must be finite".into()));
    }
    params.validate()?;
    let coeffs = Coefficients {
        p: *pp,
        q: *qp,
        lb: params.lambda.powf(params.beta),
        l2: params.lambda * params.lambda,
    };
    let init = [0.0, y, z];
    let mut n = H_START_STEPS;
    let mut states = rk4(&coeffs, init, n).0;
    loop {
        let m = 2 * n;
        if m > H_MAX_STEPS {
            return Err(DyadicError::Numeric(format!(
                "three-mode solve did not reach tol {tol:e} within {H_MAX_STEPS} steps"
            )));
        }
        let (s2, d2) = rk4(&coeffs, init, m);
        let a = states[n];
        let b = s2[m];
        if !b.iter().all(|x| x.is_finite()) {
            return Err(DyadicError::Numeric("three-mode solve overflowed".into()));
        }
        let diff = (0..3).fold(0.0f64, |acc, j| acc.max((a[j] - b[j]).abs()));
        let scale = s2
            .iter()
            .flat_map(|s| s.iter())
            .fold(1.0f64, |acc, x| acc.max(x.abs()));
        states = s2;
        n = m;
        // fourth order: the finer solution's error is about diff / 15
        let est = diff / 15.0;
        if est <= tol * scale {
            let endpoint = states[n];
            return Ok(HSolution {
                coeffs,
                states,
                derivs: d2,
                initial: init,
                endpoint,
                err_estimate: est,
                steps: n,
            });
        }
    }
}

/// The time grid `t_n = 1/((lambda^2 - 1) lambda^(2n))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellGrid {
    pub lambda: f64,
    pub horizon: f64,
    /// `t_0 .. t_{N+2}`.
    pub t: Vec<f64>,
}

impl ShellGrid {
    /// `t_n` for any integer `n` (negative indices lie beyond the horizon).
    pub fn at(&self, n: i64) -> f64 {
        self.horizon * self.lambda.powi(-2 * n as i32)
    }
}

pub fn time_grid(p: &Params) -> ShellGrid {
    let horizon = Params::construction_horizon(p.lambda);
    let t = (0..=p.n_shells as i32 + 2)
        .map(|n| horizon * p.lambda.powi(-2 * n))
        .collect();
    ShellGrid {
        lambda: p.lambda,
        horizon,
        t,
    }
}

/// Values of `v_n, g_n` and their time derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ShellState {
    pub v: f64,
    pub g: f64,
    pub v_dot: f64,
    /// From the three-mode right-hand side at the interpolated state.
    pub g_dot: f64,
    /// Exact derivative of the assembled (interpolated) `g_n`.
    pub g_dot_dense: f64,
}

/// The four boundary defects of `g_n` at `t_{n+1}, t_n, t_{n-1}, t_{n-2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GluingDefects {
    pub n: usize,
    pub at_start: f64,
    pub at_t_n: f64,
    pub at_t_n_minus_1: f64,
    pub at_tail: f64,
}

impl GluingDefects {
    pub fn max(&self) -> f64 {
        self.at_start
            .max(self.at_t_n)
            .max(self.at_t_n_minus_1)
            .max(self.at_tail)
    }
}

/// Assembled `v_n`, `g_n`, `f_n` for every shell.
#[derive(Debug, Clone)]
pub struct SplitFields {
    pub params: Params,
    pub grid: ShellGrid,
    pub h: Arc<HSolution>,
    /// Solution with `p = 0` used by shells 1 and 2 on `[t_1, T]`.
    pub h_top: Arc<HSolution>,
    pub rho: f64,
    pub y: f64,
    pub z: f64,
    pub p: SmoothProfile,
    pub q: SmoothProfile,
    l2: f64,
    two_minus_beta: f64,
}

impl SplitFields {
    /// Solve both three-mode systems and assemble the fields.
    pub fn assemble(params: &Params, cal: &Calibration, tol: f64) -> Result<Self> {
        let h = solve_h(&cal.p, &cal.q, cal.y, cal.z, params, tol)?;
        let top = top_profile(&cal.p);
        let h_top = solve_h(&top, &cal.q, cal.y, cal.z, params, tol)?;
        Self::new(params, cal, h, h_top)
    }

    /// Requires `|rho| > lambda^beta`.
    pub fn new(params: &Params, cal: &Calibration, h: HSolution, h_top: HSolution) -> Result<Self> {
        params.validate()?;
        let lb = params.lambda.powf(params.beta);
        if !(cal.rho.abs() > lb) {
            return Err(DyadicError::Precondition(format!(
                "|rho| = {} must exceed lambda^beta = {lb}",
                cal.rho.abs()
            )));
        }
        Ok(SplitFields {
            params: params.clone(),
            grid: time_grid(params),
            h: Arc::new(h),
            h_top: Arc::new(h_top),
            rho: cal.rho,
            y: cal.y,
            z: cal.z,
            p: cal.p,
            q: cal.q,
            l2: params.lambda * params.lambda,
            two_minus_beta: 2.0 - params.beta,
        })
    }

    fn t(&self, n: i64) -> f64 {
        self.grid.at(n)
    }

    fn check_shell(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.params.n_shells {
            return Err(DyadicError::Range(format!(
                "shell {n} outside 1..={}",
                self.params.n_shells
            )));
        }
        Ok(())
    }

    fn rho_pow(&self, e: i64) -> f64 {
        self.rho.powi(e as i32)
    }

    /// `v_n`, `g_n` and derivatives for any shell `n >= 0` (shell 0 is zero).
    pub fn state(&self, n: usize, t: f64) -> ShellState {
        if n == 0 {
            return ShellState::default();
        }
        let ni = n as i64;
        let l = self.params.lambda;
        let t_start = self.t(ni + 1);
        if t < t_start {
            return ShellState::default();
        }
        let t_n = self.t(ni);
        let t_nm1 = self.t(ni - 1);
        let t_nm2 = self.t(ni - 2);
        let ln2 = self.l2.powi(n as i32);
        if t < t_n {
            let rate = ln2 * self.l2;
            let tau = rate * (t - t_start);
            let amp = l.powf(self.two_minus_beta * (ni + 1) as f64);
            let c = self.rho_pow(-ni - 1);
            return ShellState {
                v: amp * self.p.eval(tau),
                v_dot: amp * rate * self.p.deriv(tau),
                g: c * self.h.eval(tau)[0],
                g_dot: c * rate * self.h.deriv(tau)[0],
                g_dot_dense: c * rate * self.h.interpolant_deriv(tau)[0],
            };
        }
        if t < t_nm1 || n == 1 {
            let tau = ln2 * (t - t_n);
            let amp = l.powf(self.two_minus_beta * ni as f64);
            let c = self.rho_pow(-ni);
            let h = if n == 1 { &self.h_top } else { &self.h };
            return ShellState {
                v: if t < t_nm1 { -amp * self.q.eval(tau) } else { 0.0 },
                v_dot: if t < t_nm1 { -amp * ln2 * self.q.deriv(tau) } else { 0.0 },
                g: c * h.eval(tau)[1],
                g_dot: c * ln2 * h.deriv(tau)[1],
                g_dot_dense: c * ln2 * h.interpolant_deriv(tau)[1],
            };
        }
        let c = self.rho_pow(-ni + 1);
        if t < t_nm2 || n == 2 {
            let rate = ln2 / self.l2;
            let tau = rate * (t - t_nm1);
            let h = if n == 2 { &self.h_top } else { &self.h };
            return ShellState {
                v: 0.0,
                v_dot: 0.0,
                g: c * h.eval(tau)[2],
                g_dot: c * rate * h.deriv(tau)[2],
                g_dot_dense: c * rate * h.interpolant_deriv(tau)[2],
            };
        }
        let arg = ln2 * (t - t_nm2);
        // exp(-746) is below the smallest subnormal
        let g = if arg > 746.0 {
            0.0
        } else {
            c * self.h.endpoint[2] * (-arg).exp()
        };
        ShellState {
            v: 0.0,
            v_dot: 0.0,
            g,
            g_dot: -ln2 * g,
            g_dot_dense: -ln2 * g,
        }
    }

    pub fn eval_v(&self, n: usize, t: f64) -> Result<f64> {
        self.check_shell(n)?;
        Ok(self.state(n, t).v)
    }

    pub fn eval_g(&self, n: usize, t: f64) -> Result<f64> {
        self.check_shell(n)?;
        Ok(self.state(n, t).g)
    }

    pub fn eval_f(&self, n: usize, t: f64) -> Result<f64> {
        self.check_shell(n)?;
        Ok(self.forcing(n, t))
    }

    /// Residual of the `g` equation,
    /// `g_n' + lambda^(2n) g_n - 2 lambda^(beta n) v_{n-1} g_{n-1}
    ///  + lambda^(beta(n+1)) (v_n g_{n+1} + v_{n+1} g_n)`, with `g'` from the
    /// three-mode right-hand side.
    pub fn g_equation_residual(&self, n: usize, t: f64) -> f64 {
        let p = &self.params;
        let prev = self.state(n - 1, t);
        let cur = self.state(n, t);
        let next = self.state(n + 1, t);
        cur.g_dot + p.dissipation(n) * cur.g - 2.0 * p.coupling(n) * prev.v * prev.g
            + p.coupling(n + 1) * (cur.v * next.g + next.v * cur.g)
    }

    /// `u_n = v_n + sign g_n`.
    pub fn eval_u(&self, n: usize, t: f64, sign: f64) -> Result<f64> {
        self.check_shell(n)?;
        let s = self.state(n, t);
        Ok(s.v + sign * s.g)
    }

    /// Forcing of shell `n >= 1` from the `v` equation (no range check, so
    /// shells beyond the truncation can be evaluated).
    pub fn forcing(&self, n: usize, t: f64) -> f64 {
        let prev = self.state(n - 1, t);
        let cur = self.state(n, t);
        let next = self.state(n + 1, t);
        self.forcing_from(n, &prev, &cur, &next)
    }

    /// Forcing from precomputed states of shells `n-1, n, n+1`.
    pub fn forcing_from(&self, n: usize, prev: &ShellState, cur: &ShellState, next: &ShellState) -> f64 {
        let p = &self.params;
        cur.v_dot + p.dissipation(n) * cur.v
            - p.coupling(n) * (prev.v * prev.v + prev.g * prev.g)
            + p.coupling(n + 1) * (cur.v * next.v + cur.g * next.g)
    }

    /// Continuity defects of `g_n` at its four branch points: left limits
    /// from the branch formulas at `tau = 1`, right values from the evaluator.
    /// Branch points at or beyond the horizon are reported as zero.
    pub fn gluing_defects(&self, n: usize) -> GluingDefects {
        let ni = n as i64;
        let horizon = self.grid.horizon;
        let defect = |m: i64, left: f64| {
            let t = self.t(m);
            if t >= horizon * (1.0 - 1e-15) {
                0.0
            } else {
                (left - self.state(n, t).g).abs()
            }
        };
        let h1 = self.h.endpoint;
        GluingDefects {
            n,
            at_start: defect(ni + 1, 0.0),
            at_t_n: defect(ni, self.rho_pow(-ni - 1) * h1[0]),
            at_t_n_minus_1: defect(ni - 1, self.rho_pow(-ni) * h1[1]),
            at_tail: defect(ni - 2, self.rho_pow(-ni + 1) * h1[2]),
        }
    }

    /// Breakpoints relevant to shell `n` on `[t_{n+1}, T]`, increasing.
    pub fn forcing_breakpoints(&self, n: usize) -> Vec<f64> {
        let mut pts: Vec<f64> = (0..=n as i64 + 1).rev().map(|m| self.t(m)).collect();
        pts.dedup();
        pts
    }

    /// `int_0^T f_n^2 dt` by composite Simpson on every grid cell.
    pub fn forcing_sq_integral(&self, n: usize) -> f64 {
        let pts = self.forcing_breakpoints(n);
        let k = FORCING_PANELS;
        let mut total = 0.0;
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let dx = (b - a) / k as f64;
            let mut s = 0.0;
            for i in 0..=k {
                let x = if i == k { b } else { a + i as f64 * dx };
                let f = self.forcing(n, x);
                let wgt = if i == 0 || i == k {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                s += wgt * f * f;
            }
            total += s * dx / 3.0;
        }
        total
    }
}

/// Partial sums of `sum lambda^(-2n) int f_n^2` and successive term ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingPartials {
    /// `lambda^(-2n) int f_n^2` for `n = 1..=N`.
    pub terms: Vec<f64>,
    /// `S_1 .. S_N`.
    pub partials: Vec<f64>,
    /// `terms[m] / terms[m-1]`, indexed by the later shell `m = 2..=N`.
    pub ratios: Vec<f64>,
    /// Expected limit `lambda^(4 - 2 beta)`.
    pub expected_ratio: f64,
}

impl ForcingPartials {
    /// Largest relative deviation of the ratios from the expected limit over
    /// shells `from..=N`.
    pub fn tail_ratio_deviation(&self, from: usize) -> f64 {
        self.ratios
            .iter()
            .enumerate()
            .filter(|(i, _)| i + 2 >= from)
            .map(|(_, r)| (r / self.expected_ratio - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn nondecreasing(&self) -> bool {
        self.partials.windows(2).all(|w| w[1] >= w[0])
    }
}

pub fn forcing_norm_partials(fields: &SplitFields, n_max: usize) -> Result<ForcingPartials> {
    if n_max == 0 || n_max > fields.params.n_shells {
        return Err(DyadicError::Range(format!(
            "N = {n_max} outside 1..={}",
            fields.params.n_shells
        )));
    }
    use rayon::prelude::*;
    let l2 = fields.params.lambda.powi(2);
    let terms: Vec<f64> = (1..=n_max)
        .into_par_iter()
        .map(|n| fields.forcing_sq_integral(n) / l2.powi(n as i32))
        .collect();
    let mut partials = Vec::with_capacity(n_max);
    let mut acc = 0.0;
    for t in &terms {
        acc += t;
        partials.push(acc);
    }
    let ratios = terms.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(ForcingPartials {
        terms,
        partials,
        ratios,
        expected_ratio: fields.params.lambda.powf(4.0 - 2.0 * fields.params.beta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::make_profile;

    fn params() -> Params {
        Params::new(2.0, 2.5, 10).unwrap()
    }

    #[test]
    fn decoupled_decay() {
        let zero = SmoothProfile { plateau: 0.0, eps: 0.1 };
        let h = solve_h(&zero, &zero, 1.0, 1.0, &params(), 1e-12).unwrap();
        for &tau in &[0.0, 0.1, 0.37, 0.5, 0.9, 1.0] {
            let v = h.eval(tau);
            assert_eq!(v[0], 0.0);
            assert!((v[1] - (-tau).exp()).abs() < 1e-11);
            assert!((v[2] - (-4.0 * tau).exp()).abs() < 1e-11);
        }
        assert_eq!(h.initial, [0.0, 1.0, 1.0]);
    }

    #[test]
    fn grid_values() {
        let g = time_grid(&params());
        assert!((g.horizon - 1.0 / 3.0).abs() < 1e-16);
        assert!((g.t[1] - 1.0 / 12.0).abs() < 1e-16);
        assert!((g.t[2] - 1.0 / 48.0).abs() < 1e-17);
        assert_eq!(g.t.len(), 13);
        for n in 1..g.t.len() {
            let gap = g.t[n - 1] - g.t[n];
            assert!((gap / 4f64.powi(-(n as i32)) - 1.0).abs() < 1e-15);
        }
        let g3 = time_grid(&Params::new(3.0, 2.5, 4).unwrap());
        assert!((g3.t[1] - 1.0 / 72.0).abs() < 1e-17);
    }

    #[test]
    fn solve_h_rejects_bad_tol() {
        let p = make_profile(1.0, 0.1).unwrap();
        assert!(solve_h(&p, &p, 1.0, 0.0, &params(), 0.0).is_err());
    }
}
