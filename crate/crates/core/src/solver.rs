//! Galerkin truncation of the shell system.
//!
//! The linear term is removed exactly with the per-shell integrating factor
//! `exp(lambda^(2n) t)` and the rest is advanced with the Dormand-Prince 5(4)
//! pair in Lawson form:
//!
//! ```text
//! U_i = E(c_i) u0 + h sum_j a_ij E(c_i - c_j) K_j,   E(s) = exp(-L s h)
//! ```
//!
//! where `K_j` is the nonlinear term plus forcing at stage `j`. Every exponent
//! is non-positive because the nodes are nondecreasing, so nothing overflows
//! however stiff the top shells are.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::construction::SplitFields;
use crate::error::{DyadicError, Result};
use crate::model::{ForcingSample, Params, ShellCoefficients, ShellVector, Trajectory};
use crate::quad::adaptive_simpson;

/// `|u|` above this value is reported as divergence.
pub const BLOWUP_THRESHOLD: f64 = 1e12;
/// Uniform sub-samples per geometric output cell.
pub const DEFAULT_SUBSAMPLES: usize = 16;

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B_HAT: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

type ForcingFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// Forcing `f_n(t)` for shells `n = 1..=N`.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    /// Constant forcing on shell 1 only.
    Constant(f64),
    /// Constant forcing per shell (`values[n-1]`; missing shells are zero).
    PerShell(Vec<f64>),
    /// Forcing of the self-similar construction.
    Constructed(Arc<SplitFields>),
    Custom(ForcingFn),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Zero"),
            Forcing::Constant(c) => write!(f, "Constant({c})"),
            Forcing::PerShell(v) => write!(f, "PerShell({v:?})"),
            Forcing::Constructed(_) => write!(f, "Constructed"),
            Forcing::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Forcing {
    pub fn custom<F: Fn(usize, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Forcing::Custom(Arc::new(f))
    }

    /// `f_n(t)` with `n` 1-based.
    pub fn value(&self, n: usize, t: f64) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Constant(c) => {
                if n == 1 {
                    *c
                } else {
                    0.0
                }
            }
            Forcing::PerShell(v) => v.get(n - 1).copied().unwrap_or(0.0),
            Forcing::Constructed(fields) => fields.forcing(n, t),
            Forcing::Custom(f) => f(n, t),
        }
    }

    pub fn fill(&self, t: f64, out: &mut [f64]) {
        match self {
            Forcing::Zero => out.iter_mut().for_each(|x| *x = 0.0),
            _ => {
                for (i, x) in out.iter_mut().enumerate() {
                    *x = self.value(i + 1, t);
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub n_shells: usize,
    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
    pub forcing: Forcing,
    pub initial: ShellVector,
    /// Output times; `None` gives a grid refined geometrically toward `t = 0`.
    pub output: Option<Vec<f64>>,
    /// Drop the quadratic term (checks of the integrating factor).
    pub linear_only: bool,
}

impl SolveConfig {
    pub fn new(n_shells: usize, t_end: f64, initial: ShellVector, forcing: Forcing) -> Self {
        SolveConfig {
            n_shells,
            t_end,
            rtol: 1e-10,
            atol: 1e-12,
            forcing,
            initial,
            output: None,
            linear_only: false,
        }
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn with_output(mut self, grid: Vec<f64>) -> Self {
        self.output = Some(grid);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_shells == 0 {
            return Err(DyadicError::Input("n_shells must be >= 1".into()));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(DyadicError::Input(format!("t_end must be > 0, got {}", self.t_end)));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(DyadicError::Input("tolerances must be > 0".into()));
        }
        if self.initial.len() != self.n_shells {
            return Err(DyadicError::Contract(format!(
                "initial data has {} shells, expected {}",
                self.initial.len(),
                self.n_shells
            )));
        }
        if self.initial.0.iter().any(|x| !x.is_finite()) {
            return Err(DyadicError::Input("initial data must be finite".into()));
        }
        Ok(())
    }

    fn params(&self, p: &Params) -> Result<Params> {
        let mut q = p.clone();
        q.n_shells = self.n_shells;
        q.validate()?;
        Ok(q)
    }
}

/// Output grid `{0} u {s_m}` with `s_m = t_end lambda^(-2m)` for `m = 0..=N+1`,
/// each geometric cell split into `sub` equal parts. With
/// `t_end = 1/(lambda^2 - 1)` the points `s_m` are the shell grid `t_m`.
pub fn geometric_grid(t_end: f64, lambda: f64, n_shells: usize, sub: usize) -> Vec<f64> {
    let l2 = lambda * lambda;
    let m_max = n_shells + 1;
    let mut pts = vec![0.0];
    let lowest = t_end * l2.powi(-(m_max as i32));
    for i in 1..=sub {
        pts.push(lowest * i as f64 / sub as f64);
    }
    for m in (0..m_max).rev() {
        let a = t_end * l2.powi(-(m as i32 + 1));
        let b = t_end * l2.powi(-(m as i32));
        for i in 1..=sub {
            pts.push(if i == sub { b } else { a + (b - a) * i as f64 / sub as f64 });
        }
    }
    pts
}

/// Counters and error accounting for one solve.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Sum over accepted steps of the max-norm local error estimate.
    pub error_estimate: f64,
}

pub fn galerkin_solve(cfg: &SolveConfig, p: &Params) -> Result<Trajectory> {
    galerkin_solve_with_stats(cfg, p).map(|(t, _)| t)
}

struct Workspace {
    k: Vec<Vec<f64>>,
    stage: Vec<f64>,
    f: Vec<f64>,
    err: Vec<f64>,
    next: Vec<f64>,
}

pub fn galerkin_solve_with_stats(cfg: &SolveConfig, p: &Params) -> Result<(Trajectory, SolveStats)> {
    cfg.validate()?;
    let p = cfg.params(p)?;
    let n = cfg.n_shells;
    let coeffs = ShellCoefficients::new(&p);
    let lin: Vec<f64> = coeffs.dissipation[1..=n].to_vec();

    let out_grid = match &cfg.output {
        Some(g) => {
            if g.first() != Some(&0.0) || g.windows(2).any(|w| w[1] <= w[0]) {
                return Err(DyadicError::Input(
                    "output grid must start at 0 and increase strictly".into(),
                ));
            }
            g.clone()
        }
        None => geometric_grid(cfg.t_end, p.lambda, n, DEFAULT_SUBSAMPLES),
    };
    let t_final = *out_grid.last().unwrap();

    let nonlinear = |u: &[f64], t: f64, f: &mut Vec<f64>, out: &mut [f64]| {
        if cfg.linear_only {
            out.iter_mut().for_each(|x| *x = 0.0);
        } else {
            coeffs.nonlinear_into(u, out);
        }
        cfg.forcing.fill(t, f);
        for i in 0..n {
            out[i] += f[i];
        }
    };

    let mut ws = Workspace {
        k: vec![vec![0.0; n]; 7],
        stage: vec![0.0; n],
        f: vec![0.0; n],
        err: vec![0.0; n],
        next: vec![0.0; n],
    };
    let mut u = cfg.initial.0.clone();
    let mut t = 0.0;
    let mut states = vec![ShellVector(u.clone())];
    let mut forcing = Vec::with_capacity(out_grid.len());
    let mut f0 = vec![0.0; n];
    cfg.forcing.fill(0.0, &mut f0);
    forcing.push(ForcingSample(f0));
    let mut stats = SolveStats::default();

    nonlinear(&u, t, &mut ws.f, &mut ws.k[0]);
    let mut h = (out_grid[1] - out_grid[0]).min(1e-3 * t_final);
    let mut next_out = 1;
    let mut exps = vec![0.0; n];

    while next_out < out_grid.len() {
        let target = out_grid[next_out];
        let mut step = h.min(target - t);
        let landing = step >= target - t;
        if landing {
            step = target - t;
        }
        if step <= 1e-15 * t.abs().max(1e-300) || step < f64::MIN_POSITIVE * 1e10 {
            return Err(DyadicError::Numeric(format!("step size underflow at t = {t:e}")));
        }
        // stages 2..7
        for i in 1..7 {
            for s in 0..n {
                exps[s] = (-lin[s] * C[i] * step).exp();
                ws.stage[s] = exps[s] * u[s];
            }
            for j in 0..i {
                let a = A[i][j];
                if a == 0.0 {
                    continue;
                }
                let d = C[i] - C[j];
                for s in 0..n {
                    let e = if d == 0.0 { 1.0 } else { (-lin[s] * d * step).exp() };
                    ws.stage[s] += step * a * e * ws.k[j][s];
                }
            }
            nonlinear(&ws.stage, t + C[i] * step, &mut ws.f, &mut ws.k[i]);
        }
        // stage 7 is the fifth-order solution (FSAL)
        ws.next.copy_from_slice(&ws.stage);
        for s in 0..n {
            let mut e = 0.0;
            for (j, bh) in B_HAT.iter().enumerate() {
                let d = 1.0 - C[j];
                let w = if d == 0.0 { 1.0 } else { (-lin[s] * d * step).exp() };
                let b = if j < 6 { A[6][j] } else { 0.0 };
                e += (b - bh) * w * ws.k[j][s];
            }
            ws.err[s] = step * e;
        }
        let mut norm = 0.0;
        let mut emax: f64 = 0.0;
        for s in 0..n {
            let sc = cfg.atol + cfg.rtol * u[s].abs().max(ws.next[s].abs());
            let r = ws.err[s] / sc;
            norm += r * r;
            emax = emax.max(ws.err[s].abs());
        }
        let norm = (norm / n as f64).sqrt();
        if !norm.is_finite() {
            let max_abs = ws.next.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if !max_abs.is_finite() || max_abs > BLOWUP_THRESHOLD {
                return Err(DyadicError::Divergence { t, max_abs });
            }
            h = 0.2 * step;
            stats.rejected += 1;
            continue;
        }
        if norm <= 1.0 {
            t = if landing { target } else { t + step };
            u.copy_from_slice(&ws.next);
            let (k0, k6) = {
                let (a, b) = ws.k.split_at_mut(6);
                (&mut a[0], &b[0])
            };
            k0.copy_from_slice(k6);
            stats.accepted += 1;
            stats.error_estimate += emax;
            let max_abs = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if !max_abs.is_finite() || max_abs > BLOWUP_THRESHOLD {
                return Err(DyadicError::Divergence { t, max_abs });
            }
            if landing {
                states.push(ShellVector(u.clone()));
                let mut fs = vec![0.0; n];
                cfg.forcing.fill(t, &mut fs);
                forcing.push(ForcingSample(fs));
                next_out += 1;
            }
            let fac = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
            // a clamped landing step says nothing about the natural step size
            if !(landing && step < h) {
                h = step * fac;
            } else {
                h = h.max(step * fac);
            }
        } else {
            stats.rejected += 1;
            h = step * (0.9 * norm.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    let traj = Trajectory::new(out_grid, states, Some(forcing))?;
    Ok((traj, stats))
}

/// `C_N = lambda^(2N) + 3 lambda^(beta (N+1))`: the linear part has norm
/// `lambda^(2N)` and each quadratic coefficient is at most `lambda^(beta(N+1))`,
/// so `|F(y) - F(z)| <= C_N (1 + |y| + |z|) |y - z|`.
pub fn lipschitz_constant(p: &Params, n_shells: usize) -> f64 {
    p.lambda.powi(2 * n_shells as i32) + 3.0 * p.lambda.powf(p.beta * (n_shells + 1) as f64)
}

/// `delta_N = 1 / (2 C_N (R_N + 1))` with `R_N = 2|a| + 2 int_0^T |f(t)| dt`.
pub fn local_existence_interval(cfg: &SolveConfig, p: &Params) -> Result<f64> {
    cfg.validate()?;
    let p = cfg.params(p)?;
    let n = cfg.n_shells;
    let a = cfg.initial.norm_sq().sqrt();
    let f_int = if cfg.forcing.is_zero() {
        0.0
    } else {
        let fnorm = |t: f64| {
            let mut b = vec![0.0; n];
            cfg.forcing.fill(t, &mut b);
            b.iter().map(|x| x * x).sum::<f64>().sqrt()
        };
        adaptive_simpson(fnorm, 0.0, cfg.t_end, 1e-10)?
    };
    let r = 2.0 * a + 2.0 * f_int;
    Ok(1.0 / (2.0 * lipschitz_constant(&p, n) * (r + 1.0)))
}

/// Worst signed defect of `sum u^2 + sum lambda^(2n) int u^2 <= sum a^2 + sum lambda^(-2n) int f^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyInequalityReport {
    /// `max_t (lhs - rhs)`; negative when the inequality holds with room.
    pub worst_defect: f64,
    pub worst_time: f64,
    /// `max_t rhs`, the scale of the defect.
    pub scale: f64,
    pub holds: bool,
}

/// Trapezoid evaluation of the energy inequality at every sample.
/// `holds` allows a quadrature slack of `1e-8 * max(1, scale)`.
pub fn energy_inequality_check(
    traj: &Trajectory,
    initial: &ShellVector,
    p: &Params,
) -> Result<EnergyInequalityReport> {
    traj.validate()?;
    let forcing = traj
        .forcing
        .as_ref()
        .ok_or_else(|| DyadicError::Contract("trajectory carries no forcing samples".into()))?;
    let n = traj.n_shells();
    if initial.len() != n {
        return Err(DyadicError::Contract("initial data length does not match trajectory".into()));
    }
    let diss: Vec<f64> = (1..=n).map(|k| p.dissipation(k)).collect();
    let e0 = initial.norm_sq();
    let mut int_u = 0.0;
    let mut int_f = 0.0;
    let weighted = |u: &[f64], f: &[f64]| -> (f64, f64) {
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..n {
            a += diss[i] * u[i] * u[i];
            b += f[i] * f[i] / diss[i];
        }
        (a, b)
    };
    let mut worst = f64::NEG_INFINITY;
    let mut worst_time = 0.0;
    let mut scale: f64 = e0;
    let mut prev = weighted(&traj.states[0].0, &forcing[0].0);
    for k in 0..traj.grid.len() {
        if k > 0 {
            let cur = weighted(&traj.states[k].0, &forcing[k].0);
            let dt = traj.grid[k] - traj.grid[k - 1];
            int_u += 0.5 * dt * (prev.0 + cur.0);
            int_f += 0.5 * dt * (prev.1 + cur.1);
            prev = cur;
        }
        let lhs = traj.states[k].norm_sq() + int_u;
        let rhs = e0 + int_f;
        scale = scale.max(rhs);
        if lhs - rhs > worst {
            worst = lhs - rhs;
            worst_time = traj.grid[k];
        }
    }
    Ok(EnergyInequalityReport {
        worst_defect: worst,
        worst_time,
        scale,
        holds: worst <= 1e-8 * scale.max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Params {
        Params::new(2.0, 2.5, 4).unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let cfg = SolveConfig::new(4, 1.0, ShellVector::zeros(4), Forcing::Zero);
        let traj = galerkin_solve(&cfg, &params()).unwrap();
        assert!(traj.states.iter().all(|s| s.0.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn single_shell_closed_form() {
        let p = Params::new(2.0, 2.5, 1).unwrap();
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
        let cfg = SolveConfig::new(1, 1.0, ShellVector::zeros(1), Forcing::Constant(1.0))
            .with_output(grid);
        let traj = galerkin_solve(&cfg, &p).unwrap();
        for (t, u) in traj.grid.iter().zip(&traj.states) {
            let exact = 0.25 * (1.0 - (-4.0 * t).exp());
            assert!((u.0[0] - exact).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn linear_only_is_exact_decay() {
        let p = Params::new(2.0, 2.5, 6).unwrap();
        let a = ShellVector(vec![1.0, -0.5, 0.25, 2.0, 0.1, -1.0]);
        let mut cfg = SolveConfig::new(6, 0.5, a.clone(), Forcing::Zero);
        cfg.linear_only = true;
        let traj = galerkin_solve(&cfg, &p).unwrap();
        for (t, u) in traj.grid.iter().zip(&traj.states) {
            for n in 1..=6 {
                let exact = a.0[n - 1] * (-(4f64.powi(n as i32)) * t).exp();
                assert!((u.0[n - 1] - exact).abs() <= 1e-14 * a.0[n - 1].abs().max(1e-300) + 1e-300);
            }
        }
    }

    #[test]
    fn existence_interval_formula() {
        let p = Params::new(2.0, 2.5, 3).unwrap();
        let cfg = SolveConfig::new(3, 1.0, ShellVector(vec![1.0, 0.0, 0.0]), Forcing::Zero);
        let d = local_existence_interval(&cfg, &p).unwrap();
        assert!((d - 1.0 / 18816.0).abs() < 1e-18);
        let zero = SolveConfig::new(3, 1.0, ShellVector::zeros(3), Forcing::Zero);
        let d0 = local_existence_interval(&zero, &p).unwrap();
        assert!((d0 - 1.0 / (2.0 * 3136.0)).abs() < 1e-18);
    }

    #[test]
    fn geometric_grid_hits_shell_times() {
        let g = geometric_grid(1.0 / 3.0, 2.0, 3, 4);
        assert_eq!(g[0], 0.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*g.last().unwrap(), 1.0 / 3.0);
        for m in 0..=4 {
            let tm = 1.0 / 3.0 * 4f64.powi(-m);
            assert!(g.iter().any(|&x| (x - tm).abs() < 1e-17));
        }
    }
}
