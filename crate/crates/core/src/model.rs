//! Shell-model state and the right-hand side of the truncated dyadic system
//!
//! ```text
//! du_n/dt = f_n - lambda^(2n) u_n + lambda^(beta n) u_{n-1}^2 - lambda^(beta (n+1)) u_n u_{n+1}
//! ```
//!
//! with the boundary convention `u_0 = u_{N+1} = 0` applied internally.
//! Shell indices are 1-based in messages; storage is 0-based.

use serde::{Deserialize, Serialize};

use crate::error::{DyadicError, Result};

/// Model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub lambda: f64,
    pub beta: f64,
    pub n_shells: usize,
    /// Required amplification `R` for the counterexample pipeline.
    pub rho_threshold: f64,
    /// Time horizon `T`.
    pub horizon: f64,
}

impl Params {
    /// Parameters with `R = lambda^beta` and `T = 1/(lambda^2 - 1)`.
    pub fn new(lambda: f64, beta: f64, n_shells: usize) -> Result<Self> {
        let p = Params {
            lambda,
            beta,
            n_shells,
            rho_threshold: if lambda.is_finite() && beta.is_finite() {
                lambda.powf(beta)
            } else {
                f64::NAN
            },
            horizon: Self::construction_horizon(lambda),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_rho_threshold(mut self, rho_threshold: f64) -> Result<Self> {
        self.rho_threshold = rho_threshold;
        self.validate()?;
        Ok(self)
    }

    pub fn construction_horizon(lambda: f64) -> f64 {
        1.0 / (lambda * lambda - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 1.0) {
            return Err(DyadicError::Domain(format!(
                "lambda must be > 1, got {}",
                self.lambda
            )));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(DyadicError::Domain(format!(
                "beta must be > 0, got {}",
                self.beta
            )));
        }
        if self.n_shells == 0 {
            return Err(DyadicError::Domain("n_shells must be >= 1".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(DyadicError::Domain(format!(
                "horizon must be > 0, got {}",
                self.horizon
            )));
        }
        if !(self.rho_threshold.is_finite() && self.rho_threshold > 0.0) {
            return Err(DyadicError::Domain(format!(
                "rho_threshold must be > 0, got {}",
                self.rho_threshold
            )));
        }
        Ok(())
    }

    /// Extra invariants for the counterexample pipeline:
    /// `R >= lambda^beta` and `T = 1/(lambda^2 - 1)`.
    pub fn validate_for_construction(&self) -> Result<()> {
        self.validate()?;
        let lb = self.lambda.powf(self.beta);
        if self.rho_threshold < lb * (1.0 - 1e-15) {
            return Err(DyadicError::Domain(format!(
                "rho_threshold {} is below lambda^beta = {}",
                self.rho_threshold, lb
            )));
        }
        let t = Self::construction_horizon(self.lambda);
        if ((self.horizon - t) / t).abs() > 1e-15 {
            return Err(DyadicError::Domain(format!(
                "horizon must equal 1/(lambda^2 - 1) = {t}, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `lambda^(2n)`.
    pub fn dissipation(&self, n: usize) -> f64 {
        self.lambda.powi(2 * n as i32)
    }

    /// `lambda^(beta n)`.
    pub fn coupling(&self, n: usize) -> f64 {
        self.lambda.powf(self.beta * n as f64)
    }
}

/// Shell amplitudes `u_1..u_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShellVector(pub Vec<f64>);

/// Forcing values `f_1(t)..f_N(t)` at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ForcingSample(pub Vec<f64>);

macro_rules! shell_newtype {
    ($ty:ident) => {
        impl $ty {
            pub fn zeros(n: usize) -> Self {
                $ty(vec![0.0; n])
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            /// Value of shell `n` (1-based); zero outside `1..=N`.
            pub fn shell(&self, n: usize) -> f64 {
                if n == 0 || n > self.0.len() {
                    0.0
                } else {
                    self.0[n - 1]
                }
            }

            pub fn check(&self, p: &Params, what: &str) -> Result<()> {
                if self.0.len() != p.n_shells {
                    return Err(DyadicError::Contract(format!(
                        "{what} has {} shells, expected {}",
                        self.0.len(),
                        p.n_shells
                    )));
                }
                if let Some(i) = self.0.iter().position(|x| !x.is_finite()) {
                    return Err(DyadicError::Input(format!(
                        "{what}: shell {} is not finite",
                        i + 1
                    )));
                }
                Ok(())
            }
        }

        impl From<Vec<f64>> for $ty {
            fn from(v: Vec<f64>) -> Self {
                $ty(v)
            }
        }
    };
}

shell_newtype!(ShellVector);
shell_newtype!(ForcingSample);

impl ShellVector {
    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }
}

/// Precomputed `lambda^(2n)` and `lambda^(beta n)` for `n = 0..=N+1`.
#[derive(Debug, Clone)]
pub struct ShellCoefficients {
    pub dissipation: Vec<f64>,
    pub coupling: Vec<f64>,
}

impl ShellCoefficients {
    pub fn new(p: &Params) -> Self {
        let n = p.n_shells;
        ShellCoefficients {
            dissipation: (0..=n + 1).map(|k| p.dissipation(k)).collect(),
            coupling: (0..=n + 1).map(|k| p.coupling(k)).collect(),
        }
    }

    /// Quadratic part `lambda^(beta n) u_{n-1}^2 - lambda^(beta(n+1)) u_n u_{n+1}` for
    /// every shell, written into `out`.
    pub fn nonlinear_into(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        for i in 0..n {
            let prev = if i == 0 { 0.0 } else { u[i - 1] };
            let next = if i + 1 < n { u[i + 1] } else { 0.0 };
            out[i] = self.coupling[i + 1] * prev * prev - self.coupling[i + 2] * u[i] * next;
        }
    }

    /// Full right-hand side into `out`.
    pub fn rhs_into(&self, u: &[f64], f: &[f64], out: &mut [f64]) {
        self.nonlinear_into(u, out);
        for i in 0..u.len() {
            out[i] += f[i] - self.dissipation[i + 1] * u[i];
        }
    }
}

/// `du/dt` of the truncated system.
pub fn shell_rhs(u: &ShellVector, f: &ForcingSample, p: &Params) -> Result<ShellVector> {
    p.validate()?;
    u.check(p, "state")?;
    f.check(p, "forcing")?;
    let coeffs = ShellCoefficients::new(p);
    let mut out = vec![0.0; p.n_shells];
    coeffs.rhs_into(&u.0, &f.0, &mut out);
    Ok(ShellVector(out))
}

/// Energy flux of the quadratic term, `sum_n u_n B(u,u)_n`. Zero by telescoping.
pub fn nonlinear_energy_flux(u: &ShellVector, p: &Params) -> Result<f64> {
    Ok(nonlinear_energy_flux_with_scale(u, p)?.0)
}

/// Flux together with the sum of absolute values of its individual terms,
/// the natural scale for roundoff comparisons.
pub fn nonlinear_energy_flux_with_scale(u: &ShellVector, p: &Params) -> Result<(f64, f64)> {
    p.validate()?;
    u.check(p, "state")?;
    let n = u.len();
    let mut sum = 0.0;
    let mut scale = 0.0;
    for k in 1..=n {
        let un = u.shell(k);
        let a = -p.coupling(k) * u.shell(k - 1).powi(2) * un;
        let b = p.coupling(k + 1) * un * un * u.shell(k + 1);
        sum += a + b;
        scale += a.abs() + b.abs();
    }
    Ok((sum, scale))
}

/// Sampled solution of the shell system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub states: Vec<ShellVector>,
    pub forcing: Option<Vec<ForcingSample>>,
}

impl Trajectory {
    pub fn new(
        grid: Vec<f64>,
        states: Vec<ShellVector>,
        forcing: Option<Vec<ForcingSample>>,
    ) -> Result<Self> {
        let traj = Trajectory {
            grid,
            states,
            forcing,
        };
        traj.validate()?;
        Ok(traj)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(DyadicError::Contract("empty trajectory".into()));
        }
        if self.grid[0] != 0.0 {
            return Err(DyadicError::Contract(format!(
                "trajectory must start at t = 0, got {}",
                self.grid[0]
            )));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DyadicError::Contract(
                "trajectory grid is not strictly increasing".into(),
            ));
        }
        if self.states.len() != self.grid.len() {
            return Err(DyadicError::Contract(format!(
                "{} states for {} grid points",
                self.states.len(),
                self.grid.len()
            )));
        }
        let n = self.states[0].len();
        if self.states.iter().any(|s| s.len() != n) {
            return Err(DyadicError::Contract("ragged trajectory states".into()));
        }
        if let Some(f) = &self.forcing {
            if f.len() != self.grid.len() || f.iter().any(|s| s.len() != n) {
                return Err(DyadicError::Contract(
                    "forcing samples do not match the trajectory".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn n_shells(&self) -> usize {
        self.states[0].len()
    }

    pub fn last_time(&self) -> f64 {
        *self.grid.last().unwrap()
    }
}

/// Left- and right-hand side of the energy balance
/// `sum(u_n(t)^2 + 2 lambda^(2n) int u_n^2) = sum(a_n^2 + 2 int f_n u_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBalance {
    pub lhs: f64,
    pub rhs: f64,
}

impl EnergyBalance {
    pub fn defect(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Streaming composite-trapezoid accumulator for the energy balance.
///
/// Samples must be pushed in increasing time order; each push returns the
/// balance at that instant.
#[derive(Debug, Clone)]
pub struct EnergyAccumulator {
    dissipation: Vec<f64>,
    initial_energy: f64,
    last: Option<(f64, Vec<f64>, Vec<f64>)>,
    dissipated: Vec<f64>,
    work: Vec<f64>,
}

impl EnergyAccumulator {
    pub fn new(p: &Params, n_shells: usize, initial: &[f64]) -> Self {
        EnergyAccumulator {
            dissipation: (1..=n_shells).map(|n| p.dissipation(n)).collect(),
            initial_energy: initial.iter().map(|a| a * a).sum(),
            last: None,
            dissipated: vec![0.0; n_shells],
            work: vec![0.0; n_shells],
        }
    }

    pub fn push(&mut self, t: f64, u: &[f64], f: &[f64]) -> EnergyBalance {
        if let Some((t0, u0, f0)) = &self.last {
            let dt = t - t0;
            for i in 0..u.len() {
                self.dissipated[i] += 0.5 * dt * (u0[i] * u0[i] + u[i] * u[i]);
                self.work[i] += 0.5 * dt * (f0[i] * u0[i] + f[i] * u[i]);
            }
        }
        match &mut self.last {
            Some((t0, u0, f0)) => {
                *t0 = t;
                u0.copy_from_slice(u);
                f0.copy_from_slice(f);
            }
            None => self.last = Some((t, u.to_vec(), f.to_vec())),
        }
        self.balance(u)
    }

    fn balance(&self, u: &[f64]) -> EnergyBalance {
        let mut lhs = 0.0;
        let mut work = 0.0;
        for i in 0..u.len() {
            lhs += u[i] * u[i] + 2.0 * self.dissipation[i] * self.dissipated[i];
            work += self.work[i];
        }
        EnergyBalance {
            lhs,
            rhs: self.initial_energy + 2.0 * work,
        }
    }
}

/// Energy balance of a sampled trajectory at time `t` (trapezoid on the grid,
/// linear interpolation inside the last cell).
pub fn energy_balance(
    traj: &Trajectory,
    t: f64,
    p: &Params,
    initial: &ShellVector,
) -> Result<EnergyBalance> {
    traj.validate()?;
    let forcing = traj
        .forcing
        .as_ref()
        .ok_or_else(|| DyadicError::Contract("trajectory carries no forcing samples".into()))?;
    if initial.len() != traj.n_shells() {
        return Err(DyadicError::Contract(
            "initial data length does not match trajectory".into(),
        ));
    }
    if !(t >= 0.0 && t <= traj.last_time()) {
        return Err(DyadicError::Range(format!(
            "t = {t} outside [0, {}]",
            traj.last_time()
        )));
    }
    let mut acc = EnergyAccumulator::new(p, traj.n_shells(), &initial.0);
    let mut out = acc.push(0.0, &traj.states[0].0, &forcing[0].0);
    for i in 1..traj.grid.len() {
        let ti = traj.grid[i];
        if ti <= t {
            out = acc.push(ti, &traj.states[i].0, &forcing[i].0);
            if ti == t {
                break;
            }
        } else {
            let t0 = traj.grid[i - 1];
            let s = (t - t0) / (ti - t0);
            let lerp = |a: &[f64], b: &[f64]| -> Vec<f64> {
                a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
            };
            let u = lerp(&traj.states[i - 1].0, &traj.states[i].0);
            let f = lerp(&forcing[i - 1].0, &forcing[i].0);
            out = acc.push(t, &u, &f);
            break;
        }
    }
    Ok(out)
}
