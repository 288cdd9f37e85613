//! The non-uniqueness certificate and the uniqueness-regime experiment.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construction::{
    forcing_norm_partials, ForcingPartials, GluingDefects, ShellState, SplitFields,
};
use crate::error::{DyadicError, Result};
use crate::model::{Params, ShellVector};
use crate::profiles::{calibrate_profiles_from, Calibration, EPS_START};
use crate::solver::{galerkin_solve, Forcing, SolveConfig};
use crate::spectral::{evaluate_q, find_q, SpectralReport};

/// Interior samples per grid cell for residuals.
pub const RESIDUAL_SAMPLES: usize = 64;
/// Offset of the residual samples from the cell ends, relative to the cell width.
pub const RESIDUAL_OFFSET: f64 = 1.0 / (1u64 << 40) as f64;
/// Largest number of shells used for the energy balance.
pub const MAX_ENERGY_SHELLS: usize = 256;
/// Shells are added to the energy balance until `lambda^((4 - 2 beta) n)` drops below this.
pub const ENERGY_TAIL_TARGET: f64 = 1e-10;

/// Tolerances and numerical settings of the certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Normalized residual of both solutions in the shell system.
    pub residual: f64,
    /// Relative gluing defect `|h(1) - rho (y, z)| / (|rho y| + |rho z|)`.
    pub gluing: f64,
    /// Relative energy-equality defect.
    pub energy: f64,
    /// Allowed relative deviation of the forcing tail ratio from `lambda^(4 - 2 beta)`.
    pub tail_ratio: f64,
    /// First shell of the tail-ratio check.
    pub tail_from: usize,
    /// Tolerance of the three-mode solve.
    pub h_tol: f64,
    /// Calibration margin on `|rho| > (1 + margin) R`.
    pub margin: f64,
    /// Trapezoid points per grid cell in the energy balance.
    pub energy_samples: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 1e-6,
            gluing: 1e-8,
            energy: 1e-6,
            tail_ratio: 0.1,
            tail_from: 5,
            h_tol: 1e-12,
            margin: 0.1,
            energy_samples: 16384,
        }
    }
}

/// Sup of the shell-system residual, per shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub sign: i8,
    /// `sup |r_n| / (lambda^(2n) sup |u_n|)`, shells `1..=N`.
    pub normalized: Vec<f64>,
    /// `sup |r_n|`.
    pub absolute: Vec<f64>,
    pub overall: f64,
}

fn residual_samples(fields: &SplitFields, n: usize) -> Vec<f64> {
    // every grid cell from the activation of shell n to the horizon
    let mut pts = Vec::with_capacity((n + 1) * RESIDUAL_SAMPLES);
    for m in (1..=n as i64 + 1).rev() {
        let (a, b) = (fields.grid.at(m), fields.grid.at(m - 1));
        let w = b - a;
        for i in 0..RESIDUAL_SAMPLES {
            let s = RESIDUAL_OFFSET
                + (1.0 - 2.0 * RESIDUAL_OFFSET) * i as f64 / (RESIDUAL_SAMPLES - 1) as f64;
            pts.push(a + w * s);
        }
    }
    pts
}

/// Residual of `u = v + sign g` in the shell system, using the exact time
/// derivative of the assembled functions.
pub fn residual_system1(fields: &SplitFields, sign: f64, n_shells: usize) -> ResidualReport {
    let p = fields.params;
    let per_shell: Vec<(f64, f64)> = (1..=n_shells)
        .into_par_iter()
        .map(|n| {
            let mut sup_r: f64 = 0.0;
            let mut sup_u: f64 = 0.0;
            for t in residual_samples(fields, n) {
                let prev = fields.state(n - 1, t);
                let cur = fields.state(n, t);
                let next = fields.state(n + 1, t);
                let u = |s: &ShellState| s.v + sign * s.g;
                let (um, un, up) = (u(&prev), u(&cur), u(&next));
                let du = cur.v_dot + sign * cur.g_dot_dense;
                let f = fields.forcing_from(n, &prev, &cur, &next);
                let r = du + p.dissipation(n) * un - p.coupling(n) * um * um
                    + p.coupling(n + 1) * un * up
                    - f;
                sup_r = sup_r.max(r.abs());
                sup_u = sup_u.max(un.abs());
            }
            let norm = if sup_u > 0.0 {
                sup_r / (p.dissipation(n) * sup_u)
            } else {
                0.0
            };
            (norm, sup_r)
        })
        .collect();
    let normalized: Vec<f64> = per_shell.iter().map(|x| x.0).collect();
    ResidualReport {
        sign: if sign >= 0.0 { 1 } else { -1 },
        overall: normalized.iter().copied().fold(0.0, f64::max),
        absolute: per_shell.iter().map(|x| x.1).collect(),
        normalized,
    }
}

/// Sup of the `g`-equation residual with `g'` from the three-mode right-hand
/// side, normalized like [`residual_system1`].
pub fn g_equation_residual(fields: &SplitFields, n_shells: usize) -> Vec<f64> {
    let p = fields.params;
    (1..=n_shells)
        .into_par_iter()
        .map(|n| {
            let mut sup_r: f64 = 0.0;
            let mut sup_g: f64 = 0.0;
            for t in residual_samples(fields, n) {
                sup_r = sup_r.max(fields.g_equation_residual(n, t).abs());
                sup_g = sup_g.max(fields.state(n, t).g.abs());
            }
            if sup_g > 0.0 {
                sup_r / (p.dissipation(n) * sup_g)
            } else {
                0.0
            }
        })
        .collect()
}

/// Largest `|f+ - f-|` where `f+-` is read off the shell system for `u+-`,
/// relative to `sup |f|`, over shells `1..=N`.
pub fn forcing_agreement(fields: &SplitFields, n_shells: usize) -> (f64, f64) {
    let p = fields.params;
    let per: Vec<(f64, f64)> = (1..=n_shells)
        .into_par_iter()
        .map(|n| {
            let mut diff: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for t in residual_samples(fields, n) {
                let prev = fields.state(n - 1, t);
                let cur = fields.state(n, t);
                let next = fields.state(n + 1, t);
                let read = |sign: f64| {
                    let u = |s: &ShellState| s.v + sign * s.g;
                    let (um, un, up) = (u(&prev), u(&cur), u(&next));
                    cur.v_dot + sign * cur.g_dot_dense + p.dissipation(n) * un
                        - p.coupling(n) * um * um
                        + p.coupling(n + 1) * un * up
                };
                let (fp, fm) = (read(1.0), read(-1.0));
                diff = diff.max((fp - fm).abs());
                scale = scale.max(fields.forcing_from(n, &prev, &cur, &next).abs());
            }
            (diff, scale)
        })
        .collect();
    let diff = per.iter().map(|x| x.0).fold(0.0, f64::max);
    let scale = per.iter().map(|x| x.1).fold(0.0, f64::max);
    (diff, if scale > 0.0 { diff / scale } else { 0.0 })
}

/// Gluing section of the certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingReport {
    /// `|h1(1) - rho y| / (|rho y| + |rho z|)`.
    pub h1_relative: f64,
    /// `|h2(1) - rho z| / (|rho y| + |rho z|)`.
    pub h2_relative: f64,
    pub per_shell: Vec<GluingDefects>,
    pub pass: bool,
}

/// Energy-equality section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Shells included in the balance (beyond the certificate truncation).
    pub shells_used: usize,
    /// `lambda^((4 - 2 beta) shells_used)`, the order of the truncation leak.
    pub truncation_tail: f64,
    pub samples: usize,
    /// `sup_t |lhs - rhs| / sup_t max(lhs, rhs)` for `u+` and `u-`.
    pub plus_defect: f64,
    pub minus_defect: f64,
    pub sup_energy_plus: f64,
    pub sup_energy_minus: f64,
    pub pass: bool,
}

/// Forcing-norm section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingReport {
    #[serde(flatten)]
    pub partials: ForcingPartials,
    pub tail_ratio_deviation: f64,
    /// Geometric bound on the omitted tail `term_N r / (1 - r)`.
    pub tail_bound: f64,
    pub pass: bool,
}

/// `sup_t sum_n (u+_n - u-_n)^2` and the identity `u+ - u- = 2g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistinctnessReport {
    pub sup_difference_sq: f64,
    pub four_sup_g_sq: f64,
    /// Relative cancellation error allowed in the identity, `8 eps sup|v| / sup|g|`.
    pub roundoff_bound: f64,
    pub pass: bool,
}

/// Clauses of the Leray-Hopf definition checked at truncation scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LerayFlags {
    pub energy_bounded: bool,
    /// `lambda^(2n) int u_n^2` per shell (for `u+`).
    pub dissipation_terms: Vec<f64>,
    pub dissipation_ratio: f64,
    pub dissipation_converging: bool,
    pub forcing_converging: bool,
}

/// Measured per-shell decay of `sup |v_n|` and `sup |g_n|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub sup_v: Vec<f64>,
    pub sup_g: Vec<f64>,
    pub v_ratio_expected: f64,
    pub g_ratio_expected: f64,
}

/// Run provenance that may differ between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub threads: usize,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub pass: bool,
    pub checks: BTreeMap<String, bool>,
    pub params: Params,
    pub n_shells: usize,
    pub q: f64,
    pub eps: f64,
    pub rho: f64,
    pub y: f64,
    pub z: f64,
    pub tolerances: Tolerances,
    pub spectral: SpectralReport,
    pub calibration: Calibration,
    pub h_steps: usize,
    pub h_err_estimate: f64,
    pub h_derivative_consistency: f64,
    pub h_endpoint: [f64; 3],
    pub residual_plus: ResidualReport,
    pub residual_minus: ResidualReport,
    pub g_equation_residual: Vec<f64>,
    pub forcing_agreement_abs: f64,
    pub forcing_agreement_rel: f64,
    pub gluing: GluingReport,
    pub energy: EnergyReport,
    pub forcing: ForcingReport,
    pub distinctness: DistinctnessReport,
    pub leray: LerayFlags,
    pub decay: DecayReport,
    pub metadata: Metadata,
}

impl Certificate {
    /// JSON without the metadata block, for byte comparisons.
    pub fn canonical_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("metadata");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Number of shells for which the truncated energy balance leaks less than
/// [`ENERGY_TAIL_TARGET`].
pub fn energy_shell_count(p: &Params, n_shells: usize) -> usize {
    let rate = p.lambda.powf(4.0 - 2.0 * p.beta);
    let mut n = n_shells.max(1);
    while n < MAX_ENERGY_SHELLS && rate.powi(n as i32) > ENERGY_TAIL_TARGET {
        n += 1;
    }
    n
}

struct EnergySweep {
    report: EnergyReport,
    sup_difference_sq: f64,
    four_sup_g_sq: f64,
    dissipation_terms: Vec<f64>,
    sup_v: Vec<f64>,
    sup_g: Vec<f64>,
}

/// One pass over a global grid (K points per cell `[t_{m+1}, t_m]`) that
/// accumulates the energy balance of both solutions with `n_energy` shells and
/// the per-shell sups for the first `n_cert` shells.
fn energy_sweep(fields: &SplitFields, n_cert: usize, n_energy: usize, k: usize) -> EnergySweep {
    let p = fields.params;
    let ne = n_energy;
    let diss: Vec<f64> = (0..=ne + 1).map(|n| p.dissipation(n)).collect();

    // active shells at a point: [lo, hi], with states for lo-1..=hi+1
    struct Point {
        t: f64,
        lo: usize,
        up: Vec<f64>,
        um: Vec<f64>,
        f: Vec<f64>,
        v: Vec<f64>,
        g: Vec<f64>,
    }
    let eval_point = |t: f64| -> Point {
        // shells below m-1 have not started when t < t_{m-1}
        let mut lo = if t > 0.0 {
            let x = (fields.grid.horizon / t).ln() / (2.0 * p.lambda.ln());
            (x.ceil() as i64 - 2).clamp(1, ne as i64 + 1) as usize
        } else {
            ne + 1
        };
        while lo > 1 && fields.grid.at(lo as i64) <= t {
            lo -= 1;
        }
        while lo <= ne && fields.grid.at(lo as i64 + 1) > t {
            lo += 1;
        }
        let mut states: Vec<ShellState> = Vec::new();
        let mut n = lo;
        // collect until the tails underflow
        while n <= ne + 1 {
            let s = fields.state(n, t);
            let done = s.v == 0.0 && s.g == 0.0 && n > lo + 3;
            states.push(s);
            if done {
                break;
            }
            n += 1;
        }
        let count = states.len().min(ne + 1 - lo);
        let zero = ShellState::default();
        let prev0 = fields.state(lo - 1, t);
        let mut up = Vec::with_capacity(count);
        let mut um = Vec::with_capacity(count);
        let mut f = Vec::with_capacity(count);
        let mut v = Vec::with_capacity(count);
        let mut g = Vec::with_capacity(count);
        for i in 0..count {
            let prev = if i == 0 { &prev0 } else { &states[i - 1] };
            let cur = &states[i];
            let next = states.get(i + 1).unwrap_or(&zero);
            up.push(cur.v + cur.g);
            um.push(cur.v - cur.g);
            f.push(fields.forcing_from(lo + i, prev, cur, next));
            v.push(cur.v);
            g.push(cur.g);
        }
        Point { t, lo, up, um, f, v, g }
    };

    let mut times = vec![0.0];
    for m in (0..=ne as i64 + 1).rev() {
        let (a, b) = (fields.grid.at(m + 1), fields.grid.at(m));
        for i in 1..=k {
            times.push(if i == k { b } else { a + (b - a) * i as f64 / k as f64 });
        }
    }

    let mut d_plus = vec![0.0; ne + 1];
    let mut d_minus = vec![0.0; ne + 1];
    let mut w_plus = vec![0.0; ne + 1];
    let mut w_minus = vec![0.0; ne + 1];
    let mut sup_v = vec![0.0f64; n_cert];
    let mut sup_g = vec![0.0f64; n_cert];
    let (mut def_p, mut def_m, mut sc_p, mut sc_m) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut sup_diff, mut sup_g4) = (0.0f64, 0.0f64);

    let dense = |pt: &Point, vals: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; ne + 1];
        for (i, x) in vals.iter().enumerate() {
            out[pt.lo + i] = *x;
        }
        out
    };

    let mut prev: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    for chunk in times.chunks(4096) {
        let pts: Vec<Point> = chunk.par_iter().map(|&t| eval_point(t)).collect();
        for pt in pts {
            let up = dense(&pt, &pt.up);
            let um = dense(&pt, &pt.um);
            let f = dense(&pt, &pt.f);
            if let Some((t0, up0, um0, f0)) = &prev {
                let dt = pt.t - t0;
                for n in 1..=ne {
                    if up0[n] == 0.0 && up[n] == 0.0 && um0[n] == 0.0 && um[n] == 0.0 {
                        continue;
                    }
                    d_plus[n] += 0.5 * dt * (up0[n] * up0[n] + up[n] * up[n]);
                    d_minus[n] += 0.5 * dt * (um0[n] * um0[n] + um[n] * um[n]);
                    w_plus[n] += 0.5 * dt * (f0[n] * up0[n] + f[n] * up[n]);
                    w_minus[n] += 0.5 * dt * (f0[n] * um0[n] + f[n] * um[n]);
                }
            }
            let (mut ep, mut em, mut lp, mut lm, mut rp, mut rm) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for n in 1..=ne {
                ep += up[n] * up[n];
                em += um[n] * um[n];
                lp += 2.0 * diss[n] * d_plus[n];
                lm += 2.0 * diss[n] * d_minus[n];
                rp += 2.0 * w_plus[n];
                rm += 2.0 * w_minus[n];
            }
            let (lhs_p, lhs_m) = (ep + lp, em + lm);
            def_p = def_p.max((lhs_p - rp).abs());
            def_m = def_m.max((lhs_m - rm).abs());
            sc_p = sc_p.max(lhs_p.max(rp));
            sc_m = sc_m.max(lhs_m.max(rm));
            let (mut diff, mut g2) = (0.0, 0.0);
            for (i, n) in (pt.lo..pt.lo + pt.v.len()).enumerate() {
                if n > n_cert {
                    break;
                }
                let d = pt.up[i] - pt.um[i];
                diff += d * d;
                g2 += pt.g[i] * pt.g[i];
                sup_v[n - 1] = sup_v[n - 1].max(pt.v[i].abs());
                sup_g[n - 1] = sup_g[n - 1].max(pt.g[i].abs());
            }
            sup_diff = sup_diff.max(diff);
            sup_g4 = sup_g4.max(4.0 * g2);
            prev = Some((pt.t, up, um, f));
        }
    }
    let rel = |d: f64, s: f64| if s > 0.0 { d / s } else { 0.0 };
    EnergySweep {
        report: EnergyReport {
            shells_used: ne,
            truncation_tail: p.lambda.powf((4.0 - 2.0 * p.beta) * ne as f64),
            samples: times.len(),
            plus_defect: rel(def_p, sc_p),
            minus_defect: rel(def_m, sc_m),
            sup_energy_plus: sc_p,
            sup_energy_minus: sc_m,
            pass: false,
        },
        sup_difference_sq: sup_diff,
        four_sup_g_sq: sup_g4,
        dissipation_terms: (1..=n_cert).map(|n| diss[n] * d_plus[n]).collect(),
        sup_v,
        sup_g,
    }
}

/// Everything the certificate needs after the search and calibration stages.
pub struct Construction {
    pub spectral: SpectralReport,
    pub calibration: Calibration,
    pub fields: SplitFields,
}

/// Spectral search, calibration and the three-mode solve.
pub fn build_construction(p: &Params, tol: &Tolerances) -> Result<Construction> {
    build_construction_with(p, tol, None, None)
}

/// As [`build_construction`], optionally with a fixed coupling `q` (no search;
/// every gate must still pass) and a starting ramp width.
pub fn build_construction_with(
    p: &Params,
    tol: &Tolerances,
    q: Option<f64>,
    eps: Option<f64>,
) -> Result<Construction> {
    check_hypotheses(p)?;
    let spectral = match q {
        None => find_q(p, p.rho_threshold),
        Some(q) => evaluate_q(q, p, p.rho_threshold).and_then(|r| match r.checks.first_failure() {
            None => Ok(r),
            Some(gate) => Err(DyadicError::Search(format!("q = {q} fails the {gate} gate"))),
        }),
    }
    .map_err(|e| e.at_stage("spectrum"))?;
    let calibration = calibrate_profiles_from(&spectral, p, tol.margin, eps.unwrap_or(EPS_START))
        .map_err(|e| e.at_stage("calibration"))?;
    let fields = SplitFields::assemble(p, &calibration, tol.h_tol)
        .map_err(|e| e.at_stage("assembly"))?;
    Ok(Construction {
        spectral,
        calibration,
        fields,
    })
}

fn check_hypotheses(p: &Params) -> Result<()> {
    p.validate()?;
    if !(p.beta > 2.0) {
        return Err(DyadicError::Precondition(format!(
            "the construction needs beta > 2, got {}",
            p.beta
        )));
    }
    p.validate_for_construction()
}

/// Full certificate for `p.n_shells` shells.
pub fn certify_nonuniqueness(p: &Params, tol: &Tolerances) -> Result<Certificate> {
    let start = Instant::now();
    let c = build_construction(p, tol)?;
    certify_construction(p, tol, c, start)
}

pub fn certify_construction(
    p: &Params,
    tol: &Tolerances,
    c: Construction,
    start: Instant,
) -> Result<Certificate> {
    let n = p.n_shells;
    let fields = &c.fields;
    let cal = &c.calibration;

    let residual_plus = residual_system1(fields, 1.0, n);
    let residual_minus = residual_system1(fields, -1.0, n);
    let g_res = g_equation_residual(fields, n);
    let (agree_abs, agree_rel) = forcing_agreement(fields, n);

    let e = fields.h.endpoint;
    let scale = (cal.rho * cal.y).abs() + (cal.rho * cal.z).abs();
    let h1_rel = (e[0] - cal.rho * cal.y).abs() / scale;
    let h2_rel = (e[1] - cal.rho * cal.z).abs() / scale;
    let gluing = GluingReport {
        h1_relative: h1_rel,
        h2_relative: h2_rel,
        per_shell: (1..=n).map(|k| fields.gluing_defects(k)).collect(),
        pass: h1_rel <= tol.gluing && h2_rel <= tol.gluing,
    };

    let partials = forcing_norm_partials(fields, n).map_err(|e| e.at_stage("forcing norms"))?;
    let dev = partials.tail_ratio_deviation(tol.tail_from);
    let r = partials.expected_ratio;
    let tail_bound = partials.terms.last().copied().unwrap_or(0.0) * r / (1.0 - r);
    let forcing = ForcingReport {
        tail_ratio_deviation: dev,
        tail_bound,
        pass: dev <= tol.tail_ratio && partials.nondecreasing(),
        partials,
    };

    let ne = energy_shell_count(p, n);
    let sweep = energy_sweep(fields, n, ne, tol.energy_samples);
    let mut energy = sweep.report;
    energy.pass = energy.plus_defect <= tol.energy && energy.minus_defect <= tol.energy;

    let sup_v = sweep.sup_v.iter().copied().fold(0.0, f64::max);
    let sup_g = sweep.sup_g.iter().copied().fold(0.0, f64::max);
    let roundoff_bound = 8.0 * f64::EPSILON * sup_v.max(sup_g) / sup_g.max(f64::MIN_POSITIVE);
    let identity_gap = (sweep.sup_difference_sq - sweep.four_sup_g_sq).abs();
    let distinct = DistinctnessReport {
        sup_difference_sq: sweep.sup_difference_sq,
        four_sup_g_sq: sweep.four_sup_g_sq,
        roundoff_bound,
        pass: sweep.sup_difference_sq > 0.0
            && identity_gap <= roundoff_bound * sweep.four_sup_g_sq,
    };

    let dt = &sweep.dissipation_terms;
    let from = tol.tail_from.min(dt.len()).max(2);
    let diss_ratio = (from..=dt.len())
        .map(|k| dt[k - 1] / dt[k - 2])
        .fold(0.0, f64::max);
    let leray = LerayFlags {
        energy_bounded: energy.sup_energy_plus.is_finite() && energy.sup_energy_minus.is_finite(),
        dissipation_terms: dt.clone(),
        dissipation_ratio: diss_ratio,
        dissipation_converging: diss_ratio < 1.0,
        forcing_converging: forcing.partials.ratios.last().is_some_and(|&x| x < 1.0),
    };
    let decay = DecayReport {
        sup_v: sweep.sup_v,
        sup_g: sweep.sup_g,
        v_ratio_expected: p.lambda.powf(2.0 - p.beta),
        g_ratio_expected: 1.0 / cal.rho.abs(),
    };

    let mut checks = BTreeMap::new();
    checks.insert("spectral_gates".to_string(), c.spectral.pass);
    checks.insert(
        "residual_plus".to_string(),
        residual_plus.overall <= tol.residual,
    );
    checks.insert(
        "residual_minus".to_string(),
        residual_minus.overall <= tol.residual,
    );
    checks.insert("gluing".to_string(), gluing.pass);
    checks.insert("energy_equality".to_string(), energy.pass);
    checks.insert("forcing_tail".to_string(), forcing.pass);
    checks.insert("distinct".to_string(), distinct.pass);
    checks.insert("leray_energy_bounded".to_string(), leray.energy_bounded);
    checks.insert(
        "leray_dissipation_converging".to_string(),
        leray.dissipation_converging,
    );
    checks.insert("leray_forcing_converging".to_string(), leray.forcing_converging);
    checks.insert(
        "forcing_agreement".to_string(),
        agree_rel <= tol.residual,
    );
    let pass = checks.values().all(|&b| b);

    Ok(Certificate {
        pass,
        checks,
        params: *p,
        n_shells: n,
        q: c.spectral.q,
        eps: cal.eps,
        rho: cal.rho,
        y: cal.y,
        z: cal.z,
        tolerances: *tol,
        h_steps: fields.h.steps,
        h_err_estimate: fields.h.err_estimate,
        h_derivative_consistency: fields.h.derivative_consistency(),
        h_endpoint: fields.h.endpoint,
        spectral: c.spectral.clone(),
        calibration: cal.clone(),
        residual_plus,
        residual_minus,
        g_equation_residual: g_res,
        forcing_agreement_abs: agree_abs,
        forcing_agreement_rel: agree_rel,
        gluing,
        energy,
        forcing,
        distinctness: distinct,
        leray,
        decay,
        metadata: Metadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            elapsed_ms: start.elapsed().as_millis(),
        },
    })
}

/// Settings of [`uniqueness_experiment`].
#[derive(Debug, Clone)]
pub struct UniquenessSetup {
    pub n_list: Vec<usize>,
    pub perturbation: f64,
    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Distance tolerance for the pass flag.
    pub tolerance: f64,
    /// `a_n` for `n = 1..`; shorter vectors are padded with zeros.
    pub initial: Vec<f64>,
    pub forcing: Forcing,
}

impl UniquenessSetup {
    /// `a_n = 2^-n`, unit forcing on shell 1, `N = 8, 12`, `delta = 1e-6`.
    pub fn standard(p: &Params) -> Self {
        UniquenessSetup {
            n_list: vec![8, 12],
            perturbation: 1e-6,
            t_end: Params::construction_horizon(p.lambda),
            rtol: 1e-11,
            atol: 1e-14,
            tolerance: 1e-5,
            initial: (1..=16).map(|n| 0.5f64.powi(n)).collect(),
            forcing: Forcing::Constant(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPair {
    pub n_a: usize,
    pub n_b: usize,
    pub distance_mid: f64,
    pub distance_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRun {
    pub n_shells: usize,
    /// Endpoint distance of the `+delta` and `-delta` runs from the unperturbed one.
    pub distance_plus: f64,
    pub distance_minus: f64,
    /// `Phi(t) = sum (u_plus - u_minus)^2` at `t = 0`, its maximum and its final value.
    pub phi_initial: f64,
    pub phi_max: f64,
    pub phi_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub lambda: f64,
    pub beta: f64,
    pub t_end: f64,
    pub perturbation: f64,
    pub tolerance: f64,
    pub resolutions: Vec<ResolutionPair>,
    pub perturbations: Vec<PerturbationRun>,
    /// `sup_t sum_{n >= k} u_n^2` for `k = 1..=N_max` on the finest run.
    pub tails: Vec<f64>,
    pub tails_nonincreasing: bool,
    pub pass: bool,
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let d = a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Galerkin runs at several truncations and with perturbed data, in the
/// regime `beta <= 2` where the solution is unique.
pub fn uniqueness_experiment(p: &Params, setup: &UniquenessSetup) -> Result<UniquenessReport> {
    p.validate()?;
    if p.beta > 2.0 {
        return Err(DyadicError::Precondition(format!(
            "the uniqueness experiment needs beta <= 2, got {}",
            p.beta
        )));
    }
    if setup.n_list.is_empty() {
        return Err(DyadicError::Input("empty list of truncations".into()));
    }
    let t_end = setup.t_end;
    let mut grid: Vec<f64> = (0..=64).map(|i| t_end * i as f64 / 64.0).collect();
    grid[64] = t_end;
    let mid = 32;
    let data = |n: usize, shift: f64| {
        ShellVector(
            (0..n)
                .map(|i| setup.initial.get(i).copied().unwrap_or(0.0) + shift)
                .collect(),
        )
    };
    let run = |n: usize, shift: f64| {
        let cfg = SolveConfig::new(n, t_end, data(n, shift), setup.forcing.clone())
            .with_tolerances(setup.rtol, setup.atol)
            .with_output(grid.clone());
        galerkin_solve(&cfg, p)
    };

    let runs: Vec<_> = setup
        .n_list
        .par_iter()
        .map(|&n| -> Result<_> {
            let base = run(n, 0.0)?;
            let plus = run(n, setup.perturbation)?;
            let minus = run(n, -setup.perturbation)?;
            Ok((n, base, plus, minus))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut resolutions = Vec::new();
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let (a, b) = (&runs[i].1, &runs[j].1);
            resolutions.push(ResolutionPair {
                n_a: runs[i].0,
                n_b: runs[j].0,
                distance_mid: l2_distance(&a.states[mid].0, &b.states[mid].0),
                distance_end: l2_distance(&a.states[64].0, &b.states[64].0),
            });
        }
    }
    let perturbations: Vec<PerturbationRun> = runs
        .iter()
        .map(|(n, base, plus, minus)| {
            let phi: Vec<f64> = plus
                .states
                .iter()
                .zip(&minus.states)
                .map(|(a, b)| l2_distance(&a.0, &b.0).powi(2))
                .collect();
            PerturbationRun {
                n_shells: *n,
                distance_plus: l2_distance(&plus.states[64].0, &base.states[64].0),
                distance_minus: l2_distance(&minus.states[64].0, &base.states[64].0),
                phi_initial: phi[0],
                phi_max: phi.iter().copied().fold(0.0, f64::max),
                phi_final: phi[64],
            }
        })
        .collect();

    let finest = runs.iter().max_by_key(|r| r.0).unwrap();
    let nmax = finest.0;
    let tails: Vec<f64> = (1..=nmax)
        .map(|k| {
            finest
                .1
                .states
                .iter()
                .map(|s| s.0[k - 1..].iter().map(|x| x * x).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .collect();
    let tails_nonincreasing = tails.windows(2).all(|w| w[1] <= w[0]);
    let pass = resolutions
        .iter()
        .all(|r| r.distance_mid <= setup.tolerance && r.distance_end <= setup.tolerance)
        && perturbations
            .iter()
            .all(|r| r.distance_plus <= setup.tolerance && r.distance_minus <= setup.tolerance);

    Ok(UniquenessReport {
        lambda: p.lambda,
        beta: p.beta,
        t_end,
        perturbation: setup.perturbation,
        tolerance: setup.tolerance,
        resolutions,
        perturbations,
        tails,
        tails_nonincreasing,
        pass,
    })
}
