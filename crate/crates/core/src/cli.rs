//! Command line front end.
//!
//! Every command resolves a [`RunConfig`] from an optional JSON file and the
//! flags (flags win), validates it, runs, and writes its artifacts to the
//! output directory. Each artifact embeds the resolved configuration: JSON
//! files under a `config` key, CSV files in a leading `# config=` line.
//!
//! | exit | meaning                         |
//! |------|---------------------------------|
//! | 0    | success, every check passed     |
//! | 1    | a certificate or check failed   |
//! | 2    | validation error                |
//! | 3    | search or calibration failure   |
//! | 4    | numeric or i/o failure          |

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::construction::SplitFields;
use crate::error::{DyadicError, Result};
use crate::model::{Params, ShellVector, Trajectory};
use crate::solver::{galerkin_solve, geometric_grid, Forcing, SolveConfig};
use crate::spectral::{evaluate_q, find_q};
use crate::verify::{
    build_construction_with, certify_construction, uniqueness_experiment, Tolerances,
    UniquenessSetup,
};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "DYADIC_THREADS";

/// Sub-samples per geometric cell in the CSV outputs.
const CSV_SUBDIVISION: usize = 16;

#[derive(Debug, Parser)]
#[command(name = "dyadic", version, about = "Dyadic shell model laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Constant-coefficient spectral search (or a fixed q).
    Spectrum(Flags),
    /// Build the two solutions and certify them.
    Certify(Flags),
    /// Galerkin solve of the truncated system.
    Solve(Flags),
    /// Build the two solutions and export the fields.
    Construct(Flags),
    /// Resolution and perturbation study in the uniqueness regime.
    Uniqueness(Flags),
}

#[derive(Debug, Args, Default)]
struct Flags {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Number of shells; `uniqueness` takes a comma separated list.
    #[arg(long, value_delimiter = ',')]
    shells: Option<Vec<usize>>,
    /// Amplification threshold, a number or `auto` (lambda^beta).
    #[arg(long = "R")]
    r: Option<String>,
    #[arg(long)]
    q: Option<f64>,
    /// Starting ramp width of the calibration.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    tol_residual: Option<f64>,
    #[arg(long)]
    tol_gluing: Option<f64>,
    #[arg(long)]
    tol_energy: Option<f64>,
    /// `zero`, `constant:<c>` or `constructed` (solve only).
    #[arg(long)]
    forcing: Option<String>,
    /// Final time (solve and uniqueness).
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

/// `R` as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threshold {
    Value(f64),
    Auto(String),
}

/// One shell count or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShellList {
    One(usize),
    Many(Vec<usize>),
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    #[serde(alias = "n_shells")]
    pub shells: Option<ShellList>,
    #[serde(rename = "R")]
    pub r: Option<Threshold>,
    pub q: Option<f64>,
    pub eps: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub tol_residual: Option<f64>,
    pub tol_gluing: Option<f64>,
    pub tol_energy: Option<f64>,
    pub forcing: Option<String>,
    pub t_end: Option<f64>,
    pub initial: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub lambda: f64,
    pub beta: f64,
    pub shells: Vec<usize>,
    /// `None` means `lambda^beta`.
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub q: Option<f64>,
    pub eps: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub tol_residual: f64,
    pub tol_gluing: f64,
    pub tol_energy: f64,
    pub forcing: String,
    pub t_end: Option<f64>,
    pub initial: Option<Vec<f64>>,
    pub out: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    fn resolve(command: &str, flags: Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    DyadicError::Input(format!("cannot read config {}: {e}", path.display()))
                })?;
                serde_json::from_str::<ConfigFile>(&text)?
            }
            None => ConfigFile::default(),
        };
        let uniqueness = command == "uniqueness";
        let shells = match (flags.shells, file.shells) {
            (Some(v), _) => v,
            (None, Some(ShellList::One(n))) => vec![n],
            (None, Some(ShellList::Many(v))) => v,
            (None, None) if uniqueness => vec![8, 12],
            (None, None) => vec![10],
        };
        let r = match (flags.r, file.r) {
            (Some(s), _) => parse_threshold(&s)?,
            (None, Some(Threshold::Value(x))) => Some(x),
            (None, Some(Threshold::Auto(s))) => parse_threshold(&s)?,
            (None, None) => None,
        };
        let defaults = Tolerances::default();
        let (rtol, atol) = if uniqueness { (1e-11, 1e-14) } else { (1e-10, 1e-12) };
        let cfg = RunConfig {
            command: command.to_string(),
            lambda: flags.lambda.or(file.lambda).unwrap_or(2.0),
            beta: flags
                .beta
                .or(file.beta)
                .unwrap_or(if uniqueness { 2.0 } else { 2.5 }),
            shells,
            r,
            q: flags.q.or(file.q),
            eps: flags.eps.or(file.eps),
            rtol: flags.rtol.or(file.rtol).unwrap_or(rtol),
            atol: flags.atol.or(file.atol).unwrap_or(atol),
            tol_residual: flags
                .tol_residual
                .or(file.tol_residual)
                .unwrap_or(defaults.residual),
            tol_gluing: flags.tol_gluing.or(file.tol_gluing).unwrap_or(defaults.gluing),
            tol_energy: flags.tol_energy.or(file.tol_energy).unwrap_or(defaults.energy),
            forcing: flags
                .forcing
                .or(file.forcing)
                .unwrap_or_else(|| if uniqueness { "constant:1" } else { "zero" }.to_string()),
            t_end: flags.t_end.or(file.t_end),
            initial: file.initial,
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            seed: flags.seed.or(file.seed).unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that do not need any numerics.
    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if self.shells.is_empty() || self.shells.contains(&0) {
            return Err(DyadicError::Domain("shell counts must be >= 1".into()));
        }
        if self.command != "uniqueness" && self.shells.len() != 1 {
            return Err(DyadicError::Input(format!(
                "`{}` takes a single shell count",
                self.command
            )));
        }
        for (name, x) in [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("tol-residual", self.tol_residual),
            ("tol-gluing", self.tol_gluing),
            ("tol-energy", self.tol_energy),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return Err(DyadicError::Domain(format!("{name} must be > 0, got {x}")));
            }
        }
        if let Some(q) = self.q {
            if !(q.is_finite() && q > 0.0) {
                return Err(DyadicError::Domain(format!("q must be > 0, got {q}")));
            }
        }
        if let Some(t) = self.t_end {
            if !(t.is_finite() && t > 0.0) {
                return Err(DyadicError::Domain(format!("t-end must be > 0, got {t}")));
            }
        }
        parse_forcing(&self.forcing)?;
        Ok(())
    }

    /// Model parameters for the first shell count.
    pub fn params(&self) -> Result<Params> {
        let n = self.shells.first().copied().unwrap_or(1);
        let mut p = Params::new(self.lambda, self.beta, n.max(1))?;
        if let Some(r) = self.r {
            p = p.with_rho_threshold(r)?;
        }
        Ok(p)
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            residual: self.tol_residual,
            gluing: self.tol_gluing,
            energy: self.tol_energy,
            ..Tolerances::default()
        }
    }
}

fn parse_threshold(s: &str) -> Result<Option<f64>> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    s.trim()
        .parse::<f64>()
        .map(Some)
        .map_err(|_| DyadicError::Input(format!("R must be a number or `auto`, got `{s}`")))
}

enum ForcingSpec {
    Zero,
    Constant(f64),
    Constructed,
}

fn parse_forcing(s: &str) -> Result<ForcingSpec> {
    match s {
        "zero" => Ok(ForcingSpec::Zero),
        "constructed" => Ok(ForcingSpec::Constructed),
        _ => match s.strip_prefix("constant:").map(|c| c.trim().parse::<f64>()) {
            Some(Ok(c)) if c.is_finite() => Ok(ForcingSpec::Constant(c)),
            _ => Err(DyadicError::Input(format!(
                "forcing must be `zero`, `constant:<c>` or `constructed`, got `{s}`"
            ))),
        },
    }
}

/// Parse `args` (program name first), run the command and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    let (name, flags) = match cli.command {
        Command::Spectrum(f) => ("spectrum", f),
        Command::Certify(f) => ("certify", f),
        Command::Solve(f) => ("solve", f),
        Command::Construct(f) => ("construct", f),
        Command::Uniqueness(f) => ("uniqueness", f),
    };
    let result = RunConfig::resolve(name, flags).and_then(|cfg| execute(&cfg));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // Fails only if the pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Run a resolved configuration and return the exit code.
pub fn execute(cfg: &RunConfig) -> Result<i32> {
    match cfg.command.as_str() {
        "spectrum" => cmd_spectrum(cfg),
        "certify" => cmd_certify(cfg),
        "solve" => cmd_solve(cfg),
        "construct" => cmd_construct(cfg),
        "uniqueness" => cmd_uniqueness(cfg),
        other => Err(DyadicError::Input(format!("unknown command `{other}`"))),
    }
}

fn cmd_spectrum(cfg: &RunConfig) -> Result<i32> {
    let p = cfg.params()?;
    let report = match cfg.q {
        Some(q) => evaluate_q(q, &p, p.rho_threshold)?,
        None => find_q(&p, p.rho_threshold)?,
    };
    let path = cfg.out.join("spectrum.json");
    write_json(&path, cfg, &serde_json::to_value(&report)?)?;
    eprintln!(
        "q = {}, rho = {:e}, pass = {} -> {}",
        report.q,
        report.rho,
        report.pass,
        path.display()
    );
    Ok(if report.pass { 0 } else { 1 })
}

fn cmd_certify(cfg: &RunConfig) -> Result<i32> {
    let start = Instant::now();
    let p = cfg.params()?;
    let tol = cfg.tolerances();
    let c = build_construction_with(&p, &tol, cfg.q, cfg.eps)?;
    let fields = Arc::new(c.fields.clone());
    let cert = certify_construction(&p, &tol, c, start)?;
    let mut value = serde_json::to_value(&cert)?;
    // Keep the metadata block last so it is easy to strip.
    if let Some(obj) = value.as_object_mut() {
        if let Some(meta) = obj.remove("metadata") {
            obj.insert("metadata".into(), meta);
        }
    }
    write_json(&cfg.out.join("certificate.json"), cfg, &value)?;
    write_fields_csv(&cfg.out.join("fields.csv"), cfg, &fields, p.n_shells)?;
    let failed: Vec<&str> = cert
        .checks
        .iter()
        .filter(|(_, ok)| !**ok)
        .map(|(k, _)| k.as_str())
        .collect();
    if failed.is_empty() {
        eprintln!("certificate passed -> {}", cfg.out.display());
        Ok(0)
    } else {
        eprintln!("certificate failed: {}", failed.join(", "));
        Ok(1)
    }
}

fn cmd_construct(cfg: &RunConfig) -> Result<i32> {
    let p = cfg.params()?;
    let tol = cfg.tolerances();
    let c = build_construction_with(&p, &tol, cfg.q, cfg.eps)?;
    let summary = serde_json::json!({
        "spectral": c.spectral,
        "calibration": c.calibration,
        "h_steps": c.fields.h.steps,
        "h_err_estimate": c.fields.h.err_estimate,
        "h_endpoint": c.fields.h.endpoint,
    });
    write_json(&cfg.out.join("construction.json"), cfg, &summary)?;
    write_fields_csv(&cfg.out.join("fields.csv"), cfg, &c.fields, p.n_shells)?;
    eprintln!("fields written -> {}", cfg.out.display());
    Ok(0)
}

fn cmd_solve(cfg: &RunConfig) -> Result<i32> {
    let mut p = cfg.params()?;
    let n = p.n_shells;
    let forcing = match parse_forcing(&cfg.forcing)? {
        ForcingSpec::Zero => Forcing::Zero,
        ForcingSpec::Constant(c) => Forcing::Constant(c),
        ForcingSpec::Constructed => {
            let c = build_construction_with(&p, &cfg.tolerances(), cfg.q, cfg.eps)?;
            Forcing::Constructed(Arc::new(c.fields))
        }
    };
    let t_end = cfg.t_end.unwrap_or(p.horizon);
    p = p.with_horizon(t_end)?;
    let initial = match &cfg.initial {
        Some(a) if a.len() == n => ShellVector(a.clone()),
        Some(a) => {
            return Err(DyadicError::Input(format!(
                "initial data has {} entries, expected {n}",
                a.len()
            )))
        }
        None => ShellVector(vec![0.0; n]),
    };
    let grid = geometric_grid(t_end, p.lambda, n, CSV_SUBDIVISION);
    let solve = SolveConfig::new(n, t_end, initial, forcing)
        .with_tolerances(cfg.rtol, cfg.atol)
        .with_output(grid);
    let traj = galerkin_solve(&solve, &p)?;
    let path = cfg.out.join("trajectory.csv");
    write_trajectory_csv(&path, cfg, &traj)?;
    eprintln!("{} samples -> {}", traj.grid.len(), path.display());
    Ok(0)
}

fn cmd_uniqueness(cfg: &RunConfig) -> Result<i32> {
    let p = cfg.params()?;
    let mut setup = UniquenessSetup::standard(&p);
    setup.n_list = cfg.shells.clone();
    setup.rtol = cfg.rtol;
    setup.atol = cfg.atol;
    if let Some(t) = cfg.t_end {
        setup.t_end = t;
    }
    if let Some(a) = &cfg.initial {
        setup.initial = a.clone();
    }
    setup.forcing = match parse_forcing(&cfg.forcing)? {
        ForcingSpec::Zero => Forcing::Zero,
        ForcingSpec::Constant(c) => Forcing::Constant(c),
        ForcingSpec::Constructed => {
            return Err(DyadicError::Input(
                "constructed forcing needs beta > 2, outside the uniqueness regime".into(),
            ))
        }
    };
    let report = uniqueness_experiment(&p, &setup)?;
    let path = cfg.out.join("uniqueness.json");
    write_json(&path, cfg, &serde_json::to_value(&report)?)?;
    eprintln!("pass = {} -> {}", report.pass, path.display());
    Ok(if report.pass { 0 } else { 1 })
}

/// Format with 17 significant digits, which round-trips every double.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn config_line(cfg: &RunConfig) -> Result<String> {
    Ok(format!("# config={}\n", serde_json::to_string(cfg)?))
}

fn write_fields_csv(path: &Path, cfg: &RunConfig, fields: &SplitFields, n: usize) -> Result<()> {
    let grid = geometric_grid(fields.grid.horizon, fields.params.lambda, n, CSV_SUBDIVISION);
    let mut s = config_line(cfg)?;
    s.push_str("t,n,v,g,u_plus,u_minus,f\n");
    for &t in &grid {
        for k in 1..=n {
            let st = fields.state(k, t);
            let f = fields.forcing(k, t);
            let _ = writeln!(
                s,
                "{},{k},{},{},{},{},{}",
                fmt17(t),
                fmt17(st.v),
                fmt17(st.g),
                fmt17(st.v + st.g),
                fmt17(st.v - st.g),
                fmt17(f)
            );
        }
    }
    write_atomic(path, s.as_bytes())
}

fn write_trajectory_csv(path: &Path, cfg: &RunConfig, traj: &Trajectory) -> Result<()> {
    let mut s = config_line(cfg)?;
    s.push_str("t,n,u,f\n");
    for (i, (&t, u)) in traj.grid.iter().zip(&traj.states).enumerate() {
        for (k, &x) in u.0.iter().enumerate() {
            let f = traj
                .forcing
                .as_ref()
                .map(|fs| fs[i].0[k])
                .unwrap_or(0.0);
            let _ = writeln!(s, "{},{},{},{}", fmt17(t), k + 1, fmt17(x), fmt17(f));
        }
    }
    write_atomic(path, s.as_bytes())
}

fn write_json(path: &Path, cfg: &RunConfig, body: &serde_json::Value) -> Result<()> {
    let mut v = serde_json::Map::new();
    v.insert("config".into(), serde_json::to_value(cfg)?);
    if let serde_json::Value::Object(obj) = body {
        for (k, x) in obj {
            v.insert(k.clone(), x.clone());
        }
    }
    let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(v))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Write through a temporary file in the same directory and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| DyadicError::Input(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp.{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        DyadicError::Io(e)
    })
}
