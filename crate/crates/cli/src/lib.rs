//! Command-line runner for the conelab experiments.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for an
//! invalid configuration or unusable output directory, 3 when a numerical
//! solve does not converge.

// `!(x > 0.0)` style guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
pub mod config;
pub mod output;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{validate_config, Command, ConfigReport, RunConfig};
use output::{Check, RunFailure, Writer};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "CONELAB_OUTPUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("[{id}] {source}")]
    Numerics { id: String, source: conelab::Error },
    #[error("[{id}] {source}")]
    Io { id: String, source: std::io::Error },
}

impl RunError {
    pub fn id(&self) -> &str {
        match self {
            RunError::Numerics { id, .. } | RunError::Io { id, .. } => id,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use conelab::Error as E;
        match self {
            RunError::Io { .. } => EXIT_INVALID_CONFIG,
            RunError::Numerics { source, .. } => match source {
                E::InvalidParameter { .. } | E::OutOfDomain(_) | E::UnsupportedCenter(_) | E::Parse(_) => {
                    EXIT_INVALID_CONFIG
                }
                E::NonConvergence(_) | E::ComplexRoots { .. } | E::Domain(_) | E::EmptyRange(_) => {
                    EXIT_NON_CONVERGENCE
                }
            },
        }
    }
}

/// What a finished run produced.
#[derive(Debug)]
pub struct RunReport {
    pub exit_code: i32,
    pub checks: Vec<Check>,
    pub failure: Option<RunFailure>,
    pub files: Vec<String>,
}

/// Execute one experiment, writing its files and `summary.json` into the
/// configured output directory.
pub fn run(cfg: &RunConfig) -> RunReport {
    let mut out = match Writer::create(cfg) {
        Ok(w) => w,
        Err(e) => {
            return RunReport {
                exit_code: EXIT_INVALID_CONFIG,
                checks: Vec::new(),
                failure: Some(RunFailure {
                    id: "output.dir".into(),
                    message: format!("{}: {e}", cfg.output_dir.display()),
                }),
                files: Vec::new(),
            }
        }
    };
    let result = match cfg.command {
        Command::Spectrum => commands::spectrum_cmd(cfg, &mut out),
        Command::Foliate => commands::foliate_cmd(cfg, &mut out),
        Command::PlateauSweep => commands::plateau_cmd(cfg, &mut out),
        Command::JacobiSuite => commands::jacobi_cmd(cfg, &mut out),
        Command::Diagnostics => commands::diagnostics_cmd(cfg, &mut out),
    };
    let (checks, failure, exit_code) = match result {
        Ok(checks) => {
            let code = if checks.iter().all(|c| c.passed) { EXIT_OK } else { EXIT_CHECK_FAILED };
            (checks, None, code)
        }
        Err(e) => {
            let f = RunFailure {
                id: e.id().to_string(),
                message: e.to_string(),
            };
            (Vec::new(), Some(f), e.exit_code())
        }
    };
    let exit_code = match out.summary(&checks, failure.as_ref(), exit_code) {
        Ok(()) => exit_code,
        Err(_) if exit_code == EXIT_OK => EXIT_INVALID_CONFIG,
        Err(_) => exit_code,
    };
    RunReport {
        exit_code,
        checks,
        failure,
        files: out.files().to_vec(),
    }
}

#[derive(Debug, Parser)]
#[command(name = "conelab", version, about = "Minimal cone experiments: spectra, foliates, Plateau sweeps, Jacobi fields")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Indicial roots of the link spectrum and cone constants.
    Spectrum(Overrides),
    /// Shoot the foliates S_± and fit their decay over the cone.
    Foliate(Overrides),
    /// Solve the equivariant Plateau problem across boundary offsets.
    PlateauSweep(Overrides),
    /// Three-annulus, Dirichlet and equivariant Jacobi field checks.
    JacobiSuite(Overrides),
    /// Density, density radius, graphicality and mass bound of a foliate leaf.
    Diagnostics(Overrides),
}

/// Flags override the config file, which overrides the defaults. Values are
/// validated together so every problem is reported at once.
#[derive(Debug, Args)]
struct Overrides {
    /// Key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (takes precedence over CONELAB_OUTPUT_DIR).
    #[arg(long)]
    output: Option<String>,
    /// Print the effective config and exit without running.
    #[arg(long)]
    dry_run: bool,
    /// Also emit SVG plots.
    #[arg(long)]
    plots: bool,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    max_degree: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    r_max: Option<String>,
    #[arg(long)]
    fit_lo: Option<String>,
    #[arg(long)]
    fit_hi: Option<String>,
    /// plus, minus or both.
    #[arg(long)]
    sign: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    t_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    t_max: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    starts: Option<String>,
    #[arg(long)]
    rho0: Option<String>,
    #[arg(long)]
    fields: Option<String>,
    #[arg(long)]
    annuli: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    r_match: Option<String>,
    #[arg(long)]
    mismatch_floor: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    density_radius_cap: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// origin, x:<rho> or y:<rho>.
    #[arg(long, allow_hyphen_values = true)]
    center: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(String, String)> {
        let fields: [(&str, &Option<String>); 22] = [
            ("p", &self.p),
            ("q", &self.q),
            ("max_degree", &self.max_degree),
            ("tol", &self.tol),
            ("r_max", &self.r_max),
            ("fit_lo", &self.fit_lo),
            ("fit_hi", &self.fit_hi),
            ("sign", &self.sign),
            ("t_min", &self.t_min),
            ("t_max", &self.t_max),
            ("samples", &self.samples),
            ("starts", &self.starts),
            ("rho0", &self.rho0),
            ("fields", &self.fields),
            ("annuli", &self.annuli),
            ("seed", &self.seed),
            ("r_match", &self.r_match),
            ("mismatch_floor", &self.mismatch_floor),
            ("tau", &self.tau),
            ("eps", &self.eps),
            ("density_radius_cap", &self.density_radius_cap),
            ("lambda", &self.lambda),
        ];
        let mut out: Vec<(String, String)> = fields
            .iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        if let Some(c) = &self.center {
            out.push(("center".into(), c.clone()));
        }
        if self.plots {
            out.push(("plots".into(), "true".into()));
        }
        out
    }
}

/// Resolve config file, environment and flags into a validated config.
fn resolve(command: Command, o: &Overrides, env_output: Option<String>) -> Result<RunConfig, String> {
    let mut pairs = Vec::new();
    if let Some(path) = &o.config {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        pairs = config::parse_pairs(&text).map_err(|e| e.to_string())?;
    }
    if let Some(dir) = env_output.filter(|d| !d.is_empty()) {
        pairs.push(("output_dir".into(), dir));
    }
    pairs.extend(o.pairs());
    if let Some(dir) = &o.output {
        pairs.push(("output_dir".into(), dir.clone()));
    }
    config::build_config(command, &pairs).map_err(|e| e.to_string())
}

/// Parse arguments, run, print a short report; returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID_CONFIG } else { EXIT_OK };
        }
    };
    let (command, overrides) = match &cli.command {
        Sub::Spectrum(o) => (Command::Spectrum, o),
        Sub::Foliate(o) => (Command::Foliate, o),
        Sub::PlateauSweep(o) => (Command::PlateauSweep, o),
        Sub::JacobiSuite(o) => (Command::JacobiSuite, o),
        Sub::Diagnostics(o) => (Command::Diagnostics, o),
    };
    let cfg = match resolve(command, overrides, std::env::var(OUTPUT_DIR_ENV).ok()) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error[config]: {msg}");
            return EXIT_INVALID_CONFIG;
        }
    };
    if overrides.dry_run {
        print!("{}", cfg.to_text());
        return EXIT_OK;
    }
    let report = run(&cfg);
    for c in &report.checks {
        let value = c.value.map(|v| format!(" value={v:e}")).unwrap_or_default();
        println!("{} {}{value}: {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.detail);
    }
    if let Some(f) = &report.failure {
        eprintln!("error[{}]: {}", f.id, f.message);
    }
    println!(
        "{} file(s) in {}; exit status {}",
        report.files.len(),
        cfg.output_dir.display(),
        report.exit_code
    );
    report.exit_code
}
