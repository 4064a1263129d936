//! Plain-text `key = value` run configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use conelab::cone::satisfies_minimizing_criterion;
use conelab::measures::Center;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Foliate,
    PlateauSweep,
    JacobiSuite,
    Diagnostics,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Spectrum,
        Command::Foliate,
        Command::PlateauSweep,
        Command::JacobiSuite,
        Command::Diagnostics,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Foliate => "foliate",
            Command::PlateauSweep => "plateau-sweep",
            Command::JacobiSuite => "jacobi-suite",
            Command::Diagnostics => "diagnostics",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("one of {}", Command::ALL.map(|c| c.as_str()).join(", ")))
    }
}

/// Which foliates a command processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignChoice {
    Plus,
    Minus,
    Both,
}

impl SignChoice {
    fn as_str(&self) -> &'static str {
        match self {
            SignChoice::Plus => "plus",
            SignChoice::Minus => "minus",
            SignChoice::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub p: u32,
    pub q: u32,
    pub max_degree: u32,
    pub tol: f64,
    pub r_max: f64,
    pub fit_lo: f64,
    pub fit_hi: f64,
    pub sign: SignChoice,
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    pub starts: usize,
    pub rho0: f64,
    pub fields: u64,
    pub annuli: i32,
    pub seed: u64,
    pub r_match: f64,
    pub mismatch_floor: f64,
    pub tau: f64,
    pub eps: f64,
    pub density_radius_cap: f64,
    pub lambda: f64,
    pub center: Center,
    pub plots: bool,
    pub output_dir: PathBuf,
}

/// Keys in serialization order.
pub const KEYS: [&str; 26] = [
    "command",
    "p",
    "q",
    "max_degree",
    "tol",
    "r_max",
    "fit_lo",
    "fit_hi",
    "sign",
    "t_min",
    "t_max",
    "samples",
    "starts",
    "rho0",
    "fields",
    "annuli",
    "seed",
    "r_match",
    "mismatch_floor",
    "tau",
    "eps",
    "density_radius_cap",
    "lambda",
    "center",
    "plots",
    "output_dir",
];

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        Self {
            command,
            p: 3,
            q: 3,
            max_degree: 3,
            tol: if command == Command::PlateauSweep { 1e-8 } else { 1e-10 },
            r_max: 1000.0,
            fit_lo: 10.0,
            fit_hi: 100.0,
            sign: SignChoice::Both,
            t_min: -0.05,
            t_max: 0.05,
            samples: 21,
            starts: 8,
            rho0: 0.5,
            fields: 1000,
            annuli: 6,
            seed: 0,
            r_match: 100.0,
            mismatch_floor: 0.1,
            tau: 0.01,
            eps: 0.1,
            density_radius_cap: 0.5,
            lambda: 0.1,
            center: Center::Origin,
            plots: false,
            output_dir: PathBuf::from("conelab-out"),
        }
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "command" => self.command.as_str().into(),
            "p" => self.p.to_string(),
            "q" => self.q.to_string(),
            "max_degree" => self.max_degree.to_string(),
            "tol" => self.tol.to_string(),
            "r_max" => self.r_max.to_string(),
            "fit_lo" => self.fit_lo.to_string(),
            "fit_hi" => self.fit_hi.to_string(),
            "sign" => self.sign.as_str().into(),
            "t_min" => self.t_min.to_string(),
            "t_max" => self.t_max.to_string(),
            "samples" => self.samples.to_string(),
            "starts" => self.starts.to_string(),
            "rho0" => self.rho0.to_string(),
            "fields" => self.fields.to_string(),
            "annuli" => self.annuli.to_string(),
            "seed" => self.seed.to_string(),
            "r_match" => self.r_match.to_string(),
            "mismatch_floor" => self.mismatch_floor.to_string(),
            "tau" => self.tau.to_string(),
            "eps" => self.eps.to_string(),
            "density_radius_cap" => self.density_radius_cap.to_string(),
            "lambda" => self.lambda.to_string(),
            "center" => format_center(self.center),
            "plots" => self.plots.to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// Every key, one per line, in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        KEYS.iter().map(|k| format!("{k} = {}\n", self.value_of(k))).collect()
    }

    /// Text identifying the computation: everything except the output directory.
    pub fn canonical_text(&self) -> String {
        KEYS.iter()
            .filter(|k| **k != "output_dir")
            .map(|k| format!("{k} = {}\n", self.value_of(k)))
            .collect()
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "command" => {
                let c: Command = value.parse()?;
                if c != self.command {
                    return Err(format!("must match the invoked command `{}`", self.command.as_str()));
                }
            }
            "p" => self.p = int(value)?,
            "q" => self.q = int(value)?,
            "max_degree" => self.max_degree = int(value)?,
            "tol" => self.tol = real(value)?,
            "r_max" => self.r_max = real(value)?,
            "fit_lo" => self.fit_lo = real(value)?,
            "fit_hi" => self.fit_hi = real(value)?,
            "sign" => {
                self.sign = match value {
                    "plus" => SignChoice::Plus,
                    "minus" => SignChoice::Minus,
                    "both" => SignChoice::Both,
                    _ => return Err("one of plus, minus, both".into()),
                }
            }
            "t_min" => self.t_min = real(value)?,
            "t_max" => self.t_max = real(value)?,
            "samples" => self.samples = int(value)?,
            "starts" => self.starts = int(value)?,
            "rho0" => self.rho0 = real(value)?,
            "fields" => self.fields = int(value)?,
            "annuli" => self.annuli = int(value)?,
            "seed" => self.seed = int(value)?,
            "r_match" => self.r_match = real(value)?,
            "mismatch_floor" => self.mismatch_floor = real(value)?,
            "tau" => self.tau = real(value)?,
            "eps" => self.eps = real(value)?,
            "density_radius_cap" => self.density_radius_cap = real(value)?,
            "lambda" => self.lambda = real(value)?,
            "center" => self.center = parse_center(value)?,
            "plots" => {
                self.plots = value
                    .parse()
                    .map_err(|_| "true or false".to_string())?
            }
            "output_dir" => {
                if value.is_empty() {
                    return Err("non-empty path".into());
                }
                self.output_dir = PathBuf::from(value);
            }
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Constraint violations, all of them.
    fn constraint_issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut bad = |key: &str, constraint: &str| out.push(ConfigIssue::new(key, constraint));
        if self.p < 1 {
            bad("p", "≥ 1");
        }
        if self.q < 1 {
            bad("q", "≥ 1");
        }
        if self.p >= 1 && self.q >= 1 {
            let n = (self.p + self.q + 1) as f64;
            let stable = (n - 2.0).powi(2) - 4.0 * (n - 1.0) >= 0.0;
            if self.command == Command::Spectrum {
                if !stable {
                    bad("p", "cone must be strictly stable ((n-2)^2 >= 4(n-1)) for real indicial roots");
                }
            } else if !satisfies_minimizing_criterion(self.p, self.q).unwrap_or(false) {
                bad("p", "(p, q) must satisfy the minimizing criterion: p+q > 6 or (3,3), (2,4), (4,2)");
            }
        }
        if self.max_degree < 1 {
            bad("max_degree", "≥ 1");
        }
        if !(self.tol > 0.0 && self.tol < 1e-3) {
            bad("tol", "in (0, 1e-3)");
        }
        if !(self.r_max > 10.0 && self.r_max.is_finite()) {
            bad("r_max", "> 10 and finite");
        }
        if !(self.fit_lo > 0.0) {
            bad("fit_lo", "> 0");
        }
        if !(self.fit_hi >= 4.0 * self.fit_lo) {
            bad("fit_hi", "≥ 4 fit_lo");
        }
        if !(self.fit_hi < self.r_max) {
            bad("fit_hi", "< r_max");
        }
        let cap = std::f64::consts::FRAC_PI_8;
        if !(self.t_min.abs() < cap) {
            bad("t_min", "|t| < π/8");
        }
        if !(self.t_max.abs() < cap) {
            bad("t_max", "|t| < π/8");
        }
        if !(self.t_min <= self.t_max) {
            bad("t_min", "≤ t_max");
        }
        if self.t_min != self.t_max && self.samples < 5 {
            bad("samples", "≥ 5");
        }
        if self.starts < 3 {
            bad("starts", "≥ 3");
        }
        if !(self.rho0 > 0.0 && self.rho0 < 1.0) {
            bad("rho0", "in (0,1)");
        }
        if self.fields < 1 {
            bad("fields", "≥ 1");
        }
        if self.annuli < 3 {
            bad("annuli", "≥ 3");
        }
        if !(self.r_match > 0.0 && 10.0 * self.r_match <= self.r_max) {
            bad("r_match", "> 0 and ≤ r_max / 10");
        }
        if !(self.mismatch_floor > 0.0) {
            bad("mismatch_floor", "> 0");
        }
        if !(self.tau > 0.0) {
            bad("tau", "> 0");
        }
        if !(self.eps > 0.0) {
            bad("eps", "> 0");
        }
        if !(self.density_radius_cap > 0.0) {
            bad("density_radius_cap", "> 0 (inf allowed)");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            bad("lambda", "> 0 and finite");
        }
        out
    }
}

fn int<T: FromStr>(value: &str) -> Result<T, String> {
    value.parse().map_err(|_| "a non-negative integer in range".to_string())
}

fn real(value: &str) -> Result<f64, String> {
    match value.parse::<f64>() {
        Ok(x) if !x.is_nan() => Ok(x),
        _ => Err("a real number".into()),
    }
}

fn format_center(c: Center) -> String {
    match c {
        Center::Origin => "origin".into(),
        Center::XAxis(r) => format!("x:{r}"),
        Center::YAxis(r) => format!("y:{r}"),
    }
}

fn parse_center(value: &str) -> Result<Center, String> {
    let err = || "origin, x:<real> or y:<real>".to_string();
    if value == "origin" {
        return Ok(Center::Origin);
    }
    let (axis, r) = value.split_once(':').ok_or_else(err)?;
    let r: f64 = r.parse().map_err(|_| err())?;
    if !r.is_finite() {
        return Err(err());
    }
    match axis {
        "x" => Ok(Center::XAxis(r)),
        "y" => Ok(Center::YAxis(r)),
        _ => Err(err()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub constraint: String,
}

impl ConfigIssue {
    fn new(key: &str, constraint: &str) -> Self {
        Self {
            key: key.into(),
            constraint: constraint.into(),
        }
    }
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigReport {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.issues.len())?;
        for i in &self.issues {
            writeln!(f, "  {}: {}", i.key, i.constraint)?;
        }
        Ok(())
    }
}

/// Split `key = value` text into pairs. Blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigReport> {
    let mut pairs = Vec::new();
    let mut issues = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => pairs.push((k.trim().to_string(), v.trim().to_string())),
            _ => issues.push(ConfigIssue::new(&format!("line {}", no + 1), "expected `key = value`")),
        }
    }
    if issues.is_empty() {
        Ok(pairs)
    } else {
        Err(ConfigReport { issues })
    }
}

/// Apply `pairs` over the command's defaults and check every constraint.
/// Later pairs override earlier ones.
pub fn build_config(command: Command, pairs: &[(String, String)]) -> Result<RunConfig, ConfigReport> {
    let mut cfg = RunConfig::defaults(command);
    let mut issues = Vec::new();
    for (k, v) in pairs {
        if let Err(c) = cfg.set(k, v) {
            issues.push(ConfigIssue::new(k, &c));
        }
    }
    // constraints are only meaningful on parsed values
    let mut bad_keys: Vec<String> = issues.iter().map(|i: &ConfigIssue| i.key.clone()).collect();
    bad_keys.sort_unstable();
    let constraint = cfg.constraint_issues();
    issues.extend(constraint.into_iter().filter(|i| bad_keys.binary_search(&i.key).is_err()));
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigReport { issues })
    }
}

/// Parse raw key-value text into a validated config for `command`.
pub fn validate_config(command: Command, text: &str) -> Result<RunConfig, ConfigReport> {
    build_config(command, &parse_pairs(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_gives_defaults() {
        for c in Command::ALL {
            assert_eq!(validate_config(c, "").unwrap(), RunConfig::defaults(c));
        }
        assert_eq!(RunConfig::defaults(Command::PlateauSweep).tol, 1e-8);
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::defaults(Command::Diagnostics);
        cfg.tol = 3.3e-11;
        cfg.center = Center::YAxis(-0.125);
        cfg.density_radius_cap = f64::INFINITY;
        cfg.sign = SignChoice::Minus;
        cfg.output_dir = PathBuf::from("some dir/out");
        assert_eq!(validate_config(Command::Diagnostics, &cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn reports_every_problem() {
        let err = validate_config(Command::JacobiSuite, "p = 0\nrho0 = 1.5\nbogus = 1\ntol = x\n").unwrap_err();
        let mut keys: Vec<&str> = err.issues.iter().map(|i| i.key.as_str()).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["bogus", "p", "rho0", "tol"]);
        let p = err.issues.iter().find(|i| i.key == "p").unwrap();
        assert_eq!(p.constraint, "≥ 1");
        let rho = err.issues.iter().find(|i| i.key == "rho0").unwrap();
        assert_eq!(rho.constraint, "in (0,1)");
        assert!(err.issues.iter().any(|i| i.key == "bogus" && i.constraint == "unknown key"));
        assert!(err.issues.iter().any(|i| i.key == "tol" && i.constraint == "a real number"));
    }

    #[test]
    fn rejects_non_minimizing_cones_outside_spectrum() {
        assert!(validate_config(Command::Foliate, "p = 1\nq = 5").is_err());
        assert!(validate_config(Command::Spectrum, "p = 1\nq = 5").is_ok());
        let err = validate_config(Command::Spectrum, "p = 1\nq = 2").unwrap_err();
        assert_eq!(err.issues[0].key, "p");
    }

    #[test]
    fn command_key_must_agree() {
        assert!(validate_config(Command::Foliate, "command = foliate").is_ok());
        assert!(validate_config(Command::Foliate, "command = spectrum").is_err());
    }

    #[test]
    fn malformed_lines_are_reported() {
        let err = validate_config(Command::Spectrum, "# comment\np 3\n").unwrap_err();
        assert_eq!(err.issues[0].key, "line 2");
    }
}
