//! Experiment configuration from `key = value` text plus overrides.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ode::{ModelId, Relaxation};
use crate::params::check_alpha;
use crate::saddle::{builtin_problem, SaddleProblem};

pub const OUT_DIR_ENV: &str = "PD_FLOW_OUT";
pub const DEFAULT_OUT_DIR: &str = "pd-flow-out";

/// Output directory from `PD_FLOW_OUT`, else `pd-flow-out`.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Icpdps,
    Nag,
    Ode(ModelId),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Icpdps => "icpdps",
            Method::Nag => "nag",
            Method::Ode(m) => m.as_str(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, Method::Ode(_))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: String,
    pub method: Method,
    /// Defaults to `1/‖K‖`.
    pub alpha: Option<f64>,
    pub tau: f64,
    pub gamma: f64,
    pub rho: f64,
    pub iterations: Option<usize>,
    pub time: Option<f64>,
    pub ode_step: f64,
    /// Default all ones.
    pub x0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub phi0: f64,
    pub psi0: f64,
    /// Initial `θ` of the Nesterov models.
    pub nag_theta0: f64,
    pub relaxation: Relaxation,
    pub output: Option<PathBuf>,
    pub seed: u64,
    algo_set: bool,
    model_set: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: "quadratic1d".into(),
            method: Method::Icpdps,
            alpha: None,
            tau: 1e-2,
            gamma: 0.0,
            rho: 0.0,
            iterations: None,
            time: None,
            ode_step: 1e-3,
            x0: None,
            y0: None,
            phi0: 1.0,
            psi0: 1.0,
            nag_theta0: 1.0,
            relaxation: Relaxation::default(),
            output: None,
            seed: 0,
            algo_set: false,
            model_set: false,
        }
    }
}

pub const KEYS: [&str; 20] = [
    "problem", "algo", "model", "alpha", "tau", "gamma", "rho", "N", "T", "h", "x0", "y0", "phi0", "psi0",
    "theta0", "relax_phi", "relax_psi", "relax_theta", "output", "seed",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse(key, v)).collect()
}

impl ExperimentConfig {
    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "problem" => self.problem = value.to_string(),
            "algo" => {
                if self.model_set {
                    return Err(Error::config("algo", "give either algo or model, not both"));
                }
                self.method = match value {
                    "icpdps" => Method::Icpdps,
                    "nag" => Method::Nag,
                    other => {
                        return Err(Error::config("algo", format!("unknown algorithm `{other}` (known: icpdps, nag)")))
                    }
                };
                self.algo_set = true;
            }
            "model" => {
                if self.algo_set {
                    return Err(Error::config("model", "give either algo or model, not both"));
                }
                self.method = Method::Ode(value.parse()?);
                self.model_set = true;
            }
            "alpha" => self.alpha = Some(parse(key, value)?),
            "tau" => self.tau = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "rho" => self.rho = parse(key, value)?,
            "N" => self.iterations = Some(parse(key, value)?),
            "T" => self.time = Some(parse(key, value)?),
            "h" => self.ode_step = parse(key, value)?,
            "x0" => self.x0 = Some(parse_list(key, value)?),
            "y0" => self.y0 = Some(parse_list(key, value)?),
            "phi0" => self.phi0 = parse(key, value)?,
            "psi0" => self.psi0 = parse(key, value)?,
            "theta0" => self.nag_theta0 = parse(key, value)?,
            "relax_phi" => self.relaxation.phi = parse(key, value)?,
            "relax_psi" => self.relaxation.psi = parse(key, value)?,
            "relax_theta" => self.relaxation.theta = parse(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "seed" => self.seed = parse(key, value)?,
            other => {
                return Err(Error::config(other, format!("unknown key (known: {})", KEYS.join(", "))));
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_kv_str(text)?;
        Ok(cfg)
    }

    pub fn apply_kv_str(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", lineno + 1), format!("expected key = value, got `{line}`"))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    pub fn build_problem(&self) -> Result<SaddleProblem> {
        builtin_problem(&self.problem, self.seed)
    }

    /// `α`, defaulting to `1/‖K‖`.
    pub fn alpha_for(&self, problem: &SaddleProblem) -> Result<f64> {
        match self.alpha {
            Some(a) => Ok(a),
            None => Ok(1.0 / problem.k_norm()?),
        }
    }

    /// Checks field constraints against the built problem.
    pub fn validate(&self, problem: &SaddleProblem) -> Result<()> {
        match (self.iterations, self.time) {
            (Some(_), Some(_)) => return Err(Error::config("N", "give exactly one of N and T")),
            (None, None) => {
                let field = if self.method.is_discrete() { "N" } else { "T" };
                return Err(Error::config(field, format!("{} runs need a horizon", self.method)));
            }
            (Some(_), None) if !self.method.is_discrete() => {
                return Err(Error::config("T", "ODE models take a time horizon T, not N"))
            }
            (None, Some(_)) if self.method.is_discrete() => {
                return Err(Error::config("N", "discrete methods take an iteration count N, not T"))
            }
            _ => {}
        }
        if let Some(t) = self.time {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::config("T", format!("must be positive, got {t}")));
            }
        }
        if !(self.ode_step > 0.0) || !self.ode_step.is_finite() {
            return Err(Error::config("h", format!("must be positive, got {}", self.ode_step)));
        }
        if !(self.tau > 0.0) {
            return Err(Error::config("tau", format!("must be positive, got {}", self.tau)));
        }
        for (name, v) in [("phi0", self.phi0), ("psi0", self.psi0), ("theta0", self.nag_theta0)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        self.relaxation.validate()?;
        if let Some(x) = &self.x0 {
            if x.len() != problem.primal_dim() {
                return Err(Error::config("x0", format!("expected {} entries, got {}", problem.primal_dim(), x.len())));
            }
        }
        if let Some(y) = &self.y0 {
            if y.len() != problem.dual_dim() {
                return Err(Error::config("y0", format!("expected {} entries, got {}", problem.dual_dim(), y.len())));
            }
        }
        let uses_pd = matches!(
            self.method,
            Method::Icpdps | Method::Ode(ModelId::IcpdpsIntrinsic) | Method::Ode(ModelId::IcpdpsRescaled)
        );
        if uses_pd {
            problem.check_convexity_parameters(self.gamma, self.rho)?;
            check_alpha(self.alpha_for(problem)?, problem.k_norm()?)?;
        }
        Ok(())
    }

    /// Output file, relative to `out_dir` unless given explicitly.
    pub fn output_path(&self, out_dir: &Path) -> PathBuf {
        match &self.output {
            Some(p) => p.clone(),
            None => out_dir.join(format!("{}_{}.csv", self.problem, self.method)),
        }
    }
}
