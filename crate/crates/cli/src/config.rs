//! Run configuration: defaults, `key = value` files and command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use ngev_core::network::{generate_grid, parse_tntp, GridSpec};
use ngev_core::{DemandTable, LoadMethod, Network, RouteModel};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Msa,
    Pl,
    Gp,
    Agp,
}

impl Solver {
    pub const ALL: [Solver; 4] = [Solver::Msa, Solver::Pl, Solver::Gp, Solver::Agp];

    pub fn name(&self) -> &'static str {
        match self {
            Solver::Msa => "msa",
            Solver::Pl => "pl",
            Solver::Gp => "gp",
            Solver::Agp => "agp",
        }
    }

    pub fn is_dual(&self) -> bool {
        matches!(self, Solver::Gp | Solver::Agp)
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub net: Option<PathBuf>,
    pub trips: Option<PathBuf>,
    pub grid_k: Option<usize>,
    /// Reference generation flow per outgoing link of a grid origin.
    pub grid_q: f64,
    pub grid_nu: f64,
    pub model: RouteModel,
    pub method: LoadMethod,
    pub solver: Solver,
    /// Fixed GP step, or the initial AGP step; solver default when unset.
    pub step: Option<f64>,
    pub k_min: usize,
    pub xi: f64,
    pub backtracking: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub line_search_tol: f64,
    pub demand_multiplier: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Final-state CSV whose `flow` (primal) or `cost` (dual) column is the η reference.
    pub reference: Option<PathBuf>,
    pub draws: Vec<usize>,
    pub reference_draws: usize,
    pub variance_scale: f64,
    pub grid_sizes: Vec<usize>,
    pub target_gap: f64,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            net: None,
            trips: None,
            grid_k: None,
            grid_q: 10_000.0,
            grid_nu: 0.1,
            model: RouteModel::Model3,
            method: LoadMethod::Mta,
            solver: Solver::Pl,
            step: None,
            k_min: 50,
            xi: 0.25,
            backtracking: true,
            tol: 1e-8,
            max_iter: 100,
            line_search_tol: 1e-3,
            demand_multiplier: 1.0,
            seed: 0,
            out_dir: PathBuf::from("out"),
            reference: None,
            draws: vec![10, 100, 1000],
            reference_draws: 10_000,
            variance_scale: 0.3,
            grid_sizes: vec![1, 2, 4],
            target_gap: 1e-6,
            parallel: true,
        }
    }
}

pub const GP_DEFAULT_STEP: f64 = 1e-5;
pub const AGP_DEFAULT_STEP: f64 = 1e-4;

fn bad(key: &str, value: &str, expected: &str) -> CliError {
    CliError::Config(format!("{key}: cannot parse {value:?} as {expected}"))
}

fn number<T: std::str::FromStr>(key: &str, value: &str, expected: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, expected))
}

fn list(key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|v| number(key, v.trim(), "a comma-separated list of integers"))
        .collect()
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad(key, value, "a boolean")),
    }
}

pub fn parse_model(value: &str) -> Result<RouteModel> {
    let v = value.trim().to_ascii_lowercase();
    let model = match v.as_str() {
        "model1" | "1" => RouteModel::Model1,
        "model2" | "2" => RouteModel::Model2,
        "model3" | "3" => RouteModel::Model3,
        "model4" | "4" => RouteModel::Model4,
        "sp" => RouteModel::ShortestPath,
        _ => {
            let theta = v
                .strip_prefix("logit(")
                .and_then(|s| s.strip_suffix(')'))
                .or_else(|| v.strip_prefix("logit:"))
                .ok_or_else(|| bad("model", value, "model1..model4, logit(θ) or sp"))?;
            RouteModel::Logit(number("model", theta, "a logit scale")?)
        }
    };
    Ok(model)
}

pub fn parse_method(value: &str) -> Result<LoadMethod> {
    match value.trim().to_ascii_lowercase().as_str() {
        "mta" => Ok(LoadMethod::Mta),
        "dial" => Ok(LoadMethod::Dial),
        _ => Err(bad("method", value, "mta or dial")),
    }
}

pub fn parse_solver(value: &str) -> Result<Solver> {
    match value.trim().to_ascii_lowercase().as_str() {
        "msa" => Ok(Solver::Msa),
        "pl" => Ok(Solver::Pl),
        "gp" => Ok(Solver::Gp),
        "agp" => Ok(Solver::Agp),
        _ => Err(bad("solver", value, "msa, pl, gp or agp")),
    }
}

impl RunConfig {
    /// Sets one field from its textual form; keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let k = key.as_str();
        match k {
            "net" => self.net = Some(PathBuf::from(value)),
            "trips" => self.trips = Some(PathBuf::from(value)),
            "grid_k" => self.grid_k = Some(number(k, value, "an integer")?),
            "grid_q" => self.grid_q = number(k, value, "a number")?,
            "grid_nu" => self.grid_nu = number(k, value, "a number")?,
            "model" => self.model = parse_model(value)?,
            "method" => self.method = parse_method(value)?,
            "solver" => self.solver = parse_solver(value)?,
            "step" => self.step = Some(number(k, value, "a number")?),
            "k_min" => self.k_min = number(k, value, "an integer")?,
            "xi" => self.xi = number(k, value, "a number")?,
            "backtracking" => self.backtracking = flag(k, value)?,
            "tol" => self.tol = number(k, value, "a number")?,
            "max_iter" => self.max_iter = number(k, value, "an integer")?,
            "line_search_tol" => self.line_search_tol = number(k, value, "a number")?,
            "demand_multiplier" => self.demand_multiplier = number(k, value, "a number")?,
            "seed" => self.seed = number(k, value, "an unsigned integer")?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "reference" => self.reference = Some(PathBuf::from(value)),
            "draws" => self.draws = list(k, value)?,
            "reference_draws" => self.reference_draws = number(k, value, "an integer")?,
            "variance_scale" => self.variance_scale = number(k, value, "a number")?,
            "grid_sizes" => self.grid_sizes = list(k, value)?,
            "target_gap" => self.target_gap = number(k, value, "a number")?,
            "parallel" => self.parallel = flag(k, value)?,
            _ => return Err(CliError::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{origin}:{}: expected `key = value`", n + 1))
            })?;
            self.set(key, value)
                .map_err(|e| CliError::Config(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn step_or_default(&self) -> f64 {
        self.step.unwrap_or(if self.solver == Solver::Gp {
            GP_DEFAULT_STEP
        } else {
            AGP_DEFAULT_STEP
        })
    }

    /// Range checks on every numeric setting.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grid_q", self.grid_q),
            ("grid_nu", self.grid_nu),
            ("demand_multiplier", self.demand_multiplier),
            ("line_search_tol", self.line_search_tol),
            ("variance_scale", self.variance_scale),
            ("target_gap", self.target_gap),
            ("step", self.step.unwrap_or(1.0)),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(CliError::Config(format!("tol must be non-negative, got {}", self.tol)));
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(CliError::Config(format!("xi must lie in (0, 1), got {}", self.xi)));
        }
        if self.line_search_tol >= 1.0 {
            return Err(CliError::Config("line_search_tol must be below 1".into()));
        }
        if self.max_iter == 0 {
            return Err(CliError::Config("max_iter must be at least 1".into()));
        }
        if self.grid_k == Some(0) || self.grid_sizes.contains(&0) {
            return Err(CliError::Config("grid sizes must be at least 1".into()));
        }
        if self.grid_sizes.is_empty() {
            return Err(CliError::Config("grid_sizes must not be empty".into()));
        }
        if self.draws.is_empty() || self.draws.contains(&0) || self.reference_draws == 0 {
            return Err(CliError::Config("draw counts must be at least 1".into()));
        }
        if let RouteModel::Logit(theta) = self.model {
            if !(theta > 0.0 && theta.is_finite()) {
                return Err(CliError::Config(format!("logit scale must be positive, got {theta}")));
            }
        }
        if self.grid_k.is_some() && (self.net.is_some() || self.trips.is_some()) {
            return Err(CliError::Config("give either net/trips files or grid_k, not both".into()));
        }
        Ok(())
    }

    pub fn grid_spec(&self, k: usize) -> GridSpec {
        GridSpec::new(k, self.grid_q, self.grid_nu)
    }

    /// The network and the demand scaled by `demand_multiplier`.
    pub fn instance(&self) -> Result<(Network, DemandTable)> {
        let (network, demand) = match (&self.net, &self.trips, self.grid_k) {
            (Some(net), Some(trips), None) => {
                let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| CliError::io(p, e));
                parse_tntp(&read(net)?, &read(trips)?)?.into_parts()
            }
            (None, None, Some(k)) => generate_grid(&self.grid_spec(k))?,
            (Some(_), None, _) | (None, Some(_), _) => {
                return Err(CliError::Config("net and trips must be given together".into()))
            }
            _ => {
                return Err(CliError::Config(
                    "no input: give net and trips files or grid_k".into(),
                ))
            }
        };
        let demand = if self.demand_multiplier == 1.0 {
            demand
        } else {
            demand.scaled(self.demand_multiplier)
        };
        Ok((network, demand))
    }

    /// `key = value` lines echoing the configuration.
    pub fn echo(&self) -> Vec<(String, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("-".into(), |p| p.display().to_string());
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        vec![
            ("net".into(), path(&self.net)),
            ("trips".into(), path(&self.trips)),
            ("grid_k".into(), self.grid_k.map_or("-".into(), |k| k.to_string())),
            ("grid_q".into(), self.grid_q.to_string()),
            ("grid_nu".into(), self.grid_nu.to_string()),
            ("model".into(), self.model.name()),
            ("method".into(), self.method.name().into()),
            ("solver".into(), self.solver.name().into()),
            ("step".into(), self.step_or_default().to_string()),
            ("k_min".into(), self.k_min.to_string()),
            ("xi".into(), self.xi.to_string()),
            ("backtracking".into(), self.backtracking.to_string()),
            ("tol".into(), self.tol.to_string()),
            ("max_iter".into(), self.max_iter.to_string()),
            ("line_search_tol".into(), self.line_search_tol.to_string()),
            ("demand_multiplier".into(), self.demand_multiplier.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("reference".into(), path(&self.reference)),
            ("draws".into(), join(&self.draws)),
            ("reference_draws".into(), self.reference_draws.to_string()),
            ("variance_scale".into(), self.variance_scale.to_string()),
            ("grid_sizes".into(), join(&self.grid_sizes)),
            ("target_gap".into(), self.target_gap.to_string()),
        ]
    }
}
