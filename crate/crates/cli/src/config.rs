//! Declarative run configuration, read from a TOML file.
//!
//! Every block is optional in the file; the commands that need a block fail
//! with a configuration error when it is missing. Numeric fields are checked
//! here, before any computation starts.

use std::path::{Path, PathBuf};

use epstar::hydro::{PerturbationKind, RunOptions};
use epstar::kinetic::ReduceOptions;
use epstar::steady::ShootOptions;
use epstar::varmin::MinimizeOptions;
use epstar::EosSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Output directory (overridden by `--out`).
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Seed of every random draw (overridden by `--seed`).
    #[serde(default)]
    pub seed: u64,
    pub eos: Option<EosConfig>,
    #[serde(default)]
    pub steady: SteadyConfig,
    #[serde(default)]
    pub minimize: MinimizeConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub reduce: ReduceConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: default_out(),
            seed: 0,
            eos: None,
            steady: SteadyConfig::default(),
            minimize: MinimizeConfig::default(),
            evolve: EvolveConfig::default(),
            reduce: ReduceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EosConfig {
    /// `P = c ρ^γ`.
    Polytrope { c: f64, gamma: f64 },
    /// Smooth blend of two polytropic indices: `n_small` at low density,
    /// `n_large` at high density.
    Blended { c: f64, n_small: f64, n_large: f64 },
}

impl EosConfig {
    pub fn build(&self) -> Result<EosSpec, CliError> {
        let spec = match *self {
            EosConfig::Polytrope { c, gamma } => EosSpec::polytrope(c, gamma),
            EosConfig::Blended { c, n_small, n_large } => EosSpec::blended(c, n_small, n_large),
        };
        spec.map_err(|e| CliError::Config(format!("[eos]: {e}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadyConfig {
    /// Central value `E₀ - V₀(0)`; exclusive with `mass`.
    pub kappa: Option<f64>,
    /// Target total mass; exclusive with `kappa`.
    pub mass: Option<f64>,
    /// Uniform intervals across the star.
    pub intervals: usize,
    /// Outer radius of the profile grid in units of the star's radius.
    pub exterior_factor: f64,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        let d = ShootOptions::default();
        Self { kappa: None, mass: None, intervals: d.intervals, exterior_factor: d.exterior_factor }
    }
}

/// How the steady star is selected.
#[derive(Debug, Clone, Copy)]
pub enum Selector {
    Kappa(f64),
    Mass(f64),
}

impl SteadyConfig {
    pub fn selector(&self) -> Result<Selector, CliError> {
        match (self.kappa, self.mass) {
            (Some(_), Some(_)) => Err(CliError::Config("[steady]: give either kappa or mass, not both".into())),
            (Some(k), None) => positive("steady.kappa", k).map(Selector::Kappa),
            (None, Some(m)) => positive("steady.mass", m).map(Selector::Mass),
            (None, None) => Ok(Selector::Kappa(1.0)),
        }
    }

    pub fn options(&self) -> Result<ShootOptions, CliError> {
        at_least("steady.intervals", self.intervals, 4)?;
        if !(self.exterior_factor > 1.0 && self.exterior_factor.is_finite()) {
            return Err(CliError::Config(format!("steady.exterior_factor must exceed 1, got {}", self.exterior_factor)));
        }
        Ok(ShootOptions { intervals: self.intervals, exterior_factor: self.exterior_factor })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimizeInit {
    /// Uniform ball of the star's mass and radius.
    Ball,
    /// The shooting profile itself.
    Steady,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeConfig {
    pub init: MinimizeInit,
    /// Uniform intervals of the minimization grid.
    pub intervals: usize,
    /// Grid extent in units of the steady star's radius.
    pub r_max_factor: f64,
    /// Radius of the initial ball in units of the steady star's radius.
    pub ball_radius_factor: f64,
    pub max_iters: usize,
    pub tol_dh: f64,
    pub kkt_tol: f64,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        let d = MinimizeOptions::default();
        Self {
            init: MinimizeInit::Ball,
            intervals: 512,
            r_max_factor: 2.0,
            ball_radius_factor: 1.0,
            max_iters: d.max_iters,
            tol_dh: d.tol_dh,
            kkt_tol: d.kkt_tol,
        }
    }
}

impl MinimizeConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        at_least("minimize.intervals", self.intervals, 8)?;
        at_least("minimize.max_iters", self.max_iters, 1)?;
        positive("minimize.tol_dh", self.tol_dh)?;
        if !(self.kkt_tol >= 0.0 && self.kkt_tol.is_finite()) {
            return Err(CliError::Config(format!("minimize.kkt_tol must be nonnegative, got {}", self.kkt_tol)));
        }
        positive("minimize.ball_radius_factor", self.ball_radius_factor)?;
        if !(self.r_max_factor > self.ball_radius_factor.max(1.0) && self.r_max_factor.is_finite()) {
            return Err(CliError::Config(format!(
                "minimize.r_max_factor must exceed 1 and the ball radius factor, got {}",
                self.r_max_factor
            )));
        }
        Ok(())
    }

    pub fn options(&self, seed: u64) -> MinimizeOptions {
        MinimizeOptions {
            max_iters: self.max_iters,
            tol_dh: self.tol_dh,
            kkt_tol: self.kkt_tol,
            seed,
            ..MinimizeOptions::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub perturbation: PerturbationKind,
    pub amplitude: f64,
    /// Finite-volume cells over `[0, r_max_factor · R]`.
    pub cells: usize,
    pub r_max_factor: f64,
    /// End time; defaults to `crossings` sound-crossing times.
    pub t_end: Option<f64>,
    pub crossings: f64,
    /// Sampling interval; defaults to `t_end / 20`.
    pub output_interval: Option<f64>,
    pub cfl: f64,
    /// Relative energy drift above which the run is flagged.
    pub drift_bound: f64,
    pub max_steps: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        let d = RunOptions::default();
        Self {
            perturbation: PerturbationKind::DensityBump,
            amplitude: 1e-3,
            cells: 1024,
            r_max_factor: 2.0,
            t_end: None,
            crossings: 10.0,
            output_interval: None,
            cfl: d.cfl,
            drift_bound: d.drift_bound,
            max_steps: d.max_steps,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !self.amplitude.is_finite() {
            return Err(CliError::Config(format!("evolve.amplitude must be finite, got {}", self.amplitude)));
        }
        at_least("evolve.cells", self.cells, 8)?;
        if !(self.r_max_factor > 1.0 && self.r_max_factor.is_finite()) {
            return Err(CliError::Config(format!("evolve.r_max_factor must exceed 1, got {}", self.r_max_factor)));
        }
        if let Some(t) = self.t_end {
            positive("evolve.t_end", t)?;
        }
        positive("evolve.crossings", self.crossings)?;
        if let Some(dt) = self.output_interval {
            positive("evolve.output_interval", dt)?;
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(CliError::Config(format!("evolve.cfl must lie in (0, 1], got {}", self.cfl)));
        }
        positive("evolve.drift_bound", self.drift_bound)?;
        at_least("evolve.max_steps", self.max_steps, 1)
    }

    /// Run options given the star's sound-crossing time.
    pub fn options(&self, sound_crossing: f64) -> RunOptions {
        let t_end = self.t_end.unwrap_or(self.crossings * sound_crossing);
        RunOptions {
            t_end,
            cfl: self.cfl,
            output_interval: self.output_interval.unwrap_or(t_end / 20.0),
            drift_bound: self.drift_bound,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReduceConfig {
    pub k: f64,
    pub intervals: usize,
    pub lambda_points: usize,
    pub rho_points: usize,
    pub speed_nodes: usize,
    pub trials: usize,
}

impl Default for ReduceConfig {
    fn default() -> Self {
        let d = ReduceOptions::default();
        Self {
            k: 1.0,
            intervals: d.intervals,
            lambda_points: d.lambda_points,
            rho_points: d.rho_points,
            speed_nodes: d.speed_nodes,
            trials: d.trials,
        }
    }
}

impl ReduceConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        at_least("reduce.intervals", self.intervals, 16)?;
        at_least("reduce.lambda_points", self.lambda_points, 8)?;
        at_least("reduce.rho_points", self.rho_points, 16)?;
        at_least("reduce.speed_nodes", self.speed_nodes, 2)?;
        if !self.k.is_finite() {
            return Err(CliError::Config(format!("reduce.k must be finite, got {}", self.k)));
        }
        Ok(())
    }

    pub fn options(&self, seed: u64) -> ReduceOptions {
        ReduceOptions {
            intervals: self.intervals,
            lambda_points: self.lambda_points,
            rho_points: self.rho_points,
            speed_nodes: self.speed_nodes,
            trials: self.trials,
            seed,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be at least {min}, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn eos(&self) -> Result<EosSpec, CliError> {
        self.eos
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [eos] block (kind = \"polytrope\", c, gamma)".into()))?
            .build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_parses_and_validates() {
        let cfg = RunConfig::parse(include_str!("../../../configs/reference.toml")).unwrap();
        cfg.eos().unwrap();
        cfg.steady.selector().unwrap();
        cfg.steady.options().unwrap();
        cfg.minimize.validate().unwrap();
        cfg.evolve.validate().unwrap();
        cfg.reduce.validate().unwrap();
    }

    #[test]
    fn empty_config_has_no_eos() {
        let cfg = RunConfig::parse("").unwrap();
        assert!(matches!(cfg.eos(), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[steady]\nkapa = 1.0\n").is_err());
    }

    #[test]
    fn kappa_and_mass_are_exclusive() {
        let cfg = RunConfig::parse("[steady]\nkappa = 1.0\nmass = 2.0\n").unwrap();
        assert!(cfg.steady.selector().is_err());
        let cfg = RunConfig::parse("[steady]\nmass = -1.0\n").unwrap();
        assert!(cfg.steady.selector().is_err());
    }

    #[test]
    fn invalid_evolve_blocks_are_rejected() {
        let cfg = RunConfig::parse("[evolve]\ncfl = 1.5\n").unwrap();
        assert!(cfg.evolve.validate().is_err());
        assert!(RunConfig::parse("[evolve]\nperturbation = \"shake\"\n").is_err());
    }

    #[test]
    fn bad_eos_is_a_config_error() {
        let cfg = RunConfig::parse("[eos]\nkind = \"polytrope\"\nc = 1.0\ngamma = 0.5\n").unwrap();
        assert!(matches!(cfg.eos(), Err(CliError::Config(_))));
    }
}
