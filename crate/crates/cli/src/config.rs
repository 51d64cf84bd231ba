//! Resolved run configuration: JSON file, command-line overrides, defaults.

use std::path::{Path, PathBuf};

use clap::{Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use epd_screen::analysis::twotype_config;
use epd_screen::epd::{FamilyParams, FamilyTag};
use epd_screen::saddle::SaddleConfig;
use epd_screen::screening::ScreeningInstance;
use epd_screen::CostSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Concavify one action family at mean one.
    Concavify,
    /// Solve an N-type instance at Myerson or optimised multipliers.
    SolveN,
    /// Optimise the multipliers and compare with Myerson.
    Outer,
    /// Two-type support, benefit and welfare grid.
    SweepTwotype,
    /// Investigation-region width against the cost level.
    RegionWidth,
    /// Randomised support-bound sweep over one family.
    VerifyEpd,
    /// N-type refinement study at Myerson multipliers.
    Converge,
    /// Universal allocation function against the logistic.
    Universal,
    /// Saddle and primal feasibility diagnostics.
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Concavify => "concavify",
            Command::SolveN => "solve-n",
            Command::Outer => "outer",
            Command::SweepTwotype => "sweep-twotype",
            Command::RegionWidth => "region-width",
            Command::VerifyEpd => "verify-epd",
            Command::Converge => "converge",
            Command::Universal => "universal",
            Command::Check => "check",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Multipliers {
    #[default]
    Myerson,
    Optimize,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn fail<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub gamma: f64,
    /// Cost levels for the two-type sweeps.
    pub gammas: Vec<f64>,
    pub alpha: f64,
    pub n: usize,
    pub n_list: Vec<usize>,
    pub dist: Option<String>,
    pub range: (f64, f64),
    pub thetas: Option<Vec<f64>>,
    pub masses: Option<Vec<f64>>,
    pub pbar: Option<f64>,
    pub multipliers: Multipliers,
    /// Grid points; the meaning depends on the command.
    pub grid: Option<usize>,
    /// Region scan step as a fraction of `v_H`.
    pub resolution: f64,
    pub tol: f64,
    pub trials: u64,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub stamp: bool,
    pub family: FamilyTag,
    /// Overrides the default parameters of `family`.
    pub family_params: Option<FamilyParams>,
    pub eta_max: f64,
    pub v_l: f64,
    pub v_h: f64,
    pub pi_h: f64,
    pub saddle: SaddleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::Universal,
            gamma: 0.5,
            gammas: vec![0.125, 0.25, 0.5, 1.0],
            alpha: 1.0,
            n: 100,
            n_list: vec![10, 20, 50, 100, 200],
            dist: None,
            range: (0.1, 0.9),
            thetas: None,
            masses: None,
            pbar: None,
            multipliers: Multipliers::Myerson,
            grid: None,
            resolution: 1e-3,
            tol: 1e-6,
            trials: 10_000,
            seed: 7,
            threads: None,
            out: None,
            format: Format::Csv,
            stamp: false,
            family: FamilyTag::Monitoring,
            family_params: None,
            eta_max: 6.0,
            v_l: 0.5,
            v_h: 10.0 / 11.0,
            pi_h: 0.6,
            saddle: SaddleConfig::default(),
        }
    }
}

/// Reads a JSON config. A `command` field is required; everything else defaults.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
    if value.get("command").is_none() {
        return fail("command: missing field");
    }
    let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ConfigError(format!("{path}: {}", e.inner()))
    })?;
    Ok(cfg)
}

fn increasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

impl RunConfig {
    fn uses_instance(&self) -> bool {
        matches!(self.command, Command::SolveN | Command::Outer)
            || (self.command == Command::Check && (self.thetas.is_some() || self.dist.is_some()))
    }

    /// Fills command-dependent defaults so the echoed config is complete.
    pub fn resolve(&mut self) {
        if self.grid.is_none() {
            self.grid = Some(match self.command {
                Command::Universal => 1201,
                Command::SweepTwotype => 100,
                _ => 20_001,
            });
        }
        if self.uses_instance() && self.thetas.is_none() && self.dist.is_none() {
            self.dist = Some("uniform".into());
        }
        if (self.uses_instance() || self.command == Command::Converge) && self.pbar.is_none() {
            let top = match &self.thetas {
                Some(t) => t.last().copied().unwrap_or(1.0),
                None => self.range.1,
            };
            self.pbar = Some(if top < 1.0 { 1.0 } else { 1.5 * top });
        }
        if matches!(self.command, Command::SweepTwotype | Command::RegionWidth) {
            // The grids always run with the two-type solver settings.
            self.saddle = twotype_config();
        }
        if self.command == Command::Check && !self.uses_instance() {
            // Two-type checks always impose the top participation constraint.
            self.saddle.top_ir = true;
            if self.pbar.is_none() {
                self.pbar = Some(1.5 * self.v_h);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return fail(format!("gamma: must be positive, got {}", self.gamma));
        }
        if self.gammas.is_empty()
            || self.gammas.iter().any(|&g| !(g > 0.0 && g.is_finite()))
            || !increasing(&self.gammas)
        {
            return fail("gammas: need positive, increasing values");
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return fail(format!("alpha: must be at least 1, got {}", self.alpha));
        }
        if self.n < 2 {
            return fail(format!("n: need at least 2 types, got {}", self.n));
        }
        if self.n_list.is_empty() || self.n_list[0] < 2 || !increasing(&self.n_list) {
            return fail("n_list: need increasing grid sizes of at least 2");
        }
        let (lo, hi) = self.range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return fail(format!("range: need 0 < lo < hi, got [{lo}, {hi}]"));
        }
        if let Some(d) = &self.dist {
            if d != "uniform" {
                return fail(format!("dist: unsupported distribution '{d}'"));
            }
            if self.thetas.is_some() || self.masses.is_some() {
                return fail("dist: give either dist or thetas/masses");
            }
        }
        if self.masses.is_some() && self.thetas.is_none() {
            return fail("masses: require thetas");
        }
        if matches!(self.grid, Some(g) if g < 2) {
            return fail("grid: need at least 2 points");
        }
        if !(self.resolution > 0.0 && self.resolution < 0.5) {
            return fail(format!("resolution: must lie in (0, 0.5), got {}", self.resolution));
        }
        if !(self.tol > 0.0) {
            return fail(format!("tol: must be positive, got {}", self.tol));
        }
        if self.trials == 0 {
            return fail("trials: must be positive");
        }
        if self.threads == Some(0) {
            return fail("threads: must be positive");
        }
        if !(self.eta_max > 0.0 && self.eta_max.is_finite()) {
            return fail(format!("eta_max: must be positive, got {}", self.eta_max));
        }
        if !(self.v_l > 0.0 && self.v_l < self.v_h && self.v_h.is_finite()) {
            return fail(format!(
                "v_l: need 0 < v_l < v_h, got v_l = {}, v_h = {}",
                self.v_l, self.v_h
            ));
        }
        if !(self.pi_h > 0.0 && self.pi_h < 1.0) {
            return fail(format!("pi_h: must lie in (0, 1), got {}", self.pi_h));
        }
        if let Some(p) = &self.family_params {
            if p.tag() != self.family {
                return fail(format!(
                    "family_params: parameters are for '{}', not '{}'",
                    p.tag().name(),
                    self.family.name()
                ));
            }
        }
        self.saddle
            .validate()
            .map_err(|e| ConfigError(format!("saddle: {e}")))?;
        if self.uses_instance() {
            self.instance()?;
        }
        Ok(())
    }

    pub fn cost(&self) -> Result<CostSpec, ConfigError> {
        let c = if self.alpha == 1.0 {
            CostSpec::entropy(self.gamma)
        } else {
            CostSpec::scaled_entropy(self.gamma, self.alpha)
        };
        c.map_err(|e| ConfigError(format!("gamma: {e}")))
    }

    pub fn instance(&self) -> Result<ScreeningInstance, ConfigError> {
        let pbar = self.pbar.ok_or_else(|| ConfigError("pbar: unresolved".into()))?;
        let cost = self.cost()?;
        let built = match &self.thetas {
            Some(t) => {
                let masses = self
                    .masses
                    .clone()
                    .unwrap_or_else(|| vec![1.0 / t.len() as f64; t.len()]);
                ScreeningInstance::new(t.clone(), masses, pbar, cost)
            }
            None => ScreeningInstance::uniform_grid(self.range.0, self.range.1, self.n, pbar, cost),
        };
        // Instance errors already name the offending field.
        built.map_err(|e| ConfigError(e.to_string().trim_start_matches("invalid input: ").to_string()))
    }

    pub fn family_params(&self) -> FamilyParams {
        self.family_params
            .clone()
            .unwrap_or_else(|| FamilyParams::default_for(self.family))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse_config(r#"{"command": "universal"}"#).unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn missing_command_is_rejected() {
        let e = parse_config(r#"{"gamma": 0.5}"#).unwrap_err();
        assert!(e.0.starts_with("command"), "{e}");
    }

    #[test]
    fn errors_name_the_field() {
        let e = parse_config(r#"{"command": "universal", "gamma": "x"}"#).unwrap_err();
        assert!(e.0.starts_with("gamma"), "{e}");
        let e = parse_config(r#"{"command": "universal", "saddle": {"max_iter": -1}}"#).unwrap_err();
        assert!(e.0.starts_with("saddle.max_iter"), "{e}");
        let e = parse_config(r#"{"command": "universal", "gamam": 1}"#).unwrap_err();
        assert!(e.0.contains("gamam"), "{e}");
    }

    #[test]
    fn masses_must_sum_to_one() {
        let mut c = parse_config(r#"{"command": "solve-n", "thetas": [0.2, 0.6], "masses": [0.5, 0.6]}"#).unwrap();
        c.resolve();
        let e = c.validate().unwrap_err();
        assert!(e.0.starts_with("masses"), "{e}");
    }

    #[test]
    fn resolution_fills_command_defaults() {
        let mut c = RunConfig {
            command: Command::SolveN,
            ..RunConfig::default()
        };
        c.resolve();
        assert_eq!(c.dist.as_deref(), Some("uniform"));
        assert_eq!(c.pbar, Some(1.0));
        assert_eq!(c.grid, Some(20_001));
        c.validate().unwrap();
        assert_eq!(c.instance().unwrap().len(), 100);
    }
}
