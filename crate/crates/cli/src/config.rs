//! TOML run configuration.
//!
//! ```toml
//! subcommand = "verify-clt"
//! base_seed = 7
//! kernel = "d=1 l=1 p=4 regime=jump-clt"
//!
//! [model]
//! drift = 0.0
//! bound_a = 10.0
//! volatility = { kind = "constant", sigma0 = 0.5 }
//! jumps = { intensity = 5.0, max_abs = 3.0, size = { type = "trunc-normal", mean = 0.0, sd = 1.0, min_abs = 0.5 } }
//!
//! [experiment]
//! n_list = [4096]
//! reps = 1000
//!
//! [io]
//! output = "out"
//! ```
//!
//! Unknown keys are rejected at every level. [`RunConfig::canonical`]
//! prints the parsed document back in a fixed layout; parsing the canonical
//! text yields the same configuration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use vstat_core::harness::{ExperimentKind, ExperimentPlan};
use vstat_core::kernels::{check_admissibility, KernelSpec, Regime};
use vstat_core::sim::ModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Simulate,
    Stat,
    Limits,
    VerifyLln,
    VerifyClt,
    RnpCheck,
    GridTest,
    Ztrunc,
}

impl Subcommand {
    pub const ALL: [Subcommand; 8] = [
        Subcommand::Simulate,
        Subcommand::Stat,
        Subcommand::Limits,
        Subcommand::VerifyLln,
        Subcommand::VerifyClt,
        Subcommand::RnpCheck,
        Subcommand::GridTest,
        Subcommand::Ztrunc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::Stat => "stat",
            Subcommand::Limits => "limits",
            Subcommand::VerifyLln => "verify-lln",
            Subcommand::VerifyClt => "verify-clt",
            Subcommand::RnpCheck => "rnp-check",
            Subcommand::GridTest => "grid-test",
            Subcommand::Ztrunc => "ztrunc",
        }
    }

    fn needs_kernel(self) -> bool {
        !matches!(self, Subcommand::Simulate | Subcommand::RnpCheck | Subcommand::GridTest)
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Subcommand::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Qv,
    /// Scaled power variation `n^{-1} Σ |√n Δ_i X|^p`.
    Pv,
    V,
    Y,
    U,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub n_list: Vec<u64>,
    #[serde(default = "one")]
    pub reps: usize,
    #[serde(default = "unit")]
    pub t: f64,
    #[serde(default = "unit")]
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beta_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<Statistic>,
    /// Exponent of the power variation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_count: Option<usize>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub aug_draws: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m_list: Vec<usize>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub write_samples: bool,
}

fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn is_zero(x: &usize) -> bool {
    *x == 0
}
fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoBlock {
    /// CSV of increments, one per line, optional header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    #[serde(default)]
    pub base_seed: u64,
    /// Textual kernel, e.g. `d=2 l=1 p=0.5 q=4 regime=mixed-clt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    pub model: ModelConfig,
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub io: IoBlock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { key: key.into(), message: message.into() }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        let key = e.span().map(|s| text[s].trim().to_string()).unwrap_or_else(|| "config".into());
        err(&key, msg)
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Checks every block; errors name the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate().map_err(|e| err("model", e.to_string()))?;
        let x = &self.experiment;
        if x.n_list.is_empty() || x.n_list.contains(&0) {
            return Err(err("experiment.n_list", "must be non-empty with entries >= 1"));
        }
        if x.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(err("experiment.n_list", "must be strictly increasing"));
        }
        if x.reps == 0 {
            return Err(err("experiment.reps", "must be >= 1"));
        }
        if !(x.horizon > 0.0 && x.horizon.is_finite()) {
            return Err(err("experiment.horizon", "must be > 0"));
        }
        if !(x.t > 0.0 && x.t <= x.horizon) {
            return Err(err("experiment.t", "must lie in (0, horizon]"));
        }
        for (i, b) in x.beta_grid.iter().enumerate() {
            if !(*b > 0.0 && b.is_finite()) {
                return Err(err(&format!("experiment.beta_grid[{i}]"), format!("beta must be > 0, got {b}")));
            }
        }
        if let Some(p) = x.power {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(err("experiment.power", "must be >= 0"));
            }
        }
        let kernel = self.kernel_spec()?;
        if let Some(k) = &kernel {
            let rep = check_admissibility(k);
            if !rep.passed() {
                return Err(err("kernel", format!("not admissible for {}: {}", rep.regime, rep.failure_summary())));
            }
        } else if self.subcommand.needs_kernel() && !matches!(x.statistic, Some(Statistic::Qv | Statistic::Pv)) {
            return Err(err("kernel", format!("required by `{}`", self.subcommand)));
        }
        match self.subcommand {
            Subcommand::Stat if x.statistic.is_none() => return Err(err("experiment.statistic", "required by `stat`")),
            Subcommand::Stat if x.statistic == Some(Statistic::Pv) && x.power.is_none() => {
                return Err(err("experiment.power", "required for statistic `pv`"))
            }
            Subcommand::GridTest if x.beta_grid.is_empty() => return Err(err("experiment.beta_grid", "required by `grid-test`")),
            _ => {}
        }
        if let Some(plan) = self.plan()? {
            plan.validate().map_err(|e| err("experiment", e.to_string()))?;
        }
        Ok(())
    }

    pub fn kernel_spec(&self) -> Result<Option<KernelSpec>, ConfigError> {
        self.kernel.as_deref().map(|s| s.parse::<KernelSpec>().map_err(|e| err("kernel", e.to_string()))).transpose()
    }

    /// Harness plan for the experiment subcommands.
    pub fn plan(&self) -> Result<Option<ExperimentPlan>, ConfigError> {
        let kernel = self.kernel_spec()?;
        let kind = match self.subcommand {
            Subcommand::VerifyLln => ExperimentKind::Lln,
            Subcommand::VerifyClt => match kernel.as_ref().map(|k| k.regime) {
                Some(Regime::MixedClt) => ExperimentKind::CltMixed,
                _ => ExperimentKind::CltJump,
            },
            Subcommand::RnpCheck => ExperimentKind::Rnp,
            Subcommand::GridTest if self.io.input.is_none() => ExperimentKind::Grid,
            Subcommand::Ztrunc => ExperimentKind::Ztrunc,
            _ => return Ok(None),
        };
        let kernel = match kernel {
            Some(k) => k,
            None if kind == ExperimentKind::Grid => KernelSpec::grid_test(1.0).map_err(|e| err("kernel", e.to_string()))?,
            // The R(n, p) check does not evaluate a kernel.
            None => KernelSpec::power(vec![2.0], vec![], Regime::JumpLln).map_err(|e| err("kernel", e.to_string()))?,
        };
        let x = &self.experiment;
        let mut plan = ExperimentPlan::new(kind, self.model.clone(), kernel, x.n_list.clone(), x.reps, self.base_seed);
        plan.t = x.t;
        plan.horizon = x.horizon;
        plan.jump_count = x.jump_count;
        plan.aug_draws = x.aug_draws;
        plan.beta_grid = x.beta_grid.clone();
        plan.m_list = x.m_list.clone();
        plan.write_samples = x.write_samples;
        Ok(Some(plan))
    }

    /// Fixed-layout TOML; `parse_config(&c.canonical())` returns `c`.
    pub fn canonical(&self) -> String {
        let mut out = toml::to_string(self).expect("configuration serializes");
        if !out.ends_with('\n') {
            out.push('\n');
        }
        out
    }
}

/// `a:b:step` → `a, a + step, …` up to `b` inclusive.
pub fn parse_beta_range(s: &str) -> Result<Vec<f64>, ConfigError> {
    let key = "--beta";
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(err(key, format!("expected a:b:step, got `{s}`")));
    }
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| err(key, format!("`{x}` is not a number")));
    let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(a > 0.0) {
        return Err(err(key, format!("beta must be > 0, got {a}")));
    }
    if !(step > 0.0) || !(b >= a) || !b.is_finite() {
        return Err(err(key, "need 0 < a <= b and step > 0"));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(err(key, "grid has more than 10^6 points"));
    }
    // Rounded to 12 significant digits so that 0.5 + 50·0.01 prints as 1.
    Ok((0..count).map(|i| round12(a + i as f64 * step)).collect())
}

fn round12(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let e = 11 - x.abs().log10().floor() as i32;
    let s = 10f64.powi(e);
    (x * s).round() / s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_range() {
        let b = parse_beta_range("0.5:2.0:0.05").unwrap();
        assert_eq!(b.len(), 31);
        assert_eq!(b[10], 1.0);
        assert_eq!(*b.last().unwrap(), 2.0);
        assert!(parse_beta_range("0:1:0.1").is_err());
        assert!(parse_beta_range("1:2").is_err());
        assert!(parse_beta_range("1:2:0").is_err());
    }
}
