use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VolatilityKind {
    Constant,
    ItoSm,
}

/// Spot volatility `σ_t = σ_0 + ∫ b̃ ds + ∫ σ̃ dW + ∫ ṽ dV`, with `V` a
/// Brownian motion independent of `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolatilityModel {
    pub kind: VolatilityKind,
    pub sigma0: f64,
    #[serde(default)]
    pub tilde_b: f64,
    #[serde(default)]
    pub tilde_sigma: f64,
    #[serde(default)]
    pub tilde_v: f64,
    #[serde(default = "default_floor")]
    pub floor_eps: f64,
    /// Maximum number of floor clamps tolerated per path; unlimited when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_clamps: Option<u64>,
}

fn default_floor() -> f64 {
    1e-4
}

impl VolatilityModel {
    pub fn constant(sigma: f64) -> Self {
        Self {
            kind: VolatilityKind::Constant,
            sigma0: sigma,
            tilde_b: 0.0,
            tilde_sigma: 0.0,
            tilde_v: 0.0,
            floor_eps: default_floor(),
            max_clamps: None,
        }
    }

    pub fn ito(sigma0: f64, tilde_b: f64, tilde_sigma: f64, tilde_v: f64) -> Self {
        Self {
            kind: VolatilityKind::ItoSm,
            sigma0,
            tilde_b,
            tilde_sigma,
            tilde_v,
            floor_eps: default_floor(),
            max_clamps: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.sigma0, self.tilde_b, self.tilde_sigma, self.tilde_v, self.floor_eps]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("volatility coefficients must be finite".into()));
        }
        if !(self.floor_eps > 0.0) {
            return Err(Error::InvalidConfig("volatility.floor_eps must be > 0".into()));
        }
        match self.kind {
            // σ = 0 is allowed here: pure-jump and deterministic paths are useful degenerate cases.
            VolatilityKind::Constant => {
                if self.sigma0 < 0.0 {
                    return Err(Error::InvalidConfig("volatility.sigma0 must be >= 0".into()));
                }
                if self.tilde_b != 0.0 || self.tilde_sigma != 0.0 || self.tilde_v != 0.0 {
                    return Err(Error::InvalidConfig(
                        "constant volatility requires tilde_b = tilde_sigma = tilde_v = 0".into(),
                    ));
                }
            }
            VolatilityKind::ItoSm => {
                if !(self.sigma0 > 0.0) {
                    return Err(Error::InvalidConfig("volatility.sigma0 must be > 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// Distribution of a single jump size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpSizeDist {
    /// Finite list of `(value, probability)` pairs.
    Atoms { atoms: Vec<(f64, f64)> },
    Uniform { a: f64, b: f64 },
    /// Normal `N(mean, sd²)` conditioned on `min_abs <= |z| <= max_abs`.
    TruncNormal { mean: f64, sd: f64, min_abs: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpModel {
    /// Compound-Poisson rate per unit time.
    pub intensity: f64,
    pub size: JumpSizeDist,
    pub max_abs: f64,
}

const TRUNC_NORMAL_TRIES: usize = 100_000;

impl JumpModel {
    pub fn none() -> Self {
        Self { intensity: 0.0, size: JumpSizeDist::Atoms { atoms: vec![(1.0, 1.0)] }, max_abs: 1.0 }
    }

    pub fn atoms(intensity: f64, atoms: Vec<(f64, f64)>) -> Self {
        let max_abs = atoms.iter().fold(0.0_f64, |m, &(v, _)| m.max(v.abs()));
        Self { intensity, size: JumpSizeDist::Atoms { atoms }, max_abs }
    }

    pub fn trunc_normal(intensity: f64, mean: f64, sd: f64, min_abs: f64, max_abs: f64) -> Self {
        Self { intensity, size: JumpSizeDist::TruncNormal { mean, sd, min_abs }, max_abs }
    }

    fn validate(&self) -> Result<()> {
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) {
            return Err(Error::InvalidConfig("jumps.intensity must be finite and >= 0".into()));
        }
        if !(self.max_abs > 0.0 && self.max_abs.is_finite()) {
            return Err(Error::InvalidConfig("jumps.max_abs must be finite and > 0".into()));
        }
        match &self.size {
            JumpSizeDist::Atoms { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidConfig("jumps.size.atoms must not be empty".into()));
                }
                let mut total = 0.0;
                for &(v, p) in atoms {
                    if v == 0.0 || !v.is_finite() || v.abs() > self.max_abs {
                        return Err(Error::InvalidConfig(format!(
                            "jump atom {v} must satisfy 0 < |z| <= max_abs = {}",
                            self.max_abs
                        )));
                    }
                    if !(p >= 0.0) {
                        return Err(Error::InvalidConfig("jump atom probabilities must be >= 0".into()));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidConfig(format!(
                        "jump atom probabilities sum to {total}, expected 1"
                    )));
                }
            }
            JumpSizeDist::Uniform { a, b } => {
                if !(a < b) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidConfig("jumps.size uniform needs finite a < b".into()));
                }
                if *a <= 0.0 && *b >= 0.0 {
                    return Err(Error::InvalidConfig(
                        "jumps.size uniform interval must not contain 0".into(),
                    ));
                }
                if a.abs().max(b.abs()) > self.max_abs {
                    return Err(Error::InvalidConfig("jumps.size uniform exceeds max_abs".into()));
                }
            }
            JumpSizeDist::TruncNormal { mean, sd, min_abs } => {
                if !(sd > &0.0) || !mean.is_finite() || !sd.is_finite() {
                    return Err(Error::InvalidConfig("jumps.size trunc-normal needs finite sd > 0".into()));
                }
                if !(min_abs > &0.0) || *min_abs >= self.max_abs {
                    return Err(Error::InvalidConfig(
                        "jumps.size trunc-normal needs 0 < min_abs < max_abs".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `E[z²]` of one jump size, used for analytic compound-Poisson moments.
    pub fn second_moment(&self) -> Option<f64> {
        match &self.size {
            JumpSizeDist::Atoms { atoms } => Some(atoms.iter().map(|&(v, p)| p * v * v).sum()),
            JumpSizeDist::Uniform { a, b } => Some((a * a + a * b + b * b) / 3.0),
            JumpSizeDist::TruncNormal { .. } => None,
        }
    }

    pub(crate) fn draw_size<R: Rng>(&self, rng: &mut R) -> Result<f64> {
        match &self.size {
            JumpSizeDist::Atoms { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(v, p) in atoms {
                    acc += p;
                    if u < acc {
                        return Ok(v);
                    }
                }
                Ok(atoms.iter().rev().find(|a| a.1 > 0.0).map_or(atoms[0].0, |a| a.0))
            }
            JumpSizeDist::Uniform { a, b } => {
                loop {
                    let u: f64 = rng.random();
                    let z = a + (b - a) * u;
                    if z != 0.0 {
                        return Ok(z);
                    }
                }
            }
            JumpSizeDist::TruncNormal { mean, sd, min_abs } => {
                for _ in 0..TRUNC_NORMAL_TRIES {
                    let g: f64 = rng.sample(StandardNormal);
                    let z = mean + sd * g;
                    if z.abs() >= *min_abs && z.abs() <= self.max_abs {
                        return Ok(z);
                    }
                }
                Err(Error::InvalidConfig(
                    "trunc-normal jump acceptance region has negligible mass".into(),
                ))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub drift: f64,
    #[serde(default)]
    pub x0: f64,
    pub volatility: VolatilityModel,
    pub jumps: JumpModel,
    /// Global bound `A` on drift, volatility and jump sizes.
    pub bound_a: f64,
    /// Abort the simulation when the volatility path leaves `[-A, A]`.
    #[serde(default)]
    pub reject_beyond_bound: bool,
}

impl ModelConfig {
    pub fn new(drift: f64, volatility: VolatilityModel, jumps: JumpModel) -> Self {
        let bound_a = [drift.abs(), volatility.sigma0, jumps.max_abs, 1.0]
            .iter()
            .fold(0.0_f64, |m, v| m.max(*v))
            * 10.0;
        Self { drift, x0: 0.0, volatility, jumps, bound_a, reject_beyond_bound: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.drift.is_finite() || !self.x0.is_finite() {
            return Err(Error::InvalidConfig("drift and x0 must be finite".into()));
        }
        self.volatility.validate()?;
        self.jumps.validate()?;
        if !(self.bound_a > 0.0) {
            return Err(Error::InvalidConfig("bound_a must be > 0".into()));
        }
        if self.drift.abs() > self.bound_a {
            return Err(Error::InvalidConfig("|drift| exceeds bound_a".into()));
        }
        if self.volatility.sigma0 > self.bound_a {
            return Err(Error::InvalidConfig("volatility.sigma0 exceeds bound_a".into()));
        }
        if self.jumps.max_abs > self.bound_a {
            return Err(Error::InvalidConfig("jumps.max_abs exceeds bound_a".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_volatility_rejects_noise_coefficients() {
        let mut v = VolatilityModel::constant(1.0);
        v.tilde_sigma = 0.1;
        let cfg = ModelConfig::new(0.0, v, JumpModel::none());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn atom_probabilities_must_sum_to_one() {
        let cfg = ModelConfig::new(
            0.0,
            VolatilityModel::constant(1.0),
            JumpModel::atoms(1.0, vec![(1.0, 0.3), (-1.0, 0.3)]),
        );
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_atom_rejected() {
        let cfg = ModelConfig::new(
            0.0,
            VolatilityModel::constant(1.0),
            JumpModel::atoms(1.0, vec![(0.0, 1.0)]),
        );
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn uniform_straddling_zero_rejected() {
        let jumps = JumpModel { intensity: 1.0, size: JumpSizeDist::Uniform { a: -1.0, b: 1.0 }, max_abs: 2.0 };
        let cfg = ModelConfig::new(0.0, VolatilityModel::constant(1.0), jumps);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn bound_checks() {
        let mut cfg = ModelConfig::new(0.5, VolatilityModel::constant(1.0), JumpModel::none());
        cfg.bound_a = 0.8;
        assert!(cfg.validate().is_err());
        cfg.bound_a = 1.0;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn trunc_normal_draws_respect_bounds() {
        let jm = JumpModel::trunc_normal(1.0, 0.0, 1.0, 0.5, 2.0);
        let mut rng = crate::rng::stream(3);
        for _ in 0..2000 {
            let z = jm.draw_size(&mut rng).unwrap();
            assert!(z.abs() >= 0.5 && z.abs() <= 2.0);
        }
    }
}
