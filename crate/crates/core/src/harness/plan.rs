use serde::{Deserialize, Serialize};

use crate::kernels::{check_admissibility, KernelSpec, Regime};
use crate::sim::ModelConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Lln,
    CltJump,
    CltMixed,
    Rnp,
    Grid,
    Ztrunc,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Lln => "lln",
            ExperimentKind::CltJump => "clt-jump",
            ExperimentKind::CltMixed => "clt-mixed",
            ExperimentKind::Rnp => "rnp",
            ExperimentKind::Grid => "grid",
            ExperimentKind::Ztrunc => "ztrunc",
        }
    }

    fn accepts(self, r: Regime) -> bool {
        match self {
            ExperimentKind::Lln | ExperimentKind::Rnp => true,
            ExperimentKind::CltJump | ExperimentKind::Ztrunc => matches!(r, Regime::JumpClt | Regime::GridTest),
            ExperimentKind::CltMixed => r == Regime::MixedClt,
            ExperimentKind::Grid => r == Regime::GridTest,
        }
    }
}

/// Everything needed to rerun an experiment bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    pub model: ModelConfig,
    pub kernel: KernelSpec,
    pub t: f64,
    pub horizon: f64,
    pub n_list: Vec<u64>,
    pub reps: usize,
    pub base_seed: u64,
    /// Keep only paths with exactly this many jumps in `(0, t]`, found by a
    /// deterministic search over derived seeds.
    #[serde(default)]
    pub jump_count: Option<usize>,
    /// Augmentation draws per path (truncation experiment).
    #[serde(default)]
    pub aug_draws: usize,
    #[serde(default)]
    pub beta_grid: Vec<f64>,
    #[serde(default)]
    pub m_list: Vec<usize>,
    /// Also write `samples.csv` with the raw statistic and limit-law draws.
    #[serde(default)]
    pub write_samples: bool,
}

impl ExperimentPlan {
    pub fn new(kind: ExperimentKind, model: ModelConfig, kernel: KernelSpec, n_list: Vec<u64>, reps: usize, base_seed: u64) -> Self {
        ExperimentPlan {
            kind,
            model,
            kernel,
            t: 1.0,
            horizon: 1.0,
            n_list,
            reps,
            base_seed,
            jump_count: None,
            aug_draws: 0,
            beta_grid: Vec::new(),
            m_list: Vec::new(),
            write_samples: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.model.validate()?;
        self.kernel.validate()?;
        if self.reps == 0 {
            return bad("reps must be >= 1".into());
        }
        if self.n_list.is_empty() || self.n_list[0] == 0 {
            return bad("n_list must be non-empty with entries >= 1".into());
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_list must be strictly increasing".into());
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be > 0, got {}", self.horizon));
        }
        if !(self.t > 0.0 && self.t <= self.horizon) {
            return bad(format!("t must lie in (0, horizon], got {}", self.t));
        }
        if let Some(b) = self.beta_grid.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return bad(format!("beta_grid entries must be > 0, got {b}"));
        }
        match self.kind {
            ExperimentKind::Grid if self.beta_grid.is_empty() => return bad("grid experiment needs beta_grid".into()),
            ExperimentKind::Ztrunc if self.m_list.is_empty() || self.aug_draws == 0 => {
                return bad("truncation experiment needs m_list and aug_draws >= 1".into())
            }
            _ => {}
        }
        if !self.kind.accepts(self.kernel.regime) {
            return bad(format!("kernel regime {} does not fit experiment {}", self.kernel.regime, self.kind.name()));
        }
        if self.kind != ExperimentKind::Rnp {
            let rep = check_admissibility(&self.kernel);
            if !rep.passed() {
                return Err(Error::NotAdmissible { regime: rep.regime.to_string(), failures: rep.failure_summary() });
            }
        }
        Ok(())
    }
}
