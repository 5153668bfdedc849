//! Limit functionals and conditional variances computed from the ground
//! truth recorded in a [`SamplePath`].

mod mixed;

use serde::Serialize;

use crate::kernels::{KernelSpec, Regime};
use crate::sim::{window_count, JumpRecord, SamplePath};
use crate::summation::pairwise_sum;
use crate::{Error, Result};

pub use mixed::{integrated_rho_partial, cond_var_mixed, cov_c, mixed_limit, mixed_limit_with, vtilde, MixedParts};

/// Upper bound on the number of jump tuples enumerated directly.
pub const TUPLE_BUDGET: f64 = 1e8;

/// How Gaussian expectations are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Evaluation {
    /// Closed forms from absolute moments wherever the x-factor is a pure power.
    #[default]
    Auto,
    /// Adaptive quadrature throughout; used to cross-check the closed forms.
    Generic,
}

#[derive(Debug, Clone, Serialize)]
pub struct Contribution {
    /// Index into the path's jump list; `None` for a purely continuous term.
    pub jump_index: Option<usize>,
    pub time: Option<f64>,
    pub size: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitValue {
    pub value: f64,
    pub regime: Regime,
    pub contributions: Vec<Contribution>,
}

impl LimitValue {
    fn from_contributions(regime: Regime, contributions: Vec<Contribution>) -> Self {
        let value = pairwise_sum(&contributions.iter().map(|c| c.value).collect::<Vec<_>>());
        LimitValue { value, regime, contributions }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpVarTerm {
    pub jump_index: usize,
    pub time: f64,
    pub size: f64,
    /// `Σ_k V̄_k(ΔX_s)` (jump case) or `Σ_k Ṽ_k(ΔX_s)` (mixed case).
    pub derivative_sum: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CondVariance {
    pub total: f64,
    pub jump_term: f64,
    pub field_term: f64,
    pub per_jump: Vec<JumpVarTerm>,
}

/// Left-Riemann weights for `∫_0^t f(σ_u) du` on the simulation grid,
/// merged over equal σ values. The last partial cell `(⌊nt⌋/n, t]` uses
/// `σ_{⌊nt⌋/n}`, so a constant σ integrates exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeWeights {
    pub sigmas: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TimeWeights {
    pub fn new(path: &SamplePath, t: f64) -> Result<Self> {
        if !(t > 0.0) || t > path.horizon * (1.0 + 1e-12) {
            return Err(Error::OutOfRange { t, horizon: path.horizon });
        }
        let n = path.n as f64;
        let full = (window_count(path.n, t) as usize).min(path.sigma_grid.len() - 1);
        let mut pairs: Vec<(f64, f64)> = path.sigma_grid[..full].iter().map(|&s| (s.abs(), 1.0 / n)).collect();
        let rest = t - full as f64 / n;
        if rest > 0.0 {
            pairs.push((path.sigma_grid[full].abs(), rest));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut sigmas: Vec<f64> = Vec::new();
        let mut grouped: Vec<Vec<f64>> = Vec::new();
        for (s, w) in pairs {
            if sigmas.last() == Some(&s) {
                grouped.last_mut().expect("non-empty").push(w);
            } else {
                sigmas.push(s);
                grouped.push(vec![w]);
            }
        }
        let weights = grouped.iter().map(|g| pairwise_sum(g)).collect();
        Ok(TimeWeights { sigmas, weights })
    }

    pub fn integrate<F: FnMut(f64) -> Result<f64>>(&self, mut f: F) -> Result<f64> {
        let mut vals = Vec::with_capacity(self.sigmas.len());
        for (&s, &w) in self.sigmas.iter().zip(&self.weights) {
            vals.push(w * f(s)?);
        }
        Ok(pairwise_sum(&vals))
    }
}


pub(crate) fn jumps_upto(path: &SamplePath, t: f64) -> Result<Vec<(usize, &JumpRecord)>> {
    if !(t > 0.0) || t > path.horizon * (1.0 + 1e-12) {
        return Err(Error::OutOfRange { t, horizon: path.horizon });
    }
    Ok(path.jumps.iter().enumerate().filter(|(_, j)| j.time <= t).collect())
}

fn check_budget(count: usize, power: usize) -> Result<()> {
    let needed = (count as f64).powi(power as i32);
    if needed > TUPLE_BUDGET {
        return Err(Error::Budget { needed, limit: TUPLE_BUDGET });
    }
    Ok(())
}

/// Calls `f(tuple)` for every tuple in `[m]^len`, in lexicographic order.
pub(crate) fn for_each_tuple(m: usize, len: usize, mut f: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    if len == 0 {
        return f(&[]);
    }
    if m == 0 {
        return Ok(());
    }
    let mut idx = vec![0usize; len];
    loop {
        f(&idx)?;
        let mut c = len;
        loop {
            if c == 0 {
                return Ok(());
            }
            c -= 1;
            idx[c] += 1;
            if idx[c] < m {
                break;
            }
            idx[c] = 0;
        }
    }
}

/// `V(H, X, l)_t = t^{d−l} Σ_{s ∈ (0,t]^l} H(ΔX_s, 0)`.
pub fn jump_limit(path: &SamplePath, k: &KernelSpec, t: f64) -> Result<LimitValue> {
    if k.l == 0 {
        return Err(Error::InvalidArgument("jump_limit requires 1 <= l <= d".into()));
    }
    let jumps = jumps_upto(path, t)?;
    check_budget(jumps.len(), k.l)?;
    let scale = t.powi((k.d - k.l) as i32);
    let mut per_first = vec![Vec::new(); jumps.len()];
    let mut z = vec![0.0; k.d];
    for_each_tuple(jumps.len(), k.l, |tuple| {
        for (c, &i) in tuple.iter().enumerate() {
            z[c] = jumps[i].1.size;
        }
        per_first[tuple[0]].push(k.eval_h(&z));
        Ok(())
    })?;
    let contributions = jumps
        .iter()
        .zip(per_first)
        .map(|((idx, j), vals)| Contribution {
            jump_index: Some(*idx),
            time: Some(j.time),
            size: Some(j.size),
            value: scale * pairwise_sum(&vals),
        })
        .collect();
    Ok(LimitValue::from_contributions(k.regime, contributions))
}

/// `V̄_k(y) = Σ_{other l−1 jumps} ∂_k H(ΔX_{s_1}, …, y, …, ΔX_{s_l}, 0)`, coordinate `k < l`.
pub fn vbar(path: &SamplePath, k: &KernelSpec, coord: usize, y: f64, t: f64) -> Result<f64> {
    if coord >= k.l {
        return Err(Error::InvalidArgument(format!("vbar: coordinate {coord} must be < l={}", k.l)));
    }
    let jumps = jumps_upto(path, t)?;
    vbar_on(&jumps, k, coord, y)
}

fn vbar_on(jumps: &[(usize, &JumpRecord)], k: &KernelSpec, coord: usize, y: f64) -> Result<f64> {
    check_budget(jumps.len(), k.l - 1)?;
    let mut z = vec![0.0; k.d];
    let mut vals = Vec::new();
    for_each_tuple(jumps.len(), k.l - 1, |tuple| {
        let mut it = tuple.iter();
        for (c, slot) in z.iter_mut().enumerate().take(k.l) {
            *slot = if c == coord { y } else { jumps[*it.next().expect("tuple length l-1")].1.size };
        }
        vals.push(k.partial_h(coord, &z)?);
        Ok(())
    })?;
    Ok(pairwise_sum(&vals))
}

/// `E[U² | F] = ½ t^{2(d−l)} Σ_{s ≤ t} (Σ_k V̄_k(ΔX_s))² (σ_{s−}² + σ_s²)`.
pub fn cond_var_jump(path: &SamplePath, k: &KernelSpec, t: f64) -> Result<CondVariance> {
    if k.l == 0 {
        return Err(Error::InvalidArgument("cond_var_jump requires 1 <= l <= d".into()));
    }
    let jumps = jumps_upto(path, t)?;
    let scale = 0.5 * t.powi(2 * (k.d - k.l) as i32);
    let mut per_jump = Vec::with_capacity(jumps.len());
    for &(idx, j) in &jumps {
        let mut s = 0.0;
        for coord in 0..k.l {
            s += vbar_on(&jumps, k, coord, j.size)?;
        }
        let value = scale * s * s * (j.sigma_pre * j.sigma_pre + j.sigma_post * j.sigma_post);
        per_jump.push(JumpVarTerm { jump_index: idx, time: j.time, size: j.size, derivative_sum: s, value });
    }
    let jump_term = pairwise_sum(&per_jump.iter().map(|p| p.value).collect::<Vec<_>>());
    Ok(CondVariance { total: jump_term, jump_term, field_term: 0.0, per_jump })
}
