//! Discrete statistics of high-frequency increments.

mod empirical;
mod tuple;

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::kernels::KernelSpec;
use crate::sim::{window_count, SamplePath};
use crate::summation::map_sum;
use crate::{Error, Result};

pub use empirical::{empirical_process, phi_bar, EmpiricalPoint};
pub use tuple::{binomial, full_sum, nested_full, nested_ordered, ordered_sum, Choice, Strategy};

/// Increments `Δ_i X` on a grid of mesh `1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Increments {
    pub n: u64,
    pub values: Vec<f64>,
}

impl Increments {
    pub fn new(n: u64, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be >= 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("increment {i} is not finite")));
        }
        Ok(Increments { n, values })
    }

    pub fn from_path(path: &SamplePath) -> Self {
        let values = path.x_grid.windows(2).map(|w| w[1] - w[0]).collect();
        Increments { n: path.n, values }
    }

    /// One increment per line; a non-numeric first line is taken as a
    /// header. Without an explicit `n` the data are read as spanning `[0, 1]`.
    pub fn read_csv<R: Read>(reader: R, n: Option<u64>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = rec.get(0).unwrap_or("").trim();
            if field.is_empty() {
                continue;
            }
            match field.parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) if line == 0 => continue,
                Err(_) => return Err(Error::Format(format!("line {}: `{field}` is not a number", line + 1))),
            }
        }
        if values.is_empty() {
            return Err(Error::Format("no increments in input".into()));
        }
        let n = n.unwrap_or(values.len() as u64);
        Increments::new(n, values)
    }

    pub fn horizon(&self) -> f64 {
        self.values.len() as f64 / self.n as f64
    }

    pub fn window(&self, t: f64) -> Result<IndexWindow> {
        let count = window_count(self.n, t) as usize;
        if !(t > 0.0) || count == 0 || count > self.values.len() {
            return Err(Error::OutOfRange { t, horizon: self.horizon() });
        }
        Ok(IndexWindow { n: self.n, t, count })
    }

    pub fn upto(&self, w: &IndexWindow) -> &[f64] {
        &self.values[..w.count]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexWindow {
    pub n: u64,
    pub t: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatKind {
    V,
    Y,
    U,
    Qv,
    Pv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatValue {
    pub kind: StatKind,
    pub value: f64,
    pub window: IndexWindow,
    pub kernel: Option<String>,
    pub strategy: Strategy,
}

/// `V(H, X, l)_t^n = n^{−(d−l)} Σ_{i ∈ [⌊nt⌋]^d} H(Δ_i X)`.
pub fn v_stat(data: &Increments, k: &KernelSpec, t: f64, choice: Choice) -> Result<StatValue> {
    let w = data.window(t)?;
    let (sum, strategy) = full_sum(k, data.upto(&w), &vec![1.0; k.d], choice)?;
    let value = sum * (data.n as f64).powi(-((k.d - k.l) as i32));
    Ok(StatValue { kind: StatKind::V, value, window: w, kernel: Some(k.to_string()), strategy })
}

/// `Y_t^n(H, X, l) = n^{−l} Σ_i Σ_j H(√n Δ_i X, Δ_j X)`.
pub fn y_stat(data: &Increments, k: &KernelSpec, t: f64, choice: Choice) -> Result<StatValue> {
    let w = data.window(t)?;
    let rn = (data.n as f64).sqrt();
    let scales: Vec<f64> = (0..k.d).map(|c| if c < k.l { rn } else { 1.0 }).collect();
    let (sum, strategy) = full_sum(k, data.upto(&w), &scales, choice)?;
    let value = sum * (data.n as f64).powi(-(k.l as i32));
    Ok(StatValue { kind: StatKind::Y, value, window: w, kernel: Some(k.to_string()), strategy })
}

/// `U = C(N, d)^{−1} Σ_{i_1 < … < i_d} H(√n Δ_{i_1} X, …, √n Δ_{i_d} X)`, `N = ⌊nt⌋`.
pub fn u_stat(data: &Increments, k: &KernelSpec, t: f64, choice: Choice) -> Result<StatValue> {
    let w = data.window(t)?;
    if w.count < k.d {
        return Err(Error::InvalidArgument(format!("u_stat needs at least d={} increments, window has {}", k.d, w.count)));
    }
    let rn = (data.n as f64).sqrt();
    let (sum, strategy) = ordered_sum(k, data.upto(&w), &vec![rn; k.d], choice)?;
    let value = sum / binomial(w.count, k.d);
    Ok(StatValue { kind: StatKind::U, value, window: w, kernel: Some(k.to_string()), strategy })
}

/// `Σ_{i ≤ ⌊nt⌋} (Δ_i X)²`.
pub fn realized_qv(data: &Increments, t: f64) -> Result<StatValue> {
    let w = data.window(t)?;
    let value = map_sum(data.upto(&w), |x| x * x);
    Ok(StatValue { kind: StatKind::Qv, value, window: w, kernel: None, strategy: Strategy::Factorized })
}

/// Scaled: `n^{−1} Σ |√n Δ_i X|^p`; unscaled: `Σ |Δ_i X|^p`.
pub fn power_variation(data: &Increments, p: f64, scaled: bool, t: f64) -> Result<StatValue> {
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::InvalidArgument(format!("power must be finite and >= 0, got {p}")));
    }
    let w = data.window(t)?;
    let value = if scaled {
        let rn = (data.n as f64).sqrt();
        map_sum(data.upto(&w), |x| crate::kernels::pow_abs(rn * x, p)) / data.n as f64
    } else {
        map_sum(data.upto(&w), |x| crate::kernels::pow_abs(x, p))
    };
    Ok(StatValue { kind: StatKind::Pv, value, window: w, kernel: None, strategy: Strategy::Factorized })
}
