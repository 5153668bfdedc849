//! Chi-square goodness of fit for counts.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson test of observed counts against `Poisson(mean)`. Cells are the
/// values `0..K` and a tail cell; adjacent cells are pooled until each
/// expects at least 5 observations.
pub fn chi_square_poisson(counts: &[u64], mean: f64) -> Result<ChiSquareResult> {
    if counts.is_empty() {
        return Err(Error::InvalidArgument("no counts".into()));
    }
    if !(mean > 0.0) {
        return Err(Error::InvalidArgument(format!("Poisson mean must be > 0, got {mean}")));
    }
    let pois = Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let total = counts.len() as f64;
    let max = *counts.iter().max().unwrap_or(&0);
    let mut observed = vec![0.0; max as usize + 1];
    for &c in counts {
        observed[c as usize] += 1.0;
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    let mut cum = 0.0;
    for (k, obs) in observed.iter().enumerate() {
        let pk = pois.pmf(k as u64);
        cum += pk;
        o += obs;
        e += pk * total;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    // Tail mass beyond the largest observed count.
    e += (1.0 - cum).max(0.0) * total;
    match cells.last_mut() {
        Some(last) if e < 5.0 => {
            last.0 += o;
            last.1 += e;
        }
        _ => cells.push((o, e)),
    }
    if cells.len() < 2 {
        return Err(Error::InvalidArgument("too few observations for a chi-square test".into()));
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len() - 1;
    let chi = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(ChiSquareResult { statistic, dof, p_value: 1.0 - chi.cdf(statistic) })
}
