//! Empirical distribution of the first-order approximations
//! `α_i = √n σ_{(i−1)/n} Δ_i W` and the associated empirical process.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::quad::phi;
use crate::sim::SamplePath;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalPoint {
    pub x: f64,
    /// `F_n(t, x) = n^{−1} Σ 1{α_i ≤ x}`.
    pub f_n: f64,
    /// `F̄_n(t, x) = n^{−1} Σ Φ_{σ_{(i−1)/n}}(x)`.
    pub f_bar: f64,
    /// `G_n(t, x) = √n (F_n − F̄_n)`.
    pub g_n: f64,
}

fn normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

/// CDF of `N(0, s²)` at `x`, with the step function at `s = 0`.
fn phi_sigma(s: f64, x: f64) -> f64 {
    if s == 0.0 {
        if x >= 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        normal_cdf(x / s.abs())
    }
}

pub fn empirical_process(path: &SamplePath, t: f64, x: f64) -> Result<EmpiricalPoint> {
    let alpha = path.first_order_increments(t)?;
    let n = path.n as f64;
    let hits = alpha.iter().filter(|&&a| a <= x).count() as f64;
    let comp: f64 = crate::summation::pairwise_sum(
        &path.sigma_grid[..alpha.len()].iter().map(|&s| phi_sigma(s, x)).collect::<Vec<_>>(),
    );
    let f_n = hits / n;
    let f_bar = comp / n;
    Ok(EmpiricalPoint { x, f_n, f_bar, g_n: (hits - comp) / n.sqrt() })
}

/// `Φ̄_z(x) = E[V 1{zV ≤ x}]`, `V ~ N(0, 1)`.
pub fn phi_bar(z: f64, x: f64) -> f64 {
    if z > 0.0 {
        -phi(x / z)
    } else if z < 0.0 {
        phi(x / z)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, Tolerance};
    use crate::sim::{simulate_path, JumpModel, ModelConfig, VolatilityModel};

    #[test]
    fn phi_bar_matches_integral() {
        for (z, x) in [(1.0, 0.0), (0.7, 0.3), (2.0, -1.1), (-1.5, 0.4)] {
            // E[V 1{zV ≤ x}] by direct integration over v
            let lim = x / z;
            let (a, b) = if z > 0.0 { (-40.0, lim) } else { (lim, 40.0) };
            let oracle = integrate(|v| v * phi(v), a, b, Tolerance::rel(1e-12)).unwrap().value;
            assert!((phi_bar(z, x) - oracle).abs() < 1e-12, "z={z} x={x}");
        }
        assert!((phi_bar(1.0, 0.0) + 0.398_942_280_4).abs() < 1e-10);
    }

    #[test]
    fn large_x_limit() {
        let cfg = ModelConfig::new(0.0, VolatilityModel::constant(1.0), JumpModel::none());
        let p = simulate_path(&cfg, 100, 1.0, 3).unwrap();
        let e = empirical_process(&p, 0.5, 1e9).unwrap();
        assert_eq!(e.f_n, 0.5);
        assert!((e.f_bar - 0.5).abs() < 1e-15);
        assert!(e.g_n.abs() < 1e-12);
    }
}
