//! Absolute normal moments and the Gaussian smoothing
//! `ρ_H(σ, y) = E[H(σ_1 U_1, …, σ_l U_l, y)]`.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use super::{pow_abs, KernelSpec};
use crate::quad::{normal_expectation, Tolerance};
use crate::rng::{derive_tagged, stream};
use crate::{Error, Result};

/// `m_p = E|U|^p = 2^{p/2} Γ((p+1)/2) / √π`.
pub fn abs_moment(p: f64) -> f64 {
    if p <= -1.0 {
        return f64::INFINITY;
    }
    if p == 0.0 {
        return 1.0;
    }
    if p.fract() == 0.0 && p <= 40.0 {
        let k = p as u32;
        if k % 2 == 0 {
            // (p − 1)!!
            return (1..k).step_by(2).map(f64::from).product();
        }
        // 2^{(p−1)/2} ((p−1)/2)! √(2/π)
        let h = (k - 1) / 2;
        let fact: f64 = (1..=h).map(f64::from).product();
        return 2f64.powi(h as i32) * fact * (2.0 / std::f64::consts::PI).sqrt();
    }
    (0.5 * p * std::f64::consts::LN_2 + ln_gamma(0.5 * (p + 1.0)) - 0.5 * std::f64::consts::PI.ln()).exp()
}

/// Which function is smoothed: `H` itself or `∂_j H` for a y-coordinate `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrand {
    Value,
    Partial(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoMethod {
    /// Closed form where the x-factor is a pure power, quadrature otherwise.
    Auto,
    /// One-dimensional adaptive quadrature for every x-coordinate.
    Quadrature,
    /// Plain Monte Carlo over the x-block.
    MonteCarlo { nodes: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoEstimate {
    pub value: f64,
    /// Zero for the deterministic methods.
    pub std_error: f64,
}

const RHO_TOL: f64 = 1e-11;

/// `ρ_H(σ, y)`.
pub fn rho(k: &KernelSpec, sigmas: &[f64], y: &[f64]) -> Result<f64> {
    Ok(rho_with(k, sigmas, y, Integrand::Value, RhoMethod::Auto)?.value)
}

pub fn rho_with(k: &KernelSpec, sigmas: &[f64], y: &[f64], what: Integrand, method: RhoMethod) -> Result<RhoEstimate> {
    if sigmas.len() != k.l || y.len() != k.d - k.l {
        return Err(Error::InvalidArgument(format!(
            "rho: expected {} sigmas and {} y values, got {} and {}",
            k.l,
            k.d - k.l,
            sigmas.len(),
            y.len()
        )));
    }
    if let Integrand::Partial(j) = what {
        if j < k.l || j >= k.d {
            return Err(Error::InvalidArgument(format!("rho: partial index {j} must address a y-coordinate")));
        }
    }
    match method {
        RhoMethod::MonteCarlo { nodes, seed } => rho_monte_carlo(k, sigmas, y, what, nodes, seed),
        _ => {
            let force = matches!(method, RhoMethod::Quadrature);
            let mut total = 0.0;
            for term in k.separable() {
                let mut v = term.coef;
                for (c, &s) in sigmas.iter().enumerate() {
                    v *= x_expectation(k, c, &term.factors[c], s, force)?;
                    if v == 0.0 {
                        break;
                    }
                }
                if v == 0.0 {
                    continue;
                }
                for (m, &yv) in y.iter().enumerate() {
                    let c = k.l + m;
                    let g = &term.factors[c];
                    v *= match what {
                        Integrand::Partial(j) if j == c => k.coord_fn_deriv(c, g, yv)?,
                        _ => k.coord_fn(c, g, yv),
                    };
                }
                total += v;
            }
            Ok(RhoEstimate { value: total, std_error: 0.0 })
        }
    }
}

/// `E[|σU|^{e_c} g(σU)]`.
pub(crate) fn x_expectation(k: &KernelSpec, c: usize, g: &super::Factor, sigma: f64, force_quadrature: bool) -> Result<f64> {
    let e = k.exponent(c);
    if g.is_one() && !force_quadrature {
        return Ok(abs_moment(e) * pow_abs(sigma, e));
    }
    let r = normal_expectation(|x| k.coord_fn(c, g, x), sigma, Tolerance::rel(RHO_TOL))?;
    Ok(r.value)
}

fn rho_monte_carlo(k: &KernelSpec, sigmas: &[f64], y: &[f64], what: Integrand, nodes: usize, seed: u64) -> Result<RhoEstimate> {
    if nodes < 2 {
        return Err(Error::InvalidArgument("rho: Monte Carlo needs at least 2 nodes".into()));
    }
    let mut rng = stream(derive_tagged(seed, "rho"));
    let mut z = vec![0.0; k.d];
    z[k.l..].copy_from_slice(y);
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..nodes {
        for (c, &s) in sigmas.iter().enumerate() {
            let u: f64 = rng.sample(StandardNormal);
            z[c] = s * u;
        }
        let v = match what {
            Integrand::Value => k.eval_h(&z),
            Integrand::Partial(j) => k.partial_h(j, &z)?,
        };
        // Welford
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (nodes - 1) as f64;
    Ok(RhoEstimate { value: mean, std_error: (var / nodes as f64).sqrt() })
}
