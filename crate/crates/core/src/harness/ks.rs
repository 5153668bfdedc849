//! Kolmogorov–Smirnov tests with the asymptotic Kolmogorov distribution.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size entering the asymptotic p-value.
    pub effective_n: f64,
}

/// `Q(λ) = P(K > λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form converges fast for small λ.
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let mut s = 0.0;
        let mut k = 1i32;
        loop {
            let term = y.powi(k * k);
            s += term;
            if term < 1e-17 * s.max(1e-300) || k > 200 {
                break;
            }
            k += 2;
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Stephens' finite-sample correction `λ = (√N + 0.12 + 0.11/√N) D`.
fn p_value(d: f64, ne: f64) -> f64 {
    let rn = ne.sqrt();
    kolmogorov_q((rn + 0.12 + 0.11 / rn) * d)
}

/// `D = sup_x |F_N(x) − F(x)|`; NaNs are rejected by the sort.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let n = sample.len();
    if n == 0 {
        return KsResult { statistic: 0.0, p_value: 1.0, effective_n: 0.0 };
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    KsResult { statistic: d, p_value: p_value(d, nf), effective_n: nf }
}

/// Two-sample statistic `sup_x |F_a(x) − F_b(x)|`, ties handled jointly.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    if a.is_empty() || b.is_empty() {
        return KsResult { statistic: 0.0, p_value: 1.0, effective_n: 0.0 };
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = if xa[i] <= xb[j] { xa[i] } else { xb[j] };
        while i < xa.len() && xa[i] == x {
            i += 1;
        }
        while j < xb.len() && xb[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    KsResult { statistic: d, p_value: p_value(d, ne), effective_n: ne }
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}
