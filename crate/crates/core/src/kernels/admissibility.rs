//! Hypothesis checks for each limit theorem. Power constraints are checked
//! symbolically; limits and parity numerically on deterministic samples.

use rand::Rng;
use serde::Serialize;

use super::{pow_abs, pow_abs_deriv, KernelSpec, LExpr, Regime};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Unverified,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub regime: Regime,
    pub kernel: String,
    pub checks: Vec<Check>,
}

impl AdmissibilityReport {
    /// No check failed; unverified checks do not block.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail).collect()
    }

    pub fn failure_summary(&self) -> String {
        self.failures().iter().map(|c| format!("{} ({})", c.name, c.detail)).collect::<Vec<_>>().join("; ")
    }
}

const SHRINK: [f64; 8] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
const SAMPLES: usize = 24;
const CHECK_SEED: u64 = 0x5eed_ad31;

fn check(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), status: if ok { CheckStatus::Pass } else { CheckStatus::Fail }, detail: detail.into() }
}

fn each_power(block: &str, powers: &[f64], name: &str, ok: impl Fn(f64) -> bool) -> Check {
    let bad: Vec<String> = powers.iter().enumerate().filter(|(_, &e)| !ok(e)).map(|(i, e)| format!("{block}{}={e}", i + 1)).collect();
    if bad.is_empty() {
        check(name, true, format!("all {block} powers satisfy {name}"))
    } else {
        check(name, false, format!("violated by {}", bad.join(", ")))
    }
}

pub fn check_admissibility(k: &KernelSpec) -> AdmissibilityReport {
    let mut checks = Vec::new();
    match k.regime {
        Regime::JumpLln => {
            checks.push(check("1<=l<=d", k.l >= 1, format!("l={}, d={}", k.l, k.d)));
            if k.l >= 1 {
                checks.push(alln(k));
            }
        }
        Regime::JumpClt | Regime::GridTest => {
            checks.push(check("1<=l<=d", k.l >= 1, format!("l={}, d={}", k.l, k.d)));
            checks.push(each_power("p", &k.p, "p>3", |e| e > 3.0));
            checks.push(y_power_smoothness(k));
            checks.push(check("L in C^{d+1}", true, "catalog atoms are smooth"));
            if k.l >= 1 {
                checks.push(derivative_vanishes_at_y_zero(k));
            }
        }
        Regime::MixedLln => {
            checks.push(each_power("p", &k.p, "p<2", |e| e < 2.0));
            checks.push(each_power("q", &k.q, "q>2", |e| e > 2.0));
            checks.push(bounded_in_x(k));
        }
        Regime::MixedClt => {
            checks.push(each_power("p", &k.p, "0<p<1", |e| e > 0.0 && e < 1.0));
            checks.push(each_power("q", &k.q, "q>3", |e| e > 3.0));
            checks.push(even_in_x(k));
            checks.push(bounded_in_x(k));
            checks.extend(growth(k));
        }
    }
    AdmissibilityReport { regime: k.regime, kernel: k.to_string(), checks }
}

fn sample_point(rng: &mut impl Rng, n: usize, half_width: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-half_width..half_width)).collect()
}

/// `H(x, y) / ∏|x_i|² → 0` as `x → 0`.
fn alln(k: &KernelSpec) -> Check {
    let name = "H/|x_1...x_l|^2 -> 0";
    if k.p.iter().all(|&e| e > 2.0) {
        return check(name, true, "all p > 2 and L is continuous");
    }
    let mut rng = stream(CHECK_SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES {
        let dir = sample_point(&mut rng, k.l, 1.0);
        let y = sample_point(&mut rng, k.d - k.l, 2.0);
        let ratio = |eps: f64| {
            let mut z: Vec<f64> = dir.iter().map(|u| eps * u).collect();
            z.extend_from_slice(&y);
            let den: f64 = z[..k.l].iter().map(|x| x * x).product();
            (k.eval_h(&z) / den).abs()
        };
        let first = ratio(SHRINK[0]);
        let last = ratio(SHRINK[SHRINK.len() - 1]);
        worst = worst.max(last / (1.0 + first));
    }
    check(name, worst < 1e-6, format!("largest ratio at |x|~1e-8: {worst:.3e}"))
}

/// `|y|^q` must itself be `C^{d+1}` when folded into `L`.
fn y_power_smoothness(k: &KernelSpec) -> Check {
    let ok = |e: f64| e == 0.0 || (e.fract() == 0.0 && (e as u64) % 2 == 0) || e > (k.d + 1) as f64;
    each_power("q", &k.q, "|y|^q in C^{d+1}", ok)
}

/// `∂_k (|y|^q L)(x, y) → 0` as `y → 0` for every y-coordinate `k`.
fn derivative_vanishes_at_y_zero(k: &KernelSpec) -> Check {
    let name = "d_k L(x,y) -> 0 as y -> 0";
    if k.l == k.d {
        return check(name, true, "l = d: no y-coordinates");
    }
    let mut rng = stream(CHECK_SEED ^ 1);
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES {
        let x = sample_point(&mut rng, k.l, 2.0);
        let dir = sample_point(&mut rng, k.d - k.l, 1.0);
        for j in k.l..k.d {
            let val = |eps: f64| {
                let mut z = x.clone();
                z.extend(dir.iter().map(|u| eps * u));
                let e = k.exponent(j);
                let yj = z[j];
                let rest: f64 = (k.l..k.d).filter(|&c| c != j).map(|c| pow_abs(z[c], k.exponent(c))).product();
                let d = pow_abs_deriv(yj, e) * k.lexpr.eval(&z) + pow_abs(yj, e) * k.lexpr.partial(&z, j);
                (rest * d).abs()
            };
            let first = val(SHRINK[0]);
            let last = val(SHRINK[SHRINK.len() - 1]);
            worst = worst.max(last / (1.0 + first));
        }
    }
    check(name, worst < 1e-6, format!("largest |d_k L| at |y|~1e-8: {worst:.3e}"))
}

/// Polynomial growth exponent of `e` in coordinate `c`; `-inf` for Gaussian decay.
fn x_growth(e: &LExpr, c: usize) -> f64 {
    match e {
        LExpr::One | LExpr::GridSin { .. } => 0.0,
        LExpr::GaussBump { c: coef, i } => {
            if *i == c && *coef > 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            }
        }
        LExpr::PolyEven { i, coeffs } => {
            if *i == c {
                let top = coeffs.iter().rposition(|a| *a != 0.0).unwrap_or(0);
                2.0 * top as f64
            } else {
                0.0
            }
        }
        LExpr::Sum(v) => v.iter().map(|x| x_growth(x, c)).fold(f64::NEG_INFINITY, f64::max),
        LExpr::Product(v) => v.iter().map(|x| x_growth(x, c)).sum(),
    }
}

fn bounded_in_x(k: &KernelSpec) -> Check {
    let name = "|L(x,y)| <= u(y)";
    let grows: Vec<String> =
        (0..k.l).filter(|&c| x_growth(&k.lexpr, c) > 0.0).map(|c| format!("x{}", c + 1)).collect();
    if grows.is_empty() {
        check(name, true, "L is bounded in every x-coordinate")
    } else {
        check(name, false, format!("L grows polynomially in {}", grows.join(", ")))
    }
}

fn even_in_x(k: &KernelSpec) -> Check {
    let name = "H even in x";
    let mut rng = stream(CHECK_SEED ^ 2);
    for _ in 0..SAMPLES {
        let z = sample_point(&mut rng, k.d, 2.5);
        let base = k.lexpr.eval(&z);
        for c in 0..k.l {
            let mut w = z.clone();
            w[c] = -w[c];
            let flipped = k.lexpr.eval(&w);
            if (flipped - base).abs() > 1e-12 * (1.0 + base.abs()) {
                return check(name, false, format!("L changes under x{} -> -x{}", c + 1, c + 1));
            }
        }
    }
    check(name, true, "L invariant under sign flips of each x-coordinate")
}

/// Growth exponent in `x` of `∂_j` of a single atom.
fn atom_derivative_growth(atom: &LExpr, j: usize, l: usize) -> f64 {
    match atom {
        LExpr::PolyEven { i, coeffs } if *i == j && j < l => {
            let top = coeffs.iter().rposition(|a| *a != 0.0).unwrap_or(0);
            if top == 0 {
                0.0
            } else {
                (2 * top - 1) as f64
            }
        }
        _ => 0.0,
    }
}

/// `γ_j + p_i < 1` for `i ≠ j`, per atom; products are reported unverified.
fn growth(k: &KernelSpec) -> Vec<Check> {
    let name = "gamma_j + p_i < 1";
    let mut bad = Vec::new();
    for atom in k.lexpr.atoms() {
        for j in 0..k.d {
            let g = atom_derivative_growth(atom, j, k.l);
            for (i, &p) in k.p.iter().enumerate() {
                if i != j && g + p >= 1.0 {
                    bad.push(format!("{atom}: gamma_{}={g} with p{}={p}", j + 1, i + 1));
                }
            }
        }
    }
    let mut out = vec![if bad.is_empty() {
        check(name, true, "per-atom growth exponents within bounds")
    } else {
        check(name, false, bad.join("; "))
    }];
    if has_product(&k.lexpr) {
        out.push(Check {
            name: "growth of compositions".into(),
            status: CheckStatus::Unverified,
            detail: "products of atoms: growth constants not verified".into(),
        });
    }
    out
}

fn has_product(e: &LExpr) -> bool {
    match e {
        LExpr::Product(v) => v.len() > 1 || v.iter().any(has_product),
        LExpr::Sum(v) => v.iter().any(has_product),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(text: &str) -> AdmissibilityReport {
        check_admissibility(&text.parse().unwrap())
    }

    #[test]
    fn examples() {
        assert!(report("p=4 regime=jump-clt").passed());
        assert!(report("d=2 l=2 p=4,4 regime=grid-test L=(gridsin 1 0 1)").passed());
        assert!(report("d=2 l=2 p=4,4 regime=jump-clt L=(gridsin 1 0 1)").passed());
        let r = report("p=1.5 regime=mixed-clt");
        assert!(!r.passed());
        assert!(r.failure_summary().contains("0<p<1"));
    }

    #[test]
    fn jump_lln_condition() {
        assert!(report("p=2.5 regime=jump-lln").passed());
        assert!(!report("p=2 regime=jump-lln").passed());
        assert!(!report("p=1 regime=jump-lln").passed());
        // p = 2 rescued by L vanishing at the origin
        assert!(report("p=2 regime=jump-lln L=(poly 0 0 1)").passed());
        assert!(!report("d=1 l=0 q=4 regime=jump-lln").passed());
    }

    #[test]
    fn jump_clt_y_block() {
        // q = 0 with L depending on y through an even function: derivative vanishes
        assert!(report("d=2 l=1 p=4 q=0 regime=jump-clt L=(gauss 1 1)").passed());
        // gridsin between x and y: ∂_y L(x, 0) ≠ 0 in general
        assert!(!report("d=2 l=1 p=4 q=0 regime=jump-clt L=(gridsin 1.3 0 1)").passed());
        // a y power of 2.5 is not C^3
        assert!(!report("d=2 l=1 p=4 q=2.5 regime=jump-clt").passed());
        assert!(report("d=2 l=1 p=4 q=2 regime=jump-clt").passed());
    }

    #[test]
    fn mixed_regimes() {
        assert!(report("d=2 l=1 p=0.5 q=4 regime=mixed-clt").passed());
        assert!(report("d=2 l=1 p=0.5 q=4 regime=mixed-lln").passed());
        assert!(!report("d=2 l=1 p=0.5 q=2 regime=mixed-lln").passed());
        assert!(!report("d=2 l=1 p=0.5 q=4 regime=mixed-lln L=(poly 0 1 1)").passed());
        assert!(report("d=2 l=1 p=0.5 q=4 regime=mixed-lln L=(* (poly 0 1 1) (gauss 1 0))").passed());
        assert!(!report("d=2 l=1 p=0.5 q=4 regime=mixed-clt L=(gridsin 1 0 1)").passed());
        assert!(report("d=2 l=1 p=0.5 q=4 regime=mixed-clt L=(gauss 0.5 0)").passed());
        let r = report("d=2 l=1 p=0.5 q=4 regime=mixed-clt L=(* (gauss 0.5 0) (gauss 0.5 1))");
        assert!(r.passed());
        assert!(r.checks.iter().any(|c| c.status == CheckStatus::Unverified));
    }
}
