//! Product-power kernels `H(x, y) = ∏|x_i|^{p_i} · ∏|y_j|^{q_j} · L(x, y)`.

mod admissibility;
mod lexpr;
mod moments;
pub mod separable;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use admissibility::{check_admissibility, AdmissibilityReport, Check, CheckStatus};
pub use lexpr::LExpr;
pub(crate) use moments::x_expectation;
pub use moments::{abs_moment, rho, rho_with, Integrand, RhoEstimate, RhoMethod};
pub use separable::{expand, expand_phased, Atom1, Factor, SepTerm};

/// The limit theorem a kernel is meant for; decides which hypotheses
/// [`check_admissibility`] verifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    JumpLln,
    JumpClt,
    MixedLln,
    MixedClt,
    GridTest,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::JumpLln => "jump-lln",
            Regime::JumpClt => "jump-clt",
            Regime::MixedLln => "mixed-lln",
            Regime::MixedClt => "mixed-clt",
            Regime::GridTest => "grid-test",
        }
    }

    /// Jump-dominated regimes use unscaled increments in every coordinate.
    pub fn is_jump(self) -> bool {
        matches!(self, Regime::JumpLln | Regime::JumpClt | Regime::GridTest)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        [Regime::JumpLln, Regime::JumpClt, Regime::MixedLln, Regime::MixedClt, Regime::GridTest]
            .into_iter()
            .find(|r| r.name() == norm || r.name().replace('-', "") == norm)
            .ok_or_else(|| Error::KernelParse(format!("unknown regime `{s}`")))
    }
}

/// `|x|^e` with `0^0 = 1`.
#[inline]
pub fn pow_abs(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e.fract() == 0.0 && e <= 64.0 {
        x.abs().powi(e as i32)
    } else {
        x.abs().powf(e)
    }
}

/// `d/dx |x|^e` away from the origin.
#[inline]
pub fn pow_abs_deriv(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        e * x.signum() * pow_abs(x, e - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub d: usize,
    pub l: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    #[serde(rename = "L")]
    pub lexpr: LExpr,
    pub regime: Regime,
}

impl KernelSpec {
    pub fn new(d: usize, l: usize, p: Vec<f64>, q: Vec<f64>, lexpr: LExpr, regime: Regime) -> Result<Self> {
        let k = KernelSpec { d, l, p, q, lexpr, regime };
        k.validate()?;
        Ok(k)
    }

    /// Pure power kernel with `L = 1`.
    pub fn power(p: Vec<f64>, q: Vec<f64>, regime: Regime) -> Result<Self> {
        let l = p.len();
        Self::new(l + q.len(), l, p, q, LExpr::One, regime)
    }

    /// `|x|⁴|y|⁴ sin²(π(x − y)/β)`, the lattice test kernel.
    pub fn grid_test(beta: f64) -> Result<Self> {
        Self::new(2, 2, vec![4.0, 4.0], vec![], LExpr::grid_sin(beta, 0, 1), Regime::GridTest)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.d == 0 {
            return bad("kernel: d must be >= 1".into());
        }
        if self.l > self.d {
            return bad(format!("kernel: l={} exceeds d={}", self.l, self.d));
        }
        if self.p.len() != self.l {
            return bad(format!("kernel: p has {} entries, expected l={}", self.p.len(), self.l));
        }
        if self.q.len() != self.d - self.l {
            return bad(format!("kernel: q has {} entries, expected d-l={}", self.q.len(), self.d - self.l));
        }
        if let Some(e) = self.exponents().into_iter().find(|e| !(e.is_finite() && *e >= 0.0)) {
            return bad(format!("kernel: powers must be finite and >= 0, got {e}"));
        }
        self.lexpr.validate(self.d)
    }

    /// `(p_1, …, p_l, q_1, …, q_{d−l})`.
    pub fn exponents(&self) -> Vec<f64> {
        self.p.iter().chain(&self.q).copied().collect()
    }

    pub fn exponent(&self, c: usize) -> f64 {
        if c < self.l {
            self.p[c]
        } else {
            self.q[c - self.l]
        }
    }

    pub fn eval_h(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.d);
        let mut v = 1.0;
        for (c, &x) in z.iter().enumerate() {
            v *= pow_abs(x, self.exponent(c));
            if v == 0.0 {
                return 0.0;
            }
        }
        v * self.lexpr.eval(z)
    }

    /// `∂_j H(z)`. At `z_j = 0` the value is 0 when the power is > 1 (or the
    /// plain `∂_j L` term when the power is 0); powers in `(0, 1]` have no
    /// derivative there.
    pub fn partial_h(&self, j: usize, z: &[f64]) -> Result<f64> {
        if j >= self.d {
            return Err(Error::InvalidArgument(format!("coordinate {j} out of range for d={}", self.d)));
        }
        let e = self.exponent(j);
        let x = z[j];
        let rest: f64 = z.iter().enumerate().filter(|(c, _)| *c != j).map(|(c, &y)| pow_abs(y, self.exponent(c))).product();
        if e == 0.0 {
            return Ok(rest * self.lexpr.partial(z, j));
        }
        if x == 0.0 {
            if e > 1.0 {
                return Ok(0.0);
            }
            return Err(Error::DerivativeDomain { coord: j, power: e });
        }
        if rest == 0.0 {
            return Ok(0.0);
        }
        let lead = pow_abs_deriv(x, e) * self.lexpr.eval(z);
        let tail = pow_abs(x, e) * self.lexpr.partial(z, j);
        Ok(rest * (lead + tail))
    }

    /// Separable expansion of `L`; `H` is then `Σ_τ c_τ ∏_k |z_k|^{e_k} g_{τ,k}(z_k)`.
    pub fn separable(&self) -> Vec<SepTerm> {
        expand(&self.lexpr, self.d)
    }

    /// Separable expansion tuned to `data` (coordinate `c` sees `scales[c]·x`):
    /// each `gridsin` angle is centred on the weighted circular mean of the
    /// data so that sums over near-lattice data keep full relative accuracy.
    pub fn separable_for(&self, data: &[f64], scales: &[f64]) -> Vec<SepTerm> {
        expand_phased(&self.lexpr, self.d, &|beta, i, j| {
            let w = 2.0 * std::f64::consts::PI / beta;
            let (mut sn, mut cs) = (0.0, 0.0);
            for c in [i, j] {
                let e = self.exponent(c);
                for &x in data {
                    let y = scales[c] * x;
                    let weight = pow_abs(y, e);
                    let (s, co) = (w * y).sin_cos();
                    sn += weight * s;
                    cs += weight * co;
                }
            }
            if sn == 0.0 && cs == 0.0 {
                0.0
            } else {
                0.5 * sn.atan2(cs)
            }
        })
    }

    /// `|z|^{e_c} g(z)` for one coordinate of one separable term.
    pub fn coord_fn(&self, c: usize, g: &Factor, x: f64) -> f64 {
        let p = pow_abs(x, self.exponent(c));
        if p == 0.0 {
            0.0
        } else {
            p * g.eval(x)
        }
    }

    /// Derivative of [`KernelSpec::coord_fn`]; requires `x != 0` for powers in `(0, 1]`.
    pub fn coord_fn_deriv(&self, c: usize, g: &Factor, x: f64) -> Result<f64> {
        let e = self.exponent(c);
        if x == 0.0 && e > 0.0 {
            if e > 1.0 {
                return Ok(0.0);
            }
            return Err(Error::DerivativeDomain { coord: c, power: e });
        }
        Ok(pow_abs_deriv(x, e) * g.eval(x) + pow_abs(x, e) * g.deriv(x))
    }

    pub fn l_independent_of_x(&self) -> bool {
        (0..self.l).all(|c| !self.lexpr.depends_on(c))
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "d={} l={} p={} q={} regime={} L={}",
            self.d,
            self.l,
            fmt_list(&self.p),
            fmt_list(&self.q),
            self.regime,
            self.lexpr
        )
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// `d=2 l=2 p=4,4 q= regime=grid-test L=(gridsin 1 0 1)`; `L=` comes last.
    fn from_str(text: &str) -> Result<Self> {
        let perr = |m: String| Error::KernelParse(m);
        let (head, ltext) = match text.find("L=") {
            Some(at) => (&text[..at], &text[at + 2..]),
            None => (text, "one"),
        };
        let (mut d, mut l, mut p, mut q, mut regime) = (None, None, None, None, None);
        for item in head.split_whitespace() {
            let (key, val) = item.split_once('=').ok_or_else(|| perr(format!("expected key=value, got `{item}`")))?;
            let list = |v: &str| -> Result<Vec<f64>> {
                v.split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.trim().parse::<f64>().map_err(|_| perr(format!("`{s}` in `{key}` is not a number"))))
                    .collect()
            };
            match key {
                "d" => d = Some(val.parse::<usize>().map_err(|_| perr(format!("d: `{val}` is not an integer")))?),
                "l" => l = Some(val.parse::<usize>().map_err(|_| perr(format!("l: `{val}` is not an integer")))?),
                "p" => p = Some(list(val)?),
                "q" => q = Some(list(val)?),
                "regime" => regime = Some(val.parse::<Regime>()?),
                other => return Err(perr(format!("unknown kernel key `{other}`"))),
            }
        }
        let p = p.unwrap_or_default();
        let q = q.unwrap_or_default();
        let l = l.unwrap_or(p.len());
        let d = d.unwrap_or(l + q.len());
        let regime = regime.ok_or_else(|| perr("kernel: missing `regime=`".into()))?;
        let lexpr = LExpr::parse(ltext)?;
        KernelSpec::new(d, l, p, q, lexpr, regime).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::KernelParse(m),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        let k = KernelSpec::power(vec![4.0, 4.0], vec![], Regime::JumpClt).unwrap();
        assert_eq!(k.eval_h(&[1.0, -2.0]), 16.0);
        let g = KernelSpec::grid_test(1.0).unwrap();
        assert!(g.eval_h(&[0.5, 1.5]).abs() < 1e-30);
        assert!((g.eval_h(&[0.5, 1.0]) - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn zero_power_zero_argument() {
        let k = KernelSpec::power(vec![0.0], vec![2.0], Regime::MixedLln).unwrap();
        assert_eq!(k.eval_h(&[0.0, 3.0]), 9.0);
        assert_eq!(k.eval_h(&[1.0, 0.0]), 0.0);
    }

    #[test]
    fn partial_examples() {
        let k = KernelSpec::power(vec![4.0], vec![], Regime::JumpClt).unwrap();
        assert_eq!(k.partial_h(0, &[2.0]).unwrap(), 32.0);
        assert_eq!(k.partial_h(0, &[0.0]).unwrap(), 0.0);
        let k = KernelSpec::power(vec![], vec![4.0, 4.0], Regime::JumpLln).unwrap();
        assert_eq!(k.partial_h(0, &[1.0, 1.0]).unwrap(), 4.0);
        let k = KernelSpec::power(vec![0.5], vec![4.0], Regime::MixedClt).unwrap();
        assert!(matches!(k.partial_h(0, &[0.0, 1.0]), Err(Error::DerivativeDomain { coord: 0, .. })));
        let k = KernelSpec::power(vec![1.0], vec![], Regime::JumpLln).unwrap();
        assert!(k.partial_h(0, &[0.0]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let texts = [
            "d=2 l=2 p=4,4 q= regime=grid-test L=(gridsin 1 0 1)",
            "d=2 l=1 p=0.5 q=4 regime=mixed-clt L=one",
            "d=3 l=1 p=0.25 q=4.5,6 regime=mixed-lln L=(* (gauss 0.5 0) (+ one (poly 2 1 0.1)))",
        ];
        for t in texts {
            let k: KernelSpec = t.parse().unwrap();
            assert_eq!(k.to_string(), t);
        }
        let k: KernelSpec = "p=4 regime=jump_clt".parse().unwrap();
        assert_eq!((k.d, k.l, k.regime), (1, 1, Regime::JumpClt));
    }

    #[test]
    fn text_rejections() {
        for t in [
            "d=2 l=2 p=4 q= regime=grid-test L=one",
            "d=2 l=3 p=4,4,4 regime=jump-clt",
            "d=1 l=1 p=-1 regime=jump-clt",
            "d=1 l=1 p=4",
            "d=1 l=1 p=4 regime=foo",
            "d=1 l=1 p=4 colour=red regime=jump-clt",
            "d=2 l=2 p=4,4 regime=grid-test L=(gridsin 0 0 1)",
        ] {
            assert!(t.parse::<KernelSpec>().is_err(), "{t}");
        }
    }
}
