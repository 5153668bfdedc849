//! The smooth factor `L` of a kernel: a small expression tree over a fixed
//! catalog of atoms, with exact partial derivatives of any order.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Coordinates are zero-based positions in the full argument vector
/// `(x_1, …, x_l, y_1, …, y_{d-l})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "atom")]
pub enum LExpr {
    One,
    /// `sin²(π (z_i − z_j) / β)`.
    GridSin { beta: f64, i: usize, j: usize },
    /// `exp(−c z_i²)`.
    GaussBump { c: f64, i: usize },
    /// `Σ_k coeffs[k] · z_i^{2k}`.
    PolyEven { i: usize, coeffs: Vec<f64> },
    Sum(Vec<LExpr>),
    Product(Vec<LExpr>),
}

impl LExpr {
    pub fn grid_sin(beta: f64, i: usize, j: usize) -> Self {
        LExpr::GridSin { beta, i, j }
    }

    pub fn gauss(c: f64, i: usize) -> Self {
        LExpr::GaussBump { c, i }
    }

    pub fn poly(i: usize, coeffs: Vec<f64>) -> Self {
        LExpr::PolyEven { i, coeffs }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match self {
            LExpr::One => Ok(()),
            LExpr::GridSin { beta, i, j } => {
                if !(beta.is_finite() && *beta > 0.0) {
                    return bad(format!("gridsin: beta must be finite and > 0, got {beta}"));
                }
                if *i >= d || *j >= d {
                    return bad(format!("gridsin: coordinates ({i}, {j}) out of range for d={d}"));
                }
                if i == j {
                    return bad("gridsin: the two coordinates must differ".into());
                }
                Ok(())
            }
            LExpr::GaussBump { c, i } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return bad(format!("gauss: c must be finite and >= 0, got {c}"));
                }
                if *i >= d {
                    return bad(format!("gauss: coordinate {i} out of range for d={d}"));
                }
                Ok(())
            }
            LExpr::PolyEven { i, coeffs } => {
                if *i >= d {
                    return bad(format!("poly: coordinate {i} out of range for d={d}"));
                }
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return bad("poly: coefficients must be a non-empty list of finite numbers".into());
                }
                Ok(())
            }
            LExpr::Sum(v) | LExpr::Product(v) => {
                if v.is_empty() {
                    return bad("sum/product needs at least one operand".into());
                }
                v.iter().try_for_each(|e| e.validate(d))
            }
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            LExpr::One => 1.0,
            LExpr::GridSin { beta, i, j } => {
                // sin² has period 1 in u; reducing first makes lattice points exact zeros.
                let u = (z[*i] - z[*j]) / beta;
                let s = (PI * (u - u.round())).sin();
                s * s
            }
            LExpr::GaussBump { c, i } => (-c * z[*i] * z[*i]).exp(),
            LExpr::PolyEven { i, coeffs } => {
                let x2 = z[*i] * z[*i];
                coeffs.iter().rev().fold(0.0, |acc, c| acc * x2 + c)
            }
            LExpr::Sum(v) => v.iter().map(|e| e.eval(z)).sum(),
            LExpr::Product(v) => v.iter().map(|e| e.eval(z)).product(),
        }
    }

    /// First partial derivative in coordinate `k`.
    pub fn partial(&self, z: &[f64], k: usize) -> f64 {
        let mut alpha = vec![0u32; z.len()];
        alpha[k] = 1;
        self.deriv(z, &alpha)
    }

    /// Mixed partial derivative `∂^alpha L(z)`; `alpha` has one order per
    /// coordinate.
    pub fn deriv(&self, z: &[f64], alpha: &[u32]) -> f64 {
        debug_assert_eq!(z.len(), alpha.len());
        let only = |coords: &[usize]| alpha.iter().enumerate().all(|(c, &a)| a == 0 || coords.contains(&c));
        match self {
            LExpr::One => {
                if alpha.iter().all(|&a| a == 0) {
                    1.0
                } else {
                    0.0
                }
            }
            LExpr::GridSin { beta, i, j } => {
                if !only(&[*i, *j]) {
                    return 0.0;
                }
                let m = alpha[*i] + alpha[*j];
                let sign = if alpha[*j] % 2 == 1 { -1.0 } else { 1.0 };
                sign * sin2_deriv(2.0 * PI / beta, z[*i] - z[*j], m)
            }
            LExpr::GaussBump { c, i } => {
                if !only(&[*i]) {
                    return 0.0;
                }
                let x = z[*i];
                let poly = gauss_poly(*c, alpha[*i]);
                horner(&poly, x) * (-c * x * x).exp()
            }
            LExpr::PolyEven { i, coeffs } => {
                if !only(&[*i]) {
                    return 0.0;
                }
                poly_even_deriv(coeffs, z[*i], alpha[*i])
            }
            LExpr::Sum(v) => v.iter().map(|e| e.deriv(z, alpha)).sum(),
            LExpr::Product(v) => product_deriv(v, z, alpha),
        }
    }

    /// Whether `L` can depend on coordinate `c`.
    pub fn depends_on(&self, c: usize) -> bool {
        match self {
            LExpr::One => false,
            LExpr::GridSin { i, j, .. } => *i == c || *j == c,
            LExpr::GaussBump { i, c: coef } => *i == c && *coef != 0.0,
            LExpr::PolyEven { i, coeffs } => *i == c && coeffs.iter().skip(1).any(|a| *a != 0.0),
            LExpr::Sum(v) | LExpr::Product(v) => v.iter().any(|e| e.depends_on(c)),
        }
    }

    /// Leaves of the tree, left to right.
    pub fn atoms(&self) -> Vec<&LExpr> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a LExpr>) {
        match self {
            LExpr::Sum(v) | LExpr::Product(v) => v.iter().for_each(|e| e.collect_atoms(out)),
            atom => out.push(atom),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let tokens = tokenize(text);
        let mut pos = 0;
        let expr = parse_expr(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(Error::KernelParse(format!("trailing input after L expression: {:?}", &tokens[pos..])));
        }
        Ok(expr)
    }
}

/// `d^m/du^m sin²(ωu/2)` where `sin²(ωu/2) = ½ − ½ cos(ωu)`.
fn sin2_deriv(omega: f64, u: f64, m: u32) -> f64 {
    if m == 0 {
        let s = (0.5 * omega * u).sin();
        return s * s;
    }
    let t = omega * u;
    // d^m/du^m cos(ωu) = ω^m cos(ωu + mπ/2)
    let shifted = match m % 4 {
        0 => t.cos(),
        1 => -t.sin(),
        2 => -t.cos(),
        _ => t.sin(),
    };
    -0.5 * omega.powi(m as i32) * shifted
}

/// Coefficients (ascending powers of x) of `P_m` with
/// `d^m/dx^m exp(−c x²) = P_m(x) exp(−c x²)`.
fn gauss_poly(c: f64, m: u32) -> Vec<f64> {
    let mut p = vec![1.0];
    for _ in 0..m {
        let mut next = vec![0.0; p.len() + 1];
        for (k, &a) in p.iter().enumerate() {
            if k > 0 {
                next[k - 1] += k as f64 * a;
            }
            next[k + 1] -= 2.0 * c * a;
        }
        p = next;
    }
    p
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn poly_even_deriv(coeffs: &[f64], x: f64, m: u32) -> f64 {
    let m = m as usize;
    let mut total = 0.0;
    for (k, &c) in coeffs.iter().enumerate() {
        let deg = 2 * k;
        if c == 0.0 || deg < m {
            continue;
        }
        let falling: f64 = (0..m).map(|r| (deg - r) as f64).product();
        total += c * falling * x.powi((deg - m) as i32);
    }
    total
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, r| acc * (n - r) as f64 / (r + 1) as f64)
}

/// General Leibniz rule over a list of factors.
fn product_deriv(factors: &[LExpr], z: &[f64], alpha: &[u32]) -> f64 {
    match factors {
        [] => LExpr::One.deriv(z, alpha),
        [f] => f.deriv(z, alpha),
        [f, rest @ ..] => {
            let mut beta = vec![0u32; alpha.len()];
            let mut gamma = alpha.to_vec();
            let mut total = 0.0;
            loop {
                let coef: f64 = alpha.iter().zip(&beta).map(|(&a, &b)| binomial(a, b)).product();
                let left = f.deriv(z, &beta);
                if left != 0.0 {
                    total += coef * left * product_deriv(rest, z, &gamma);
                }
                // odometer over 0 ≤ beta ≤ alpha
                let mut c = 0;
                loop {
                    if c == alpha.len() {
                        return total;
                    }
                    if beta[c] < alpha[c] {
                        beta[c] += 1;
                        gamma[c] -= 1;
                        break;
                    }
                    beta[c] = 0;
                    gamma[c] = alpha[c];
                    c += 1;
                }
            }
        }
    }
}

impl fmt::Display for LExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LExpr::One => write!(f, "one"),
            LExpr::GridSin { beta, i, j } => write!(f, "(gridsin {beta} {i} {j})"),
            LExpr::GaussBump { c, i } => write!(f, "(gauss {c} {i})"),
            LExpr::PolyEven { i, coeffs } => {
                write!(f, "(poly {i}")?;
                for c in coeffs {
                    write!(f, " {c}")?;
                }
                write!(f, ")")
            }
            LExpr::Sum(v) | LExpr::Product(v) => {
                let op = if matches!(self, LExpr::Sum(_)) { "+" } else { "*" };
                write!(f, "({op}")?;
                for e in v {
                    write!(f, " {e}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn tokenize(text: &str) -> Vec<String> {
    text.replace('(', " ( ").replace(')', " ) ").split_whitespace().map(str::to_owned).collect()
}

fn parse_expr(tokens: &[String], pos: &mut usize) -> Result<LExpr> {
    let err = |m: String| Error::KernelParse(m);
    let tok = tokens.get(*pos).ok_or_else(|| err("unexpected end of L expression".into()))?;
    *pos += 1;
    match tok.as_str() {
        "one" | "1" => return Ok(LExpr::One),
        "(" => {}
        other => return Err(err(format!("unexpected token `{other}` in L expression"))),
    }
    let head = tokens.get(*pos).ok_or_else(|| err("missing operator after `(`".into()))?.clone();
    *pos += 1;
    let expr = match head.as_str() {
        "+" | "*" => {
            let mut items = Vec::new();
            while tokens.get(*pos).map(String::as_str) != Some(")") {
                if *pos >= tokens.len() {
                    return Err(err(format!("unclosed `({head}`")));
                }
                items.push(parse_expr(tokens, pos)?);
            }
            if head == "+" {
                LExpr::Sum(items)
            } else {
                LExpr::Product(items)
            }
        }
        "gridsin" => {
            let beta = number(tokens, pos)?;
            let i = index(tokens, pos)?;
            let j = index(tokens, pos)?;
            LExpr::GridSin { beta, i, j }
        }
        "gauss" => {
            let c = number(tokens, pos)?;
            let i = index(tokens, pos)?;
            LExpr::GaussBump { c, i }
        }
        "poly" => {
            let i = index(tokens, pos)?;
            let mut coeffs = Vec::new();
            while tokens.get(*pos).is_some_and(|t| t != ")") {
                coeffs.push(number(tokens, pos)?);
            }
            LExpr::PolyEven { i, coeffs }
        }
        other => return Err(err(format!("unknown L atom `{other}`"))),
    };
    match tokens.get(*pos).map(String::as_str) {
        Some(")") => {
            *pos += 1;
            Ok(expr)
        }
        _ => Err(err(format!("expected `)` to close `({head}`"))),
    }
}

fn number(tokens: &[String], pos: &mut usize) -> Result<f64> {
    let tok = tokens.get(*pos).ok_or_else(|| Error::KernelParse("expected a number".into()))?;
    *pos += 1;
    tok.parse().map_err(|_| Error::KernelParse(format!("`{tok}` is not a number")))
}

fn index(tokens: &[String], pos: &mut usize) -> Result<usize> {
    let tok = tokens.get(*pos).ok_or_else(|| Error::KernelParse("expected a coordinate index".into()))?;
    *pos += 1;
    tok.parse().map_err(|_| Error::KernelParse(format!("`{tok}` is not a coordinate index")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(e: &LExpr, z: &[f64], k: usize) -> f64 {
        let h = 1e-5;
        let mut a = z.to_vec();
        let mut b = z.to_vec();
        a[k] += h;
        b[k] -= h;
        (e.eval(&a) - e.eval(&b)) / (2.0 * h)
    }

    #[test]
    fn parse_display_round_trip() {
        let text = "(+ (* (gridsin 0.7 0 1) (gauss 0.5 1)) (poly 0 1 -0.25 0.125) one)";
        let e = LExpr::parse(text).unwrap();
        assert_eq!(e.to_string(), text);
        assert_eq!(LExpr::parse(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "(gridsin 1 0)", "(foo 1)", "(+ one", "one one", "(gauss x 0)"] {
            assert!(LExpr::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn first_partials_match_finite_differences() {
        let e = LExpr::parse("(+ (* (gridsin 0.7 0 1) (gauss 0.5 1)) (* (poly 0 1 -0.25 0.125) (gauss 0.3 0)))").unwrap();
        let z = [0.37, -1.21];
        for k in 0..2 {
            let a = e.partial(&z, k);
            let b = fd(&e, &z, k);
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn higher_derivatives_match_finite_differences() {
        let e = LExpr::parse("(* (gridsin 1.3 0 1) (gauss 0.4 0) (poly 1 0.5 1 0.2))").unwrap();
        let z = [0.6, 0.9];
        let h = 1e-4;
        // ∂_0 ∂_1 via differences of analytic first partials
        let up = e.partial(&[z[0], z[1] + h], 0);
        let dn = e.partial(&[z[0], z[1] - h], 0);
        let fd01 = (up - dn) / (2.0 * h);
        let an = e.deriv(&z, &[1, 1]);
        assert!((an - fd01).abs() < 1e-6 * (1.0 + an.abs()), "{an} vs {fd01}");
        // ∂_0^3 via differences of analytic second partials
        let up = e.deriv(&[z[0] + h, z[1]], &[2, 0]);
        let dn = e.deriv(&[z[0] - h, z[1]], &[2, 0]);
        let an = e.deriv(&z, &[3, 0]);
        assert!((an - (up - dn) / (2.0 * h)).abs() < 1e-5 * (1.0 + an.abs()));
    }

    #[test]
    fn gauss_polynomials() {
        // d/dx e^{-cx²} = −2cx e^{-cx²}; d²: (4c²x² − 2c)
        assert_eq!(gauss_poly(1.5, 1), vec![0.0, -3.0]);
        assert_eq!(gauss_poly(1.5, 2), vec![-3.0, 0.0, 9.0]);
    }

    #[test]
    fn dependence() {
        let e = LExpr::parse("(* (gridsin 1 0 2) (poly 1 3))").unwrap();
        assert!(e.depends_on(0) && e.depends_on(2));
        assert!(!e.depends_on(1));
        assert!(!LExpr::gauss(0.0, 0).depends_on(0));
    }

    #[test]
    fn validation() {
        assert!(LExpr::grid_sin(0.0, 0, 1).validate(2).is_err());
        assert!(LExpr::grid_sin(1.0, 0, 0).validate(2).is_err());
        assert!(LExpr::grid_sin(1.0, 0, 2).validate(2).is_err());
        assert!(LExpr::poly(0, vec![]).validate(1).is_err());
        assert!(LExpr::Product(vec![]).validate(1).is_err());
        assert!(LExpr::grid_sin(1.0, 0, 1).validate(2).is_ok());
    }
}
