//! Exact expansion of a catalog `L` into a sum of products of
//! one-coordinate functions, `L(z) = Σ_τ c_τ ∏_k g_{τ,k}(z_k)`.

use std::f64::consts::PI;

use super::LExpr;

/// One-coordinate building block. The trigonometric atoms take
/// `a = h x − φ`: `SinSq = sin² a`, `CosSq = cos² a`, `SinCos = sin a cos a`.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom1 {
    SinSq { h: f64, phase: f64 },
    CosSq { h: f64, phase: f64 },
    SinCos { h: f64, phase: f64 },
    Gauss(f64),
    /// Polynomial in `x²`, ascending coefficients.
    Poly(Vec<f64>),
}

impl Atom1 {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Atom1::SinSq { h, phase } => {
                let s = (h * x - phase).sin();
                s * s
            }
            Atom1::CosSq { h, phase } => {
                let c = (h * x - phase).cos();
                c * c
            }
            Atom1::SinCos { h, phase } => {
                let (s, c) = (h * x - phase).sin_cos();
                s * c
            }
            Atom1::Gauss(c) => (-c * x * x).exp(),
            Atom1::Poly(a) => {
                let x2 = x * x;
                a.iter().rev().fold(0.0, |acc, c| acc * x2 + c)
            }
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            Atom1::SinSq { h, phase } => h * (2.0 * (h * x - phase)).sin(),
            Atom1::CosSq { h, phase } => -h * (2.0 * (h * x - phase)).sin(),
            Atom1::SinCos { h, phase } => h * (2.0 * (h * x - phase)).cos(),
            Atom1::Gauss(c) => -2.0 * c * x * (-c * x * x).exp(),
            Atom1::Poly(a) => {
                let x2 = x * x;
                // d/dx Σ a_k x^{2k} = x Σ_{k≥1} 2k a_k x^{2(k-1)}
                let inner = a.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, c)| acc * x2 + 2.0 * k as f64 * c);
                x * inner
            }
        }
    }

    /// `Some(true)` for even, `Some(false)` for odd, `None` otherwise.
    fn parity(&self) -> Option<bool> {
        match self {
            Atom1::SinSq { phase, .. } | Atom1::CosSq { phase, .. } => (*phase == 0.0).then_some(true),
            Atom1::SinCos { phase, .. } => (*phase == 0.0).then_some(false),
            Atom1::Gauss(_) | Atom1::Poly(_) => Some(true),
        }
    }
}

/// Product of one-dimensional atoms; the empty product is 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Factor(pub Vec<Atom1>);

impl Factor {
    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().map(|a| a.eval(x)).product()
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let mut total = 0.0;
        for (k, a) in self.0.iter().enumerate() {
            let mut term = a.deriv(x);
            for (m, b) in self.0.iter().enumerate() {
                if m != k {
                    term *= b.eval(x);
                }
            }
            total += term;
        }
        total
    }

    /// Even in `x` (so `E[|σU|^e g(σU)]` needs only the positive half-line).
    pub fn is_even(&self) -> bool {
        let mut even = true;
        for a in &self.0 {
            match a.parity() {
                Some(e) => even ^= !e,
                None => return false,
            }
        }
        even
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SepTerm {
    pub coef: f64,
    pub factors: Vec<Factor>,
}

impl SepTerm {
    fn one(d: usize) -> Self {
        SepTerm { coef: 1.0, factors: vec![Factor::default(); d] }
    }

    fn with(coef: f64, d: usize, parts: &[(usize, Atom1)]) -> Self {
        let mut t = SepTerm { coef, factors: vec![Factor::default(); d] };
        for (c, a) in parts {
            t.factors[*c].0.push(a.clone());
        }
        t
    }

    fn times(&self, other: &SepTerm) -> SepTerm {
        let factors = self
            .factors
            .iter()
            .zip(&other.factors)
            .map(|(a, b)| Factor(a.0.iter().chain(&b.0).cloned().collect()))
            .collect();
        SepTerm { coef: self.coef * other.coef, factors }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.coef * self.factors.iter().zip(z).map(|(f, &x)| f.eval(x)).product::<f64>()
    }
}

/// Expansion of `e` on `d` coordinates. Every catalog expression expands
/// exactly; products multiply out term by term.
pub fn expand(e: &LExpr, d: usize) -> Vec<SepTerm> {
    expand_phased(e, d, &|_, _, _| 0.0)
}

/// As [`expand`], with the angle of each `gridsin β i j` shifted by
/// `phase(β, i, j)`. Any phase is exact; a phase near the weighted circular
/// mean of the data keeps near-lattice sums free of cancellation.
pub fn expand_phased(e: &LExpr, d: usize, phase: &dyn Fn(f64, usize, usize) -> f64) -> Vec<SepTerm> {
    let terms = match e {
        LExpr::One => vec![SepTerm::one(d)],
        LExpr::GridSin { beta, i, j } => {
            // With θ = πz/β − φ: sin²(θ_a − θ_b) = s_a²c_b² + c_a²s_b² − 2(s_a c_a)(s_b c_b).
            // Unlike ½ − ½cos·cos − ½sin·sin this does not cancel when all angles align.
            let h = PI / beta;
            let phase = phase(*beta, *i, *j);
            let (ss, cc, sc) = (Atom1::SinSq { h, phase }, Atom1::CosSq { h, phase }, Atom1::SinCos { h, phase });
            vec![
                SepTerm::with(1.0, d, &[(*i, ss.clone()), (*j, cc.clone())]),
                SepTerm::with(1.0, d, &[(*i, cc), (*j, ss)]),
                SepTerm::with(-2.0, d, &[(*i, sc.clone()), (*j, sc)]),
            ]
        }
        LExpr::GaussBump { c, i } => {
            if *c == 0.0 {
                vec![SepTerm::one(d)]
            } else {
                vec![SepTerm::with(1.0, d, &[(*i, Atom1::Gauss(*c))])]
            }
        }
        LExpr::PolyEven { i, coeffs } => {
            if coeffs.iter().skip(1).all(|c| *c == 0.0) {
                vec![SepTerm::with(coeffs[0], d, &[])]
            } else {
                vec![SepTerm::with(1.0, d, &[(*i, Atom1::Poly(coeffs.clone()))])]
            }
        }
        LExpr::Sum(v) => v.iter().flat_map(|x| expand_phased(x, d, phase)).collect(),
        LExpr::Product(v) => {
            let mut acc = vec![SepTerm::one(d)];
            for x in v {
                let next = expand_phased(x, d, phase);
                acc = acc.iter().flat_map(|a| next.iter().map(move |b| a.times(b))).collect();
            }
            acc
        }
    };
    terms.into_iter().filter(|t| t.coef != 0.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn catalog() -> Vec<LExpr> {
        [
            "one",
            "(gridsin 1 0 1)",
            "(gridsin 0.37 1 2)",
            "(gauss 0.8 2)",
            "(poly 0 1 -0.5 0.25)",
            "(+ (gridsin 0.6 0 2) (gauss 1.5 1))",
            "(* (gridsin 0.9 0 1) (gridsin 1.7 1 2) (poly 2 2 1))",
            "(* (+ one (gauss 0.3 0)) (gridsin 2 2 0))",
        ]
        .iter()
        .map(|s| LExpr::parse(s).unwrap())
        .collect()
    }

    proptest! {
        #[test]
        fn expansion_is_exact(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64) {
            let z = [a, b, c];
            for e in catalog() {
                let direct = e.eval(&z);
                let sep: f64 = expand(&e, 3).iter().map(|t| t.eval(&z)).sum();
                prop_assert!((direct - sep).abs() <= 1e-12 * (1.0 + direct.abs()), "{e}: {direct} vs {sep}");
            }
        }

        #[test]
        fn factor_derivative(x in -2.0..2.0f64) {
            let f = Factor(vec![
                Atom1::CosSq { h: 1.3, phase: 0.2 },
                Atom1::Gauss(0.7),
                Atom1::Poly(vec![1.0, 0.5, -0.2]),
                Atom1::SinCos { h: 2.0, phase: -0.4 },
                Atom1::SinSq { h: 0.6, phase: 1.0 },
            ]);
            let h = 1e-5;
            let fd = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
            prop_assert!((f.deriv(x) - fd).abs() < 1e-7 * (1.0 + fd.abs()));
        }
    }

    proptest! {
        #[test]
        fn phased_expansion_is_exact(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64, phi in -4.0..4.0f64) {
            let z = [a, b, c];
            for e in catalog() {
                let direct = e.eval(&z);
                let sep: f64 = expand_phased(&e, 3, &|beta, i, _| phi * beta + i as f64).iter().map(|t| t.eval(&z)).sum();
                prop_assert!((direct - sep).abs() <= 1e-12 * (1.0 + direct.abs()), "{e}: {direct} vs {sep}");
            }
        }
    }

    #[test]
    fn parity() {
        let even = Factor(vec![Atom1::SinCos { h: 1.0, phase: 0.0 }, Atom1::SinCos { h: 2.0, phase: 0.0 }, Atom1::Gauss(1.0)]);
        assert!(even.is_even());
        assert!(!Factor(vec![Atom1::SinCos { h: 1.0, phase: 0.0 }]).is_even());
        assert!(!Factor(vec![Atom1::SinSq { h: 1.0, phase: 0.3 }]).is_even());
        assert!(Factor::default().is_even());
    }

    #[test]
    fn grid_sin_has_three_terms() {
        assert_eq!(expand(&LExpr::grid_sin(1.0, 0, 1), 2).len(), 3);
    }
}
