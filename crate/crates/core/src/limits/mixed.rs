//! Mixed-regime limits. With the separable expansion
//! `H = Σ_τ c_τ ∏_c h_{τ,c}` every Gaussian and time average factorizes, so
//! the limit, `Ṽ_k` and the field covariance `C(y, y′)` reduce to
//! one-dimensional integrals.

use nalgebra::DMatrix;

use super::{jumps_upto, Contribution, CondVariance, Evaluation, JumpVarTerm, LimitValue, TimeWeights};
use crate::kernels::{abs_moment, pow_abs, KernelSpec, SepTerm};
use crate::kernels::{Factor, RhoMethod};
use crate::quad::{normal_expectation, Tolerance};
use crate::sim::{JumpRecord, SamplePath};
use crate::summation::pairwise_sum;
use crate::{Error, Result};

const QUAD_TOL: f64 = 1e-11;

/// Everything in the mixed limit that depends on σ but not on the jumps.
#[derive(Debug, Clone)]
pub struct MixedParts<'a> {
    pub k: &'a KernelSpec,
    pub t: f64,
    terms: Vec<SepTerm>,
    /// `∏_{c<l} ∫_0^t E[h_{τ,c}(σ_u U)] du` per term.
    xprod: Vec<f64>,
    /// Covariance of the field coefficients: `C(y, y′) = a(y)ᵀ M a(y′)`.
    field: DMatrix<f64>,
}

fn expect_one(k: &KernelSpec, c: usize, g: &Factor, sigma: f64, eval: Evaluation) -> Result<f64> {
    crate::kernels::x_expectation(k, c, g, sigma, eval == Evaluation::Generic)
}

fn expect_pair(k: &KernelSpec, a: (usize, &Factor), b: (usize, &Factor), sigma: f64, eval: Evaluation) -> Result<f64> {
    let e = k.exponent(a.0) + k.exponent(b.0);
    if a.1.is_one() && b.1.is_one() && eval == Evaluation::Auto {
        return Ok(abs_moment(e) * pow_abs(sigma, e));
    }
    let f = |u: f64| k.coord_fn(a.0, a.1, u) * k.coord_fn(b.0, b.1, u);
    Ok(normal_expectation(f, sigma, Tolerance::rel(QUAD_TOL))?.value)
}

impl<'a> MixedParts<'a> {
    pub fn new(path: &SamplePath, k: &'a KernelSpec, t: f64, eval: Evaluation) -> Result<Self> {
        let tw = TimeWeights::new(path, t)?;
        Self::from_weights(&tw, k, t, eval)
    }

    pub fn from_weights(tw: &TimeWeights, k: &'a KernelSpec, t: f64, eval: Evaluation) -> Result<Self> {
        let terms = k.separable();
        let l = k.l;
        // I[τ][c] = ∫ E[h_{τ,c}(σ_u U)] du
        let mut xint = Vec::with_capacity(terms.len());
        for term in &terms {
            let mut row = Vec::with_capacity(l);
            for c in 0..l {
                row.push(tw.integrate(|s| expect_one(k, c, &term.factors[c], s, eval))?);
            }
            xint.push(row);
        }
        let xprod: Vec<f64> = xint.iter().map(|r| r.iter().product()).collect();

        // units (τ, i) with B_{τ,i} = ∏_{m≠i} I[τ][m]
        let units: Vec<(usize, usize, f64)> = (0..terms.len())
            .flat_map(|tau| (0..l).map(move |i| (tau, i)))
            .map(|(tau, i)| {
                let b: f64 = (0..l).filter(|&m| m != i).map(|m| xint[tau][m]).product();
                (tau, i, b)
            })
            .collect();
        let mut field = DMatrix::zeros(terms.len(), terms.len());
        for (ua, &(ta, ia, ba)) in units.iter().enumerate() {
            for &(tb, ib, bb) in &units[ua..] {
                if ba == 0.0 || bb == 0.0 {
                    continue;
                }
                let ga = &terms[ta].factors[ia];
                let gb = &terms[tb].factors[ib];
                let kab = tw.integrate(|s| {
                    let joint = expect_pair(k, (ia, ga), (ib, gb), s, eval)?;
                    let ea = expect_one(k, ia, ga, s, eval)?;
                    let eb = expect_one(k, ib, gb, s, eval)?;
                    Ok(joint - ea * eb)
                })?;
                let v = ba * bb * kab;
                field[(ta, tb)] += v;
                if (ta, ia) != (tb, ib) {
                    field[(tb, ta)] += v;
                }
            }
        }
        Ok(MixedParts { k, t, terms, xprod, field })
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn field_coefficients(&self) -> &DMatrix<f64> {
        &self.field
    }

    /// `a_τ(y) = c_τ ∏_j |y_j|^{q_j} g_{τ,l+j}(y_j)`.
    pub fn y_weights(&self, y: &[f64]) -> Vec<f64> {
        let l = self.k.l;
        self.terms
            .iter()
            .map(|term| {
                term.coef * y.iter().enumerate().map(|(j, &v)| self.k.coord_fn(l + j, &term.factors[l + j], v)).product::<f64>()
            })
            .collect()
    }

    /// `C(y, y′)`.
    pub fn cov(&self, y: &[f64], y2: &[f64]) -> f64 {
        let a = DMatrix::from_row_slice(1, self.terms.len(), &self.y_weights(y));
        let b = DMatrix::from_column_slice(self.terms.len(), 1, &self.y_weights(y2));
        (a * &self.field * b)[(0, 0)]
    }

    /// `[C(y_a, y_b)]` over a list of y-tuples.
    pub fn cov_matrix(&self, ys: &[Vec<f64>]) -> DMatrix<f64> {
        let rows: Vec<f64> = ys.iter().flat_map(|y| self.y_weights(y)).collect();
        let a = DMatrix::from_row_slice(ys.len(), self.terms.len(), &rows);
        let mut c = &a * &self.field * a.transpose();
        // exact symmetry
        for i in 0..ys.len() {
            for j in 0..i {
                let m = 0.5 * (c[(i, j)] + c[(j, i)]);
                c[(i, j)] = m;
                c[(j, i)] = m;
            }
        }
        c
    }

    /// `S[τ][j] = Σ_{jumps} |ΔX|^{q_j} g_{τ,l+j}(ΔX)`.
    fn jump_sums(&self, jumps: &[(usize, &JumpRecord)]) -> Vec<Vec<f64>> {
        let l = self.k.l;
        self.terms
            .iter()
            .map(|term| {
                (l..self.k.d)
                    .map(|c| pairwise_sum(&jumps.iter().map(|(_, j)| self.k.coord_fn(c, &term.factors[c], j.size)).collect::<Vec<_>>()))
                    .collect()
            })
            .collect()
    }

    /// `A_τ = Σ_{tuples s} a_τ(ΔX_s)`, the weights contracting the field.
    pub fn aggregate_weights(&self, jumps: &[(usize, &JumpRecord)]) -> Vec<f64> {
        let sums = self.jump_sums(jumps);
        self.terms.iter().zip(&sums).map(|(term, s)| term.coef * s.iter().product::<f64>()).collect()
    }

    pub fn limit(&self, jumps: &[(usize, &JumpRecord)]) -> LimitValue {
        let k = self.k;
        if k.d == k.l {
            let v: f64 = self.terms.iter().zip(&self.xprod).map(|(term, x)| term.coef * x).sum();
            let c = Contribution { jump_index: None, time: None, size: None, value: v };
            return LimitValue::from_contributions(k.regime, vec![c]);
        }
        let sums = self.jump_sums(jumps);
        let contributions = jumps
            .iter()
            .map(|&(idx, j)| {
                let value = self
                    .terms
                    .iter()
                    .zip(&self.xprod)
                    .zip(&sums)
                    .map(|((term, x), s)| {
                        term.coef * x * k.coord_fn(k.l, &term.factors[k.l], j.size) * s[1..].iter().product::<f64>()
                    })
                    .sum();
                Contribution { jump_index: Some(idx), time: Some(j.time), size: Some(j.size), value }
            })
            .collect();
        LimitValue::from_contributions(k.regime, contributions)
    }

    /// `Ṽ_k(y)` for a y-coordinate `coord ≥ l`.
    pub fn vtilde(&self, coord: usize, y: f64, jumps: &[(usize, &JumpRecord)]) -> Result<f64> {
        let k = self.k;
        if coord < k.l || coord >= k.d {
            return Err(Error::InvalidArgument(format!("vtilde: coordinate {coord} must be in [l, d)")));
        }
        let sums = self.jump_sums(jumps);
        let mut total = 0.0;
        for ((term, x), s) in self.terms.iter().zip(&self.xprod).zip(&sums) {
            let mut v = term.coef * x * k.coord_fn_deriv(coord, &term.factors[coord], y)?;
            for (j, sj) in s.iter().enumerate() {
                if k.l + j != coord {
                    v *= sj;
                }
            }
            total += v;
        }
        Ok(total)
    }

    pub fn cond_var(&self, jumps: &[(usize, &JumpRecord)]) -> Result<CondVariance> {
        let k = self.k;
        let mut per_jump = Vec::with_capacity(jumps.len());
        if k.d > k.l {
            for &(idx, j) in jumps {
                let mut s = 0.0;
                for coord in k.l..k.d {
                    s += self.vtilde(coord, j.size, jumps)?;
                }
                let value = s * s * j.sigma_pre * j.sigma_pre;
                per_jump.push(JumpVarTerm { jump_index: idx, time: j.time, size: j.size, derivative_sum: s, value });
            }
        }
        let jump_term = pairwise_sum(&per_jump.iter().map(|p| p.value).collect::<Vec<_>>());
        let w = self.aggregate_weights(jumps);
        let a = DMatrix::from_column_slice(w.len(), 1, &w);
        let field_term = (a.transpose() * &self.field * &a)[(0, 0)];
        Ok(CondVariance { total: jump_term + field_term, jump_term, field_term, per_jump })
    }
}

/// `Y(H, X, l)_t = Σ_{s ∈ [0,t]^{d−l}} ∫_{[0,t]^l} ρ_H(σ_u, ΔX_s) du`.
pub fn mixed_limit(path: &SamplePath, k: &KernelSpec, t: f64) -> Result<LimitValue> {
    mixed_limit_with(path, k, t, Evaluation::Auto)
}

pub fn mixed_limit_with(path: &SamplePath, k: &KernelSpec, t: f64, eval: Evaluation) -> Result<LimitValue> {
    let jumps = jumps_upto(path, t)?;
    Ok(MixedParts::new(path, k, t, eval)?.limit(&jumps))
}

pub fn vtilde(path: &SamplePath, k: &KernelSpec, coord: usize, y: f64, t: f64) -> Result<f64> {
    let jumps = jumps_upto(path, t)?;
    MixedParts::new(path, k, t, Evaluation::Auto)?.vtilde(coord, y, &jumps)
}

pub fn cov_c(path: &SamplePath, k: &KernelSpec, y: &[f64], y2: &[f64], t: f64) -> Result<f64> {
    if y.len() != k.d - k.l || y2.len() != k.d - k.l {
        return Err(Error::InvalidArgument(format!("cov_c: y-tuples must have length d-l={}", k.d - k.l)));
    }
    Ok(MixedParts::new(path, k, t, Evaluation::Auto)?.cov(y, y2))
}

pub fn cond_var_mixed(path: &SamplePath, k: &KernelSpec, t: f64) -> Result<CondVariance> {
    let jumps = jumps_upto(path, t)?;
    MixedParts::new(path, k, t, Evaluation::Auto)?.cond_var(&jumps)
}

/// Time-integrated `ρ_{∂_j H}` by direct numerical smoothing, for checks.
pub fn integrated_rho_partial(path: &SamplePath, k: &KernelSpec, j: usize, y: &[f64], t: f64, method: RhoMethod) -> Result<f64> {
    let tw = TimeWeights::new(path, t)?;
    if k.l > 1 {
        return Err(Error::InvalidArgument("integrated_rho_partial supports l <= 1".into()));
    }
    tw.integrate(|s| {
        let sig = vec![s; k.l];
        Ok(crate::kernels::rho_with(k, &sig, y, crate::kernels::Integrand::Partial(j), method)?.value)
    })
}
