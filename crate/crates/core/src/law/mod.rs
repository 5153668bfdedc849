//! Draws from the conditionally Gaussian limit laws, built on the
//! extension variables `κ_k ~ U(0,1)`, `ψ_{k±} ~ N(0,1)` attached to each jump.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::kernels::KernelSpec;
use crate::limits::{for_each_tuple, jumps_upto, Evaluation, MixedParts, TUPLE_BUDGET};
use crate::rng::{derive_tagged, stream};
use crate::sim::SamplePath;
use crate::summation::pairwise_sum;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AugDraw {
    pub kappa: f64,
    pub psi_minus: f64,
    pub psi_plus: f64,
    pub r_minus: f64,
    pub r_plus: f64,
    pub r: f64,
}

/// One draw of the extension variables for every recorded jump of a path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpAugmentation {
    pub seed: u64,
    pub draws: Vec<AugDraw>,
}

pub fn augment(path: &SamplePath, seed: u64) -> JumpAugmentation {
    let mut rng = stream(derive_tagged(seed, "augment"));
    let draws = path
        .jumps
        .iter()
        .map(|j| {
            let kappa = loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break u;
                }
            };
            let psi_minus: f64 = rng.sample(StandardNormal);
            let psi_plus: f64 = rng.sample(StandardNormal);
            let r_minus = kappa.sqrt() * j.sigma_pre * psi_minus;
            let r_plus = (1.0 - kappa).sqrt() * j.sigma_post * psi_plus;
            AugDraw { kappa, psi_minus, psi_plus, r_minus, r_plus, r: r_minus + r_plus }
        })
        .collect();
    JumpAugmentation { seed, draws }
}

#[derive(Debug, Clone, Serialize)]
pub struct DrawTerm {
    /// Jump whose `R` multiplies this term; `None` for the Gaussian field.
    pub jump_index: Option<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitDraw {
    pub value: f64,
    pub jump_part: f64,
    pub field_part: f64,
    pub terms: Vec<DrawTerm>,
    pub aug_seed: u64,
}

impl LimitDraw {
    fn assemble(coefs: &[(usize, f64)], aug: &JumpAugmentation, field_part: f64) -> Result<Self> {
        let mut terms = Vec::with_capacity(coefs.len() + 1);
        for &(idx, c) in coefs {
            let r = aug
                .draws
                .get(idx)
                .ok_or_else(|| Error::InvalidArgument(format!("augmentation has no entry for jump {idx}")))?
                .r;
            terms.push(DrawTerm { jump_index: Some(idx), value: c * r });
        }
        let jump_part = pairwise_sum(&terms.iter().map(|t| t.value).collect::<Vec<_>>());
        terms.push(DrawTerm { jump_index: None, value: field_part });
        let value = pairwise_sum(&terms.iter().map(|t| t.value).collect::<Vec<_>>());
        Ok(LimitDraw { value, jump_part, field_part, terms, aug_seed: aug.seed })
    }
}

/// `U(H, X, l)_t = t^{d−l} Σ_{k_1…k_l} Σ_j ∂_j H(ΔX_{T_{k_1}}, …, ΔX_{T_{k_l}}, 0) R_{k_j}`,
/// collected as `Σ_p c_p R_p`.
#[derive(Debug, Clone)]
pub struct JumpLimitSampler {
    coefs: Vec<(usize, f64)>,
}

impl JumpLimitSampler {
    pub fn new(path: &SamplePath, k: &KernelSpec, t: f64) -> Result<Self> {
        Self::restricted(path, k, t, None)
    }

    /// Only tuples drawn from `subset` (jump indices) enter the sum.
    pub fn restricted(path: &SamplePath, k: &KernelSpec, t: f64, subset: Option<&[usize]>) -> Result<Self> {
        if k.l == 0 {
            return Err(Error::InvalidArgument("jump limit law requires 1 <= l <= d".into()));
        }
        let mut jumps = jumps_upto(path, t)?;
        if let Some(s) = subset {
            jumps.retain(|(idx, _)| s.contains(idx));
        }
        let needed = (jumps.len() as f64).powi(k.l as i32);
        if needed > TUPLE_BUDGET {
            return Err(Error::Budget { needed, limit: TUPLE_BUDGET });
        }
        let scale = t.powi((k.d - k.l) as i32);
        let mut acc: Vec<Vec<f64>> = vec![Vec::new(); jumps.len()];
        let mut z = vec![0.0; k.d];
        for_each_tuple(jumps.len(), k.l, |tuple| {
            for (c, &i) in tuple.iter().enumerate() {
                z[c] = jumps[i].1.size;
            }
            for (j, &i) in tuple.iter().enumerate() {
                acc[i].push(k.partial_h(j, &z)?);
            }
            Ok(())
        })?;
        let coefs = jumps.iter().zip(acc).map(|((idx, _), v)| (*idx, scale * pairwise_sum(&v))).collect();
        Ok(JumpLimitSampler { coefs })
    }

    /// `(jump index, c_p)`.
    pub fn coefficients(&self) -> &[(usize, f64)] {
        &self.coefs
    }

    /// `Var(U | F) = Σ_p c_p² E[R_p²]` with `E[R_p²] = ½(σ_{p−}² + σ_p²)`.
    pub fn variance(&self, path: &SamplePath) -> f64 {
        let v: Vec<f64> = self
            .coefs
            .iter()
            .map(|&(i, c)| {
                let j = &path.jumps[i];
                c * c * 0.5 * (j.sigma_pre * j.sigma_pre + j.sigma_post * j.sigma_post)
            })
            .collect();
        pairwise_sum(&v)
    }

    pub fn draw(&self, aug: &JumpAugmentation) -> Result<LimitDraw> {
        LimitDraw::assemble(&self.coefs, aug, 0.0)
    }
}

pub fn sample_u_jump(path: &SamplePath, k: &KernelSpec, t: f64, aug: &JumpAugmentation) -> Result<LimitDraw> {
    JumpLimitSampler::new(path, k, t)?.draw(aug)
}

/// Indices of the `m` largest jumps by `|ΔX|` up to `t`; ties go to the earlier jump.
pub fn largest_jumps(path: &SamplePath, t: f64, m: usize) -> Result<Vec<usize>> {
    let mut jumps = jumps_upto(path, t)?;
    jumps.sort_by(|a, b| b.1.size.abs().total_cmp(&a.1.size.abs()).then(a.0.cmp(&b.0)));
    Ok(jumps.into_iter().take(m).map(|(i, _)| i).collect())
}

/// The jump-case limit restricted to the `m` largest jumps.
pub fn truncated_z(path: &SamplePath, k: &KernelSpec, t: f64, m: usize, aug: &JumpAugmentation) -> Result<f64> {
    let subset = largest_jumps(path, t, m)?;
    Ok(JumpLimitSampler::restricted(path, k, t, Some(&subset))?.draw(aug)?.value)
}

/// Distinct y-tuples above this count switch the field draw to the
/// coefficient representation `Σ_τ A_τ ξ_τ`.
pub const FIELD_TUPLE_LIMIT: usize = 400;

#[derive(Debug, Clone)]
enum FieldFactor {
    None,
    /// Cholesky factor of `[C(y_a, y_b)]` with tuple multiplicities.
    Tuples { chol: DMatrix<f64>, mult: Vec<f64> },
    /// Cholesky factor of the coefficient covariance and the aggregate weights.
    Coefficients { chol: DMatrix<f64>, weights: Vec<f64> },
}

/// `V′(H, X, l)_t = Σ_k (Σ_{j>l} ∫ρ_{∂_j H} du R_{k_j} + 𝕌_t(H, ΔX_{T_k}))`.
#[derive(Debug, Clone)]
pub struct MixedLimitSampler {
    coefs: Vec<(usize, f64)>,
    field: FieldFactor,
    pub jitter: f64,
}

impl MixedLimitSampler {
    /// `with_field = false` drops the Gaussian field term (diagnostic).
    pub fn new(path: &SamplePath, k: &KernelSpec, t: f64, with_field: bool) -> Result<Self> {
        let parts = MixedParts::new(path, k, t, Evaluation::Auto)?;
        let jumps = jumps_upto(path, t)?;
        let mut coefs = Vec::new();
        if k.d > k.l {
            for &(idx, j) in &jumps {
                let mut c = 0.0;
                for coord in k.l..k.d {
                    c += parts.vtilde(coord, j.size, &jumps)?;
                }
                coefs.push((idx, c));
            }
        }
        let mut jitter = 0.0;
        let field = if !with_field || k.l == 0 {
            FieldFactor::None
        } else {
            let m = k.d - k.l;
            let needed = (jumps.len() as f64).powi(m as i32);
            let mut ys: Vec<Vec<f64>> = Vec::new();
            let mut mult: Vec<f64> = Vec::new();
            if needed <= TUPLE_BUDGET {
                let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
                for_each_tuple(jumps.len(), m, |tuple| {
                    let y: Vec<f64> = tuple.iter().map(|&i| jumps[i].1.size).collect();
                    let key: Vec<u64> = y.iter().map(|v| v.to_bits()).collect();
                    match seen.get(&key) {
                        Some(&at) => mult[at] += 1.0,
                        None => {
                            seen.insert(key, ys.len());
                            ys.push(y);
                            mult.push(1.0);
                        }
                    }
                    Ok(())
                })?;
            }
            if needed <= TUPLE_BUDGET && ys.len() <= FIELD_TUPLE_LIMIT {
                if ys.is_empty() {
                    FieldFactor::None
                } else {
                    let c = parts.cov_matrix(&ys);
                    match factor(c)? {
                        Some((chol, j)) => {
                            jitter = j;
                            FieldFactor::Tuples { chol, mult }
                        }
                        None => FieldFactor::None,
                    }
                }
            } else {
                let weights = parts.aggregate_weights(&jumps);
                match factor(parts.field_coefficients().clone())? {
                    Some((chol, j)) => {
                        jitter = j;
                        FieldFactor::Coefficients { chol, weights }
                    }
                    None => FieldFactor::None,
                }
            }
        };
        Ok(MixedLimitSampler { coefs, field, jitter })
    }

    pub fn coefficients(&self) -> &[(usize, f64)] {
        &self.coefs
    }

    pub fn draw(&self, aug: &JumpAugmentation, seed: u64) -> Result<LimitDraw> {
        let field_part = match &self.field {
            FieldFactor::None => 0.0,
            FieldFactor::Tuples { chol, mult } => {
                let g = normals(seed, chol.nrows());
                let f = chol * g;
                pairwise_sum(&f.iter().zip(mult).map(|(a, m)| a * m).collect::<Vec<_>>())
            }
            FieldFactor::Coefficients { chol, weights } => {
                let g = normals(seed, chol.nrows());
                let xi = chol * g;
                pairwise_sum(&xi.iter().zip(weights).map(|(a, w)| a * w).collect::<Vec<_>>())
            }
        };
        LimitDraw::assemble(&self.coefs, aug, field_part)
    }
}

pub fn sample_v_mixed(path: &SamplePath, k: &KernelSpec, t: f64, aug: &JumpAugmentation, seed: u64) -> Result<LimitDraw> {
    MixedLimitSampler::new(path, k, t, true)?.draw(aug, seed)
}

fn normals(seed: u64, n: usize) -> DVector<f64> {
    let mut rng = stream(derive_tagged(seed, "field"));
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Lower Cholesky factor of `c + jitter·I`, with jitter `10^{-10}·trace`
/// escalated by one decade up to three times. `None` for a zero matrix.
fn factor(c: DMatrix<f64>) -> Result<Option<(DMatrix<f64>, f64)>> {
    let trace = c.trace();
    if trace == 0.0 && c.iter().all(|v| *v == 0.0) {
        return Ok(None);
    }
    let n = c.nrows();
    for decade in 0..4 {
        let jitter = 1e-10 * 10f64.powi(decade) * trace.abs();
        let m = &c + DMatrix::identity(n, n) * jitter;
        if let Some(ch) = Cholesky::new(m) {
            return Ok(Some((ch.l(), jitter)));
        }
    }
    let min = SymmetricEigen::new(c).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Err(Error::Cholesky { min_eigenvalue: min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Regime;
    use crate::limits::{cond_var_jump, cond_var_mixed};
    use crate::sim::JumpRecord;

    fn path(sigma: f64, sizes: &[f64]) -> SamplePath {
        let n = 16;
        SamplePath {
            horizon: 1.0,
            n,
            seed: 0,
            x0: 0.0,
            drift: 0.0,
            x_grid: vec![0.0; 17],
            sigma_grid: vec![sigma; 17],
            w_increments: vec![0.0; 16],
            jumps: sizes
                .iter()
                .enumerate()
                .map(|(i, &s)| JumpRecord {
                    time: (i as f64 + 0.5) / sizes.len() as f64,
                    size: s,
                    sigma_pre: sigma,
                    sigma_post: sigma,
                    interval_index: 1,
                    w_partial: 0.0,
                })
                .collect(),
            clamp_count: 0,
        }
    }

    #[test]
    fn augmentation_identities() {
        let p = path(0.7, &[1.0, -0.5, 2.0]);
        let a = augment(&p, 9);
        assert_eq!(a.draws.len(), 3);
        for d in &a.draws {
            assert_eq!(d.r, d.r_minus + d.r_plus);
            assert!(d.kappa > 0.0 && d.kappa < 1.0);
        }
        assert_eq!(augment(&p, 9), a);
        assert_ne!(augment(&p, 10), a);
        assert!(augment(&path(1.0, &[]), 1).draws.is_empty());
    }

    #[test]
    fn one_jump_quartic() {
        let p = path(1.0, &[-1.5]);
        let k = KernelSpec::power(vec![4.0], vec![], Regime::JumpClt).unwrap();
        let aug = augment(&p, 3);
        let d = sample_u_jump(&p, &k, 1.0, &aug).unwrap();
        let want = 4.0 * -(1.5f64.powi(3)) * aug.draws[0].r;
        assert!((d.value - want).abs() < 1e-14);
        assert_eq!(sample_u_jump(&path(1.0, &[]), &k, 1.0, &augment(&path(1.0, &[]), 0)).unwrap().value, 0.0);
    }

    #[test]
    fn sampler_variance_matches_limits() {
        let p = path(0.8, &[1.1, -0.6, 0.9]);
        let k: KernelSpec = "d=2 l=2 p=4,4 regime=grid-test L=(gridsin 0.7 0 1)".parse().unwrap();
        let s = JumpLimitSampler::new(&p, &k, 1.0).unwrap();
        let v = cond_var_jump(&p, &k, 1.0).unwrap().total;
        assert!((s.variance(&p) - v).abs() < 1e-12 * v);
    }

    #[test]
    fn truncation_edges() {
        let p = path(1.0, &[0.5, -2.0, 1.0]);
        let k = KernelSpec::power(vec![4.0, 4.0], vec![], Regime::JumpClt).unwrap();
        let aug = augment(&p, 5);
        let full = sample_u_jump(&p, &k, 1.0, &aug).unwrap().value;
        assert_eq!(truncated_z(&p, &k, 1.0, 0, &aug).unwrap(), 0.0);
        assert_eq!(truncated_z(&p, &k, 1.0, 3, &aug).unwrap(), full);
        assert_eq!(truncated_z(&p, &k, 1.0, 10, &aug).unwrap(), full);
        assert_eq!(largest_jumps(&p, 1.0, 2).unwrap(), vec![1, 2]);
    }

    #[test]
    fn mixed_without_field_is_jump_term() {
        let p = path(0.9, &[1.2, -0.8]);
        let k = KernelSpec::power(vec![0.5], vec![4.0], Regime::MixedClt).unwrap();
        let s = MixedLimitSampler::new(&p, &k, 1.0, false).unwrap();
        let cv = cond_var_mixed(&p, &k, 1.0).unwrap();
        let var: f64 = s.coefficients().iter().map(|(_, c)| c * c * 0.81).sum();
        assert!((var - cv.jump_term).abs() < 1e-12 * cv.jump_term);
        let d = s.draw(&augment(&p, 1), 1).unwrap();
        assert_eq!(d.field_part, 0.0);
    }

    #[test]
    fn cholesky_failure_reports_eigenvalue() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        match factor(c) {
            Err(Error::Cholesky { min_eigenvalue }) => assert!((min_eigenvalue + 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
