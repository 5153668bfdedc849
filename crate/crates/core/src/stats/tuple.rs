//! Sums of a kernel over index tuples: all of `[N]^d`, or the strictly
//! increasing ones. The factorized paths use the separable expansion of `L`.

use serde::{Deserialize, Serialize};

use crate::kernels::{Factor, KernelSpec};
use crate::summation::map_sum;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Factorized,
    Nested,
    Hybrid,
}

/// Requested evaluation strategy; `Auto` factorizes whenever possible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Choice {
    #[default]
    Auto,
    Factorized,
    Nested,
}

pub const NESTED_MAX_D: usize = 3;
pub const NESTED_MAX_N: usize = 10_000;
/// Tuple budget for brute force, on top of the `d`/`N` guard.
pub const NESTED_MAX_TUPLES: f64 = 2e8;

fn nested_guard(d: usize, n: usize, tuples: f64) -> Result<()> {
    if d > NESTED_MAX_D || n > NESTED_MAX_N || tuples > NESTED_MAX_TUPLES {
        return Err(Error::NestedGuard { d, count: n });
    }
    Ok(())
}

/// Power sums `Σ_i |s x_i|^e g(s x_i)`, memoised per distinct (coordinate
/// exponent, scale, factor).
struct PowerSums<'a> {
    k: &'a KernelSpec,
    data: &'a [f64],
    memo: Vec<(f64, f64, Factor, f64)>,
}

impl<'a> PowerSums<'a> {
    fn get(&mut self, c: usize, scale: f64, g: &Factor) -> f64 {
        let e = self.k.exponent(c);
        if let Some(hit) = self.memo.iter().find(|(me, ms, mg, _)| *me == e && *ms == scale && mg == g) {
            return hit.3;
        }
        let k = self.k;
        let v = map_sum(self.data, |x| k.coord_fn(c, g, scale * x));
        self.memo.push((e, scale, g.clone(), v));
        v
    }
}

/// `Σ_{i ∈ [N]^d} H(s_1 x_{i_1}, …, s_d x_{i_d})`.
pub fn full_sum(k: &KernelSpec, data: &[f64], scales: &[f64], choice: Choice) -> Result<(f64, Strategy)> {
    debug_assert_eq!(scales.len(), k.d);
    match choice {
        Choice::Nested => Ok((nested_full(k, data, scales)?, Strategy::Nested)),
        Choice::Auto | Choice::Factorized => {
            let mut sums = PowerSums { k, data, memo: Vec::new() };
            let mut total = 0.0;
            for term in k.separable_for(data, scales) {
                let mut v = term.coef;
                for (c, g) in term.factors.iter().enumerate() {
                    v *= sums.get(c, scales[c], g);
                }
                total += v;
            }
            Ok((total, Strategy::Factorized))
        }
    }
}

/// Brute force in naive order.
pub fn nested_full(k: &KernelSpec, data: &[f64], scales: &[f64]) -> Result<f64> {
    let n = data.len();
    nested_guard(k.d, n, (n as f64).powi(k.d as i32))?;
    if n == 0 {
        return Ok(0.0);
    }
    let mut idx = vec![0usize; k.d];
    let mut z = vec![0.0; k.d];
    let mut total = 0.0;
    loop {
        for c in 0..k.d {
            z[c] = scales[c] * data[idx[c]];
        }
        total += k.eval_h(&z);
        let mut c = k.d;
        loop {
            if c == 0 {
                return Ok(total);
            }
            c -= 1;
            idx[c] += 1;
            if idx[c] < n {
                break;
            }
            idx[c] = 0;
        }
    }
}

/// `Σ_{i_1 < … < i_d} H(s_1 x_{i_1}, …, s_d x_{i_d})`.
pub fn ordered_sum(k: &KernelSpec, data: &[f64], scales: &[f64], choice: Choice) -> Result<(f64, Strategy)> {
    match choice {
        Choice::Nested => Ok((nested_ordered(k, data, scales)?, Strategy::Nested)),
        Choice::Auto | Choice::Factorized => {
            // A[c] accumulates Σ over increasing c-tuples seen so far of ∏ g_m.
            let mut total = 0.0;
            for term in k.separable_for(data, scales) {
                let mut acc = vec![0.0; k.d + 1];
                acc[0] = 1.0;
                for &x in data {
                    for c in (1..=k.d).rev() {
                        if acc[c - 1] != 0.0 {
                            acc[c] += acc[c - 1] * k.coord_fn(c - 1, &term.factors[c - 1], scales[c - 1] * x);
                        }
                    }
                }
                total += term.coef * acc[k.d];
            }
            Ok((total, Strategy::Hybrid))
        }
    }
}

pub fn nested_ordered(k: &KernelSpec, data: &[f64], scales: &[f64]) -> Result<f64> {
    let n = data.len();
    nested_guard(k.d, n, binomial(n, k.d))?;
    if n < k.d {
        return Ok(0.0);
    }
    let mut idx: Vec<usize> = (0..k.d).collect();
    let mut z = vec![0.0; k.d];
    let mut total = 0.0;
    loop {
        for c in 0..k.d {
            z[c] = scales[c] * data[idx[c]];
        }
        total += k.eval_h(&z);
        // next combination in lexicographic order
        let mut c = k.d;
        loop {
            if c == 0 {
                return Ok(total);
            }
            c -= 1;
            if idx[c] < n - (k.d - c) {
                idx[c] += 1;
                for m in c + 1..k.d {
                    idx[m] = idx[m - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, r| acc * (n - r) as f64 / (r + 1) as f64)
}
