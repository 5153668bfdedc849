use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `⌊n t⌋`, with a relative guard so that e.g. `t = 0.29, n = 100` yields 29.
pub fn window_count(n: u64, t: f64) -> u64 {
    let x = n as f64 * t;
    (x + x.abs() * 1e-12 + 1e-12).floor().max(0.0) as u64
}

/// Ground truth for one jump of `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: f64,
    pub size: f64,
    pub sigma_pre: f64,
    pub sigma_post: f64,
    /// `i` with `(i-1)/n < time <= i/n`.
    pub interval_index: u64,
    /// `W_time - W_{(i-1)/n}`.
    pub w_partial: f64,
}

/// Simulated path together with everything the limit formulas need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n: u64,
    pub seed: u64,
    pub x0: f64,
    pub drift: f64,
    pub x_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    pub w_increments: Vec<f64>,
    pub jumps: Vec<JumpRecord>,
    pub clamp_count: u64,
}

/// Continuous contribution around a jump, scaled by `√n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighborhood {
    pub r_minus: f64,
    pub r_plus: f64,
    pub r: f64,
    /// Another jump falls in the same interval.
    pub shared: bool,
}

impl SamplePath {
    /// Number of observed increments `⌊nT⌋`.
    pub fn count(&self) -> usize {
        self.x_grid.len() - 1
    }

    /// `⌊nt⌋`, checked against the observed grid.
    pub fn window(&self, t: f64) -> Result<usize> {
        if !(t > 0.0) || t > self.horizon * (1.0 + 1e-12) {
            return Err(Error::OutOfRange { t, horizon: self.horizon });
        }
        let c = window_count(self.n, t) as usize;
        Ok(c.min(self.count()))
    }

    /// `Δ_i^n X` for `i = 1..⌊nt⌋`, multiplied by `√n` when `scaled`.
    pub fn increments(&self, scaled: bool, t: f64) -> Result<Vec<f64>> {
        let c = self.window(t)?;
        let s = if scaled { (self.n as f64).sqrt() } else { 1.0 };
        Ok(self.x_grid[..=c].windows(2).map(|w| s * (w[1] - w[0])).collect())
    }

    /// `α_i^n = √n σ_{(i-1)/n} Δ_i^n W`.
    pub fn first_order_increments(&self, t: f64) -> Result<Vec<f64>> {
        let c = self.window(t)?;
        let s = (self.n as f64).sqrt();
        Ok((0..c).map(|i| s * self.sigma_grid[i] * self.w_increments[i]).collect())
    }

    pub fn is_flagged(&self) -> bool {
        self.clamp_count > 0
    }

    /// Jumps with `time <= t`, in time order.
    pub fn jumps_until(&self, t: f64) -> impl Iterator<Item = &JumpRecord> + '_ {
        self.jumps.iter().take_while(move |j| j.time <= t)
    }

    /// Rebuild the grid from the stored Brownian increments, volatility and
    /// jumps with the simulator's order of operations.
    pub fn reconstruct(&self) -> Vec<f64> {
        let nf = self.n as f64;
        let mut out = Vec::with_capacity(self.x_grid.len());
        out.push(self.x0);
        let mut cont = 0.0;
        let mut jsum = 0.0;
        let mut next = 0;
        for i in 1..=self.count() {
            cont += self.sigma_grid[i - 1] * self.w_increments[i - 1];
            while next < self.jumps.len() && self.jumps[next].interval_index == i as u64 {
                jsum += self.jumps[next].size;
                next += 1;
            }
            out.push(self.x0 + self.drift * (i as f64 / nf) + cont + jsum);
        }
        out
    }

    /// `R_-(n,p) = √n (X_{S_p-} - X_{(i-1)/n})`, `R_+(n,p) = √n (X_{i/n} - X_{S_p})`.
    pub fn jump_neighborhood(&self, p: usize) -> Result<Neighborhood> {
        let jump = self
            .jumps
            .get(p)
            .ok_or_else(|| Error::InvalidArgument(format!("jump index {p} out of range")))?;
        let i = jump.interval_index as usize;
        if i == 0 || i > self.count() {
            return Err(Error::JumpOffGrid { index: p });
        }
        let nf = self.n as f64;
        let left = (i - 1) as f64 / nf;
        let mut earlier = 0.0;
        let mut shared = false;
        for (q, other) in self.jumps.iter().enumerate() {
            if q != p && other.interval_index == jump.interval_index {
                shared = true;
                if q < p {
                    earlier += other.size;
                }
            }
        }
        let pre = self.drift * (jump.time - left) + self.sigma_grid[i - 1] * jump.w_partial + earlier;
        let delta = self.x_grid[i] - self.x_grid[i - 1];
        let s = nf.sqrt();
        let r_minus = s * pre;
        let r_plus = s * (delta - pre - jump.size);
        Ok(Neighborhood { r_minus, r_plus, r: r_minus + r_plus, shared })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(x_grid: Vec<f64>, n: u64) -> SamplePath {
        let m = x_grid.len() - 1;
        SamplePath {
            horizon: m as f64 / n as f64,
            n,
            seed: 0,
            x0: x_grid[0],
            drift: 0.0,
            x_grid,
            sigma_grid: vec![1.0; m + 1],
            w_increments: vec![0.0; m],
            jumps: vec![],
            clamp_count: 0,
        }
    }

    #[test]
    fn differencing() {
        let p = toy(vec![0.0, 1.0, 3.0], 2);
        assert_eq!(p.increments(false, 1.0).unwrap(), vec![1.0, 2.0]);
        let s = p.increments(true, 1.0).unwrap();
        assert_eq!(s, vec![2f64.sqrt(), 2.0 * 2f64.sqrt()]);
    }

    #[test]
    fn constant_path_has_zero_increments() {
        let p = toy(vec![0.7; 9], 8);
        assert!(p.increments(false, 1.0).unwrap().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn window_bounds() {
        let p = toy(vec![0.0; 11], 10);
        assert!(p.increments(false, 0.0).is_err());
        assert!(p.increments(false, 1.5).is_err());
        assert_eq!(p.increments(false, 0.29).unwrap().len(), 2);
        assert_eq!(window_count(100, 0.29), 29);
        assert_eq!(window_count(10, 0.7), 7);
    }

    #[test]
    fn zero_brownian_gives_zero_alpha() {
        let p = toy(vec![0.0, 1.0, -2.0, 4.0], 3);
        assert!(p.first_order_increments(1.0).unwrap().iter().all(|&a| a == 0.0));
    }
}
