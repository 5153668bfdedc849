use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::model::{ModelConfig, VolatilityKind};
use super::path::{window_count, JumpRecord, SamplePath};
use crate::rng::{derive, stream};
use crate::{Error, Result};

const STREAM_JUMP_TIMES: u64 = 1;
const STREAM_JUMP_SIZES: u64 = 2;
const STREAM_BROWNIAN: u64 = 3;
const STREAM_VOL_NOISE: u64 = 4;

/// Interval index `i` with `(i-1)/n < s <= i/n`.
fn interval_of(s: f64, n: u64) -> u64 {
    let nf = n as f64;
    let mut i = ((s * nf).ceil() as u64).max(1);
    while (i as f64) / nf < s {
        i += 1;
    }
    while i > 1 && ((i - 1) as f64) / nf >= s {
        i -= 1;
    }
    i
}

/// Simulate `X` on `{0, 1/n, ..., ⌊nT⌋/n}`.
///
/// Jump times come from a Poisson process on `(0, T]` and sizes are i.i.d.
/// The Brownian motion is generated forward on the grid refined by the jump
/// times, so `W` (and the volatility noise `V`) are known exactly at every
/// jump. Volatility follows an Euler scheme on the grid; the value at a jump
/// is the left grid value plus a partial Euler step. Times, sizes, `W` and
/// `V` use separate counter-derived streams, so e.g. the jump record does not
/// depend on `n`.
pub fn simulate_path(cfg: &ModelConfig, n: u64, horizon: f64, seed: u64) -> Result<SamplePath> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument("horizon must be finite and > 0".into()));
    }
    let count = window_count(n, horizon);
    if count == 0 {
        return Err(Error::InvalidArgument("n * T must be >= 1".into()));
    }
    let nf = n as f64;
    let vol = &cfg.volatility;
    let ito = vol.kind == VolatilityKind::ItoSm;

    let mut jumps: Vec<JumpRecord> = Vec::new();
    if cfg.jumps.intensity > 0.0 {
        let exp = Exp::new(cfg.jumps.intensity)
            .map_err(|e| Error::InvalidConfig(format!("jump intensity: {e}")))?;
        let mut trng = stream(derive(seed, STREAM_JUMP_TIMES));
        let mut zrng = stream(derive(seed, STREAM_JUMP_SIZES));
        let mut s = 0.0;
        loop {
            s += exp.sample(&mut trng);
            if s > horizon {
                break;
            }
            let size = cfg.jumps.draw_size(&mut zrng)?;
            jumps.push(JumpRecord {
                time: s,
                size,
                sigma_pre: vol.sigma0,
                sigma_post: vol.sigma0,
                interval_index: interval_of(s, n),
                w_partial: 0.0,
            });
        }
    }

    let mut wrng = stream(derive(seed, STREAM_BROWNIAN));
    let mut vrng = stream(derive(seed, STREAM_VOL_NOISE));
    let sqrt_dt = (1.0 / nf).sqrt();

    let mut x_grid = Vec::with_capacity(count as usize + 1);
    let mut sigma_grid = Vec::with_capacity(count as usize + 1);
    let mut w_increments = Vec::with_capacity(count as usize);
    x_grid.push(cfg.x0);
    sigma_grid.push(vol.sigma0);

    let mut clamps = 0u64;
    let mut cont = 0.0;
    let mut jsum = 0.0;
    let mut next = 0usize;
    let clamp = |v: f64, clamps: &mut u64| {
        if v < vol.floor_eps {
            *clamps += 1;
            vol.floor_eps
        } else {
            v
        }
    };

    for i in 1..=count {
        let sigma_left = sigma_grid[(i - 1) as usize];
        let left = (i - 1) as f64 / nf;
        let first = next;
        while next < jumps.len() && jumps[next].interval_index == i {
            next += 1;
        }

        let (dw, dv) = if first == next {
            let dw = sqrt_dt * wrng.sample::<f64, _>(StandardNormal);
            let dv = if ito { sqrt_dt * vrng.sample::<f64, _>(StandardNormal) } else { 0.0 };
            (dw, dv)
        } else {
            let mut prev = left;
            let (mut w_acc, mut v_acc) = (0.0, 0.0);
            for jump in &mut jumps[first..next] {
                let h = (jump.time - prev).max(0.0).sqrt();
                w_acc += h * wrng.sample::<f64, _>(StandardNormal);
                if ito {
                    v_acc += h * vrng.sample::<f64, _>(StandardNormal);
                }
                jump.w_partial = w_acc;
                if ito {
                    let partial = sigma_left
                        + vol.tilde_b * (jump.time - left)
                        + vol.tilde_sigma * w_acc
                        + vol.tilde_v * v_acc;
                    let s = partial.max(vol.floor_eps);
                    jump.sigma_pre = s;
                    jump.sigma_post = s;
                } else {
                    jump.sigma_pre = sigma_left;
                    jump.sigma_post = sigma_left;
                }
                prev = jump.time;
            }
            let h = (i as f64 / nf - prev).max(0.0).sqrt();
            w_acc += h * wrng.sample::<f64, _>(StandardNormal);
            if ito {
                v_acc += h * vrng.sample::<f64, _>(StandardNormal);
            }
            (w_acc, v_acc)
        };

        let sigma_next = if ito {
            let raw = sigma_left + vol.tilde_b / nf + vol.tilde_sigma * dw + vol.tilde_v * dv;
            let before = clamps;
            let s = clamp(raw, &mut clamps);
            if clamps > before {
                if let Some(limit) = vol.max_clamps {
                    if clamps > limit {
                        return Err(Error::VolatilityFloor { interval: i, clamps });
                    }
                }
            }
            s
        } else {
            vol.sigma0
        };
        if cfg.reject_beyond_bound && sigma_next.abs() > cfg.bound_a {
            return Err(Error::BoundExceeded { interval: i, bound: cfg.bound_a });
        }

        cont += sigma_left * dw;
        for jump in &jumps[first..next] {
            jsum += jump.size;
        }
        w_increments.push(dw);
        sigma_grid.push(sigma_next);
        x_grid.push(cfg.x0 + cfg.drift * (i as f64 / nf) + cont + jsum);
    }

    // Jumps in (⌊nT⌋/n, T] are not observed; they keep the last grid volatility.
    let last_sigma = *sigma_grid.last().expect("grid is non-empty");
    for jump in &mut jumps[next..] {
        jump.sigma_pre = last_sigma;
        jump.sigma_post = last_sigma;
    }

    Ok(SamplePath {
        horizon,
        n,
        seed,
        x0: cfg.x0,
        drift: cfg.drift,
        x_grid,
        sigma_grid,
        w_increments,
        jumps,
        clamp_count: clamps,
    })
}
