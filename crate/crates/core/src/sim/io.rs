//! JSON and compact binary serialisation of [`SamplePath`].
//!
//! Binary layout (all little-endian): magic `SPTH`, `u32` version, `f64` T,
//! `u64` n, `u64` seed, `f64` x0, `f64` drift, `u64` clamp count, then the
//! arrays `x_grid`, `sigma_grid`, `w_increments` as `u64` length followed by
//! `f64` values, then `u64` jump count followed by one record per jump
//! (`f64` time, `f64` size, `f64` sigma_pre, `f64` sigma_post, `u64`
//! interval, `f64` w_partial).

use std::io::{Read, Write};

use super::path::{JumpRecord, SamplePath};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"SPTH";
const VERSION: u32 = 1;

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_array<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    put_u64(w, xs.len() as u64)?;
    for &x in xs {
        put_f64(w, x)?;
    }
    Ok(())
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(get_u64(r)?))
}

fn get_len<R: Read>(r: &mut R) -> Result<usize> {
    let len = get_u64(r)?;
    if len > (1 << 34) {
        return Err(Error::Format(format!("implausible array length {len}")));
    }
    Ok(len as usize)
}

fn get_array<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let len = get_len(r)?;
    (0..len).map(|_| get_f64(r)).collect()
}

impl SamplePath {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: SamplePath = serde_json::from_str(text)?;
        p.check_shape()?;
        Ok(p)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        put_f64(&mut w, self.horizon)?;
        put_u64(&mut w, self.n)?;
        put_u64(&mut w, self.seed)?;
        put_f64(&mut w, self.x0)?;
        put_f64(&mut w, self.drift)?;
        put_u64(&mut w, self.clamp_count)?;
        put_array(&mut w, &self.x_grid)?;
        put_array(&mut w, &self.sigma_grid)?;
        put_array(&mut w, &self.w_increments)?;
        put_u64(&mut w, self.jumps.len() as u64)?;
        for j in &self.jumps {
            put_f64(&mut w, j.time)?;
            put_f64(&mut w, j.size)?;
            put_f64(&mut w, j.sigma_pre)?;
            put_f64(&mut w, j.sigma_post)?;
            put_u64(&mut w, j.interval_index)?;
            put_f64(&mut w, j.w_partial)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut v = [0u8; 4];
        r.read_exact(&mut v)?;
        let version = u32::from_le_bytes(v);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let horizon = get_f64(&mut r)?;
        let n = get_u64(&mut r)?;
        let seed = get_u64(&mut r)?;
        let x0 = get_f64(&mut r)?;
        let drift = get_f64(&mut r)?;
        let clamp_count = get_u64(&mut r)?;
        let x_grid = get_array(&mut r)?;
        let sigma_grid = get_array(&mut r)?;
        let w_increments = get_array(&mut r)?;
        let njumps = get_len(&mut r)?;
        let mut jumps = Vec::with_capacity(njumps.min(1 << 20));
        for _ in 0..njumps {
            jumps.push(JumpRecord {
                time: get_f64(&mut r)?,
                size: get_f64(&mut r)?,
                sigma_pre: get_f64(&mut r)?,
                sigma_post: get_f64(&mut r)?,
                interval_index: get_u64(&mut r)?,
                w_partial: get_f64(&mut r)?,
            });
        }
        let p = SamplePath {
            horizon,
            n,
            seed,
            x0,
            drift,
            x_grid,
            sigma_grid,
            w_increments,
            jumps,
            clamp_count,
        };
        p.check_shape()?;
        Ok(p)
    }

    fn check_shape(&self) -> Result<()> {
        if self.x_grid.is_empty()
            || self.sigma_grid.len() != self.x_grid.len()
            || self.w_increments.len() + 1 != self.x_grid.len()
        {
            return Err(Error::Format("inconsistent array lengths".into()));
        }
        if self.n == 0 {
            return Err(Error::Format("n must be >= 1".into()));
        }
        Ok(())
    }
}
