use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::ks::KsResult;
use super::plan::ExperimentPlan;
use crate::Result;

/// One replication at one grid size.
#[derive(Debug, Clone, Serialize)]
pub struct RepRow {
    pub n: u64,
    pub rep: usize,
    pub seed: u64,
    pub jumps: usize,
    pub statistic: f64,
    pub limit: f64,
    pub error: f64,
    pub rel_error: Option<f64>,
    pub cond_var: Option<f64>,
    /// `√n (statistic − limit)`.
    pub scaled: f64,
    pub z: Option<f64>,
    /// Draw from the limit law on an independent path.
    pub draw: Option<f64>,
    pub excluded: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let count = xs.len();
        if count == 0 {
            return Moments::default();
        }
        let mean = crate::summation::pairwise_sum(xs) / count as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let variance = if count > 1 { crate::summation::pairwise_sum(&dev) / (count - 1) as f64 } else { 0.0 };
        Moments { count, mean, variance }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NTable {
    pub n: u64,
    pub reps: usize,
    pub excluded: usize,
    /// Paths with two jumps in one grid interval.
    pub shared_intervals: usize,
    pub median_abs_error: f64,
    pub q25_abs_error: f64,
    pub q75_abs_error: f64,
    pub median_rel_error: Option<f64>,
    pub z_moments: Option<Moments>,
    pub ks_normal: Option<KsResult>,
    pub ks_two_sample: Option<KsResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridRow {
    pub beta: f64,
    pub statistic: f64,
    /// Statistic divided by the same sum with `L ≡ 1`.
    pub normalized: f64,
    pub limit: Option<f64>,
    pub cond_var: Option<f64>,
    pub studentized: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridScan {
    pub n: u64,
    pub seed: Option<u64>,
    pub jumps: Option<usize>,
    pub rows: Vec<GridRow>,
    pub argmin_beta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncRow {
    pub m: usize,
    pub median_abs_diff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub plan: ExperimentPlan,
    pub tables: Vec<NTable>,
    /// Least-squares slope of log median |error| against log n.
    pub rate_slope: Option<f64>,
    pub grid: Vec<GridScan>,
    pub truncation: Vec<TruncRow>,
    pub truncation_monotone: Option<bool>,
    pub flags: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<RepRow>,
}

impl ExperimentReport {
    pub(crate) fn empty(plan: &ExperimentPlan) -> Self {
        ExperimentReport {
            plan: plan.clone(),
            tables: Vec::new(),
            rate_slope: None,
            grid: Vec::new(),
            truncation: Vec::new(),
            truncation_monotone: None,
            flags: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn table(&self, n: u64) -> Option<&NTable> {
        self.tables.iter().find(|t| t.n == n)
    }

    /// Writes `report.json`, `errors.csv` and, when requested by the plan,
    /// `samples.csv`. Output depends only on the report contents.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        let p = dir.join("report.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&p, text)?;
        out.push(p);

        let p = dir.join("errors.csv");
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["n", "rep", "seed", "jumps", "statistic", "limit", "error", "rel_error", "cond_var", "z", "excluded", "reason"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.rep.to_string(),
                r.seed.to_string(),
                r.jumps.to_string(),
                fmt(r.statistic),
                fmt(r.limit),
                fmt(r.error),
                opt(r.rel_error),
                opt(r.cond_var),
                opt(r.z),
                r.excluded.to_string(),
                r.reason.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        out.push(p);

        if self.plan.write_samples {
            let p = dir.join("samples.csv");
            let mut w = csv::Writer::from_path(&p)?;
            w.write_record(["n", "rep", "scaled_error", "limit_draw"])?;
            for r in &self.rows {
                w.write_record([r.n.to_string(), r.rep.to_string(), fmt(r.scaled), opt(r.draw)])?;
            }
            w.flush()?;
            out.push(p);
        }
        Ok(out)
    }
}

fn fmt(x: f64) -> String {
    // `{:?}` prints the shortest representation that round-trips.
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// Enough to rerun: the plan, the build and the thread count used.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub package: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub plan: &'a ExperimentPlan,
    pub files: Vec<String>,
}

impl<'a> Manifest<'a> {
    pub fn new(plan: &'a ExperimentPlan, command: Vec<String>, threads: usize, wall_time_seconds: f64, files: &[PathBuf]) -> Self {
        Manifest {
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            threads,
            wall_time_seconds,
            plan,
            files: files.iter().filter_map(|p| p.file_name()).map(|f| f.to_string_lossy().into_owned()).collect(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let p = dir.join("manifest.json");
        let mut f = fs::File::create(&p)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(p)
    }
}

/// Linear-interpolation quantile of an unsorted sample (NaN for empty input).
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let h = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_and_slope() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
        assert!(median(&[]).is_nan());
        let x = [1.0, 2.0, 3.0];
        assert!((ls_slope(&x, &[1.0, -1.0, -3.0]).unwrap() + 2.0).abs() < 1e-15);
        assert_eq!(ls_slope(&[1.0], &[1.0]), None);
    }

    #[test]
    fn moments() {
        let m = Moments::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
    }
}
