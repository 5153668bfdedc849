use rayon::prelude::*;

use super::ks::{ks_one_sample, ks_two_sample, std_normal_cdf};
use super::plan::{ExperimentKind, ExperimentPlan};
use super::report::{ls_slope, median, quantile, ExperimentReport, GridRow, GridScan, Moments, NTable, RepRow, TruncRow};
use crate::kernels::{KernelSpec, Regime};
use crate::law::{augment, largest_jumps, JumpLimitSampler, MixedLimitSampler};
use crate::limits::{cond_var_jump, cond_var_mixed, jump_limit, mixed_limit};
use crate::rng::{derive, derive_tagged, rep_seed};
use crate::sim::{simulate_path, SamplePath};
use crate::stats::{v_stat, y_stat, Choice, Increments};
use crate::{Error, Result};

/// Attempts allowed when searching for a path with a prescribed jump count.
pub const CONDITION_ATTEMPTS: u64 = 10_000;

/// Seed of replication `rep` at grid size `n`.
pub fn path_seed(base: u64, n: u64, rep: usize) -> u64 {
    derive(rep_seed(base, rep as u64), n)
}

/// Simulates from `seed`, or, if the plan fixes the jump count, from the
/// first of `seed, derive(seed, 1), derive(seed, 2), …` that has that count.
pub fn simulate_conditioned(plan: &ExperimentPlan, n: u64, seed: u64) -> Result<SamplePath> {
    let Some(want) = plan.jump_count else {
        return simulate_path(&plan.model, n, plan.horizon, seed);
    };
    for attempt in 0..CONDITION_ATTEMPTS {
        let s = if attempt == 0 { seed } else { derive(seed, attempt) };
        let p = simulate_path(&plan.model, n, plan.horizon, s)?;
        if p.jumps_until(plan.t).count() == want {
            return Ok(p);
        }
    }
    Err(Error::InvalidConfig(format!("no path with exactly {want} jumps after {CONDITION_ATTEMPTS} attempts")))
}

pub fn run(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    match plan.kind {
        ExperimentKind::Lln => run_lln(plan),
        ExperimentKind::CltJump | ExperimentKind::CltMixed => run_clt(plan),
        ExperimentKind::Rnp => run_rnp_check(plan),
        ExperimentKind::Grid => run_grid(plan),
        ExperimentKind::Ztrunc => run_ztrunc(plan),
    }
}

/// [`run`] on a dedicated pool; the report does not depend on `threads`.
pub fn run_with_threads(plan: &ExperimentPlan, threads: usize) -> Result<ExperimentReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| run(plan))
}

fn shared_interval(p: &SamplePath, t: f64) -> bool {
    let idx: Vec<u64> = p.jumps_until(t).map(|j| j.interval_index).collect();
    idx.windows(2).any(|w| w[0] == w[1])
}

fn statistic_and_limit(p: &SamplePath, k: &KernelSpec, t: f64) -> Result<(f64, f64)> {
    let data = Increments::from_path(p);
    if k.regime.is_jump() {
        Ok((v_stat(&data, k, t, Choice::Auto)?.value, jump_limit(p, k, t)?.value))
    } else {
        Ok((y_stat(&data, k, t, Choice::Auto)?.value, mixed_limit(p, k, t)?.value))
    }
}

fn base_row(n: u64, rep: usize, seed: u64, p: &SamplePath, t: f64, statistic: f64, limit: f64) -> RepRow {
    let error = statistic - limit;
    RepRow {
        n,
        rep,
        seed,
        jumps: p.jumps_until(t).count(),
        statistic,
        limit,
        error,
        rel_error: (limit != 0.0).then(|| (error / limit).abs()),
        cond_var: None,
        scaled: (n as f64).sqrt() * error,
        z: None,
        draw: None,
        excluded: false,
        reason: None,
    }
}

fn table(n: u64, rows: &[RepRow]) -> NTable {
    let abs: Vec<f64> = rows.iter().filter(|r| !r.excluded).map(|r| r.error.abs()).collect();
    let rel: Vec<f64> = rows.iter().filter(|r| !r.excluded).filter_map(|r| r.rel_error).collect();
    NTable {
        n,
        reps: rows.len(),
        excluded: rows.iter().filter(|r| r.excluded).count(),
        shared_intervals: 0,
        median_abs_error: median(&abs),
        q25_abs_error: quantile(&abs, 0.25),
        q75_abs_error: quantile(&abs, 0.75),
        median_rel_error: (!rel.is_empty()).then(|| median(&rel)),
        z_moments: None,
        ks_normal: None,
        ks_two_sample: None,
    }
}

fn rate_slope(tables: &[NTable]) -> Option<f64> {
    if tables.iter().any(|t| !(t.median_abs_error > 0.0 && t.median_abs_error.is_finite())) {
        return None;
    }
    let x: Vec<f64> = tables.iter().map(|t| (t.n as f64).ln()).collect();
    let y: Vec<f64> = tables.iter().map(|t| t.median_abs_error.ln()).collect();
    ls_slope(&x, &y)
}

fn per_rep<T: Send>(reps: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    // Results are gathered by index, so the first error and the order do not depend on scheduling.
    (0..reps).into_par_iter().map(&f).collect::<Vec<_>>().into_iter().collect()
}

/// Statistic against its limit functional for every `n` and replication.
pub fn run_lln(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let mut report = ExperimentReport::empty(plan);
    for &n in &plan.n_list {
        let rows = per_rep(plan.reps, |rep| {
            let seed = path_seed(plan.base_seed, n, rep);
            let p = simulate_conditioned(plan, n, seed)?;
            let (s, l) = statistic_and_limit(&p, &plan.kernel, plan.t)?;
            Ok((base_row(n, rep, p.seed, &p, plan.t, s, l), shared_interval(&p, plan.t)))
        })?;
        let shared = rows.iter().filter(|r| r.1).count();
        let rows: Vec<RepRow> = rows.into_iter().map(|r| r.0).collect();
        let mut tab = table(n, &rows);
        tab.shared_intervals = shared;
        report.tables.push(tab);
        report.rows.extend(rows);
    }
    report.rate_slope = rate_slope(&report.tables);
    if report.tables.iter().all(|t| t.median_abs_error == 0.0) {
        report.flags.push("exact: statistic equals the limit on every path".into());
    }
    Ok(report)
}

/// Studentized errors with ground-truth conditional variance, plus a
/// two-sample comparison against the limit law on independent paths.
pub fn run_clt(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let k = &plan.kernel;
    let t = plan.t;
    let mixed = plan.kind == ExperimentKind::CltMixed;
    let mut report = ExperimentReport::empty(plan);
    for &n in &plan.n_list {
        let rows = per_rep(plan.reps, |rep| {
            let seed = path_seed(plan.base_seed, n, rep);
            let p = simulate_conditioned(plan, n, seed)?;
            let (s, l) = statistic_and_limit(&p, k, t)?;
            let mut row = base_row(n, rep, p.seed, &p, t, s, l);
            let var = if mixed { cond_var_mixed(&p, k, t)?.total } else { cond_var_jump(&p, k, t)?.total };
            row.cond_var = Some(var);
            if mixed && p.is_flagged() {
                row.excluded = true;
                row.reason = Some("volatility clamped".into());
            } else if shared_interval(&p, t) {
                // Two jumps in one increment: a finite-n collision with probability O(1/n).
                row.excluded = true;
                row.reason = Some("jumps share an interval".into());
            } else if !(var > 0.0) {
                row.excluded = true;
                row.reason = Some("zero conditional variance".into());
            } else {
                row.z = Some(row.scaled / var.sqrt());
            }

            let q = simulate_conditioned(plan, n, derive_tagged(seed, "independent"))?;
            let aug = augment(&q, derive_tagged(q.seed, "law"));
            let draw = if mixed {
                MixedLimitSampler::new(&q, k, t, true)?.draw(&aug, aug.seed)?.value
            } else {
                JumpLimitSampler::new(&q, k, t)?.draw(&aug)?.value
            };
            row.draw = Some(draw);
            Ok((row, shared_interval(&p, t)))
        })?;
        let shared = rows.iter().filter(|r| r.1).count();
        let rows: Vec<RepRow> = rows.into_iter().map(|r| r.0).collect();
        let mut tab = table(n, &rows);
        tab.shared_intervals = shared;
        let z: Vec<f64> = rows.iter().filter_map(|r| r.z).collect();
        if !z.is_empty() {
            tab.z_moments = Some(Moments::of(&z));
            tab.ks_normal = Some(ks_one_sample(&z, std_normal_cdf));
        }
        let scaled: Vec<f64> = rows.iter().map(|r| r.scaled).collect();
        let draws: Vec<f64> = rows.iter().filter_map(|r| r.draw).collect();
        tab.ks_two_sample = Some(ks_two_sample(&scaled, &draws));
        if z.is_empty() {
            report.flags.push(format!("no-jump degenerate at n={n}: all replications excluded"));
        }
        report.tables.push(tab);
        report.rows.extend(rows);
    }
    report.rate_slope = rate_slope(&report.tables);
    Ok(report)
}

/// `R(n, p)` of the first jump against the extension variable `R_p` of the
/// first jump of an independent path.
pub fn run_rnp_check(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let t = plan.t;
    let mut report = ExperimentReport::empty(plan);
    for &n in &plan.n_list {
        let rows = per_rep(plan.reps, |rep| {
            let seed = path_seed(plan.base_seed, n, rep);
            let p = simulate_conditioned(plan, n, seed)?;
            let q = simulate_conditioned(plan, n, derive_tagged(seed, "independent"))?;
            let mut row = base_row(n, rep, p.seed, &p, t, 0.0, 0.0);
            if p.jumps_until(t).next().is_none() || q.jumps_until(t).next().is_none() {
                row.excluded = true;
                row.reason = Some("no jump".into());
                return Ok(row);
            }
            let nb = p.jump_neighborhood(0)?;
            row.statistic = nb.r;
            row.error = nb.r;
            row.scaled = nb.r;
            row.draw = Some(augment(&q, derive_tagged(q.seed, "law")).draws[0].r);
            if nb.shared {
                row.excluded = true;
                row.reason = Some("shared interval".into());
            }
            Ok(row)
        })?;
        let mut tab = table(n, &rows);
        tab.median_rel_error = None;
        let a: Vec<f64> = rows.iter().filter(|r| !r.excluded).map(|r| r.statistic).collect();
        let b: Vec<f64> = rows.iter().filter(|r| !r.excluded).filter_map(|r| r.draw).collect();
        tab.ks_two_sample = Some(ks_two_sample(&a, &b));
        if a.is_empty() {
            report.flags.push(format!("no jumps at n={n}: all replications excluded"));
        }
        report.tables.push(tab);
        report.rows.extend(rows);
    }
    Ok(report)
}

pub enum GridData<'a> {
    Path(&'a SamplePath),
    Increments(&'a Increments),
}

/// `Σ_{i,j} H_β(Δ_i X, Δ_j X)` over `beta_grid`, with ground truth when a
/// simulated path is given.
pub fn grid_scan(data: GridData<'_>, beta_grid: &[f64], t: f64) -> Result<GridScan> {
    if beta_grid.is_empty() {
        return Err(Error::InvalidArgument("empty beta grid".into()));
    }
    if let Some(b) = beta_grid.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidArgument(format!("beta must be > 0, got {b}")));
    }
    let owned;
    let (inc, path) = match data {
        GridData::Path(p) => {
            owned = Increments::from_path(p);
            (&owned, Some(p))
        }
        GridData::Increments(i) => (i, None),
    };
    let base = KernelSpec::power(vec![4.0, 4.0], vec![], Regime::GridTest)?;
    let norm = v_stat(inc, &base, t, Choice::Auto)?.value;
    let rn = (inc.n as f64).sqrt();
    let rows = beta_grid
        .par_iter()
        .map(|&beta| {
            let k = KernelSpec::grid_test(beta)?;
            let statistic = v_stat(inc, &k, t, Choice::Auto)?.value;
            let normalized = if norm > 0.0 { statistic / norm } else { 0.0 };
            let (limit, cond_var, studentized) = match path {
                Some(p) => {
                    let l = jump_limit(p, &k, t)?.value;
                    let v = cond_var_jump(p, &k, t)?.total;
                    (Some(l), Some(v), (v > 0.0).then(|| rn * (statistic - l) / v.sqrt()))
                }
                None => (None, None, None),
            };
            Ok(GridRow { beta, statistic, normalized, limit, cond_var, studentized })
        })
        .collect::<Vec<Result<GridRow>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.normalized < rows[best].normalized {
            best = i;
        }
    }
    Ok(GridScan {
        n: inc.n,
        seed: path.map(|p| p.seed),
        jumps: path.map(|p| p.jumps_until(t).count()),
        argmin_beta: rows[best].beta,
        rows,
    })
}

/// One simulated path per `n`, scanned over the plan's β grid.
pub fn run_grid(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let mut report = ExperimentReport::empty(plan);
    for &n in &plan.n_list {
        let p = simulate_conditioned(plan, n, path_seed(plan.base_seed, n, 0))?;
        report.grid.push(grid_scan(GridData::Path(&p), &plan.beta_grid, plan.t)?);
    }
    Ok(report)
}

/// Median of `|Z(m) − Z(J)|` over paths and augmentation draws, per `m`.
pub fn run_ztrunc(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let k = &plan.kernel;
    let t = plan.t;
    let n = plan.n_list[0];
    let mut ms = plan.m_list.clone();
    ms.sort_unstable();
    ms.dedup();
    let per_path = per_rep(plan.reps, |rep| {
        let p = simulate_conditioned(plan, n, path_seed(plan.base_seed, n, rep))?;
        let full = JumpLimitSampler::new(&p, k, t)?;
        let subs = ms
            .iter()
            .map(|&m| JumpLimitSampler::restricted(&p, k, t, Some(&largest_jumps(&p, t, m)?)))
            .collect::<Result<Vec<_>>>()?;
        let root = derive_tagged(p.seed, "ztrunc");
        let mut diffs = vec![Vec::with_capacity(plan.aug_draws); ms.len()];
        for s in 0..plan.aug_draws {
            let aug = augment(&p, derive(root, s as u64));
            let z = full.draw(&aug)?.value;
            for (d, sub) in diffs.iter_mut().zip(&subs) {
                d.push((sub.draw(&aug)?.value - z).abs());
            }
        }
        Ok(diffs)
    })?;
    let mut report = ExperimentReport::empty(plan);
    for (i, &m) in ms.iter().enumerate() {
        let all: Vec<f64> = per_path.iter().flat_map(|d| d[i].iter().copied()).collect();
        report.truncation.push(TruncRow { m, median_abs_diff: median(&all) });
    }
    report.truncation_monotone = Some(report.truncation.windows(2).all(|w| w[1].median_abs_diff <= w[0].median_abs_diff));
    Ok(report)
}
