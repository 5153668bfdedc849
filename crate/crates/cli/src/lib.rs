//! `vstat` command-line driver.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 when a
//! validated run fails.

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use rayon::prelude::*;
use serde::Serialize;
use vstat_core::harness::{self, grid_scan, path_seed, GridData, GridScan};
use vstat_core::limits::{cond_var_jump, cond_var_mixed, jump_limit, mixed_limit, CondVariance, LimitValue};
use vstat_core::sim::{simulate_path, SamplePath};
use vstat_core::stats::{power_variation, realized_qv, u_stat, v_stat, y_stat, Choice, Increments, StatValue};

pub use config::{parse_beta_range, parse_config, ConfigError, RunConfig, Statistic, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "vstat", about = "U-/V-statistics of discontinuous Ito semimartingales")]
pub struct Args {
    /// simulate | stat | limits | verify-lln | verify-clt | rnp-check | grid-test | ztrunc
    pub subcommand: Subcommand,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `base_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Increments CSV (stat, grid-test).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// β grid as a:b:step (grid-test).
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Sampling frequency; overrides `n_list` with a single value.
    #[arg(long)]
    pub n: Option<u64>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Entry point; `argv[0]` is the program name.
pub fn run(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(&args, argv) {
        Ok(paths) => {
            for p in paths {
                let _ = writeln!(out, "{}", p.display());
            }
            0
        }
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}\n");
            let _ = writeln!(err, "{}", <Args as clap::CommandFactory>::command().render_usage());
            1
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(err, "error: {m}");
            2
        }
    }
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve(args: &Args) -> Result<Option<RunConfig>, ConfigError> {
    let Some(path) = &args.config else { return Ok(None) };
    let text = fs::read_to_string(path).map_err(|e| ConfigError { key: "--config".into(), message: format!("{}: {e}", path.display()) })?;
    let mut cfg = parse_config(&text)?;
    cfg.subcommand = args.subcommand;
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(n) = args.n {
        cfg.experiment.n_list = vec![n];
    }
    if let Some(b) = &args.beta {
        cfg.experiment.beta_grid = parse_beta_range(b)?;
    }
    if let Some(i) = &args.input {
        cfg.io.input = Some(i.display().to_string());
    }
    if let Some(o) = &args.output {
        cfg.io.output = Some(o.display().to_string());
    }
    cfg.validate()?;
    Ok(Some(cfg))
}

#[derive(Serialize)]
struct CliManifest<'a> {
    package: &'static str,
    version: &'static str,
    command: &'a [String],
    threads: usize,
    wall_time_seconds: f64,
    /// Configuration after overrides; rerunning it reproduces the reports.
    config: Option<&'a RunConfig>,
    files: Vec<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf, Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    fs::write(path, text).map_err(runtime)?;
    Ok(path.to_path_buf())
}

fn execute(args: &Args, argv: &[String]) -> Result<Vec<PathBuf>, Failure> {
    let start = Instant::now();
    let cfg = resolve(args).map_err(usage)?;
    let threads = args.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    let out_dir = PathBuf::from(
        cfg.as_ref()
            .and_then(|c| c.io.output.clone())
            .or_else(|| args.output.as_ref().map(|p| p.display().to_string()))
            .unwrap_or_else(|| "vstat-out".into()),
    );
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(runtime)?;
    let files = pool.install(|| match &cfg {
        Some(c) => dispatch(c, &out_dir),
        None if args.subcommand == Subcommand::GridTest => grid_from_args(args, &out_dir),
        None => Err(Failure::Usage(format!("`{}` needs --config", args.subcommand))),
    })?;
    let manifest = CliManifest {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: argv,
        threads,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        config: cfg.as_ref(),
        files: files.iter().filter_map(|p| p.file_name()).map(|f| f.to_string_lossy().into_owned()).collect(),
    };
    let mut all = files;
    all.push(write_json(&out_dir.join("manifest.json"), &manifest)?);
    Ok(all)
}

fn read_input(path: &str, n: Option<u64>) -> Result<Increments, Failure> {
    let f = fs::File::open(path).map_err(|e| Failure::Usage(format!("--input {path}: {e}")))?;
    Increments::read_csv(f, n).map_err(usage)
}

#[derive(Serialize)]
struct GridInputReport<'a> {
    input: &'a str,
    t: f64,
    scan: GridScan,
}

fn grid_from_args(args: &Args, dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let (Some(input), Some(beta)) = (&args.input, &args.beta) else {
        return Err(Failure::Usage("grid-test needs --config, or --input and --beta".into()));
    };
    let grid = parse_beta_range(beta).map_err(usage)?;
    let input = input.display().to_string();
    let data = read_input(&input, args.n)?;
    let t = data.horizon();
    let scan = grid_scan(GridData::Increments(&data), &grid, t).map_err(runtime)?;
    fs::create_dir_all(dir).map_err(runtime)?;
    Ok(vec![write_json(&dir.join("report.json"), &GridInputReport { input: &input, t, scan })?])
}

fn dispatch(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    fs::create_dir_all(dir).map_err(runtime)?;
    if let Some(plan) = cfg.plan().map_err(usage)? {
        let report = harness::run(&plan).map_err(runtime)?;
        return report.write(dir).map_err(runtime);
    }
    let x = &cfg.experiment;
    match cfg.subcommand {
        Subcommand::Simulate => {
            let mut files = Vec::new();
            for &n in &x.n_list {
                let p = simulate(cfg, n, 0)?;
                let json = dir.join(format!("path_n{n}.json"));
                fs::write(&json, p.to_json().map_err(runtime)?).map_err(runtime)?;
                let bin = dir.join(format!("path_n{n}.bin"));
                p.write_binary(fs::File::create(&bin).map_err(runtime)?).map_err(runtime)?;
                let csv = dir.join(format!("increments_n{n}.csv"));
                let text: String = std::iter::once("increment\n".to_string())
                    .chain(p.increments(false, p.horizon).map_err(runtime)?.iter().map(|v| format!("{v:?}\n")))
                    .collect();
                fs::write(&csv, text).map_err(runtime)?;
                files.extend([json, bin, csv]);
            }
            Ok(files)
        }
        Subcommand::Stat => stat(cfg, dir),
        Subcommand::Limits => limits(cfg, dir),
        Subcommand::GridTest => {
            let input = cfg.io.input.as_deref().expect("plan() covers grid-test without input");
            let data = read_input(input, x.n_list.first().copied().filter(|_| x.n_list.len() == 1))?;
            let scan = grid_scan(GridData::Increments(&data), &x.beta_grid, x.t.min(data.horizon())).map_err(runtime)?;
            Ok(vec![write_json(&dir.join("report.json"), &GridInputReport { input, t: x.t.min(data.horizon()), scan })?])
        }
        _ => unreachable!("experiment subcommands are handled by the harness"),
    }
}

fn simulate(cfg: &RunConfig, n: u64, rep: usize) -> Result<SamplePath, Failure> {
    simulate_path(&cfg.model, n, cfg.experiment.horizon, path_seed(cfg.base_seed, n, rep)).map_err(runtime)
}

fn compute_stat(cfg: &RunConfig, data: &Increments) -> Result<StatValue, Failure> {
    let x = &cfg.experiment;
    let t = x.t.min(data.horizon());
    let kernel = || cfg.kernel_spec().map_err(usage)?.ok_or_else(|| Failure::Usage("kernel: required".into()));
    let v = match x.statistic.expect("validated") {
        Statistic::Qv => realized_qv(data, t),
        Statistic::Pv => power_variation(data, x.power.expect("validated"), true, t),
        Statistic::V => v_stat(data, &kernel()?, t, Choice::Auto),
        Statistic::Y => y_stat(data, &kernel()?, t, Choice::Auto),
        Statistic::U => u_stat(data, &kernel()?, t, Choice::Auto),
    };
    v.map_err(runtime)
}

#[derive(Serialize)]
struct StatSummary {
    n: u64,
    reps: usize,
    mean: f64,
    variance: f64,
    median: f64,
}

#[derive(Serialize)]
struct StatReport {
    statistic: Statistic,
    input: Option<String>,
    single: Option<StatValue>,
    per_n: Vec<StatSummary>,
}

fn stat(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let x = &cfg.experiment;
    let statistic = x.statistic.expect("validated");
    if let Some(input) = &cfg.io.input {
        let data = read_input(input, (x.n_list.len() == 1).then(|| x.n_list[0]))?;
        let v = compute_stat(cfg, &data)?;
        let r = StatReport { statistic, input: Some(input.clone()), single: Some(v), per_n: Vec::new() };
        return Ok(vec![write_json(&dir.join("report.json"), &r)?]);
    }
    let mut per_n = Vec::new();
    let mut csv = String::from("n,rep,seed,value\n");
    for &n in &x.n_list {
        let vals = (0..x.reps)
            .into_par_iter()
            .map(|rep| {
                let p = simulate(cfg, n, rep)?;
                Ok((p.seed, compute_stat(cfg, &Increments::from_path(&p))?.value))
            })
            .collect::<Vec<Result<(u64, f64), Failure>>>()
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        for (rep, (seed, v)) in vals.iter().enumerate() {
            csv.push_str(&format!("{n},{rep},{seed},{v:?}\n"));
        }
        let v: Vec<f64> = vals.iter().map(|p| p.1).collect();
        let m = harness::Moments::of(&v);
        per_n.push(StatSummary { n, reps: v.len(), mean: m.mean, variance: m.variance, median: harness::median(&v) });
    }
    let r = StatReport { statistic, input: None, single: None, per_n };
    let values = dir.join("values.csv");
    fs::write(&values, csv).map_err(runtime)?;
    Ok(vec![write_json(&dir.join("report.json"), &r)?, values])
}

#[derive(Serialize)]
struct LimitsReport {
    n: u64,
    seed: u64,
    jumps: usize,
    statistic: f64,
    limit: LimitValue,
    cond_var: CondVariance,
}

fn limits(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let k = cfg.kernel_spec().map_err(usage)?.ok_or_else(|| Failure::Usage("kernel: required".into()))?;
    let t = cfg.experiment.t;
    let mut reports = Vec::new();
    for &n in &cfg.experiment.n_list {
        let p = simulate(cfg, n, 0)?;
        let data = Increments::from_path(&p);
        let (statistic, limit, cond_var) = if k.regime.is_jump() {
            (
                v_stat(&data, &k, t, Choice::Auto).map_err(runtime)?.value,
                jump_limit(&p, &k, t).map_err(runtime)?,
                cond_var_jump(&p, &k, t).map_err(runtime)?,
            )
        } else {
            (
                y_stat(&data, &k, t, Choice::Auto).map_err(runtime)?.value,
                mixed_limit(&p, &k, t).map_err(runtime)?,
                cond_var_mixed(&p, &k, t).map_err(runtime)?,
            )
        };
        reports.push(LimitsReport { n, seed: p.seed, jumps: p.jumps_until(t).count(), statistic, limit, cond_var });
    }
    Ok(vec![write_json(&dir.join("report.json"), &reports)?])
}
