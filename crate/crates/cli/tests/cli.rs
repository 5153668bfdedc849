use std::fs;
use std::path::Path;

use vstat_cli::{parse_config, run};

const MINIMAL: &str = r#"
subcommand = "stat"
base_seed = 1

[model]
drift = 0.0
bound_a = 10.0
volatility = { kind = "constant", sigma0 = 1.0 }
jumps = { intensity = 0.0, max_abs = 1.0, size = { type = "atoms", atoms = [[1.0, 1.0]] } }

[experiment]
n_list = [256]
reps = 20
statistic = "qv"
"#;

const LLN: &str = r#"
subcommand = "verify-lln"
base_seed = 11
kernel = "d=2 l=2 p=4,4 regime=jump-lln"

[model]
drift = 0.0
bound_a = 10.0
volatility = { kind = "constant", sigma0 = 1.0 }
jumps = { intensity = 5.0, max_abs = 1.0, size = { type = "atoms", atoms = [[0.8, 0.5], [-0.6, 0.5]] } }

[experiment]
n_list = [128, 512]
reps = 16
"#;

fn exec(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<String> = std::iter::once("vstat").chain(args.iter().copied()).map(String::from).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(&argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn minimal_config_round_trips() {
    let cfg = parse_config(MINIMAL).unwrap();
    let canon = cfg.canonical();
    let again = parse_config(&canon).unwrap();
    assert_eq!(again, cfg);
    assert_eq!(again.canonical(), canon);
}

#[test]
fn mixed_clt_power_constraint_is_named() {
    let text = MINIMAL.replace("statistic = \"qv\"", "statistic = \"y\"").replace(
        "base_seed = 1",
        "base_seed = 1\nkernel = \"d=2 l=1 p=1.5 q=4 regime=mixed-clt\"",
    );
    let e = parse_config(&text).unwrap_err();
    assert_eq!(e.key, "kernel");
    assert!(e.message.contains("0<p<1"), "{e}");
}

#[test]
fn zero_beta_rejected() {
    let text = MINIMAL.replace("statistic = \"qv\"", "statistic = \"qv\"\nbeta_grid = [0.5, 0.0]");
    let e = parse_config(&text).unwrap_err();
    assert!(e.key.contains("beta_grid"), "{e}");
}

#[test]
fn unknown_keys_rejected() {
    let text = MINIMAL.replace("reps = 20", "reps = 20\nrepz = 3");
    let e = parse_config(&text).unwrap_err();
    assert!(e.message.contains("repz"), "{e}");
    let text = MINIMAL.replace("drift = 0.0", "drift = 0.0\nvol = 1");
    assert!(parse_config(&text).is_err());
}

#[test]
fn n_list_must_increase() {
    let text = MINIMAL.replace("n_list = [256]", "n_list = [256, 128]");
    assert_eq!(parse_config(&text).unwrap_err().key, "experiment.n_list");
}

#[test]
fn missing_config_exits_with_usage() {
    let (code, _, err) = exec(&["verify-lln"]);
    assert_eq!(code, 1);
    assert!(err.contains("Usage"), "{err}");
    let (code, _, _) = exec(&["verify-lln", "--config", "/nonexistent/c.toml"]);
    assert_eq!(code, 1);
    let (code, _, _) = exec(&["no-such-command"]);
    assert_eq!(code, 1);
}

#[test]
fn verify_lln_writes_reports_identically_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", LLN);
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("out{threads}"));
        let (code, stdout, err) = exec(&["verify-lln", "--config", &cfg, "--threads", threads, "--output", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        assert!(stdout.contains("report.json") && stdout.contains("errors.csv"));
        assert!(out.join("manifest.json").exists());
        outputs.push((fs::read(out.join("report.json")).unwrap(), fs::read(out.join("errors.csv")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);

    let out = dir.path().join("seeded");
    let (code, _, _) = exec(&["verify-lln", "--config", &cfg, "--seed", "12", "--output", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_ne!(fs::read(out.join("errors.csv")).unwrap(), outputs[0].1);
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"base_seed\": 12"));
}

#[test]
fn grid_test_on_raw_increments() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("dx\n");
    for i in 0..400 {
        let v = match i {
            50 => 0.5,
            150 => 1.5,
            300 => -0.5,
            _ => 0.001 * ((i * 37 % 11) as f64 - 5.0),
        };
        csv.push_str(&format!("{v}\n"));
    }
    let input = write(dir.path(), "ticks.csv", &csv);
    let out = dir.path().join("grid");
    let (code, stdout, err) = exec(&["grid-test", "--input", &input, "--beta", "0.5:2.0:0.05", "--output", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("report.json"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scan"]["rows"].as_array().unwrap().len(), 31);
    let best = report["scan"]["argmin_beta"].as_f64().unwrap();
    assert!(best == 0.5 || best == 1.0, "{best}");

    let (code, _, _) = exec(&["grid-test", "--input", &input, "--beta", "0:2:0.1"]);
    assert_eq!(code, 1);
}

#[test]
fn stat_subcommand_runs_qv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", MINIMAL);
    let out = dir.path().join("o");
    let (code, _, err) = exec(&["stat", "--config", &cfg, "--output", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let mean = report["per_n"][0]["mean"].as_f64().unwrap();
    assert!((mean - 1.0).abs() < 0.1, "{mean}");
}

#[test]
fn simulate_and_limits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", LLN);
    for cmd in ["simulate", "limits"] {
        let out = dir.path().join(cmd);
        let (code, _, err) = exec(&[cmd, "--config", &cfg, "--output", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{cmd}: {err}");
    }
    assert!(dir.path().join("simulate/path_n128.json").exists());
    assert!(dir.path().join("limits/report.json").exists());
}
