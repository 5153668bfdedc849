//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
//!
//! Run alone with `cargo test -p vstat-core --test acceptance`.

use std::collections::BTreeSet;
use std::time::Instant;

use nalgebra::SymmetricEigen;
use vstat_core::harness::{
    grid_scan, run, run_with_threads, ExperimentKind, ExperimentPlan, ExperimentReport, GridData,
};
use vstat_core::kernels::{abs_moment, rho_with, Integrand, KernelSpec, LExpr, Regime, RhoMethod};
use vstat_core::law::{augment, MixedLimitSampler};
use vstat_core::limits::{cond_var_mixed, jump_limit, Evaluation, MixedParts};
use vstat_core::rng::{derive, rep_seed};
use vstat_core::sim::{simulate_path, JumpModel, ModelConfig, SamplePath, VolatilityModel};
use vstat_core::stats::{full_sum, nested_full, nested_ordered, ordered_sum, power_variation, realized_qv, Choice, Increments};

type Outcome = (bool, String);

/// Shifts every base seed; `VSTAT_SEED_OFFSET=k` reruns the suite on fresh randomness.
fn seed(s: u64) -> u64 {
    let off: u64 = std::env::var("VSTAT_SEED_OFFSET").ok().and_then(|v| v.parse().ok()).unwrap_or(0);
    if off == 0 {
        s
    } else {
        derive(s, off)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

fn kernel(text: &str) -> KernelSpec {
    text.parse().expect("kernel text")
}

/// Brownian part with `σ = 0.5` and five expected jumps with `|z| ∈ [0.5, 3]`.
fn jump_model() -> ModelConfig {
    ModelConfig::new(0.0, VolatilityModel::constant(0.5), JumpModel::trunc_normal(5.0, 0.0, 1.0, 0.5, 3.0))
}

fn mixed_model() -> ModelConfig {
    ModelConfig::new(0.0, VolatilityModel::constant(1.0), JumpModel::atoms(2.0, vec![(0.6, 0.5), (-0.6, 0.5)]))
}

fn brownian(sigma: f64) -> ModelConfig {
    ModelConfig::new(0.0, VolatilityModel::constant(sigma), JumpModel::none())
}

fn plan(kind: ExperimentKind, model: ModelConfig, k: &str, n_list: Vec<u64>, reps: usize, base: u64) -> ExperimentPlan {
    ExperimentPlan::new(kind, model, kernel(k), n_list, reps, seed(base))
}

fn qv_means(model: &ModelConfig, base: u64) -> f64 {
    let v: Vec<f64> = (0..500)
        .map(|r| {
            let p = simulate_path(model, 4096, 1.0, rep_seed(seed(base), r)).unwrap();
            realized_qv(&Increments::from_path(&p), 1.0).unwrap().value
        })
        .collect();
    mean(&v)
}

fn c1() -> Outcome {
    let plain = qv_means(&brownian(1.0), 101);
    let jumps = JumpModel::atoms(5.0, vec![(0.2, 0.5), (-0.2, 0.5)]);
    // E[Σ ΔX²] = λ E[z²] for a compound Poisson process on [0, 1].
    let target = 1.0 + 5.0 * jumps.second_moment().unwrap();
    let with = qv_means(&ModelConfig::new(0.0, VolatilityModel::constant(1.0), jumps), 102);
    let ok = (0.99..=1.01).contains(&plain) && ((with - target) / target).abs() <= 0.01;
    (ok, format!("no jumps mean {plain:.5} in [0.99, 1.01]; with jumps mean {with:.5} vs {target} (rel {:.4})", (with - target) / target))
}

fn c2() -> Outcome {
    let m1 = abs_moment(1.0);
    // Independent oracle: composite Simpson for 2∫_0^40 x φ(x) dx.
    let (a, b, steps) = (0.0, 40.0, 400_000usize);
    let h = (b - a) / steps as f64;
    let f = |x: f64| 2.0 * x * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(a) + f(b);
    for i in 1..steps {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let oracle = s * h / 3.0;
    let dev: Vec<f64> = (0..200)
        .map(|r| {
            let p = simulate_path(&brownian(1.0), 4096, 1.0, rep_seed(seed(201), r)).unwrap();
            (power_variation(&Increments::from_path(&p), 1.0, true, 1.0).unwrap().value - m1).abs()
        })
        .collect();
    let med = median(dev);
    let ok = (m1 - oracle).abs() <= 1e-10 && med < 0.01;
    (ok, format!("|m1 - oracle| = {:.2e}; median |PV - m1| = {med:.5}", (m1 - oracle).abs()))
}

fn c3() -> Outcome {
    let r = run(&plan(ExperimentKind::Lln, jump_model(), "d=2 l=2 p=4,4 regime=jump-lln", vec![512, 2048, 8192], 200, 301)).unwrap();
    let med: Vec<f64> = r.tables.iter().map(|t| t.median_rel_error.unwrap()).collect();
    let ok = med.windows(2).all(|w| w[1] < w[0]) && med[2] < 0.05;
    (ok, format!("median relative errors {med:.4?} (slope {:.3?})", r.rate_slope))
}

fn clt_line(r: &ExperimentReport, n: u64) -> (bool, String) {
    let t = r.table(n).unwrap();
    let ks = t.ks_normal.unwrap();
    let var = t.z_moments.as_ref().unwrap().variance;
    let ok = ks.p_value > 0.01 && (0.85..=1.15).contains(&var);
    (ok, format!("KS p {:.3}, var(Z) {var:.3}, excluded {}", ks.p_value, t.excluded))
}

fn c4_c5() -> (Outcome, Outcome) {
    let one = run(&plan(ExperimentKind::CltJump, jump_model(), "d=1 l=1 p=4 regime=jump-clt", vec![4096], 1000, 401)).unwrap();
    let two = run(&plan(ExperimentKind::CltJump, jump_model(), "d=2 l=2 p=4,4 regime=jump-clt", vec![4096], 500, 402)).unwrap();
    let (a, da) = clt_line(&one, 4096);
    let (b, db) = clt_line(&two, 4096);
    let ks2 = one.table(4096).unwrap().ks_two_sample.unwrap();
    (
        (a && b, format!("d=1: {da}; d=2: {db}")),
        (ks2.p_value > 0.01, format!("two-sample KS D {:.4}, p {:.3} (1000 vs 1000)", ks2.statistic, ks2.p_value)),
    )
}

fn c6() -> Outcome {
    let r = run(&plan(ExperimentKind::Lln, mixed_model(), "d=2 l=1 p=0.5 q=4 regime=mixed-lln", vec![8192], 200, 601)).unwrap();
    // Independent closed form t·m_{1/2}·σ^{1/2}·Σ|ΔX|⁴ for the rows' paths.
    let m = abs_moment(0.5);
    let mut worst: f64 = 0.0;
    for row in &r.rows {
        let p = simulate_path(&r.plan.model, row.n, 1.0, row.seed).unwrap();
        let closed: f64 = m * p.jumps.iter().map(|j| j.size.powi(4)).sum::<f64>();
        if closed > 0.0 {
            worst = worst.max(((row.limit - closed) / closed).abs());
        }
    }
    let med = r.table(8192).unwrap().median_rel_error.unwrap();
    let ok = med < 0.05 && worst < 1e-10;
    (ok, format!("median relative error {med:.4}; limit vs closed form max rel {worst:.1e}"))
}

fn c7() -> Outcome {
    let r = run(&plan(ExperimentKind::CltMixed, mixed_model(), "d=2 l=1 p=0.5 q=4 regime=mixed-clt", vec![8192], 500, 701)).unwrap();
    let (_, da) = clt_line(&r, 8192);
    let ks_ok = r.table(8192).unwrap().ks_normal.unwrap().p_value > 0.01;
    let mut p2 = plan(ExperimentKind::CltMixed, mixed_model(), "d=2 l=1 p=0.5 q=4 regime=mixed-clt", vec![256], 1, 702);
    p2.jump_count = Some(2);
    let k = p2.kernel.clone();
    let mut devs = Vec::new();
    let mut ok_var = true;
    for rep in 0..3 {
        let path = vstat_core::harness::simulate_conditioned(&p2, 256, derive(seed(702), rep)).unwrap();
        let sampler = MixedLimitSampler::new(&path, &k, 1.0, true).unwrap();
        let draws: Vec<f64> = (0..10_000)
            .map(|s| {
                let aug = augment(&path, derive(path.seed, s));
                sampler.draw(&aug, aug.seed).unwrap().value
            })
            .collect();
        let want = cond_var_mixed(&path, &k, 1.0).unwrap().total;
        let rel = variance(&draws) / want - 1.0;
        ok_var &= rel.abs() <= 0.05;
        devs.push(rel);
    }
    (ks_ok && ok_var, format!("{da}; sampler variance rel dev on 2-jump paths {devs:.4?}"))
}

fn c8() -> Outcome {
    let mut worst_rho: f64 = 0.0;
    let cases: [(&str, Vec<f64>, Vec<f64>); 3] = [
        ("d=2 l=1 p=0.5 q=4 regime=mixed-clt", vec![0.8], vec![1.3]),
        ("d=3 l=2 p=0.3,0.7 q=4 regime=mixed-clt", vec![1.0, 0.4], vec![-0.6]),
        ("d=3 l=3 p=1.5,0.5,2.5 regime=mixed-lln", vec![0.7, 1.2, 2.0], vec![]),
    ];
    for (text, sig, y) in &cases {
        let k = kernel(text);
        let q = rho_with(&k, sig, y, Integrand::Value, RhoMethod::Quadrature).unwrap().value;
        let closed: f64 = k.p.iter().zip(sig).map(|(p, s)| abs_moment(*p) * s.powf(*p)).product::<f64>()
            * k.q.iter().zip(y).map(|(q, v)| v.abs().powf(*q)).product::<f64>();
        worst_rho = worst_rho.max(((q - closed) / closed).abs());
    }

    let k = kernel("d=2 l=1 p=0.5 q=4 regime=mixed-clt");
    let path = simulate_path(&brownian(1.0), 512, 1.0, seed(801)).unwrap();
    let pairs = [(0.7, 1.3), (-1.1, 0.4), (2.0, -2.0)];
    let want = |y: f64, y2: f64| (abs_moment(1.0) - abs_moment(0.5).powi(2)) * y.powi(4) * y2.powi(4);
    let mut worst_cov: f64 = 0.0;
    for eval in [Evaluation::Auto, Evaluation::Generic] {
        let parts = MixedParts::new(&path, &k, 1.0, eval).unwrap();
        for (y, y2) in pairs {
            worst_cov = worst_cov.max(((parts.cov(&[y], &[y2]) - want(y, y2)) / want(y, y2)).abs());
        }
    }

    let mut worst_psd: f64 = f64::INFINITY;
    let mut symmetric = true;
    let vol = ModelConfig::new(0.0, VolatilityModel::ito(1.0, 0.0, 0.3, 0.2), JumpModel::none());
    let vpath = simulate_path(&vol, 512, 1.0, seed(802)).unwrap();
    let kernels = [
        KernelSpec::new(2, 1, vec![0.5], vec![4.0], LExpr::gauss(0.5, 1), Regime::MixedClt).unwrap(),
        KernelSpec::new(2, 1, vec![0.5], vec![4.0], LExpr::Sum(vec![LExpr::One, LExpr::gauss(1.0, 0)]), Regime::MixedClt).unwrap(),
        KernelSpec::new(3, 1, vec![0.5], vec![4.0, 5.0], LExpr::poly(2, vec![1.0, 0.5]), Regime::MixedClt).unwrap(),
        kernel("d=3 l=2 p=0.3,0.7 q=4 regime=mixed-clt"),
    ];
    for k in &kernels {
        let parts = MixedParts::new(&vpath, k, 1.0, Evaluation::Auto).unwrap();
        let m = k.d - k.l;
        let ys: Vec<Vec<f64>> = (0..12).map(|i| (0..m).map(|c| -1.5 + 0.27 * i as f64 + 0.4 * c as f64).collect()).collect();
        let c = parts.cov_matrix(&ys);
        symmetric &= c == c.transpose();
        let tr = c.trace();
        let min = SymmetricEigen::new(c).eigenvalues.min();
        worst_psd = worst_psd.min(min / tr);
    }
    let ok = worst_rho <= 1e-8 && worst_cov <= 1e-6 && symmetric && worst_psd >= -1e-8;
    (ok, format!("rho rel {worst_rho:.1e}; cov_c rel {worst_cov:.1e}; symmetric {symmetric}; min eigenvalue/trace {worst_psd:.1e}"))
}

fn identifies_unit_lattice(p: &SamplePath) -> bool {
    // Sizes are half-integers; work with the integers 2z.
    let v: Vec<i64> = p.jumps.iter().map(|j| (2.0 * j.size).round() as i64).collect::<BTreeSet<_>>().into_iter().collect();
    let gcd = |mut a: i64, mut b: i64| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a.abs()
    };
    v.len() >= 2 && v[1..].iter().fold(0, |g, w| gcd(g, (w - v[0]) / 2)) == 1
}

fn c9() -> Outcome {
    let model = ModelConfig::new(
        0.0,
        VolatilityModel::constant(0.5),
        JumpModel::atoms(5.0, vec![(0.5, 0.2), (1.5, 0.2), (2.5, 0.2), (-0.5, 0.2), (-1.5, 0.2)]),
    );
    // First derived seed whose jump sizes identify the lattice: the differences
    // of the distinct sizes have gcd 1. Otherwise coarser β also give L(β) = 0.
    let path: SamplePath = (0..)
        .map(|i| simulate_path(&model, 8192, 1.0, derive(seed(901), i)).unwrap())
        .find(identifies_unit_lattice)
        .unwrap();
    let l1 = jump_limit(&path, &KernelSpec::grid_test(1.0).unwrap(), 1.0).unwrap().value;
    let l07 = jump_limit(&path, &KernelSpec::grid_test(0.7).unwrap(), 1.0).unwrap().value;
    let at = grid_scan(GridData::Path(&path), &[1.0, 0.37], 1.0).unwrap();
    let ratio = at.rows[0].normalized / at.rows[1].normalized;
    let grid: Vec<f64> = (0..=150).map(|i| 0.5 + 0.01 * i as f64).collect();
    let scan = grid_scan(GridData::Path(&path), &grid, 1.0).unwrap();
    let b = scan.argmin_beta;
    let near = |c: f64| (b - c).abs() <= 0.01 + 1e-9;
    let ok = l1 == 0.0 && l07 > 0.0 && ratio < 0.01 && (near(1.0) || near(0.5));
    (ok, format!("{} jumps; L(1) = {l1}; L(0.7) = {l07:.4}; stat(1)/stat(0.37) = {ratio:.2e}; argmin beta {b}", path.jumps.len()))
}

fn c10() -> Outcome {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed(1001));
    let catalog: Vec<KernelSpec> = vec![
        kernel("d=1 l=1 p=4 regime=jump-clt"),
        kernel("d=2 l=2 p=4,4 regime=jump-clt"),
        kernel("d=2 l=1 p=0.5 q=4 regime=mixed-clt"),
        kernel("d=3 l=2 p=0.3,0.7 q=4 regime=mixed-clt"),
        kernel("d=3 l=3 p=4,3.5,5 regime=jump-clt"),
        kernel("d=2 l=2 p=4,4 regime=grid-test L=(gridsin 0.8 0 1)"),
        kernel("d=3 l=1 p=0.5 q=4,4 regime=mixed-clt L=(gauss 0.7 1)"),
        kernel("d=2 l=1 p=1.5 q=3 regime=mixed-lln L=(poly 1 1 -0.5 0.25)"),
        kernel("d=3 l=3 p=4,4,4 regime=jump-clt L=(+ (gridsin 1.3 0 2) (* (gauss 0.5 1) (poly 0 2 1)))"),
        kernel("d=3 l=2 p=0.5,0.5 q=4 regime=mixed-clt L=(* (gridsin 0.6 2 0) (gauss 0.2 2))"),
        kernel("d=2 l=0 q=4,4 regime=mixed-lln L=(+ one (gauss 1 0))"),
    ];
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for k in &catalog {
        for n in [1usize, 2, 5, 17, 64] {
            if n < k.d {
                continue;
            }
            let data: Vec<f64> = (0..n)
                .map(|_| {
                    let g: f64 = rng.sample(rand_distr::StandardNormal);
                    if rng.random::<f64>() < 0.1 { 1.0 + g } else { 0.05 * g }
                })
                .collect();
            for scales in [vec![1.0; k.d], (0..k.d).map(|c| if c < k.l { 8.0 } else { 1.0 }).collect()] {
                let (f, _) = full_sum(k, &data, &scales, Choice::Factorized).unwrap();
                let b = nested_full(k, &data, &scales).unwrap();
                let (fo, _) = ordered_sum(k, &data, &scales, Choice::Factorized).unwrap();
                let bo = nested_ordered(k, &data, &scales).unwrap();
                for (x, y) in [(f, b), (fo, bo)] {
                    let rel = if y == 0.0 { x.abs() } else { ((x - y) / y).abs() };
                    worst = worst.max(rel);
                }
                checked += 1;
            }
        }
    }
    (worst <= 1e-12, format!("{} kernels, {checked} cases; max relative deviation {worst:.2e}", catalog.len()))
}

fn c11() -> Outcome {
    let model = ModelConfig::new(0.0, VolatilityModel::constant(1.0), JumpModel::atoms(1.0, vec![(1.0, 0.5), (-1.0, 0.5)]));
    let mut p = plan(ExperimentKind::Rnp, model, "d=1 l=1 p=2 regime=jump-lln", vec![4096], 2000, 1101);
    p.jump_count = Some(1);
    let r = run(&p).unwrap();
    let t = r.table(4096).unwrap();
    let ks = t.ks_two_sample.unwrap();
    let per_side = t.reps - t.excluded;
    (ks.p_value > 0.01, format!("two-sample KS D {:.4}, p {:.3}, {per_side} draws per side", ks.statistic, ks.p_value))
}

fn c12() -> Outcome {
    let model = ModelConfig::new(0.0, VolatilityModel::constant(0.5), JumpModel::trunc_normal(20.0, 0.0, 1.0, 0.2, 3.0));
    let mut p = plan(ExperimentKind::Ztrunc, model, "d=2 l=2 p=4,4 regime=jump-clt", vec![256], 4, 1201);
    p.jump_count = Some(20);
    p.aug_draws = 500;
    p.m_list = (0..=20).collect();
    let r = run(&p).unwrap();
    let med: Vec<f64> = r.truncation.iter().map(|t| t.median_abs_diff).collect();
    let ok = r.truncation_monotone == Some(true) && med[20] == 0.0;
    (ok, format!("4 paths x 500 seeds; medians m=0,5,10,15,20: {:.3e} {:.3e} {:.3e} {:.3e} {:.3e}", med[0], med[5], med[10], med[15], med[20]))
}

fn c13() -> Outcome {
    let mut plans = vec![
        plan(ExperimentKind::Lln, jump_model(), "d=2 l=2 p=4,4 regime=jump-lln", vec![256, 1024], 24, 1301),
        plan(ExperimentKind::CltMixed, mixed_model(), "d=2 l=1 p=0.5 q=4 regime=mixed-clt", vec![512], 24, 1302),
        plan(ExperimentKind::CltJump, jump_model(), "d=1 l=1 p=4 regime=jump-clt", vec![512], 24, 1303),
    ];
    let mut z = plan(ExperimentKind::Ztrunc, jump_model(), "d=1 l=1 p=4 regime=jump-clt", vec![128], 3, 1304);
    z.aug_draws = 20;
    z.m_list = vec![0, 1, 2, 3];
    plans.push(z);
    let mut g = plan(ExperimentKind::Grid, jump_model(), "d=2 l=2 p=4,4 regime=grid-test", vec![512], 1, 1305);
    g.beta_grid = vec![0.5, 0.75, 1.0];
    plans.push(g);
    plans[0].write_samples = true;
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    for (i, p) in plans.iter().enumerate() {
        let mut bytes = Vec::new();
        for threads in [1usize, 3, 8] {
            let out = dir.path().join(format!("p{i}_t{threads}"));
            let files = run_with_threads(p, threads).unwrap().write(&out).unwrap();
            bytes.push(files.iter().map(|f| std::fs::read(f).unwrap()).collect::<Vec<_>>());
        }
        identical &= bytes.windows(2).all(|w| w[0] == w[1]);
    }
    (identical, format!("{} plans x threads {{1, 3, 8}}: report files byte-identical = {identical}", plans.len()))
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(usize, Outcome, f64)> = Vec::new();
    std::thread::scope(|s| {
        let timed = |f: fn() -> Outcome| {
            move || {
                let t = Instant::now();
                let o = f();
                (o, t.elapsed().as_secs_f64())
            }
        };
        let singles: Vec<(usize, fn() -> Outcome)> =
            vec![(1, c1), (2, c2), (3, c3), (6, c6), (7, c7), (8, c8), (9, c9), (10, c10), (11, c11), (12, c12), (13, c13)];
        let handles: Vec<_> = singles.into_iter().map(|(i, f)| (i, s.spawn(timed(f)))).collect();
        let pair = s.spawn(|| {
            let t = Instant::now();
            let o = c4_c5();
            (o, t.elapsed().as_secs_f64())
        });
        for (i, h) in handles {
            let (o, secs) = h.join().unwrap_or_else(|_| ((false, "panicked".into()), 0.0));
            results.push((i, o, secs));
        }
        let ((o4, o5), secs) = pair.join().unwrap_or_else(|_| (((false, "panicked".into()), (false, "panicked".into())), 0.0));
        results.push((4, o4, secs));
        results.push((5, o5, secs));
    });
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (i, (ok, detail), secs) in &results {
        if !ok {
            failed += 1;
        }
        println!("{} criterion {i:>2}: {detail} [{secs:.1}s]", if *ok { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed in {:.1}s", results.len() - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
