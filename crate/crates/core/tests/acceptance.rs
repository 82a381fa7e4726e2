//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gridbarrier::baselines::{solve_lcqp, Constraint};
use gridbarrier::controller::{self, compute_alpha_kkt, contraction_bound, gradient_feedback, BarrierConfig};
use gridbarrier::experiment::{run_experiment, Method};
use gridbarrier::linalg::{norm2, Matrix};
use gridbarrier::netmodel::{build_impedance_matrices, common_path_oracle, generate_synthetic_feeder, SensitivityModel};
use gridbarrier::output::write_experiment;
use gridbarrier::plant::{tune_perturbation, InverterLimits, Plant};
use gridbarrier::scenario::{load_scenario, Scenario};
use gridbarrier::Error;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn wide_limits(dim: usize) -> InverterLimits {
    InverterLimits::new(vec![-1000.0; dim], vec![1000.0; dim]).unwrap()
}

fn config_for(n: usize) -> BarrierConfig {
    let mut cfg = BarrierConfig::new(n, 3.0, 1.0, 0.05);
    cfg.max_iters = 200_000;
    cfg
}

/// Small feeders whose QP optimum has one active voltage row and no active bound.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (mut accepted, mut seed, mut worst_u, mut worst_alpha) = (0, 0u64, 0.0f64, 0.0f64);
    while accepted < 50 {
        seed += 1;
        if seed > 5000 {
            return Err(format!("only {accepted} single-row instances in 5000 draws"));
        }
        let n = 2 + (seed as usize % 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = generate_synthetic_feeder(n, seed, rng.gen_range(1.1..2.0));
        let model = SensitivityModel::from_network(&net).unwrap();
        let cfg = config_for(n);
        let limits = wide_limits(2 * n);
        let q = Matrix::from_diag(&cfg.q_diag);
        let sol = match solve_lcqp(&q, &model.b, &model.e, &cfg.x_bar, &limits) {
            Ok(s) => s,
            Err(Error::Infeasible) => continue,
            Err(e) => return Err(e.to_string()),
        };
        let voltage_rows = sol.active_set.iter().filter(|c| matches!(c, Constraint::Voltage(_))).count();
        if voltage_rows != 1 || sol.active_set.len() != 1 {
            continue;
        }
        accepted += 1;
        let plant = Plant::new(model.clone());
        let run = controller::run(&plant, &model.b, 0.0, &cfg, &limits, &net.p_av()).map_err(|e| e.to_string())?;
        check(run.trajectory.converged(), || format!("seed {seed}: no convergence"))?;
        let du = run.trajectory.final_u().iter().zip(&sol.u_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let da = run.state.alpha_s.iter().zip(&sol.multipliers).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_u = worst_u.max(du);
        worst_alpha = worst_alpha.max(da);
        check(du <= 1e-4, || format!("seed {seed}: |u - u*| = {du:e}"))?;
        check(da <= 1e-6, || format!("seed {seed}: |alpha - lambda*| = {da:e}"))?;
    }
    let elapsed = start.elapsed();
    check(elapsed <= Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("50 feeders, max |u-u*| {worst_u:.2e}, max |alpha-lambda| {worst_alpha:.2e}, {elapsed:.2?}"))
}

/// Single-row systems with arbitrary nonnegative rows, plus the active voltage
/// rows of QP optima (which may hold several rows).
fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut negative_rhs, mut multi_row, mut min_alpha) = (0, 0, f64::INFINITY);
    for k in 0..100 {
        let dim = rng.gen_range(2..12);
        let q = Matrix::from_diag(&(0..dim).map(|_| rng.gen_range(0.5..6.0)).collect::<Vec<_>>());
        let row: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
        let rhs = rng.gen_range(-1.0..0.5);
        let b = Matrix::from_vec(1, dim, row).unwrap();
        let (_, alpha) = compute_alpha_kkt(&q, &b, &[rhs]).map_err(|e| format!("system {k}: {e}"))?;
        if rhs < 0.0 {
            negative_rhs += 1;
            min_alpha = min_alpha.min(alpha[0]);
            check(alpha[0] >= -1e-10, || format!("system {k}: alpha {}", alpha[0]))?;
        }
    }
    let mut systems = 0;
    let mut seed = 0u64;
    while systems < 100 {
        seed += 1;
        let n = rng.gen_range(3..12);
        let net = generate_synthetic_feeder(n, 9000 + seed, rng.gen_range(1.2..3.0));
        let model = SensitivityModel::from_network(&net).unwrap();
        let cfg = config_for(n);
        let q = Matrix::from_diag(&cfg.q_diag);
        let sol = match solve_lcqp(&q, &model.b, &model.e, &cfg.x_bar, &wide_limits(2 * n)) {
            Ok(s) => s,
            Err(Error::Infeasible) => continue,
            Err(e) => return Err(e.to_string()),
        };
        let active: Vec<usize> =
            sol.active_set.iter().filter_map(|c| if let Constraint::Voltage(i) = c { Some(*i) } else { None }).collect();
        if active.is_empty() || sol.active_set.len() != active.len() {
            continue;
        }
        systems += 1;
        if active.len() > 1 {
            multi_row += 1;
        }
        let rows = model.b.select(&active, &(0..2 * n).collect::<Vec<_>>());
        let rhs: Vec<f64> = active.iter().map(|&i| cfg.x_bar[i] - model.e[i]).collect();
        let (_, alpha) = compute_alpha_kkt(&q, &rows, &rhs).map_err(|e| format!("feeder {seed}: {e}"))?;
        if rhs.iter().all(|&r| r < 0.0) {
            negative_rhs += 1;
            for (a, &i) in alpha.iter().zip(&active) {
                min_alpha = min_alpha.min(*a);
                check(*a >= -1e-10, || format!("feeder {seed} row {i}: alpha {a}"))?;
                check((a - sol.multipliers[i]).abs() <= 1e-6, || format!("feeder {seed} row {i}: oracle mismatch"))?;
            }
        }
    }
    check(multi_row > 0, || "no multi-row active set was drawn".into())?;
    Ok(format!("200 systems solved ({multi_row} multi-row), {negative_rhs} with rhs < 0, min alpha {min_alpha:.3e}"))
}

/// Safety is claimed for converged runs only. When two buses compete for the
/// attention slot the controller can cycle between them without converging;
/// those runs are counted and reported but carry no safety claim.
fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (mut scenarios, mut cycling, mut worst_margin, mut max_err) = (0, 0, f64::NEG_INFINITY, 0.0f64);
    let mut k = 0u64;
    while scenarios < 100 {
        if k >= 400 {
            return Err(format!("only {scenarios} converged scenarios in 400 draws"));
        }
        let n = 6 + (k as usize % 25);
        let mut rng = ChaCha8Rng::seed_from_u64(300 + k);
        let net = generate_synthetic_feeder(n, 300 + k, rng.gen_range(1.1..1.6));
        let model = SensitivityModel::from_network(&net).unwrap();
        let target = 0.55 * (k % 12) as f64 / 11.0;
        let est = tune_perturbation(&model.b, target, k);
        k += 1;
        if est.relative_error > 0.55 {
            continue;
        }
        let limits = InverterLimits::from_network(&net, 0.4, true);
        let mut cfg = config_for(n);
        cfg.max_iters = 100_000;
        let plant = Plant::new(model);
        let run = match controller::run(&plant, &est.b_hat, est.eps_b, &cfg, &limits, &net.p_av()) {
            Ok(r) => r,
            Err(Error::NotActivated { .. }) => continue,
            Err(e) => return Err(format!("scenario {}: {e}", k - 1)),
        };
        let t = &run.trajectory;
        if !t.converged() {
            cycling += 1;
            continue;
        }
        let margin = t.last().unwrap().max_x - 0.05;
        check(margin <= 1e-6, || format!("scenario {} (error {:.3}): max x exceeds limit by {margin:e}", k - 1, est.relative_error))?;
        worst_margin = worst_margin.max(margin);
        max_err = max_err.max(est.relative_error);
        scenarios += 1;
    }
    let elapsed = start.elapsed();
    check(elapsed <= Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{scenarios} converged scenarios safe, relative error up to {max_err:.3}, worst final margin {worst_margin:.3e} \
         ({cycling} of {k} draws did not converge), {elapsed:.2?}"
    ))
}

fn criterion_4() -> Outcome {
    let (mut worst_gap, mut runs, mut feeders, mut skipped) = (f64::NEG_INFINITY, 0, 0, 0);
    let mut k = 0u64;
    while feeders < 10 {
        if k >= 100 {
            return Err(format!("only {feeders} converging feeders in 100 draws"));
        }
        let n = 5 + (k as usize % 10);
        let net = generate_synthetic_feeder(n, 400 + k, 1.3);
        let model = SensitivityModel::from_network(&net).unwrap();
        let est = if k.is_multiple_of(2) { gridbarrier::plant::ModelEstimate::exact(&model.b) } else { tune_perturbation(&model.b, 0.3, k) };
        k += 1;
        let limits = InverterLimits::from_network(&net, 0.4, true);
        let cfg = config_for(n);
        let plant = Plant::new(model);
        let run = controller::run(&plant, &est.b_hat, est.eps_b, &cfg, &limits, &net.p_av()).map_err(|e| e.to_string())?;
        let t = &run.trajectory;
        if !t.converged() {
            skipped += 1;
            continue;
        }
        feeders += 1;
        let rho = contraction_bound(&run.state, &cfg, &est.b_hat, est.eps_b);
        let us = t.final_u();
        let dist = |u: &[f64]| norm2(&u.iter().zip(us).map(|(a, b)| a - b).collect::<Vec<_>>());
        let m = t.records.len();
        for w in t.records[m.saturating_sub(12)..m - 1].windows(2) {
            let (d0, d1) = (dist(&w[0].u), dist(&w[1].u));
            if d0 > 0.0 && d1 > 0.0 {
                let ratio = d1 / d0;
                worst_gap = worst_gap.max(ratio - rho);
                check(ratio <= rho + 0.05, || format!("feeder {}: contraction {ratio} > rho {rho} + 0.05", k - 1))?;
            }
        }

        let l_s = run.state.lipschitz;
        for c in [0.1, 0.5, 0.9, 0.99] {
            let mut cfg2 = cfg.clone();
            cfg2.eta_override = Some(c * 2.0 / l_s);
            let r2 = controller::run(&plant, &est.b_hat, est.eps_b, &cfg2, &limits, &net.p_av()).map_err(|e| e.to_string())?;
            check(r2.trajectory.converged(), || format!("feeder {}: eta = {c} * 2/L_s did not converge", k - 1))?;
            runs += 1;
        }
        let mut cfg3 = cfg.clone();
        cfg3.eta_override = Some(2.5 / l_s);
        cfg3.max_iters = 2000;
        // outside the bound anything is allowed; it only has to run
        let _ = controller::run(&plant, &est.b_hat, est.eps_b, &cfg3, &limits, &net.p_av());
    }
    Ok(format!(
        "{feeders} feeders ({skipped} non-converging draws skipped), worst contraction - rho = {worst_gap:.3e}, \
         {runs} runs inside (0, 2/L_s) converged"
    ))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let n = rng.gen_range(2..10);
        let net = generate_synthetic_feeder(n, 500 + k, 1.3);
        let model = SensitivityModel::from_network(&net).unwrap();
        let cfg = config_for(n);
        let limits = InverterLimits::from_network(&net, 0.4, false);
        let x0 = gridbarrier::plant::measure(&model, &vec![0.0; 2 * n]).unwrap();
        let mut state = controller::initialize(&cfg, &limits, &net.p_av(), &x0).map_err(|e| e.to_string())?;
        state.u = (0..2 * n).map(|_| rng.gen_range(-0.5..0.2)).collect();
        state.attention = rng.gen_range(0..n);
        state.alpha_s[state.attention] = rng.gen_range(0.1..50.0);
        let i = state.attention;
        let (alpha, beta) = (state.alpha_s[i], cfg.beta[i]);
        let aug = |u: &[f64]| -> f64 {
            let quad: f64 = 0.5 * u.iter().zip(&cfg.q_diag).map(|(u, q)| q * u * u).sum::<f64>();
            let xi: f64 = model.b.row(i).iter().zip(u).map(|(b, u)| b * u).sum::<f64>() + model.e[i];
            quad + alpha / beta * (beta * (xi - cfg.x_bar[i])).exp()
        };
        let x = gridbarrier::plant::measure(&model, &state.u).unwrap();
        if beta * (x[i] - cfg.x_bar[i]) >= controller::EXPONENT_CAP {
            return Err(format!("state {k} is outside the uncapped region"));
        }
        let f = gradient_feedback(&state, &cfg, &model.b, &x);
        let h = 1e-6;
        let fd: Vec<f64> = (0..2 * n)
            .map(|j| {
                let mut up = state.u.clone();
                let mut dn = state.u.clone();
                up[j] += h;
                dn[j] -= h;
                (aug(&up) - aug(&dn)) / (2.0 * h)
            })
            .collect();
        let err = norm2(&f.iter().zip(&fd).map(|(a, b)| a - b).collect::<Vec<_>>()) / norm2(&f);
        worst = worst.max(err);
        check(err <= 1e-5, || format!("state {k}: relative error {err:e}"))?;
    }
    Ok(format!("20 states, worst relative error {worst:.2e}"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let n = rng.gen_range(1..=60);
        let net = generate_synthetic_feeder(n, 600 + k, 1.0);
        let (r, x) = build_impedance_matrices(&net).map_err(|e| e.to_string())?;
        let (ro, xo) = common_path_oracle(&net).map_err(|e| e.to_string())?;
        let d = r.sub(&ro).unwrap().max_abs().max(x.sub(&xo).unwrap().max_abs());
        worst = worst.max(d);
        check(d <= 1e-9, || format!("tree {k} (n={n}): deviation {d:e}"))?;
    }
    Ok(format!("100 trees up to 60 buses, worst deviation {worst:.2e}"))
}

fn criterion_7() -> Outcome {
    let sc = load_scenario(&data("feeder56.toml")).map_err(|e| e.to_string())?;
    let ex = run_experiment(&sc).map_err(|e| e.to_string())?;
    let x_bar = sc.x_bar();
    let rows = ex.summary();
    let row = |m: Method| rows.iter().find(|r| r.method == m).unwrap();
    let err = ex.setup.estimate.relative_error;
    check((err - 0.5).abs() <= 0.05, || format!("model error {err}"))?;

    let nc = row(Method::NoControl).final_max_x.ok_or("no-control failed")?;
    check(nc > x_bar, || format!("(a) no-control max {nc} within limit"))?;
    let barrier = ex.trajectory(Method::Barrier).ok_or_else(|| row(Method::Barrier).note.clone())?;
    let bmax = barrier.last().unwrap().max_x;
    check(bmax <= x_bar + 1e-6, || format!("(b) barrier final max {bmax}"))?;
    let bviol = barrier.violation_steps();
    let pd = ex.trajectory(Method::PrimalDual).ok_or_else(|| row(Method::PrimalDual).note.clone())?;
    let pviol = pd.records.iter().skip(1).filter(|r| r.violation).count();
    check(bviol == 0, || format!("(c) barrier has {bviol} violating steps"))?;
    check(pviol >= 1, || "(c) primal-dual never violated".into())?;
    // a run that never met its tolerance took more than its budget
    let steps = |t: &gridbarrier::trajectory::Trajectory| if t.converged() { t.steps() } else { usize::MAX };
    let (bs, ps) = (steps(barrier), steps(pd));
    check(bs < ps, || format!("(d) barrier {bs} steps vs primal-dual {ps}"))?;
    let pd_steps = if pd.converged() { pd.steps().to_string() } else { format!("> {}", pd.steps()) };
    Ok(format!(
        "error {:.1}%, no-control {:.5}, barrier {:.5} in {bs} steps with 0 violations, primal-dual {pviol} violating steps and {pd_steps} steps",
        100.0 * err,
        nc,
        bmax
    ))
}

fn criterion_8() -> Outcome {
    let mut scenarios = vec![load_scenario(&data("feeder56.toml")).map_err(|e| e.to_string())?];
    let mut small = Scenario::synthetic(12, 8, 1.4);
    small.model = gridbarrier::scenario::ModelSpec::Target { relative_error: 0.3, seed: 5 };
    small.primal_dual.max_iters = 2000;
    scenarios.push(small);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        for (k, sc) in scenarios.iter().enumerate() {
            let ex = run_experiment(sc).map_err(|e| e.to_string())?;
            write_experiment(&ex, &dir.path().join(k.to_string())).map_err(|e| e.to_string())?;
        }
    }
    let mut files = 0;
    for k in 0..scenarios.len() {
        let a = dirs[0].path().join(k.to_string());
        let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for name in names {
            if !name.to_string_lossy().ends_with(".csv") {
                continue;
            }
            let x = std::fs::read(a.join(&name)).unwrap();
            let y = std::fs::read(dirs[1].path().join(k.to_string()).join(&name)).map_err(|e| e.to_string())?;
            check(x == y, || format!("{name:?} differs between runs"))?;
            files += 1;
        }
    }
    check(files >= 8, || format!("only {files} CSVs compared"))?;
    Ok(format!("{files} trajectory CSVs byte-identical across two runs"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 oracle equivalence", criterion_1),
        ("2 KKT weights", criterion_2),
        ("3 safety under model error", criterion_3),
        ("4 convergence rate", criterion_4),
        ("5 gradient check", criterion_5),
        ("6 path-sum impedance", criterion_6),
        ("7 56-bus comparison", criterion_7),
        ("8 determinism", criterion_8),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("PASS criterion {name}: {detail} [{:.2?}]", start.elapsed()),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL criterion {name}: panicked");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
