use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gridbarrier"));
    c.env_remove("GRIDBARRIER_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_scenario(dir: &Path, extra: &str) -> std::path::PathBuf {
    let p = dir.join("s.toml");
    let text = format!(
        "[network]\nsynthetic_n = 8\nsynthetic_seed = 3\noverload_factor = 1.3\n\
         [model]\ntarget_error = 0.2\nseed = 1\n[controller]\nmax_iters = 20000\n\
         [primal_dual]\nmax_iters = 300\n{extra}"
    );
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn gen_feeder_writes_a_loadable_network() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    let o = run(&["gen-feeder", "--n", "12", "--seed", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let net = gridbarrier::netmodel::load_network(&out).unwrap();
    assert_eq!(net.n(), 12);
}

#[test]
fn run_writes_csvs_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), "");
    let out = dir.path().join("out");
    let o = run(&["run", "--scenario", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["no-control", "lcqp-true", "barrier", "primal-dual"] {
        let csv = std::fs::read_to_string(out.join(format!("{name}.csv"))).unwrap();
        assert!(csv.starts_with("step,max_x,attention_bus,alpha_s,event,u_norm,violation\n"), "{name}");
    }
    let svg = std::fs::read_to_string(out.join("max_voltage.svg")).unwrap();
    assert!(svg.contains(">barrier</text>") && svg.contains(">primal-dual</text>"));
    assert!(out.join("profile.svg").exists() && out.join("summary.txt").exists());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("barrier") && stdout.contains("kV"));
}

#[test]
fn compare_prints_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), "");
    let o = run(&["compare", "--scenario", sc.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    for name in ["no-control", "lcqp-true", "lcqp-estimate", "barrier", "primal-dual"] {
        assert!(stdout.contains(name), "{name} missing from\n{stdout}");
    }
}

#[test]
fn sweep_has_one_row_per_magnitude() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), "");
    let table = dir.path().join("sweep.csv");
    let o = run(&[
        "sweep",
        "--scenario",
        sc.to_str().unwrap(),
        "--magnitudes",
        "0,0.2,0.5",
        "--out",
        table.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(table).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("magnitude,relative_error,eps_b"));
    assert!(lines[3].starts_with("0.5,"));
}

#[test]
fn missing_scenario_exits_1() {
    let o = run(&["compare", "--scenario", "/nonexistent/s.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/s.toml"));
}

#[test]
fn invalid_scenario_exits_1_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), "[limits]\nreactive_fraction = 3\n");
    let o = run(&["compare", "--scenario", sc.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("s.toml:13"), "{}", stderr(&o));
}

#[test]
fn bad_arguments_exit_1() {
    assert_eq!(run(&["run"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), "");
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = run(&["run", "--scenario", sc.to_str().unwrap(), "--out", blocker.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn seed_env_overrides_scenario_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), "");
    let go = |seed: Option<&str>, out: &str| {
        let out = dir.path().join(out);
        let mut c = bin();
        if let Some(s) = seed {
            c.env("GRIDBARRIER_SEED", s);
        }
        let o = c.args(["run", "--scenario", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out.join("no-control.csv")).unwrap()
    };
    let plain = go(None, "a");
    let seeded = go(Some("77"), "b");
    assert_ne!(plain, seeded);
    assert_eq!(seeded, go(Some("77"), "c"));

    let o = bin().env("GRIDBARRIER_SEED", "abc").args(["compare", "--scenario", sc.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}
