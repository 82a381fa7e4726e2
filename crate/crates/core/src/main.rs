use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gridbarrier::experiment::{run_experiment, sweep};
use gridbarrier::netmodel::{generate_synthetic_feeder, save_network};
use gridbarrier::output::{format_summary, write_experiment};
use gridbarrier::scenario::{load_scenario, Scenario};
use gridbarrier::Error;

#[derive(Parser)]
#[command(name = "gridbarrier", version, about = "Barrier-based inverter voltage control on radial feeders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic feeder as network CSV.
    GenFeeder {
        #[arg(long, default_value_t = 56)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1.3)]
        overload: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario and write per-method CSVs, plots and a summary.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario and print the method comparison.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Vary the model-noise magnitude and tabulate safety and optimality gap.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.2, 0.5])]
        magnitudes: Vec<f64>,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<Scenario, Error> {
    let mut sc = load_scenario(path)?;
    sc.apply_seed_env()?;
    Ok(sc)
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map(|v| format!("{v:.prec$}")).unwrap_or_else(|| "-".into())
}

fn execute(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::GenFeeder { n, seed, overload, out } => {
            if n == 0 || !(overload > 0.0) {
                return Err(Error::Validation {
                    path: out,
                    line: 0,
                    message: format!("need n >= 1 and a positive overload factor, got n={n}, overload={overload}"),
                });
            }
            let net = generate_synthetic_feeder(n, seed, overload);
            save_network(&net, &out)?;
            println!("wrote {}-bus feeder to {}", n, out.display());
        }
        Command::Run { scenario, out } => {
            let ex = run_experiment(&load(&scenario)?)?;
            write_experiment(&ex, &out)?;
            print!("{}", format_summary(&ex));
            println!("outputs in {}", out.display());
        }
        Command::Compare { scenario } => {
            let ex = run_experiment(&load(&scenario)?)?;
            print!("{}", format_summary(&ex));
        }
        Command::Sweep { scenario, magnitudes, out } => {
            if magnitudes.iter().any(|m| !(0.0..1.0).contains(m)) {
                return Err(Error::Validation {
                    path: PathBuf::from("--magnitudes"),
                    line: 0,
                    message: "magnitudes must lie in [0, 1)".into(),
                });
            }
            let sc = load(&scenario)?;
            let rows = sweep(&sc, &magnitudes)?;
            let x_bar = sc.x_bar();
            let mut csv = String::from("magnitude,relative_error,eps_b,barrier_max_x,safe,barrier_steps,optimality_gap,lcqp_estimate_max_x\n");
            println!(
                "{:>9} {:>9} {:>12} {:>14} {:>5} {:>8} {:>9} {:>14}",
                "magnitude", "rel_err", "eps_b", "barrier_max_x", "safe", "steps", "gap", "lcqp_est_max_x"
            );
            for r in &rows {
                let safe = match r.safe(x_bar) {
                    Some(true) => "yes",
                    Some(false) => "NO",
                    None => "-",
                };
                let steps = r.barrier_steps.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
                println!(
                    "{:>9.3} {:>9.4} {:>12.4e} {:>14} {:>5} {:>8} {:>9} {:>14}{}",
                    r.magnitude,
                    r.relative_error,
                    r.eps_b,
                    opt(r.barrier_max_x, 6),
                    safe,
                    steps,
                    opt(r.optimality_gap, 4),
                    opt(r.lcqp_estimate_max_x, 6),
                    r.error.as_deref().map(|e| format!("  ({e})")).unwrap_or_default()
                );
                let _ = writeln!(
                    csv,
                    "{},{:.8e},{:.8e},{},{},{},{},{}",
                    r.magnitude,
                    r.relative_error,
                    r.eps_b,
                    r.barrier_max_x.map(|v| format!("{v:.8e}")).unwrap_or_default(),
                    r.safe(x_bar).map(|s| u8::from(s).to_string()).unwrap_or_default(),
                    r.barrier_steps.map(|s| s.to_string()).unwrap_or_default(),
                    r.optimality_gap.map(|v| format!("{v:.8e}")).unwrap_or_default(),
                    r.lcqp_estimate_max_x.map(|v| format!("{v:.8e}")).unwrap_or_default(),
                );
            }
            if let Some(path) = out {
                std::fs::write(&path, csv).map_err(|e| Error::Io { path, source: e })?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
