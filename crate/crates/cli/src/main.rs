//! `invpend`: run cart-pendulum controller scenarios and report step-response
//! metrics.
//!
//! Exit status: 0 on success, 1 if any simulation faulted or an output file
//! could not be written, 2 on a configuration or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use invpend_core::repro::repro;
use invpend_core::runner::run_matrix;
use invpend_core::{parse_scenario, Metrics, MetricsConfig, Scenario, Trajectory};

#[derive(Debug, Parser)]
#[command(
    name = "invpend",
    version,
    about = "Cart-pendulum controller comparison"
)]
struct Cli {
    /// Overrides the seed of every scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for trajectory CSVs and reports.
    #[arg(long, global = true, env = "INVPEND_OUT_DIR", default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate each scenario file and write trajectories plus a merged report.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Run the built-in study and print it beside the published figures.
    Repro {
        /// Also write trajectories and reports to the output directory.
        #[arg(long)]
        write: bool,
    },
    /// Metrics of an existing trajectory CSV.
    Analyze {
        csv: PathBuf,
        /// Settling band as a fraction of the reference.
        #[arg(long, default_value_t = 0.02)]
        band: f64,
        /// Fraction of the record averaged for the steady-state error.
        #[arg(long, default_value_t = 0.1)]
        tail: f64,
    },
    /// Print the LQR gain K, reference scaling N and Riccati solution P.
    LqrGain { config: PathBuf },
}

enum Failure {
    Config(String),
    Fault(String),
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut s =
        parse_scenario(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        s.sim.seed = seed;
    }
    Ok(s)
}

fn run(configs: &[PathBuf], seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let scenarios = configs
        .iter()
        .map(|p| load(p, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = run_matrix(&scenarios, out).map_err(|e| Failure::Config(e.to_string()))?;
    for r in &summary.reports {
        print!("{}", r.to_text());
    }
    for e in &summary.io_errors {
        eprintln!("write failed: {e}");
    }
    let faults: Vec<String> = summary
        .outcomes
        .iter()
        .filter_map(|o| {
            o.result
                .as_ref()
                .err()
                .map(|e| format!("{}: {e}", o.scenario.name))
        })
        .collect();
    if !faults.is_empty() || !summary.io_errors.is_empty() {
        return Err(Failure::Fault(faults.join("\n")));
    }
    Ok(())
}

fn analyze(path: &Path, band: f64, tail: f64) -> Result<(), Failure> {
    if !(band > 0.0 && band < 1.0 && tail > 0.0 && tail <= 1.0) {
        return Err(Failure::Config(format!(
            "band must lie in (0, 1) and tail in (0, 1] (got {band}, {tail})"
        )));
    }
    let file =
        fs::File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let traj = Trajectory::read_csv(file)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if traj.is_empty() {
        return Err(Failure::Config(format!("{}: no samples", path.display())));
    }
    let cfg = MetricsConfig {
        band_fraction: band,
        tail_fraction: tail,
    };
    println!(
        "{:<10} {:>12} {:>14} {:>14}",
        "signal", "settling_s", "overshoot_pct", "sse"
    );
    for (name, m) in [
        ("x", Metrics::of_position(&traj, &cfg)),
        ("theta", Metrics::of_angle(&traj, &cfg)),
        ("x_dot", Metrics::of_velocity(&traj, &cfg)),
    ] {
        println!(
            "{:<10} {:>12} {:>14.4} {:>14.6}",
            name,
            m.settling_label(),
            m.overshoot_pct,
            m.steady_state_error
        );
    }
    Ok(())
}

fn lqr_gain(path: &Path) -> Result<(), Failure> {
    let s = load(path, None)?;
    let (ctrl, sol) = s
        .synthesize_lqr()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let row = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    println!("equilibrium: {:?}", s.lqr.equilibrium);
    println!("K = [{}]", row(ctrl.k_gain.as_slice()));
    println!("N = {:.6}", ctrl.n_scale);
    println!("P =");
    for i in 0..sol.p.nrows() {
        let r: Vec<f64> = sol.p.row(i).iter().copied().collect();
        println!("  [{}]", row(&r));
    }
    println!("residual = {:e}", sol.residual);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { configs } => run(configs, cli.seed, &cli.out),
        Command::Repro { write } => {
            let out = repro(cli.seed.unwrap_or(0), write.then_some(cli.out.as_path()));
            print!("{}", out.text);
            for e in &out.summary.io_errors {
                eprintln!("write failed: {e}");
            }
            Ok(())
        }
        Command::Analyze { csv, band, tail } => analyze(csv, *band, *tail),
        Command::LqrGain { config } => lqr_gain(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Fault(msg)) => {
            if !msg.is_empty() {
                eprintln!("{msg}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
