use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use granflow::harness::config::{Experiment, Scenario};
use granflow::harness::{report, run_scenario};

/// Granular-media gradient flows in one dimension.
///
/// Exit status: 0 when every asserted envelope holds, 2 when one is
/// violated, 1 on a runtime error.
#[derive(Parser)]
#[command(name = "granflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve every initial datum (and particle ensembles, if configured).
    Simulate(RunArgs),
    /// Solve for the stationary state and audit it.
    Stationary(RunArgs),
    /// Contraction between pairs of solutions.
    Contract(RunArgs),
    /// Convergence to equilibrium with fitted rates.
    Converge(RunArgs),
    /// Probe the WJ inequality at the stationary state.
    WjProbe(RunArgs),
    /// Translation ratios r(M) for a confinement without uniform convexity.
    Counterexample(RunArgs),
    /// Summarize the results found under --out.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; results go to <out>/<scenario id>/.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replaces the scenario's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: &RunArgs, experiment: Experiment) -> Result<bool, String> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let mut s = Scenario::load(&args.config).map_err(|e| format!("{}: {e}", args.config.display()))?;
    s.experiment = experiment;
    if let Some(seed) = args.seed {
        s.seeds = vec![seed];
        s.run.probe_seed = seed;
    }
    s.validate().map_err(|e| e.to_string())?;
    let outcome = run_scenario(&s);
    outcome.write(&args.out).map_err(|e| e.to_string())?;
    for c in &outcome.checks {
        println!("{} {}: {}", if c.holds { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    for r in outcome.rows.iter().filter(|r| r.holds == Some(false)) {
        println!("FAIL {} {} = {:e}", r.cell, r.metric, r.value);
    }
    if let Some(f) = &outcome.failure {
        return Err(f.clone());
    }
    Ok(outcome.all_hold())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => run(a, Experiment::Simulate),
        Command::Stationary(a) => run(a, Experiment::StationaryOnly),
        Command::Contract(a) => run(a, Experiment::ContractPair),
        Command::Converge(a) => run(a, Experiment::Converge),
        Command::WjProbe(a) => run(a, Experiment::WjProbe),
        Command::Counterexample(a) => run(a, Experiment::Counterexample),
        Command::Report { out } => report::collect(out)
            .map_err(|e| e.to_string())
            .and_then(|rows| {
                let csv = report::to_csv(&rows);
                std::fs::write(out.join("report.csv"), &csv).map_err(|e| e.to_string())?;
                print!("{csv}");
                if rows.iter().any(|r| r.aborted) {
                    Err("at least one scenario stopped on an error".into())
                } else {
                    Ok(rows.iter().all(|r| r.status() == "pass"))
                }
            }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
