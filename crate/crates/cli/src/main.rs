use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use snpair::args::{ScanArgs, ScenarioArgs};
use snpair::{converge, plot, run, scan, CliError};

#[derive(Parser)]
#[command(name = "snpair", version, about = "Two-body Schrödinger–Newton simulations")]
struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the stationary single-particle profile(s).
    GroundState(ScenarioArgs),
    /// Evolve one scenario.
    Run(ScenarioArgs),
    /// Sweep the mass ratio mu1/mu2 (pool width from SNPAIR_WORKERS).
    Scan(ScanArgs),
    /// Rerun a scenario under grid, domain and time-step refinement.
    Converge(ScenarioArgs),
    /// Render SVG figures from a run, scan or comparison directory.
    Plot {
        dir: PathBuf,
        /// Where to put the figures (default: DIR/plots).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Compare the full model with the Hartree product ansatz.
    CompareHartree(ScenarioArgs),
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serialisable"));
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::GroundState(args) => print_json(&run::ground_state(&args.scenario()?)?),
        Command::Run(args) => {
            let art = run::run_scenario(&args.scenario()?)?;
            for outcome in [art.full, art.hartree].into_iter().flatten() {
                print_json(&outcome.summary);
            }
        }
        Command::Scan(args) => {
            let points = scan::run_scan(&args.scan()?, scan::workers_from_env())?;
            println!("{:<11} {:>6} {:>10} {:>8} {:>9}", "profile", "ratio", "peak_S_vN", "t_peak", "peak_PR2");
            for p in points {
                match p.outcome {
                    Ok(r) => println!(
                        "{:<11} {:>6} {:>10.5} {:>8.2} {:>9.4}",
                        p.profile.name(),
                        p.ratio,
                        r.peak_s_vn,
                        r.t_peak,
                        r.peak_pr2
                    ),
                    Err(e) => println!("{:<11} {:>6} failed: {e}", p.profile.name(), p.ratio),
                }
            }
        }
        Command::Converge(args) => {
            for r in converge::run_convergence(&args.scenario()?)? {
                println!(
                    "{:<10} peak S_vN {:.8} (|d| {:.2e})  final dx_mean {:.6} (|d| {:.2e})",
                    r.name, r.peak_s_vn, r.delta_peak, r.final_dx_mean, r.delta_separation
                );
            }
        }
        Command::Plot { dir, out } => {
            let out = out.unwrap_or_else(|| dir.join("plots"));
            for note in plot::emit_plots(&dir, &out)? {
                eprintln!("note: {note}");
            }
        }
        Command::CompareHartree(args) => {
            let rows = run::compare_hartree(&args.scenario()?)?;
            if let Some(last) = rows.last() {
                let peak = rows.iter().map(|r| r.s_vn_full).fold(0.0, f64::max);
                let hartree = rows.iter().map(|r| r.s_vn_hartree).fold(0.0, f64::max);
                println!("peak S_vN full {peak:.6}, hartree {hartree:.3e}; final marginal distance {:.3e}", last.marginal_distance);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
