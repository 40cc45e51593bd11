use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use driftlab::cli::{cmd_report, cmd_solve, cmd_verify, load_config, summary_line, Overrides, EXIT_ERROR, EXIT_FAIL};
use driftlab::verify::parse_report;

#[derive(Parser)]
#[command(name = "driftlab", version, about = "Stokes-with-drift solver and inequality harnesses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Exhaustive cube and ball enumeration instead of the dyadic / geometric ladders.
    #[arg(long, global = true)]
    exhaustive: bool,
    /// Also run at `k`-fold resolution and report refinement deltas.
    #[arg(long, global = true)]
    refine: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver and write the trajectory.
    Solve,
    /// Run one check and write its report.
    Verify {
        /// rh, llogl, stein, cz, mazver, energy, caccioppoli, iteration, identity or pressure.
        which: String,
        /// Use a trajectory written by `solve` instead of re-solving.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Merge reports of one check.
    Report { paths: Vec<PathBuf> },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are operational errors, not failed checks
            return if e.use_stderr() { ExitCode::from(EXIT_ERROR as u8) } else { ExitCode::SUCCESS };
        }
    };
    let mut ov = Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        exhaustive: cli.exhaustive,
        refine: cli.refine,
        trajectory: None,
    };
    if matches!(cli.refine, Some(0)) {
        eprintln!("error: --refine must be at least 1");
        return ExitCode::from(EXIT_ERROR as u8);
    }
    let result = match cli.command {
        Command::Solve => load_config(cli.config.as_deref(), &ov).and_then(|cfg| {
            let (hash, files) = cmd_solve(&cfg, &ov)?;
            println!("config_hash {hash}");
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(true)
        }),
        Command::Verify { which, trajectory } => {
            ov.trajectory = trajectory;
            load_config(cli.config.as_deref(), &ov).and_then(|cfg| {
                let (pass, files) = cmd_verify(&cfg, &which, &ov)?;
                for f in files.iter().filter(|f| f.extension().is_some_and(|e| e == "json")) {
                    println!("{}  {}", summary_line(&parse_report(f)?), f.display());
                }
                Ok(pass)
            })
        }
        Command::Report { paths } => cmd_report(&paths, cli.out.as_deref()).map(|(merged, files)| {
            println!("{}", summary_line(&merged));
            for f in files {
                println!("wrote {}", f.display());
            }
            merged.summary.pass
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
