use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use fiducial::harness::{run_experiment, write_outputs, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "gfi", version, about = "Run fiducial coverage experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        draws: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let Command::Run {
        config,
        seed,
        workers,
        out_dir,
        replicates,
        draws,
    } = Cli::parse().command;
    let run = || -> fiducial::Result<()> {
        let mut cfg = ExperimentConfig::from_path(&config)?;
        cfg.apply(&Overrides {
            seed,
            workers,
            out_dir,
            replicates,
            draws,
        });
        let resolved = cfg.resolve()?;
        let dir = resolved
            .out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("gfi-out"));
        let start = Instant::now();
        let outcome = run_experiment(&resolved)?;
        write_outputs(&outcome, &dir)?;
        let rep = &outcome.report;
        println!(
            "{} of {} replicates completed in {:.1} s; results in {}",
            rep.completed,
            resolved.replicates,
            start.elapsed().as_secs_f64(),
            dir.display()
        );
        for g in &rep.groups {
            for c in &g.coverage {
                println!(
                    "  {:<10} level {:.2}  coverage {:.4}  width {:.4}",
                    g.group, c.level, c.coverage, c.mean_width
                );
            }
        }
        println!(
            "  {} {:.6}",
            rep.estimation_error_kind, rep.estimation_error
        );
        Ok(())
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gfi: {e}");
            ExitCode::FAILURE
        }
    }
}
