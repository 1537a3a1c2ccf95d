//! A small replicated coverage study driven by a config string.
//!
//! This is the library form of `gfi run <config>`; the result files land in a
//! temporary directory whose path is printed.
//!
//! cargo run --release --example simulation_study

use fiducial::harness::{run_experiment, write_outputs, ExperimentConfig};

const CONFIG: &str = r#"
[experiment]
model = "network"
replicates = 40
draws = 300
seed = 1
workers = 2
levels = [0.90, 0.95]

[gfi]
lambda = "cv"
sigma = "estimate"

[scenario]
n = 60
p = 3
p_w = 0.3
p_b = 0.0
s = 0.0
sigma = 0.5
"#;

fn main() -> fiducial::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?.resolve()?;
    let outcome = run_experiment(&cfg)?;
    let dir = std::env::temp_dir().join("fiducial-simulation-study");
    write_outputs(&outcome, &dir)?;

    let report = &outcome.report;
    println!(
        "{} replicates, mean lambda {:.3}, mean sigma {:.3}",
        report.completed, report.mean_lambda, report.mean_sigma
    );
    println!("{:<10} {:>6} {:>9} {:>9} {:>8} {:>8}", "group", "level", "coverage", "width", "bias", "rmse");
    for g in &report.groups {
        for c in &g.coverage {
            println!(
                "{:<10} {:>6.2} {:>9.3} {:>9.4} {:>8.4} {:>8.4}",
                g.group, c.level, c.coverage, c.mean_width, g.bias, g.rmse
            );
        }
    }
    println!("files written to {}", dir.display());
    Ok(())
}
