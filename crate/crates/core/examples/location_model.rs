//! Fiducial inference for a normal mean with known scale.
//!
//! Here the fiducial distribution is exactly N(ybar, sigma^2 / n), so the draws can be
//! checked against closed-form quantiles.
//!
//! cargo run --example location_model

use fiducial::engine::{run_autogfi, summarize, GfiConfig, SigmaSpec};
use fiducial::linear::LinearModel;
use fiducial::numerics::{gaussian, RandomStream};

fn main() -> fiducial::Result<()> {
    let (n, sigma, mu) = (25, 1.0, 3.0);
    let y: Vec<f64> = gaussian(&RandomStream::new(1, 0), n, sigma)?
        .into_iter()
        .map(|e| mu + e)
        .collect();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let model = LinearModel::location(y)?;

    let cfg = GfiConfig {
        m: 4000,
        sigma: SigmaSpec::Known(sigma),
        seed: 7,
        ..GfiConfig::default()
    };
    let sample = run_autogfi(&model, &cfg)?;
    let draws: Vec<f64> = sample.accepted().map(|d| d.targets[0]).collect();
    let k = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / k;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (k - 1.0);

    println!("accepted {} of {} draws (epsilon {:.3})", draws.len(), cfg.m, sample.epsilon);
    println!("draw mean     {mean:.4}   sample mean {ybar:.4}");
    println!("draw variance {var:.5}  sigma^2/n   {:.5}", sigma * sigma / n as f64);

    let report = summarize(&sample, &[0.95])?;
    let iv = &report.intervals[0][0];
    let half = 1.959963984540054 * sigma / (n as f64).sqrt();
    println!("95% fiducial interval [{:.4}, {:.4}]", iv.lower, iv.upper);
    println!("95% z interval        [{:.4}, {:.4}]", ybar - half, ybar + half);
    Ok(())
}
