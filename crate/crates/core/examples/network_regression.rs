//! Regression with network cohesion: individual effects smoothed over a graph.
//!
//! Fiducial intervals for the covariate effects are compared with ordinary least
//! squares that ignores the graph.
//!
//! cargo run --release --example network_regression

use fiducial::engine::{cv_lambda, run_autogfi, summarize, CrossValidate, GfiConfig, SigmaSpec};
use fiducial::harness::ols_baseline;
use fiducial::network::{connected_components, NetworkDataset, NetworkModel, RefitResponse};
use fiducial::numerics::{gaussian, RandomStream, Vector};
use fiducial::simgen::{gen_centered_design, gen_nr_truth, gen_sbm, SbmSpec, DEFAULT_ETA_MEANS};

fn main() -> fiducial::Result<()> {
    let (n, p, sigma) = (90, 5, 0.5);
    let s = RandomStream::new(31, 0);
    let spec = SbmSpec {
        n,
        p_w: 0.2,
        p_b: 0.0,
    };
    let adj = gen_sbm(&spec, &s.derive(1))?;
    let x = gen_centered_design(n, p, &s.derive(2))?;
    let (alpha, beta) = gen_nr_truth(n, p, 0.0, DEFAULT_ETA_MEANS, &s.derive(3))?;
    let y: Vec<f64> = (&x * Vector::from_column_slice(&beta))
        .iter()
        .zip(&alpha)
        .zip(gaussian(&s.derive(4), n, sigma)?)
        .map(|((xb, a), e)| xb + a + e)
        .collect();
    let data = NetworkDataset::new(adj.clone(), x, y)?;
    println!(
        "graph: {} edges, {} connected components",
        adj.iter().filter(|&&v| v != 0.0).count() / 2,
        connected_components(&adj).len()
    );

    let ols = ols_baseline(&data, sigma, &[0.90])?;
    let model = NetworkModel::new(data, RefitResponse::Perturbed)?;
    let lambda = cv_lambda(&model, &model.default_grid(), 10, &s.derive(5))?;
    let cfg = GfiConfig {
        m: 500,
        lambda,
        sigma: SigmaSpec::Estimate,
        seed: 3,
        ..GfiConfig::default()
    };
    let sample = run_autogfi(&model, &cfg)?;
    let gfi = summarize(&sample, &[0.90])?;
    println!(
        "lambda {lambda:.3}, sigma estimate {:.3} (true {sigma})\n",
        sample.sigma_used
    );

    println!(" j   truth   fiducial 90% interval      OLS 90% interval");
    for j in 0..p {
        let (a, b) = (&gfi.intervals[0][j], &ols.intervals[0][j]);
        println!(
            "{j:>2} {:>7.3}   [{:>7.3}, {:>7.3}]  {}   [{:>7.3}, {:>7.3}]  {}",
            beta[j],
            a.lower,
            a.upper,
            if a.contains(beta[j]) { "in " } else { "out" },
            b.lower,
            b.upper,
            if b.contains(beta[j]) { "in " } else { "out" },
        );
    }
    Ok(())
}
