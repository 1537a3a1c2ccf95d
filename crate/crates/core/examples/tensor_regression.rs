//! Image-on-scalar regression with a sparse CP coefficient.
//!
//! Simulates a 16 x 16 exact rank-3 coefficient, picks the l1 penalty by 10-fold
//! cross-validation, and reports pixelwise fiducial intervals.
//!
//! cargo run --release --example tensor_regression

use fiducial::engine::{cv_lambda, run_autogfi, summarize, CrossValidate, GfiConfig, SigmaSpec};
use fiducial::numerics::{gaussian, DenseMatrix, RandomStream, Vector};
use fiducial::simgen::{gen_tensor_coefficient, ImageKind};
use fiducial::tensor::{CpSolverConfig, TensorDataset, TensorModel};

fn main() -> fiducial::Result<()> {
    let shape = [16, 16];
    let size = 256;
    let n = 200;
    let s = RandomStream::new(11, 0);
    let (b, sparsity) = gen_tensor_coefficient(ImageKind::RankExact, &shape, &s.derive(1))?;
    println!("coefficient: {:.1}% non-zero pixels", sparsity.percent);

    let x = DenseMatrix::from_row_slice(n, size, &gaussian(&s.derive(2), n * size, 1.0)?);
    let noise = gaussian(&s.derive(3), n, 0.5f64.sqrt())?;
    let y: Vec<f64> = (&x * Vector::from_column_slice(&b.data))
        .iter()
        .zip(&noise)
        .map(|(m, e)| m + e)
        .collect();
    let model = TensorModel::new(TensorDataset::from_rows(&shape, x, y)?, 4, CpSolverConfig::default())?;

    let grid = model.default_grid();
    let lambda = cv_lambda(&model, &grid, 10, &s.derive(4))?;
    println!("cross-validated lambda {lambda:.3}");

    let cfg = GfiConfig {
        m: 200,
        lambda,
        sigma: SigmaSpec::Estimate,
        seed: 5,
        ..GfiConfig::default()
    };
    let sample = run_autogfi(&model, &cfg)?;
    let report = summarize(&sample, &[0.90])?;
    println!(
        "sigma estimate {:.3} (true {:.3}), {} of {} draws accepted",
        sample.sigma_used,
        0.5f64.sqrt(),
        sample.accepted_count(),
        cfg.m
    );

    let (mut hit, mut tot, mut zhit, mut ztot, mut se) = (0, 0, 0, 0, 0.0);
    for (j, &truth) in b.data.iter().enumerate() {
        let inside = report.intervals[0][j].contains(truth);
        if truth == 0.0 {
            ztot += 1;
            zhit += usize::from(inside);
        } else {
            tot += 1;
            hit += usize::from(inside);
        }
        se += (report.point_mean[j] - truth).powi(2);
    }
    println!("90% coverage: non-zero {hit}/{tot}, zero {zhit}/{ztot}");
    println!("pixel rMSE {:.4}", (se / size as f64).sqrt());

    println!("\ntruth (row 0..7, columns 0..7) vs fiducial mean");
    for i in 0..8 {
        let row: Vec<String> = (0..8)
            .map(|j| format!("{:>5.2}/{:<5.2}", b.data[i + 16 * j], report.point_mean[i + 16 * j]))
            .collect();
        println!("{}", row.join(" "));
    }
    Ok(())
}
