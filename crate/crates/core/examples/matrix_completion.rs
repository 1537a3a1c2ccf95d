//! Low-rank matrix completion with intervals for the missing entries.
//!
//! cargo run --release --example matrix_completion

use fiducial::completion::{mc_complete, project_omega, AlsConfig, McModel};
use fiducial::engine::{run_autogfi, GfiConfig, SigmaSpec};
use fiducial::numerics::{gaussian, RandomStream};
use fiducial::simgen::{gen_omega, gen_orthonormal_factors};

fn main() -> fiducial::Result<()> {
    let (n, rank, sigma) = (60, 2, 1e-3);
    let s = RandomStream::new(21, 0);
    let (a, b) = gen_orthonormal_factors(n, rank, &s.derive(1))?;
    let truth = &a * b.transpose();

    for p in [0.2, 0.4] {
        let omega = gen_omega(n, n, p, &s.derive(2))?;
        let mut obs = project_omega(&truth, &omega)?;
        let noise = gaussian(&s.derive(3), omega.len(), sigma)?;
        for (v, e) in obs.values.iter_mut().zip(noise) {
            *v += e;
        }
        let model = McModel::new(obs.clone(), rank, AlsConfig::default())?;
        let cfg = GfiConfig {
            m: 200,
            lambda: 1e-4,
            sigma: SigmaSpec::Estimate,
            seed: 9,
            ..GfiConfig::default()
        };
        let sample = run_autogfi(&model, &cfg)?;
        let missing = mc_complete(&sample, &obs, rank, &[0.95])?;
        let Some(summary) = missing.summary else {
            println!("p = {p}: every entry was observed");
            continue;
        };

        let (mut hit, mut err2, mut width) = (0, 0.0, 0.0);
        for (k, &(i, j)) in missing.positions.iter().enumerate() {
            let iv = &summary.intervals[0][k];
            hit += usize::from(iv.contains(truth[(i, j)]));
            width += iv.width();
            err2 += (summary.point_mean[k] - truth[(i, j)]).powi(2);
        }
        let k = missing.positions.len();
        println!(
            "p = {p}: {} observed, {k} missing, sigma estimate {:.2e}",
            omega.len(),
            sample.sigma_used
        );
        println!(
            "  missing entries: 95% coverage {:.3}, mean width {:.2e}, rMSE {:.2e}",
            hit as f64 / k as f64,
            width / k as f64,
            (err2 / k as f64).sqrt()
        );
        let (krylov, dense) = model.route_counts();
        println!("  debias solves: {krylov} matrix-free, {dense} dense");
    }
    Ok(())
}
