//! The simulation generators: coefficient images, block-model graphs, factor pairs.
//!
//! cargo run --example synthetic_data

use fiducial::network::laplacian;
use fiducial::numerics::{DenseMatrix, RandomStream, Vector};
use fiducial::simgen::{
    gen_nr_truth, gen_omega, gen_orthonormal_factors, gen_sbm, gen_tensor_coefficient, ImageKind,
    SbmSpec, DEFAULT_ETA_MEANS,
};

fn main() -> fiducial::Result<()> {
    let s = RandomStream::new(8, 0);

    for kind in [ImageKind::RankExact, ImageKind::Shapes, ImageKind::DenseImage] {
        let (img, report) = gen_tensor_coefficient(kind, &[16, 16], &s.derive(1))?;
        println!("{kind:?}: {:.1}% non-zero", report.percent);
        for i in (0..16).step_by(2) {
            let line: String = (0..16)
                .map(|j| match img.get(&[i, j]) {
                    v if v == 0.0 => '.',
                    v if v.abs() < 0.5 => '+',
                    _ => '#',
                })
                .collect();
            println!("  {line}");
        }
    }

    for (p_b, sd) in [(0.0, 0.0), (0.01, 0.1)] {
        let spec = SbmSpec {
            n: 300,
            p_w: 0.2,
            p_b,
        };
        let adj = gen_sbm(&spec, &s.derive(2))?;
        let (alpha, _) = gen_nr_truth(300, 0, sd, DEFAULT_ETA_MEANS, &s.derive(3))?;
        let l_alpha = laplacian(&adj)? * Vector::from_vec(alpha);
        println!(
            "SBM p_b = {p_b}, s = {sd}: {} edges, |L alpha| = {:.2}",
            adj.iter().filter(|&&v| v != 0.0).count() / 2,
            l_alpha.norm()
        );
    }

    let (a, b) = gen_orthonormal_factors(100, 2, &s.derive(4))?;
    let gram = a.tr_mul(&a);
    println!(
        "orthonormal factors: |A^T A - I| = {:.1e}, |A B^T|_F = {:.3}",
        (gram - DenseMatrix::identity(2, 2)).norm(),
        (&a * b.transpose()).norm()
    );
    let omega = gen_omega(100, 100, 0.2, &s.derive(5))?;
    println!("observed {} of 10000 entries at p = 0.2", omega.len());
    Ok(())
}
