//! Truncated pseudo-inverse: dense kernel and the matrix-free solver.
//!
//! Builds an ill-conditioned symmetric operator that is only available through
//! matrix-vector products and checks the Krylov result against the dense one.
//!
//! cargo run --release --example truncated_pinv

use fiducial::numerics::{
    gaussian, orthonormal_columns, truncated_pinv_apply, truncated_pinv_detail, DenseMatrix,
    KrylovOptions, RandomStream, SymmetricOperator, Vector,
};

/// `Q diag(d) Q^T` applied without forming the product.
struct Spectral {
    q: DenseMatrix,
    d: Vec<f64>,
}

impl SymmetricOperator for Spectral {
    fn dim(&self) -> usize {
        self.q.nrows()
    }
    fn apply(&self, x: &Vector) -> Vector {
        let mut t = self.q.tr_mul(x);
        for (v, d) in t.iter_mut().zip(&self.d) {
            *v *= d;
        }
        &self.q * t
    }
}

fn main() -> fiducial::Result<()> {
    let n = 200;
    let s = RandomStream::new(4, 0);
    let q = orthonormal_columns(&DenseMatrix::from_vec(n, n, gaussian(&s, n * n, 1.0)?));
    // six tiny eigenvalues well below the cutoff, the rest spread over [10, 100]
    let d: Vec<f64> = (0..n)
        .map(|k| if k < 6 { 1e-6 * (k + 1) as f64 } else { 10.0 + 90.0 * k as f64 / n as f64 })
        .collect();
    let op = Spectral { q, d };
    let rhs = Vector::from_vec(gaussian(&s.derive(1), n, 1.0)?);
    let c = 0.05;

    let dense = truncated_pinv_detail(&op.to_dense(), c)?;
    println!(
        "dense: zeta1 {:.3}, cutoff {:.3}, kept {} of {n} directions",
        dense.zeta1, dense.cutoff, dense.rank
    );
    let reference = &dense.matrix * &rhs;

    let solve = truncated_pinv_apply(&op, &rhs, c, None, &KrylovOptions::default())?;
    println!(
        "{:?} route: zeta1 {:.3}, dropped {} directions",
        solve.route, solve.zeta1, solve.dropped
    );
    println!(
        "relative difference from the dense answer {:.2e}",
        (&solve.solution - &reference).norm() / reference.norm()
    );
    Ok(())
}
