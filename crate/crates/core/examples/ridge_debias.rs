//! One debiasing step undoes ridge shrinkage.
//!
//! With threshold c = 0 the step uses the exact inverse of X^T X, so the ridge fit is
//! carried all the way to least squares. Larger c drops weak directions of the Hessian.
//!
//! cargo run --example ridge_debias

use fiducial::engine::AdditiveNoiseModel;
use fiducial::linear::LinearModel;
use fiducial::numerics::{gaussian, DenseMatrix, RandomStream, Vector};

fn main() -> fiducial::Result<()> {
    let (n, p) = (30, 4);
    let s = RandomStream::new(3, 0);
    let mut x = DenseMatrix::from_row_slice(n, p, &gaussian(&s.derive(1), n * p, 1.0)?);
    // one nearly redundant column to make the truncation visible
    let last = x.column(0) * 0.98 + x.column(p - 1) * 0.05;
    x.set_column(p - 1, &last);
    let theta = [1.0, -2.0, 0.5, 0.0];
    let noise = gaussian(&s.derive(2), n, 0.3)?;
    let y: Vec<f64> = (&x * Vector::from_column_slice(&theta))
        .iter()
        .zip(&noise)
        .map(|(m, e)| m + e)
        .collect();
    let model = LinearModel::new(x.clone(), y.clone())?;
    let ols = model.ridge_solve(&y, 0.0)?;

    let lambda = 5.0;
    let zeros = vec![0.0; n];
    let ridge = model.fit(&zeros, lambda, &s)?.theta;
    println!("lambda = {lambda}");
    println!("ridge fit      {}", fmt(&ridge));
    println!("least squares  {}", fmt(&ols));
    for c in [0.0, 1e-3, 0.05] {
        let de = model.debias(&zeros, &ridge, lambda, c, false)?;
        let gap = de
            .iter()
            .zip(&ols)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        println!("debias c={c:<6}{}  max |de - ols| = {gap:.2e}", fmt(&de));
    }
    Ok(())
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:>9.4}")).collect::<Vec<_>>().join(" ")
}
