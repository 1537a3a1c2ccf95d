//! Worked examples checked against closed forms or independent computations.

use approx::assert_abs_diff_eq;

use fiducial::completion::{mc_complete, project_omega, AlsConfig, McModel, ObservedMatrix};
use fiducial::engine::{
    acceptance_filter, summarize_values, AdditiveNoiseModel, FiducialDraw, FiducialSample,
    ParamLayout, ParameterPoint,
};
use fiducial::linear::LinearModel;
use fiducial::network::{laplacian, rnc_fit, NetworkDataset};
use fiducial::numerics::{
    gaussian, matrix_sqrt_and_pinv_sqrt, quantile, truncated_pinv, DenseMatrix, RandomStream,
    Vector,
};
use fiducial::tensor::{CpSolverConfig, DenseTensor, TensorDataset, TensorModel};

fn max_abs(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).amax()
}

#[test]
fn pinv_drops_values_under_the_cutoff() {
    let h = DenseMatrix::from_diagonal(&Vector::from_vec(vec![10.0, 1.0, 0.4]));
    let p = truncated_pinv(&h, 0.05).unwrap();
    let want = DenseMatrix::from_diagonal(&Vector::from_vec(vec![0.1, 1.0, 0.0]));
    assert!(max_abs(&p, &want) < 1e-14);
    let i = DenseMatrix::identity(3, 3);
    assert!(max_abs(&truncated_pinv(&i, 0.05).unwrap(), &i) < 1e-14);
}

#[test]
fn pinv_of_rank_four_psd_satisfies_the_penrose_identity() {
    let g = DenseMatrix::from_vec(6, 4, gaussian(&RandomStream::new(1, 1), 24, 1.0).unwrap());
    let h = &g * g.transpose();
    let p = truncated_pinv(&h, 0.0).unwrap();
    assert!(max_abs(&(&h * &p * &h), &h) < 1e-8 * h.amax());
    assert!(max_abs(&(&p * &h * &p), &p) < 1e-8 * p.amax());
}

#[test]
fn single_edge_square_root() {
    let l = DenseMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
    let (s, sp) = matrix_sqrt_and_pinv_sqrt(&l).unwrap();
    let want = &l / 2f64.sqrt();
    assert!(max_abs(&s, &want) < 1e-12);
    // (L^{1/2})^pinv = L^{1/2} / 2 because the nonzero eigenvalue of L^{1/2} is sqrt(2)
    assert!(max_abs(&sp, &(&want / 2.0)) < 1e-12);
    let z = DenseMatrix::zeros(3, 3);
    let (s, sp) = matrix_sqrt_and_pinv_sqrt(&z).unwrap();
    assert_eq!((s.amax(), sp.amax()), (0.0, 0.0));
}

#[test]
fn quantile_convention() {
    assert_abs_diff_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 100.0], 0.25).unwrap(), 2.0);
    let v: Vec<f64> = (1..=100).map(f64::from).collect();
    assert_abs_diff_eq!(quantile(&v, 0.025).unwrap(), 3.475, epsilon = 1e-12);
    assert_eq!(quantile(&[5.0], 0.7).unwrap(), 5.0);
    assert!(quantile(&[], 0.5).is_err());
    assert!(quantile(&[1.0, f64::NAN], 0.5).is_err());
}

#[test]
fn gaussian_moments() {
    let x = gaussian(&RandomStream::new(77, 3), 100_000, 2.0).unwrap();
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 0.05, "mean {mean}");
    assert!((sd - 2.0).abs() < 0.05, "sd {sd}");
    assert!(gaussian(&RandomStream::new(1, 1), 0, 1.0).unwrap().is_empty());
    assert!(gaussian(&RandomStream::new(1, 1), 3, 0.0).is_err());
}

#[test]
fn location_fit_is_the_mean_of_y_minus_u() {
    let model = LinearModel::location(vec![1.0, 2.0, 3.0]).unwrap();
    let fit = model
        .fit(&[0.5, -0.5, 0.0], 0.0, &RandomStream::new(0, 0))
        .unwrap();
    assert_abs_diff_eq!(fit.theta[0], 2.0, epsilon = 1e-14);
}

#[test]
fn ridge_debias_recovers_least_squares() {
    let x = DenseMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    let model = LinearModel::new(x, vec![1.0, 2.0, 3.0]).unwrap();
    let u = [0.0; 3];
    // |r|^2 + 2 |theta|^2 on the usual scale
    let fit = model.fit(&u, 2.0, &RandomStream::new(0, 0)).unwrap();
    assert_abs_diff_eq!(fit.theta[0], 11.0 / 15.0, epsilon = 1e-12);
    assert_abs_diff_eq!(fit.theta[1], 16.0 / 15.0, epsilon = 1e-12);
    let de = model.debias(&u, &fit.theta, 2.0, 0.0, false).unwrap();
    assert_abs_diff_eq!(de[0], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(de[1], 2.0, epsilon = 1e-12);
}

#[test]
fn rank_one_factorization_hessian_by_hand() {
    let obs = project_omega(&DenseMatrix::from_element(1, 1, 5.0), &[(0, 0)]).unwrap();
    let model = McModel::new(obs, 1, AlsConfig::default()).unwrap();
    let (a, b, u) = (1.0, 2.0, 0.5);
    let r = 5.0 - a * b - u;
    let h = model.hessian(&[u], &[a, b], false).unwrap();
    let want = DenseMatrix::from_row_slice(2, 2, &[b * b, a * b - r, a * b - r, a * a]);
    assert!(max_abs(&h, &want) < 1e-14);
    let gn = model.hessian(&[u], &[a, b], true).unwrap();
    let want = DenseMatrix::from_row_slice(2, 2, &[b * b, a * b, a * b, a * a]);
    assert!(max_abs(&gn, &want) < 1e-14);
}

#[test]
fn tukey_fence_examples() {
    let (eps, flags) = acceptance_filter(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
    assert_eq!(eps, 7.0);
    assert_eq!(flags, [true, true, true, true, false]);
    let (eps, flags) = acceptance_filter(&[0.0, 0.0, 0.0, 0.0, 1e-9]).unwrap();
    assert_eq!(eps, 0.0);
    assert_eq!(flags, [true, true, true, true, false]);
}

#[test]
fn percentile_interval_of_one_to_hundred() {
    let rows: Vec<Vec<f64>> = (1..=100).map(|k| vec![k as f64]).collect();
    let s = summarize_values(&rows, &[0.95]).unwrap();
    assert_abs_diff_eq!(s.intervals[0][0].lower, 3.475, epsilon = 1e-12);
    assert_abs_diff_eq!(s.intervals[0][0].upper, 97.525, epsilon = 1e-12);
    assert_abs_diff_eq!(s.point_mean[0], 50.5, epsilon = 1e-12);
}

fn factor_draw(index: u64, a: f64, b: f64) -> FiducialDraw {
    let layout = ParamLayout::FactorPair {
        rows: 2,
        cols: 1,
        rank: 1,
    };
    let p = ParameterPoint::new(vec![1.0, a, b], vec![true; 3], layout).unwrap();
    FiducialDraw {
        index,
        u_star: vec![0.0],
        theta_star: p.clone(),
        theta_de: p,
        targets: vec![],
        loss: 0.0,
        accepted: true,
        converged: true,
    }
}

#[test]
fn missing_entry_median_of_two_draws() {
    // 2 x 1 matrix with entry (0, 0) observed; the missing entry is a_1 * b_0
    let obs = ObservedMatrix::new(2, 1, vec![(0, 0)], vec![1.0]).unwrap();
    let sample = FiducialSample {
        draws: vec![factor_draw(1, 3.0, 1.0), factor_draw(2, 5.0, 1.0)],
        epsilon: 0.0,
        sigma_used: 1.0,
        failed: vec![],
    };
    let rep = mc_complete(&sample, &obs, 1, &[0.9]).unwrap();
    assert_eq!(rep.positions, vec![(1, 0)]);
    let s = rep.summary.unwrap();
    assert_abs_diff_eq!(s.point_median[0], 4.0, epsilon = 1e-14);

    let full = ObservedMatrix::new(2, 1, vec![(0, 0), (1, 0)], vec![1.0, 2.0]).unwrap();
    let rep = mc_complete(&sample, &full, 1, &[0.9]).unwrap();
    assert!(rep.positions.is_empty() && rep.summary.is_none());
}

#[test]
fn one_mode_tensor_is_a_lasso() {
    let preds = [
        DenseTensor::from_vec(&[2], vec![1.0, 0.0]).unwrap(),
        DenseTensor::from_vec(&[2], vec![0.0, 1.0]).unwrap(),
    ];
    let data = TensorDataset::new(&[2], &preds, vec![3.0, -0.5]).unwrap();
    let model = TensorModel::new(data, 1, CpSolverConfig::default()).unwrap();
    let fit = model
        .block_relaxation(&[0.0, 0.0], 1.0, &RandomStream::new(2, 2), None)
        .unwrap();
    let coef = model.coefficient(&fit.factors.to_flat()).unwrap();
    assert_abs_diff_eq!(coef.data[0], 2.5, epsilon = 1e-9);
    assert_eq!(coef.data[1], 0.0);
}

#[test]
fn network_examples() {
    let path = DenseMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.]);
    let want = DenseMatrix::from_row_slice(3, 3, &[1., -1., 0., -1., 2., -1., 0., -1., 1.]);
    assert_eq!(laplacian(&path).unwrap(), want);

    let edge = DenseMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let data = NetworkDataset::new(edge, DenseMatrix::zeros(2, 0), vec![0.0, 2.0]).unwrap();
    let fit = rnc_fit(&data, &[0.0, 0.0], 1.0).unwrap();
    assert_abs_diff_eq!(fit.alpha[0], 2.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(fit.alpha[1], 4.0 / 3.0, epsilon = 1e-12);
}
