//! Scalar-on-tensor regression with an l1-penalized CP coefficient.

use log::{debug, warn};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::cp::{cp_compose, mode_indices, CpFactors, DenseTensor};
use crate::engine::{log_grid, AdditiveNoiseModel, CrossValidate, FitOutcome, ParamLayout};
use crate::error::{GfiError, Result};
use crate::numerics::{DenseMatrix, RandomStream, Vector};

#[derive(Clone, Debug)]
pub struct TensorDataset {
    pub shape: Vec<usize>,
    /// One row per observation holding the flattened predictor.
    pub x: DenseMatrix,
    pub y: Vec<f64>,
}

impl TensorDataset {
    pub fn new(shape: &[usize], predictors: &[DenseTensor], y: Vec<f64>) -> Result<Self> {
        if predictors.is_empty() || predictors.len() != y.len() {
            return Err(GfiError::Dimension(format!(
                "{} predictors for {} responses",
                predictors.len(),
                y.len()
            )));
        }
        if predictors.iter().any(|p| p.shape != shape) {
            return Err(GfiError::Dimension(
                "predictors must share one shape".into(),
            ));
        }
        let total: usize = shape.iter().product();
        let x = DenseMatrix::from_fn(y.len(), total, |i, j| predictors[i].data[j]);
        Ok(Self {
            shape: shape.to_vec(),
            x,
            y,
        })
    }

    pub fn from_rows(shape: &[usize], x: DenseMatrix, y: Vec<f64>) -> Result<Self> {
        if x.ncols() != shape.iter().product::<usize>() || x.nrows() != y.len() || y.is_empty() {
            return Err(GfiError::Dimension(
                "design rows do not match shape or responses".into(),
            ));
        }
        Ok(Self {
            shape: shape.to_vec(),
            x,
            y,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CpInit {
    /// Gaussian factors from the draw's stream.
    Random,
    /// Start every draw at the fit to the unperturbed responses.
    Observed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpSolverConfig {
    pub tol: f64,
    pub max_cycles: usize,
    pub cd_tol: f64,
    pub cd_max_sweeps: usize,
    pub init: CpInit,
    /// Line search along each cycle's displacement.
    pub extrapolate: bool,
}

impl Default for CpSolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_cycles: 200,
            cd_tol: 1e-10,
            cd_max_sweeps: 1000,
            init: CpInit::Random,
            extrapolate: true,
        }
    }
}

/// Result of a block-relaxation run.
#[derive(Clone, Debug)]
pub struct CpFit {
    pub factors: CpFactors,
    /// Half-scale objective at the returned factors.
    pub objective: f64,
    pub cycles: usize,
    pub converged: bool,
}

/// Cyclic coordinate descent for `0.5 b'Gb - c'b + thr |b|_1`, starting from `b`.
///
/// Returns the number of sweeps used.
pub fn lasso_cd(
    g: &DenseMatrix,
    c: &Vector,
    thr: f64,
    b: &mut Vector,
    tol: f64,
    max_sweeps: usize,
) -> usize {
    let k = b.len();
    // grad = c - G b
    let mut grad = c - g * &*b;
    for sweep in 1..=max_sweeps {
        let mut max_change = 0.0f64;
        let mut scale = 0.0f64;
        for j in 0..k {
            let gjj = g[(j, j)];
            let old = b[j];
            let new = if gjj <= 1e-300 {
                0.0
            } else {
                let rho = grad[j] + gjj * old;
                soft_threshold(rho, thr) / gjj
            };
            if new != old {
                let delta = new - old;
                grad.axpy(-delta, &g.column(j), 1.0);
                b[j] = new;
                max_change = max_change.max(delta.abs() * gjj.sqrt());
            }
            scale = scale.max(b[j].abs() * gjj.sqrt());
        }
        if max_change <= tol * (1.0 + scale) {
            return sweep;
        }
    }
    max_sweeps
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Tensor regression model bound to a dataset, with CP rank and solver settings.
#[derive(Clone, Debug)]
pub struct TensorModel {
    pub data: TensorDataset,
    pub rank: usize,
    pub solver: CpSolverConfig,
    modes: Vec<Vec<usize>>,
    warm: Option<Vec<f64>>,
}

impl TensorModel {
    pub fn new(data: TensorDataset, rank: usize, solver: CpSolverConfig) -> Result<Self> {
        if rank == 0 {
            return Err(GfiError::InvalidInput("CP rank must be positive".into()));
        }
        let modes = mode_indices(&data.shape);
        Ok(Self {
            data,
            rank,
            solver,
            modes,
            warm: None,
        })
    }

    /// Fit the unperturbed data once and use it as the start of every later fit.
    pub fn with_observed_start(mut self, lambda: f64, stream: &RandomStream) -> Result<Self> {
        let zeros = vec![0.0; self.data.n()];
        let fit = self.block_relaxation(&zeros, lambda, stream, None)?;
        self.warm = Some(fit.factors.to_flat());
        Ok(self)
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.data.shape.len() + 1);
        let mut acc = 0;
        for &p in &self.data.shape {
            off.push(acc);
            acc += p * self.rank;
        }
        off.push(acc);
        off
    }

    /// `Z[i, k + r p_d] = sum over entries with mode-d index k of X_i * prod_{e != d} beta_e^r`.
    pub fn mode_design(&self, f: &CpFactors, d: usize) -> DenseMatrix {
        let n = self.data.n();
        let p_d = self.data.shape[d];
        let total = self.data.x.ncols();
        let mut z = DenseMatrix::zeros(n, p_d * self.rank);
        let mut w = vec![0.0; total];
        for r in 0..self.rank {
            for (lin, slot) in w.iter_mut().enumerate() {
                let mut prod = 1.0;
                for (e, fac) in f.factors.iter().enumerate() {
                    if e != d {
                        prod *= fac[(self.modes[e][lin], r)];
                    }
                }
                *slot = prod;
            }
            for (lin, &wl) in w.iter().enumerate() {
                if wl == 0.0 {
                    continue;
                }
                let col = self.modes[d][lin] + r * p_d;
                let src = self.data.x.column(lin);
                z.column_mut(col).axpy(wl, &src, 1.0);
            }
        }
        z
    }

    fn fitted(&self, f: &CpFactors) -> Vector {
        let b = cp_compose(f);
        &self.data.x * Vector::from_column_slice(&b.data)
    }

    /// Half-scale objective `0.5 |v - <X, B>|^2 + 0.5 lambda sum |beta|`.
    pub fn objective(&self, f: &CpFactors, v: &Vector, lambda: f64) -> f64 {
        let r = v - self.fitted(f);
        let l1: f64 = f
            .factors
            .iter()
            .map(|m| m.iter().map(|x| x.abs()).sum::<f64>())
            .sum();
        0.5 * r.norm_squared() + 0.5 * lambda * l1
    }

    fn initial_factors(&self, stream: &RandomStream) -> Result<CpFactors> {
        let mut rng = stream.rng();
        let mut factors = Vec::with_capacity(self.data.shape.len());
        for &p in &self.data.shape {
            let var = 1.0 / ((p * self.rank) as f64).sqrt();
            let dist =
                Normal::new(0.0, var.sqrt()).map_err(|e| GfiError::InvalidInput(e.to_string()))?;
            factors.push(DenseMatrix::from_fn(p, self.rank, |_, _| {
                dist.sample(&mut rng)
            }));
        }
        CpFactors::new(factors)
    }

    /// Block relaxation on `Y - u`: each mode in turn is a lasso solved by coordinate descent.
    pub fn block_relaxation(
        &self,
        u_star: &[f64],
        lambda: f64,
        stream: &RandomStream,
        start: Option<&[f64]>,
    ) -> Result<CpFit> {
        if u_star.len() != self.data.n() {
            return Err(GfiError::Dimension(
                "noise vector length differs from sample size".into(),
            ));
        }
        if !(lambda >= 0.0) {
            return Err(GfiError::InvalidInput(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        let v = Vector::from_iterator(
            self.data.n(),
            self.data.y.iter().zip(u_star).map(|(y, u)| y - u),
        );
        let mut f = match start {
            Some(flat) => CpFactors::from_flat(&self.data.shape, self.rank, flat)?,
            None => self.initial_factors(stream)?,
        };
        let thr = 0.5 * lambda;
        let mut obj = self.objective(&f, &v, lambda);
        let mut converged = false;
        let mut cycles = 0;
        while cycles < self.solver.max_cycles {
            cycles += 1;
            let before = f.to_flat();
            for d in 0..f.order() {
                let z = self.mode_design(&f, d);
                let g = z.tr_mul(&z);
                let c = z.tr_mul(&v);
                let mut b = Vector::from_column_slice(f.factors[d].as_slice());
                lasso_cd(
                    &g,
                    &c,
                    thr,
                    &mut b,
                    self.solver.cd_tol,
                    self.solver.cd_max_sweeps,
                );
                f.factors[d] =
                    DenseMatrix::from_column_slice(self.data.shape[d], self.rank, b.as_slice());
            }
            if lambda > 0.0 {
                balance_scales(&mut f);
            }
            let new_obj = self.objective(&f, &v, lambda);
            if !new_obj.is_finite() {
                return Err(GfiError::NonFinite("block relaxation objective".into()));
            }
            debug_assert!(
                new_obj <= obj * (1.0 + 1e-9) + 1e-12,
                "objective increased from {obj} to {new_obj}"
            );
            let decrease = (obj - new_obj) / obj.abs().max(1e-300);
            obj = new_obj;
            if decrease < self.solver.tol {
                converged = true;
                break;
            }
            if self.solver.extrapolate {
                let after = f.to_flat();
                let mut step = 2.0;
                while step <= 64.0 {
                    let trial: Vec<f64> = before
                        .iter()
                        .zip(&after)
                        .map(|(b, a)| b + step * (a - b))
                        .collect();
                    let tf = CpFactors::from_flat(&self.data.shape, self.rank, &trial)?;
                    let t_obj = self.objective(&tf, &v, lambda);
                    if !(t_obj < obj) {
                        break;
                    }
                    f = tf;
                    obj = t_obj;
                    step *= 2.0;
                }
            }
        }
        if !converged {
            debug!("block relaxation stopped after {cycles} cycles");
        }
        Ok(CpFit {
            factors: f,
            objective: obj,
            cycles,
            converged,
        })
    }

    /// `sqrt(RSS / n)` of one fit to the observed responses.
    pub fn sigma_mle(&self, lambda: f64, stream: &RandomStream) -> Result<f64> {
        let n = self.data.n();
        if n < 2 {
            return Err(GfiError::InvalidInput(
                "sigma estimation needs n > 1".into(),
            ));
        }
        let zeros = vec![0.0; n];
        let fit = self.block_relaxation(&zeros, lambda, stream, self.warm.as_deref())?;
        let r = Vector::from_column_slice(&self.data.y) - self.fitted(&fit.factors);
        let s = (r.norm_squared() / n as f64).sqrt();
        if s == 0.0 {
            warn!("zero residual in sigma estimate; using the machine-epsilon floor");
            return Ok(f64::EPSILON);
        }
        Ok(s)
    }

    pub fn coefficient(&self, theta: &[f64]) -> Result<DenseTensor> {
        Ok(cp_compose(&CpFactors::from_flat(
            &self.data.shape,
            self.rank,
            theta,
        )?))
    }
}

impl CrossValidate for TensorModel {
    fn cv_len(&self) -> usize {
        self.data.n()
    }

    fn cv_errors(
        &self,
        grid: &[f64],
        folds: &[usize],
        n_folds: usize,
        stream: &RandomStream,
    ) -> Result<Vec<f64>> {
        let mut sse = vec![0.0; grid.len()];
        for k in 0..n_folds {
            let train: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] != k).collect();
            let test: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] == k).collect();
            let sub = TensorModel::new(
                TensorDataset::from_rows(
                    &self.data.shape,
                    self.data.x.select_rows(&train),
                    train.iter().map(|&i| self.data.y[i]).collect(),
                )?,
                self.rank,
                self.solver.clone(),
            )?;
            let xt = self.data.x.select_rows(&test);
            let zeros = vec![0.0; train.len()];
            for (g, &lambda) in grid.iter().enumerate() {
                let fit =
                    sub.block_relaxation(&zeros, lambda, &stream.with_stream(k as u64), None)?;
                let b = cp_compose(&fit.factors);
                let pred = &xt * Vector::from_column_slice(&b.data);
                for (j, &i) in test.iter().enumerate() {
                    sse[g] += (self.data.y[i] - pred[j]).powi(2);
                }
            }
        }
        Ok(sse.into_iter().map(|s| s / folds.len() as f64).collect())
    }

    /// Eight points from `1e-3 * l0` to `l0`, with `l0 = max_j |X^T Y|_j`.
    fn default_grid(&self) -> Vec<f64> {
        let xty = self.data.x.tr_mul(&Vector::from_column_slice(&self.data.y));
        let top = xty.amax().max(f64::MIN_POSITIVE);
        log_grid(1e-3 * top, top, 8).unwrap_or_else(|_| vec![top])
    }
}

impl AdditiveNoiseModel for TensorModel {
    fn noise_len(&self) -> usize {
        self.data.n()
    }

    fn layout(&self) -> ParamLayout {
        ParamLayout::Cp {
            shape: self.data.shape.clone(),
            rank: self.rank,
        }
    }

    fn responses(&self) -> &[f64] {
        &self.data.y
    }

    fn predict(&self, theta: &[f64]) -> Vec<f64> {
        let f = CpFactors::from_flat(&self.data.shape, self.rank, theta)
            .expect("theta length matches layout");
        self.fitted(&f).as_slice().to_vec()
    }

    fn fit(&self, u_star: &[f64], lambda: f64, stream: &RandomStream) -> Result<FitOutcome> {
        let start = match self.solver.init {
            CpInit::Observed => self.warm.as_deref(),
            CpInit::Random => None,
        };
        let fit = self.block_relaxation(u_star, lambda, stream, start)?;
        Ok(FitOutcome {
            theta: fit.factors.to_flat(),
            converged: fit.converged,
            iterations: fit.cycles,
        })
    }

    fn penalty_gradient(&self, theta: &[f64], lambda: f64) -> Vec<f64> {
        theta.iter().map(|&t| 0.5 * lambda * sign(t)).collect()
    }

    fn jacobian(&self, theta: &[f64]) -> DenseMatrix {
        let f = CpFactors::from_flat(&self.data.shape, self.rank, theta)
            .expect("theta length matches layout");
        let off = self.offsets();
        let mut j = DenseMatrix::zeros(self.data.n(), off[f.order()]);
        for d in 0..f.order() {
            let z = self.mode_design(&f, d);
            j.columns_mut(off[d], z.ncols()).copy_from(&z);
        }
        j
    }

    fn curvature(&self, theta: &[f64], weights: &[f64]) -> DenseMatrix {
        let f = CpFactors::from_flat(&self.data.shape, self.rank, theta)
            .expect("theta length matches layout");
        let off = self.offsets();
        let dim = off[f.order()];
        let mut c = DenseMatrix::zeros(dim, dim);
        // sum_i w_i X_i, since G is linear in X
        let wt = self.data.x.tr_mul(&Vector::from_column_slice(weights));
        let order = f.order();
        for (lin, &wl) in wt.iter().enumerate() {
            if wl == 0.0 {
                continue;
            }
            for r in 0..self.rank {
                for d in 0..order {
                    for e in (d + 1)..order {
                        let mut prod = wl;
                        for (g, fac) in f.factors.iter().enumerate() {
                            if g != d && g != e {
                                prod *= fac[(self.modes[g][lin], r)];
                            }
                        }
                        let a = off[d] + self.modes[d][lin] + r * self.data.shape[d];
                        let b = off[e] + self.modes[e][lin] + r * self.data.shape[e];
                        c[(a, b)] += prod;
                        c[(b, a)] += prod;
                    }
                }
            }
        }
        c
    }

    fn estimate_sigma(&self, lambda: f64, stream: &RandomStream) -> Result<f64> {
        self.sigma_mle(lambda, stream)
    }

    /// Coefficient tensor entries.
    fn targets(&self, theta: &[f64]) -> Vec<f64> {
        self.coefficient(theta)
            .expect("theta length matches layout")
            .data
    }
}

/// Rescale each CP term so its mode vectors have equal l1 norms.
///
/// The composed tensor is unchanged and the penalty can only drop, since for a fixed
/// product of norms their sum is smallest when they are equal.
pub fn balance_scales(f: &mut CpFactors) {
    let order = f.order() as f64;
    for r in 0..f.rank {
        let norms: Vec<f64> = f
            .factors
            .iter()
            .map(|m| m.column(r).iter().map(|x| x.abs()).sum())
            .collect();
        if norms.iter().any(|&n| n == 0.0) {
            for m in f.factors.iter_mut() {
                m.column_mut(r).fill(0.0);
            }
            continue;
        }
        let target = (norms.iter().map(|n| n.ln()).sum::<f64>() / order).exp();
        for (m, n) in f.factors.iter_mut().zip(&norms) {
            m.column_mut(r).scale_mut(target / n);
        }
    }
}

fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gaussian;

    fn random_dataset(shape: &[usize], n: usize, seed: u64) -> TensorDataset {
        let total: usize = shape.iter().product();
        let x = gaussian(&RandomStream::new(seed, 0), n * total, 1.0).unwrap();
        let y = gaussian(&RandomStream::new(seed, 1), n, 1.0).unwrap();
        TensorDataset::from_rows(shape, DenseMatrix::from_row_slice(n, total, &x), y).unwrap()
    }

    #[test]
    fn one_mode_orthonormal_lasso() {
        let x = DenseMatrix::identity(2, 2);
        let data = TensorDataset::from_rows(&[2], x, vec![3.0, -0.5]).unwrap();
        let model = TensorModel::new(data, 1, CpSolverConfig::default()).unwrap();
        let fit = model
            .fit(&[0.0, 0.0], 1.0, &RandomStream::new(1, 1))
            .unwrap();
        assert!((fit.theta[0] - 2.5).abs() < 1e-12);
        assert_eq!(fit.theta[1], 0.0);
    }

    #[test]
    fn noiseless_recovery_without_penalty() {
        let shape = [4, 3];
        let n = 60;
        let truth = CpFactors::from_flat(
            &shape,
            2,
            &gaussian(&RandomStream::new(9, 9), 14, 1.0).unwrap(),
        )
        .unwrap();
        let mut data = random_dataset(&shape, n, 10);
        let b = cp_compose(&truth);
        data.y = (&data.x * Vector::from_column_slice(&b.data))
            .as_slice()
            .to_vec();
        let solver = CpSolverConfig {
            tol: 1e-14,
            max_cycles: 2000,
            ..Default::default()
        };
        let model = TensorModel::new(data, 2, solver).unwrap();
        let fit = model
            .fit(&vec![0.0; n], 0.0, &RandomStream::new(3, 3))
            .unwrap();
        let rss: f64 = model
            .residual(&fit.theta, &vec![0.0; n])
            .iter()
            .map(|r| r * r)
            .sum();
        assert!(rss / (n as f64) < 1e-6, "rss/n = {}", rss / n as f64);
    }

    #[test]
    fn huge_penalty_zeroes_everything() {
        let data = random_dataset(&[3, 3], 20, 11);
        let bound = 2.0 * (data.x.transpose() * Vector::from_column_slice(&data.y)).amax();
        let model = TensorModel::new(data.clone(), 2, CpSolverConfig::default()).unwrap();
        let fit = model
            .fit(&vec![0.0; 20], bound * 100.0, &RandomStream::new(0, 4))
            .unwrap();
        assert!(fit.theta.iter().all(|&t| t == 0.0));
        let s = model
            .sigma_mle(bound * 100.0, &RandomStream::new(0, 4))
            .unwrap();
        let rms = (data.y.iter().map(|y| y * y).sum::<f64>() / 20.0).sqrt();
        assert!((s - rms).abs() < 1e-12);
    }

    #[test]
    fn zeroed_coordinates_satisfy_subgradient_condition() {
        let g0 = DenseMatrix::from_fn(6, 6, |i, j| {
            if i == j {
                2.0
            } else {
                0.3 / (1.0 + (i + j) as f64)
            }
        });
        let g = &g0 * g0.transpose();
        let c = Vector::from_vec(vec![1.0, -0.2, 0.05, 3.0, -2.0, 0.1]);
        let mut b = Vector::zeros(6);
        let thr = 0.5;
        lasso_cd(&g, &c, thr, &mut b, 1e-14, 10_000);
        let grad = &c - &g * &b;
        for j in 0..6 {
            if b[j] == 0.0 {
                assert!(grad[j].abs() <= thr + 1e-10);
            } else {
                assert!((grad[j] - thr * b[j].signum()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn objective_never_increases() {
        let data = random_dataset(&[4, 4], 30, 12);
        let model = TensorModel::new(data, 2, CpSolverConfig::default()).unwrap();
        let v = Vector::from_column_slice(&model.data.y);
        let stream = RandomStream::new(5, 5);
        let mut prev = f64::INFINITY;
        let mut start = model.initial_factors(&stream).unwrap().to_flat();
        for _ in 0..10 {
            let solver = CpSolverConfig {
                max_cycles: 1,
                ..Default::default()
            };
            let m1 = TensorModel::new(model.data.clone(), 2, solver).unwrap();
            let fit = m1
                .block_relaxation(&vec![0.0; 30], 0.7, &stream, Some(&start))
                .unwrap();
            let obj = model.objective(&fit.factors, &v, 0.7);
            assert!(obj <= prev * (1.0 + 1e-12));
            prev = obj;
            start = fit.factors.to_flat();
        }
    }
}
