//! Low-rank matrix completion `Y = f(A B^T) + U` with Frobenius penalties.

use std::sync::atomic::{AtomicUsize, Ordering};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::observed::{FactorPair, ObservedMatrix};
use crate::engine::{
    log_grid, summarize_values, AdditiveNoiseModel, CrossValidate, FiducialSample, FitOutcome,
    ParamLayout, SummaryReport,
};
use crate::error::{GfiError, Result};
use crate::numerics::{
    median, top_singular, truncated_pinv, truncated_pinv_apply, DenseMatrix, KrylovOptions,
    RandomStream, SolveRoute, SymmetricOperator, Vector,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlsConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iters: 500,
        }
    }
}

/// Matrix completion model bound to its observed entries.
#[derive(Debug)]
pub struct McModel {
    pub obs: ObservedMatrix,
    pub rank: usize,
    pub als: AlsConfig,
    pub krylov: KrylovOptions,
    /// `(slot, column)` pairs per row.
    row_slots: Vec<Vec<(usize, usize)>>,
    /// `(slot, row)` pairs per column.
    col_slots: Vec<Vec<(usize, usize)>>,
    dense_solves: AtomicUsize,
    krylov_solves: AtomicUsize,
}

impl McModel {
    pub fn new(obs: ObservedMatrix, rank: usize, als: AlsConfig) -> Result<Self> {
        if rank == 0 || rank > obs.rows.min(obs.cols) {
            return Err(GfiError::InvalidInput(format!(
                "rank {rank} is not in 1..={}",
                obs.rows.min(obs.cols)
            )));
        }
        let mut row_slots = vec![Vec::new(); obs.rows];
        let mut col_slots = vec![Vec::new(); obs.cols];
        for (k, &(i, j)) in obs.omega.iter().enumerate() {
            row_slots[i].push((k, j));
            col_slots[j].push((k, i));
        }
        Ok(Self {
            obs,
            rank,
            als,
            krylov: KrylovOptions {
                block_depth: 4,
                extra_vectors: 2,
                lanczos_steps: 30,
                max_restarts: 4,
                ..KrylovOptions::default()
            },
            row_slots,
            col_slots,
            dense_solves: AtomicUsize::new(0),
            krylov_solves: AtomicUsize::new(0),
        })
    }

    pub fn factors(&self, theta: &[f64]) -> Result<FactorPair> {
        FactorPair::from_flat(self.obs.rows, self.obs.cols, self.rank, theta)
    }

    /// Number of debias solves that went through the Krylov and the dense route.
    pub fn route_counts(&self) -> (usize, usize) {
        (
            self.krylov_solves.load(Ordering::Relaxed),
            self.dense_solves.load(Ordering::Relaxed),
        )
    }

    /// Half-scale objective `0.5 |v - f(AB^T)|^2 + 0.5 lambda (|A|^2 + |B|^2)`.
    pub fn objective(&self, f: &FactorPair, v: &[f64], lambda: f64) -> f64 {
        let (m, n) = (self.obs.rows, self.obs.cols);
        let (a, b) = (f.a.as_slice(), f.b.as_slice());
        let mut rss = 0.0;
        for (k, &(i, j)) in self.obs.omega.iter().enumerate() {
            let mut g = 0.0;
            for r in 0..self.rank {
                g += a[i + m * r] * b[j + n * r];
            }
            let r = v[k] - g;
            rss += r * r;
        }
        0.5 * rss + 0.5 * lambda * (f.a.norm_squared() + f.b.norm_squared())
    }

    /// Stage 1: rank-`R` truncated SVD of the rescaled observed matrix.
    pub fn spectral_init(&self, v: &[f64]) -> Result<FactorPair> {
        let p_hat = self.obs.observed_fraction();
        let y = self.obs.scatter(v) / p_hat;
        let svd = top_singular(&y, self.rank, 1e-10, 1000)?;
        let root = svd.singular_values.map(f64::sqrt);
        let mut a = svd.left_vectors;
        let mut b = svd.right_vectors;
        for r in 0..self.rank {
            a.column_mut(r).scale_mut(root[r]);
            b.column_mut(r).scale_mut(root[r]);
        }
        FactorPair::new(a, b)
    }

    /// Stage 2: alternating ridge regressions, one row of `A` or `B` at a time.
    pub fn alternating_ridge(
        &self,
        v: &[f64],
        lambda: f64,
        mut f: FactorPair,
    ) -> Result<(FactorPair, bool, usize)> {
        let mut obj = self.objective(&f, v, lambda);
        for it in 1..=self.als.max_iters {
            update_rows(&mut f.a, &f.b, &self.row_slots, v, lambda, self.rank)?;
            debug_assert!(self.objective(&f, v, lambda) <= obj * (1.0 + 1e-10) + 1e-15);
            update_rows(&mut f.b, &f.a, &self.col_slots, v, lambda, self.rank)?;
            if lambda > 0.0 {
                balance(&mut f);
            }
            let new_obj = self.objective(&f, v, lambda);
            if !new_obj.is_finite() {
                return Err(GfiError::NonFinite("alternating ridge objective".into()));
            }
            debug_assert!(new_obj <= obj * (1.0 + 1e-10) + 1e-15);
            let decrease = (obj - new_obj) / obj.abs().max(1e-300);
            obj = new_obj;
            if decrease < self.als.tol {
                return Ok((f, true, it));
            }
        }
        debug!(
            "alternating ridge stopped after {} iterations",
            self.als.max_iters
        );
        Ok((f, false, self.als.max_iters))
    }

    /// Spectral initialization followed by alternating ridge, on `Y - u`.
    pub fn two_stage_fit(&self, u_star: &[f64], lambda: f64) -> Result<(FactorPair, bool, usize)> {
        if u_star.len() != self.obs.omega.len() {
            return Err(GfiError::Dimension(
                "noise vector length differs from |Omega|".into(),
            ));
        }
        if !(lambda >= 0.0) {
            return Err(GfiError::InvalidInput(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        let v: Vec<f64> = self
            .obs
            .values
            .iter()
            .zip(u_star)
            .map(|(y, u)| y - u)
            .collect();
        let init = self.spectral_init(&v)?;
        self.alternating_ridge(&v, lambda, init)
    }

    /// `1.4826 * MAD` of the residuals of one fit to the observed entries.
    pub fn mad_sigma(&self, lambda: f64) -> Result<f64> {
        if self.obs.omega.len() < 2 {
            return Err(GfiError::InvalidInput(
                "MAD needs at least 2 observed entries".into(),
            ));
        }
        let zeros = vec![0.0; self.obs.omega.len()];
        let (f, _, _) = self.two_stage_fit(&zeros, lambda)?;
        let r = self.residual(&f.to_flat(), &zeros);
        let s = mad(&r)?;
        if s == 0.0 {
            warn!("all residuals are identical; MAD is zero");
        }
        Ok(s)
    }

    /// Directions `(A G, -B G^T)` along which `A B^T` is unchanged to first order.
    pub fn gauge_block(&self, f: &FactorPair) -> DenseMatrix {
        let (m, n, rk) = (self.obs.rows, self.obs.cols, self.rank);
        let dim = (m + n) * rk;
        let mut out = DenseMatrix::zeros(dim, rk * rk);
        for k in 0..rk {
            for l in 0..rk {
                let col = k * rk + l;
                // A E_kl puts column k of A into column l; -B E_lk puts -column l of B into column k
                for i in 0..m {
                    out[(i + m * l, col)] = f.a[(i, k)];
                }
                for j in 0..n {
                    out[(m * rk + j + n * k, col)] -= f.b[(j, l)];
                }
            }
        }
        out
    }

    fn hessian_operator<'a>(
        &'a self,
        f: &'a FactorPair,
        resid: Vec<f64>,
        gauss_newton_only: bool,
    ) -> McHessian<'a> {
        McHessian {
            model: self,
            f,
            resid,
            gauss_newton_only,
        }
    }

    /// Model restricted to the observed slots not listed in `drop`.
    pub fn without_slots(&self, drop: &[usize]) -> Result<Self> {
        let mut keep = vec![true; self.obs.omega.len()];
        for &k in drop {
            keep[k] = false;
        }
        let omega: Vec<_> = self
            .obs
            .omega
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(p, _)| *p)
            .collect();
        let values: Vec<_> = self
            .obs
            .values
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(v, _)| *v)
            .collect();
        let mut m = Self::new(
            ObservedMatrix::new(self.obs.rows, self.obs.cols, omega, values)?,
            self.rank,
            self.als.clone(),
        )?;
        m.krylov = self.krylov.clone();
        Ok(m)
    }
}

/// Rescale `(A, B)` so that `A^T A = B^T B` without changing `A B^T`.
///
/// Among all factorizations of the same product this one has the smallest
/// `|A|^2 + |B|^2`, so a ridge objective can only go down.
fn balance(f: &mut FactorPair) {
    let (qa, ra) = f.a.clone().qr().unpack();
    let (qb, rb) = f.b.clone().qr().unpack();
    let core = &ra * rb.transpose();
    let svd = core.svd(true, true);
    let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
        return;
    };
    let root = DenseMatrix::from_diagonal(&svd.singular_values.map(f64::sqrt));
    f.a = qa * u * &root;
    f.b = qb * vt.transpose() * root;
}

fn update_rows(
    target: &mut DenseMatrix,
    other: &DenseMatrix,
    slots: &[Vec<(usize, usize)>],
    v: &[f64],
    lambda: f64,
    rank: usize,
) -> Result<()> {
    let ld_o = other.nrows();
    let ld_t = target.nrows();
    let o = other.as_slice();
    let mut g = DenseMatrix::zeros(rank, rank);
    let mut rhs = Vector::zeros(rank);
    for (i, list) in slots.iter().enumerate() {
        g.fill(0.0);
        rhs.fill(0.0);
        {
            let gs = g.as_mut_slice();
            for &(k, j) in list {
                for p in 0..rank {
                    let op = o[j + ld_o * p];
                    rhs[p] += v[k] * op;
                    for q in 0..=p {
                        gs[p + rank * q] += op * o[j + ld_o * q];
                    }
                }
            }
        }
        for p in 0..rank {
            g[(p, p)] += lambda;
            for q in 0..p {
                g[(q, p)] = g[(p, q)];
            }
        }
        let sol = match g.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => truncated_pinv(&g, 0.0)? * &rhs,
        };
        let t = target.as_mut_slice();
        for p in 0..rank {
            t[i + ld_t * p] = sol[p];
        }
    }
    Ok(())
}

fn mad(values: &[f64]) -> Result<f64> {
    let med = median(values)?;
    let dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    Ok(1.4826 * median(&dev)?)
}

/// `H = J^T J - sum_k r_k d^2 G_k` for the factor model, applied without forming it.
pub struct McHessian<'a> {
    model: &'a McModel,
    f: &'a FactorPair,
    resid: Vec<f64>,
    gauss_newton_only: bool,
}

impl SymmetricOperator for McHessian<'_> {
    fn dim(&self) -> usize {
        (self.model.obs.rows + self.model.obs.cols) * self.model.rank
    }

    fn apply(&self, x: &Vector) -> Vector {
        let (m, n, rk) = (self.model.obs.rows, self.model.obs.cols, self.model.rank);
        let off = m * rk;
        let mut out = Vector::zeros(x.len());
        let (a, b) = (self.f.a.as_slice(), self.f.b.as_slice());
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        for (k, &(i, j)) in self.model.obs.omega.iter().enumerate() {
            let mut jx = 0.0;
            for r in 0..rk {
                jx += b[j + n * r] * xs[i + m * r] + a[i + m * r] * xs[off + j + n * r];
            }
            let rk_k = if self.gauss_newton_only {
                0.0
            } else {
                self.resid[k]
            };
            for r in 0..rk {
                os[i + m * r] += b[j + n * r] * jx - rk_k * xs[off + j + n * r];
                os[off + j + n * r] += a[i + m * r] * jx - rk_k * xs[i + m * r];
            }
        }
        out
    }

    fn to_dense(&self) -> DenseMatrix {
        let (m, n, rk) = (self.model.obs.rows, self.model.obs.cols, self.model.rank);
        let off = m * rk;
        let mut h = DenseMatrix::zeros(self.dim(), self.dim());
        let (a, b) = (&self.f.a, &self.f.b);
        let mut idx = vec![0usize; 2 * rk];
        let mut val = vec![0.0; 2 * rk];
        for (k, &(i, j)) in self.model.obs.omega.iter().enumerate() {
            for r in 0..rk {
                idx[r] = i + m * r;
                val[r] = b[(j, r)];
                idx[rk + r] = off + j + n * r;
                val[rk + r] = a[(i, r)];
            }
            for p in 0..2 * rk {
                for q in 0..2 * rk {
                    h[(idx[p], idx[q])] += val[p] * val[q];
                }
            }
            if !self.gauss_newton_only {
                for r in 0..rk {
                    h[(idx[r], idx[rk + r])] -= self.resid[k];
                    h[(idx[rk + r], idx[r])] -= self.resid[k];
                }
            }
        }
        h
    }
}

impl CrossValidate for McModel {
    fn cv_len(&self) -> usize {
        self.obs.omega.len()
    }

    fn cv_errors(
        &self,
        grid: &[f64],
        folds: &[usize],
        n_folds: usize,
        _stream: &RandomStream,
    ) -> Result<Vec<f64>> {
        let mut sse = vec![0.0; grid.len()];
        for k in 0..n_folds {
            let held: Vec<usize> = (0..folds.len()).filter(|&s| folds[s] == k).collect();
            if held.is_empty() {
                continue;
            }
            let sub = self.without_slots(&held)?;
            let zeros = vec![0.0; sub.obs.omega.len()];
            for (g, &lambda) in grid.iter().enumerate() {
                let (f, _, _) = sub.two_stage_fit(&zeros, lambda)?;
                for &s in &held {
                    let (i, j) = self.obs.omega[s];
                    let pred = f.a.row(i).dot(&f.b.row(j));
                    sse[g] += (self.obs.values[s] - pred).powi(2);
                }
            }
        }
        Ok(sse.into_iter().map(|s| s / folds.len() as f64).collect())
    }

    /// Eight points from `1e-4 * l0` to `l0`, with `l0` the spectral norm of `f(Y)`.
    fn default_grid(&self) -> Vec<f64> {
        let top = top_singular(&self.obs.to_dense(), 1, 1e-10, 500)
            .map(|s| s.singular_values[0])
            .unwrap_or(1.0)
            .max(f64::MIN_POSITIVE);
        log_grid(1e-4 * top, top, 8).unwrap_or_else(|_| vec![top])
    }
}

impl AdditiveNoiseModel for McModel {
    fn noise_len(&self) -> usize {
        self.obs.omega.len()
    }

    fn layout(&self) -> ParamLayout {
        ParamLayout::FactorPair {
            rows: self.obs.rows,
            cols: self.obs.cols,
            rank: self.rank,
        }
    }

    fn responses(&self) -> &[f64] {
        &self.obs.values
    }

    fn predict(&self, theta: &[f64]) -> Vec<f64> {
        let f = self.factors(theta).expect("theta length matches layout");
        self.obs
            .omega
            .iter()
            .map(|&(i, j)| f.a.row(i).dot(&f.b.row(j)))
            .collect()
    }

    fn fit(&self, u_star: &[f64], lambda: f64, _stream: &RandomStream) -> Result<FitOutcome> {
        let (f, converged, iterations) = self.two_stage_fit(u_star, lambda)?;
        Ok(FitOutcome {
            theta: f.to_flat(),
            converged,
            iterations,
        })
    }

    fn penalty_gradient(&self, theta: &[f64], lambda: f64) -> Vec<f64> {
        theta.iter().map(|t| lambda * t).collect()
    }

    fn jacobian(&self, theta: &[f64]) -> DenseMatrix {
        let f = self.factors(theta).expect("theta length matches layout");
        let (m, n, rk) = (self.obs.rows, self.obs.cols, self.rank);
        let mut j = DenseMatrix::zeros(self.obs.omega.len(), (m + n) * rk);
        for (k, &(i, c)) in self.obs.omega.iter().enumerate() {
            for r in 0..rk {
                j[(k, i + m * r)] = f.b[(c, r)];
                j[(k, m * rk + c + n * r)] = f.a[(i, r)];
            }
        }
        j
    }

    fn curvature(&self, theta: &[f64], weights: &[f64]) -> DenseMatrix {
        let (m, n, rk) = (self.obs.rows, self.obs.cols, self.rank);
        let dim = (m + n) * rk;
        debug_assert_eq!(theta.len(), dim);
        let mut c = DenseMatrix::zeros(dim, dim);
        for (k, &(i, j)) in self.obs.omega.iter().enumerate() {
            for r in 0..rk {
                let (p, q) = (i + m * r, m * rk + j + n * r);
                c[(p, q)] += weights[k];
                c[(q, p)] += weights[k];
            }
        }
        c
    }

    fn hessian(
        &self,
        u_star: &[f64],
        theta: &[f64],
        gauss_newton_only: bool,
    ) -> Result<DenseMatrix> {
        let f = self.factors(theta)?;
        let r = self.residual(theta, u_star);
        Ok(self.hessian_operator(&f, r, gauss_newton_only).to_dense())
    }

    /// Quadratic penalties leave no exact zeros, so every coordinate is debiased.
    fn active_mask(&self, theta: &[f64]) -> Vec<bool> {
        vec![true; theta.len()]
    }

    fn estimate_sigma(&self, lambda: f64, _stream: &RandomStream) -> Result<f64> {
        self.mad_sigma(lambda)
    }

    fn debias(
        &self,
        u_star: &[f64],
        theta_star: &[f64],
        lambda: f64,
        c: f64,
        gauss_newton_only: bool,
    ) -> Result<Vec<f64>> {
        let f = self.factors(theta_star)?;
        let r = self.residual(theta_star, u_star);
        let op = self.hessian_operator(&f, r, gauss_newton_only);
        let xi = Vector::from_vec(self.penalty_gradient(theta_star, lambda));
        let seed = self.gauge_block(&f);
        let solve = truncated_pinv_apply(&op, &xi, c, Some(&seed), &self.krylov)?;
        match solve.route {
            SolveRoute::Krylov => self.krylov_solves.fetch_add(1, Ordering::Relaxed),
            SolveRoute::Dense => self.dense_solves.fetch_add(1, Ordering::Relaxed),
        };
        Ok(theta_star
            .iter()
            .zip(solve.solution.iter())
            .map(|(t, s)| t + s)
            .collect())
    }

    /// Every entry of `A B^T`, column-major.
    fn targets(&self, theta: &[f64]) -> Vec<f64> {
        self.factors(theta)
            .expect("theta length matches layout")
            .product()
            .as_slice()
            .to_vec()
    }
}

/// Summaries of the unobserved entries of `M* = A* B*^T` over accepted draws.
#[derive(Clone, Debug)]
pub struct MissingEntryReport {
    pub positions: Vec<(usize, usize)>,
    pub summary: Option<SummaryReport>,
}

pub fn mc_complete(
    sample: &FiducialSample,
    obs: &ObservedMatrix,
    rank: usize,
    levels: &[f64],
) -> Result<MissingEntryReport> {
    let mask = obs.observed_mask();
    let positions: Vec<(usize, usize)> = (0..obs.cols)
        .flat_map(|j| (0..obs.rows).map(move |i| (i, j)))
        .filter(|&(i, j)| !mask[i + obs.rows * j])
        .collect();
    if positions.is_empty() {
        return Ok(MissingEntryReport {
            positions,
            summary: None,
        });
    }
    let mut rows = Vec::new();
    for d in sample.accepted() {
        let f = FactorPair::from_flat(obs.rows, obs.cols, rank, &d.theta_de.flat)?;
        rows.push(
            positions
                .iter()
                .map(|&(i, j)| f.a.row(i).dot(&f.b.row(j)))
                .collect::<Vec<f64>>(),
        );
    }
    let summary = summarize_values(&rows, levels)?;
    Ok(MissingEntryReport {
        positions,
        summary: Some(summary),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::completion::project_omega;
    use crate::numerics::gaussian;
    use crate::simgen::{gen_omega, gen_orthonormal_factors};

    fn full_omega(m: usize, n: usize) -> Vec<(usize, usize)> {
        (0..n).flat_map(|j| (0..m).map(move |i| (i, j))).collect()
    }

    #[test]
    fn balancing_keeps_the_product() {
        let s = RandomStream::new(70, 0);
        let a = DenseMatrix::from_vec(6, 2, gaussian(&s, 12, 1.0).unwrap()) * 3.0;
        let b = DenseMatrix::from_vec(5, 2, gaussian(&s.derive(1), 10, 1.0).unwrap()) * 0.2;
        let mut f = FactorPair::new(a, b).unwrap();
        let before = f.product();
        let pen = f.a.norm_squared() + f.b.norm_squared();
        balance(&mut f);
        assert!((f.product() - before).amax() < 1e-12);
        assert!(f.a.norm_squared() + f.b.norm_squared() < pen);
        assert!((f.a.tr_mul(&f.a) - f.b.tr_mul(&f.b)).amax() < 1e-12);
    }

    #[test]
    fn fit_is_stationary() {
        let (fa, fb) = gen_orthonormal_factors(30, 2, &RandomStream::new(71, 0)).unwrap();
        let omega = gen_omega(30, 30, 0.4, &RandomStream::new(71, 1)).unwrap();
        let obs = project_omega(&(&fa * fb.transpose()), &omega).unwrap();
        let tight = AlsConfig {
            tol: 1e-15,
            max_iters: 5000,
        };
        let model = McModel::new(obs, 2, tight).unwrap();
        let u = gaussian(&RandomStream::new(71, 2), omega.len(), 1e-2).unwrap();
        for lambda in [1e-4, 1e-2] {
            let fit = model.fit(&u, lambda, &RandomStream::new(0, 0)).unwrap();
            let r = model.residual(&fit.theta, &u);
            let j = model.jacobian(&fit.theta);
            let grad = -j.tr_mul(&Vector::from_vec(r))
                + Vector::from_vec(model.penalty_gradient(&fit.theta, lambda));
            assert!(grad.amax() < 1e-9, "{}", grad.amax());
        }
    }

    #[test]
    fn rank_one_noiseless_recovery() {
        let m = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let obs = project_omega(&m, &full_omega(2, 2)).unwrap();
        let model = McModel::new(obs, 1, AlsConfig::default()).unwrap();
        let (f, _, _) = model.two_stage_fit(&[0.0; 4], 0.0).unwrap();
        assert!((f.product() - m).norm() < 1e-8);
    }

    #[test]
    fn heavy_ridge_shrinks_to_zero() {
        let m = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let obs = project_omega(&m, &full_omega(2, 2)).unwrap();
        let model = McModel::new(obs, 1, AlsConfig::default()).unwrap();
        let (f, _, _) = model.two_stage_fit(&[0.0; 4], 1e6).unwrap();
        assert!(f.product().amax() < 1e-6);
    }

    #[test]
    fn rank_too_large() {
        let m = DenseMatrix::zeros(2, 3);
        let obs = project_omega(&m, &[(0, 0)]).unwrap();
        assert!(McModel::new(obs, 3, AlsConfig::default()).is_err());
    }

    #[test]
    fn mad_examples() {
        assert!((mad(&[-1.0, 0.0, 1.0, 2.0]).unwrap() - 1.4826).abs() < 1e-12);
        assert_eq!(mad(&[0.0; 5]).unwrap(), 0.0);
        let z = gaussian(&RandomStream::new(3, 3), 10_000, 1.0).unwrap();
        assert!((mad(&z).unwrap() - 1.0).abs() < 0.05);
    }

    fn random_instance(n: usize, rank: usize, p: f64, seed: u64) -> McModel {
        let (a, b) = gen_orthonormal_factors(n, rank, &RandomStream::new(seed, 0)).unwrap();
        let m = &a * b.transpose();
        let omega = gen_omega(n, n, p, &RandomStream::new(seed, 1)).unwrap();
        let mut obs = project_omega(&m, &omega).unwrap();
        let noise = gaussian(&RandomStream::new(seed, 2), omega.len(), 1e-3).unwrap();
        for (v, e) in obs.values.iter_mut().zip(noise) {
            *v += e;
        }
        McModel::new(obs, rank, AlsConfig::default()).unwrap()
    }

    #[test]
    fn operator_matches_generic_hessian() {
        let model = random_instance(6, 2, 0.7, 4);
        let dim = (6 + 6) * 2;
        let theta = gaussian(&RandomStream::new(4, 3), dim, 1.0).unwrap();
        let u = gaussian(&RandomStream::new(4, 4), model.noise_len(), 0.1).unwrap();
        let fast = model.hessian(&u, &theta, false).unwrap();
        let generic = crate::engine::hessian_default(&model, &u, &theta, false).unwrap();
        assert!((&fast - &generic).amax() < 1e-12);
        let f = model.factors(&theta).unwrap();
        let op = model.hessian_operator(&f, model.residual(&theta, &u), false);
        let x = Vector::from_vec(gaussian(&RandomStream::new(4, 5), dim, 1.0).unwrap());
        assert!((op.apply(&x) - &fast * &x).amax() < 1e-12);
    }

    #[test]
    fn krylov_debias_matches_dense() {
        let model = random_instance(40, 2, 0.4, 5);
        let lambda = 0.01;
        let u = gaussian(&RandomStream::new(5, 9), model.noise_len(), 1e-3).unwrap();
        let fit = model.fit(&u, lambda, &RandomStream::new(0, 0)).unwrap();
        let de = model.debias(&u, &fit.theta, lambda, 0.05, false).unwrap();
        assert_eq!(model.route_counts(), (1, 0));
        let h = model.hessian(&u, &fit.theta, false).unwrap();
        let xi = Vector::from_vec(model.penalty_gradient(&fit.theta, lambda));
        let dense = crate::numerics::spectral::truncated_pinv_apply_dense(&h, &xi, 0.05).unwrap();
        let step: Vec<f64> = de.iter().zip(&fit.theta).map(|(a, b)| a - b).collect();
        let err = step
            .iter()
            .zip(dense.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-8 * dense.amax().max(1e-12), "err {err}");
    }

    #[test]
    fn missing_entry_report() {
        let model = random_instance(5, 1, 0.6, 6);
        let full = McModel::new(
            project_omega(&DenseMatrix::zeros(2, 2), &full_omega(2, 2)).unwrap(),
            1,
            AlsConfig::default(),
        )
        .unwrap();
        let cfg = crate::engine::GfiConfig {
            m: 4,
            c: 0.05,
            lambda: 0.01,
            sigma: crate::engine::SigmaSpec::Known(1e-3),
            seed: 1,
            gauss_newton_only: false,
        };
        let sample = crate::engine::run_autogfi(&model, &cfg).unwrap();
        let rep = mc_complete(&sample, &model.obs, 1, &[0.95]).unwrap();
        assert_eq!(rep.positions.len(), 25 - model.obs.omega.len());
        let d = sample.accepted().next().unwrap();
        let f = model.factors(&d.theta_de.flat).unwrap().product();
        let one = FiducialSample {
            draws: vec![d.clone()],
            epsilon: sample.epsilon,
            sigma_used: sample.sigma_used,
            failed: vec![],
        };
        let single = mc_complete(&one, &model.obs, 1, &[0.95]).unwrap();
        let s = single.summary.unwrap();
        for (k, &(i, j)) in single.positions.iter().enumerate() {
            assert!((s.point_mean[k] - f[(i, j)]).abs() < 1e-15);
        }
        let none = mc_complete(&one, &full.obs, 1, &[0.95]).unwrap();
        assert!(none.positions.is_empty() && none.summary.is_none());
    }
}
