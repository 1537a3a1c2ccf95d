//! Linear regression with network cohesion.
//!
//! `Y = X beta + alpha + U`, where the individual effects `alpha` are shrunk towards
//! each other along the edges of a known graph by the penalty `lambda * alpha^T L alpha`.
//! Debiasing happens in the coordinates `eta = L^{1/2} alpha`, where the penalty is a
//! plain ridge term.

use std::sync::{Arc, Mutex};

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::engine::cv::{fold_assignment, log_grid, CrossValidate};
use crate::engine::model::{debias_step, AdditiveNoiseModel, FitOutcome, ParamLayout};
use crate::error::{GfiError, Result};
use crate::numerics::linalg::ensure_symmetric;
use crate::numerics::{
    truncated_pinv, DenseMatrix, RandomStream, SvdResult, SymmetricRoot, Vector,
};

const CENTER_TOL: f64 = 1e-8;

/// `D - A` for a symmetric, hollow 0/1 adjacency matrix.
pub fn laplacian(adjacency: &DenseMatrix) -> Result<DenseMatrix> {
    ensure_symmetric(adjacency, "adjacency")?;
    let n = adjacency.nrows();
    for i in 0..n {
        if adjacency[(i, i)] != 0.0 {
            return Err(GfiError::InvalidInput(format!(
                "adjacency has a self-loop at node {i}"
            )));
        }
        for j in 0..n {
            let a = adjacency[(i, j)];
            if a != 0.0 && a != 1.0 {
                return Err(GfiError::InvalidInput(format!(
                    "adjacency entries must be 0 or 1, got {a} at ({i},{j})"
                )));
            }
        }
    }
    let mut l = -adjacency.clone();
    for i in 0..n {
        l[(i, i)] = adjacency.row(i).sum();
    }
    Ok(l)
}

/// Connected components as lists of node indices, in order of their smallest node.
pub fn connected_components(adjacency: &DenseMatrix) -> Vec<Vec<usize>> {
    let n = adjacency.nrows();
    let mut label = vec![usize::MAX; n];
    let mut out = Vec::new();
    for root in 0..n {
        if label[root] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut comp = vec![root];
        label[root] = id;
        let mut head = 0;
        while head < comp.len() {
            let i = comp[head];
            head += 1;
            for j in 0..n {
                if adjacency[(i, j)] != 0.0 && label[j] == usize::MAX {
                    label[j] = id;
                    comp.push(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

#[derive(Clone, Debug)]
pub struct NetworkDataset {
    pub adjacency: DenseMatrix,
    /// `n x p` covariates with centered columns.
    pub x: DenseMatrix,
    pub y: Vec<f64>,
}

impl NetworkDataset {
    pub fn new(adjacency: DenseMatrix, x: DenseMatrix, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if adjacency.nrows() != n || adjacency.ncols() != n || x.nrows() != n {
            return Err(GfiError::Dimension(format!(
                "{n} responses, {}x{} adjacency, {} covariate rows",
                adjacency.nrows(),
                adjacency.ncols(),
                x.nrows()
            )));
        }
        laplacian(&adjacency)?;
        for (k, col) in x.column_iter().enumerate() {
            let mean = col.mean();
            if mean.abs() >= CENTER_TOL {
                return Err(GfiError::InvalidInput(format!(
                    "covariate column {k} is not centered (mean {mean})"
                )));
            }
        }
        if x.ncols() > 0 && SvdResult::of(&x)?.numerical_rank(1e-10) < x.ncols() {
            return Err(GfiError::Singular(
                "covariate matrix does not have full column rank".into(),
            ));
        }
        if y.iter().any(|v| !v.is_finite()) || x.iter().any(|v| !v.is_finite()) {
            return Err(GfiError::NonFinite("network data".into()));
        }
        Ok(Self { adjacency, x, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RncParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl RncParams {
    pub fn from_flat(n: usize, p: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != n + p {
            return Err(GfiError::Dimension(format!(
                "network parameters need {} entries, got {}",
                n + p,
                flat.len()
            )));
        }
        Ok(Self {
            alpha: flat[..n].to_vec(),
            beta: flat[n..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.alpha.iter().chain(&self.beta).copied().collect()
    }
}

/// Which response the debiased coefficients are refit against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefitResponse {
    /// The observed `Y`.
    Observed,
    /// The perturbed response `Y - U*` that the draw was fit to.
    #[default]
    Perturbed,
}

/// Block elimination for the stationarity system
/// `(I + lambda L) alpha + X beta = v`, `X^T X beta + X^T alpha = X^T v`.
///
/// With `S = (I + lambda L)^{-1}`, eliminating `alpha` leaves
/// `X^T (I - S) X beta = X^T (I - S) v`.
#[derive(Clone, Debug)]
pub struct RncSolver {
    s: DenseMatrix,
    x: DenseMatrix,
    reduced: Option<Cholesky<f64, nalgebra::Dyn>>,
}

impl RncSolver {
    pub fn new(l: &DenseMatrix, x: &DenseMatrix, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(GfiError::InvalidInput(format!(
                "network penalty must be positive, got {lambda}"
            )));
        }
        let n = l.nrows();
        let a = DenseMatrix::identity(n, n) + l * lambda;
        let s = a
            .cholesky()
            .ok_or_else(|| GfiError::Singular("I + lambda L is not positive definite".into()))?
            .inverse();
        let reduced = if x.ncols() == 0 {
            None
        } else {
            let m = x.tr_mul(&(x - &s * x));
            let m = (&m + m.transpose()) * 0.5;
            let scale = x.tr_mul(x).diagonal().amax().max(f64::MIN_POSITIVE);
            let chol = m.clone().cholesky().filter(|c| {
                let d = c.l_dirty().diagonal();
                d.iter().all(|v| v * v > 1e-12 * scale)
            });
            Some(chol.ok_or_else(|| {
                GfiError::Singular(
                    "covariates are (nearly) constant on connected components; \
                     the network adds no information beyond X"
                        .into(),
                )
            })?)
        };
        Ok(Self {
            s,
            x: x.clone(),
            reduced,
        })
    }

    pub fn solve(&self, v: &Vector) -> RncParams {
        let sv = &self.s * v;
        let beta = match &self.reduced {
            Some(chol) => chol.solve(&self.x.tr_mul(&(v - &sv))),
            None => Vector::zeros(0),
        };
        let alpha = if beta.is_empty() {
            sv
        } else {
            sv - &self.s * (&self.x * &beta)
        };
        RncParams {
            alpha: alpha.iter().copied().collect(),
            beta: beta.iter().copied().collect(),
        }
    }
}

/// Minimizer of `|Y - U* - X beta - alpha|^2 + lambda alpha^T L alpha`.
pub fn rnc_fit(data: &NetworkDataset, u_star: &[f64], lambda: f64) -> Result<RncParams> {
    if u_star.len() != data.n() {
        return Err(GfiError::Dimension(format!(
            "noise vector has length {}, expected {}",
            u_star.len(),
            data.n()
        )));
    }
    let l = laplacian(&data.adjacency)?;
    let solver = RncSolver::new(&l, &data.x, lambda)?;
    let v = Vector::from_iterator(data.n(), data.y.iter().zip(u_star).map(|(y, u)| y - u));
    Ok(solver.solve(&v))
}

pub struct NetworkModel {
    pub data: NetworkDataset,
    pub refit: RefitResponse,
    l: DenseMatrix,
    root: SymmetricRoot,
    /// `L^pinv`, the Hessian of the loss in `eta` coordinates.
    l_pinv: DenseMatrix,
    null_projector: DenseMatrix,
    xtx: Option<Cholesky<f64, nalgebra::Dyn>>,
    solvers: Mutex<Vec<(u64, Arc<RncSolver>)>>,
    debias_ops: Mutex<Vec<(u64, Arc<DenseMatrix>)>>,
}

impl NetworkModel {
    pub fn new(data: NetworkDataset, refit: RefitResponse) -> Result<Self> {
        let l = laplacian(&data.adjacency)?;
        let root = SymmetricRoot::new(&l)?;
        let l_pinv = &root.pinv_sqrt * &root.pinv_sqrt;
        let l_pinv = (&l_pinv + l_pinv.transpose()) * 0.5;
        let n = data.n();
        let null_projector = DenseMatrix::identity(n, n) - &root.range_projector;
        let xtx = if data.p() == 0 {
            None
        } else {
            Some(
                data.x
                    .tr_mul(&data.x)
                    .cholesky()
                    .ok_or_else(|| GfiError::Singular("X^T X is singular".into()))?,
            )
        };
        Ok(Self {
            data,
            refit,
            l,
            root,
            l_pinv,
            null_projector,
            xtx,
            solvers: Mutex::new(Vec::new()),
            debias_ops: Mutex::new(Vec::new()),
        })
    }

    pub fn laplacian(&self) -> &DenseMatrix {
        &self.l
    }

    fn solver(&self, lambda: f64) -> Result<Arc<RncSolver>> {
        let key = lambda.to_bits();
        let mut cache = self.solvers.lock().expect("solver cache poisoned");
        if let Some((_, s)) = cache.iter().find(|(k, _)| *k == key) {
            return Ok(s.clone());
        }
        let s = Arc::new(RncSolver::new(&self.l, &self.data.x, lambda)?);
        cache.push((key, s.clone()));
        Ok(s)
    }

    fn debias_operator(&self, c: f64) -> Result<Arc<DenseMatrix>> {
        let key = c.to_bits();
        let mut cache = self.debias_ops.lock().expect("debias cache poisoned");
        if let Some((_, m)) = cache.iter().find(|(k, _)| *k == key) {
            return Ok(m.clone());
        }
        let m = Arc::new(truncated_pinv(&self.l_pinv, c)?);
        cache.push((key, m.clone()));
        Ok(m)
    }

    /// Least-squares coefficients of `response - alpha` on `X`.
    fn refit_beta(&self, response: &Vector, alpha: &Vector) -> Vector {
        match &self.xtx {
            Some(chol) => chol.solve(&self.data.x.tr_mul(&(response - alpha))),
            None => Vector::zeros(0),
        }
    }

    /// Debias a fitted draw in `eta = L^{1/2} alpha` coordinates, then refit `beta`.
    ///
    /// The `eta` step uses `H = L^pinv` and `xi = lambda eta`; the debiased effects are
    /// `alpha_de = (I - P_L) alpha* + (L^{1/2})^pinv eta_de`.
    pub fn nr_debias(
        &self,
        u_star: &[f64],
        theta: &RncParams,
        lambda: f64,
        c: f64,
    ) -> Result<RncParams> {
        let n = self.data.n();
        if theta.alpha.len() != n || theta.beta.len() != self.data.p() || u_star.len() != n {
            return Err(GfiError::Dimension(
                "network draw has the wrong shape".into(),
            ));
        }
        let alpha = Vector::from_column_slice(&theta.alpha);
        let eta = &self.root.sqrt * &alpha;
        let xi = &eta * lambda;
        let eta_de = if eta.iter().all(|&e| e != 0.0) {
            &eta + &*self.debias_operator(c)? * &xi
        } else {
            let mask: Vec<bool> = eta.iter().map(|&e| e != 0.0).collect();
            Vector::from_vec(debias_step(
                &self.l_pinv,
                xi.as_slice(),
                eta.as_slice(),
                &mask,
                c,
            )?)
        };
        let alpha_de = &self.null_projector * &alpha + &self.root.pinv_sqrt * &eta_de;
        let y = Vector::from_column_slice(&self.data.y);
        let response = match self.refit {
            RefitResponse::Observed => y,
            RefitResponse::Perturbed => y - Vector::from_column_slice(u_star),
        };
        let beta_de = self.refit_beta(&response, &alpha_de);
        Ok(RncParams {
            alpha: alpha_de.iter().copied().collect(),
            beta: beta_de.iter().copied().collect(),
        })
    }

    /// Mean over folds of the held-out mean squared prediction error.
    ///
    /// Each fold is fit on the subgraph of training nodes; effects of held-out nodes are
    /// filled in by minimizing `alpha^T L alpha` with the training effects held fixed.
    pub fn cv_mspe(&self, lambda: f64, folds: &[usize], n_folds: usize) -> Result<f64> {
        let n = self.data.n();
        if folds.len() != n || n_folds < 2 || folds.iter().any(|&k| k >= n_folds) {
            return Err(GfiError::InvalidInput(format!(
                "bad fold labels for {n} nodes and {n_folds} folds"
            )));
        }
        let mut total = 0.0;
        let mut used = 0;
        for k in 0..n_folds {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != k).collect();
            let val: Vec<usize> = (0..n).filter(|&i| folds[i] == k).collect();
            if val.is_empty() {
                continue;
            }
            let fit = self.fit_subset(&train, lambda)?;
            let alpha_val = self.interpolate(&train, &fit.alpha, &val)?;
            let mut sse = 0.0;
            for (a, &i) in val.iter().enumerate() {
                let xb: f64 = (0..self.data.p())
                    .map(|j| self.data.x[(i, j)] * fit.beta[j])
                    .sum();
                let r = self.data.y[i] - xb - alpha_val[a];
                sse += r * r;
            }
            total += sse / val.len() as f64;
            used += 1;
        }
        Ok(total / used as f64)
    }

    fn fit_subset(&self, nodes: &[usize], lambda: f64) -> Result<RncParams> {
        let m = nodes.len();
        let adj = DenseMatrix::from_fn(m, m, |a, b| self.data.adjacency[(nodes[a], nodes[b])]);
        let x = DenseMatrix::from_fn(m, self.data.p(), |a, j| self.data.x[(nodes[a], j)]);
        let v = Vector::from_iterator(m, nodes.iter().map(|&i| self.data.y[i]));
        let solver = RncSolver::new(&laplacian(&adj)?, &x, lambda)?;
        Ok(solver.solve(&v))
    }

    /// Harmonic extension of `alpha_train` to the nodes in `val`.
    fn interpolate(&self, train: &[usize], alpha_train: &[f64], val: &[usize]) -> Result<Vec<f64>> {
        let m = val.len();
        let l = &self.l;
        let mut sys = DenseMatrix::from_fn(m, m, |a, b| l[(val[a], val[b])]);
        let mut rhs = Vector::from_fn(m, |a, _| {
            -train
                .iter()
                .zip(alpha_train)
                .map(|(&t, &al)| l[(val[a], t)] * al)
                .sum::<f64>()
        });
        // held-out pieces with no edge into the training set get the training mean
        let sub_adj = DenseMatrix::from_fn(m, m, |a, b| self.data.adjacency[(val[a], val[b])]);
        let mean = alpha_train.iter().sum::<f64>() / alpha_train.len() as f64;
        for comp in connected_components(&sub_adj) {
            let anchored = comp.iter().any(|&a| {
                train
                    .iter()
                    .any(|&t| self.data.adjacency[(val[a], t)] != 0.0)
            });
            if anchored {
                continue;
            }
            log::warn!(
                "{} held-out node(s) have no path to the training set; using the mean effect",
                comp.len()
            );
            for &a in &comp {
                sys.row_mut(a).fill(0.0);
                sys.column_mut(a).fill(0.0);
                sys[(a, a)] = 1.0;
                rhs[a] = mean;
            }
        }
        let chol = sys
            .cholesky()
            .ok_or_else(|| GfiError::Singular("Laplacian interpolation system".into()))?;
        Ok(chol.solve(&rhs).iter().copied().collect())
    }

    /// `sigma` estimated by the square root of the 10-fold cross-validated MSPE.
    pub fn mspe_sigma(&self, lambda: f64, stream: &RandomStream) -> Result<f64> {
        if self.data.n() < 20 {
            return Err(GfiError::InvalidInput(format!(
                "MSPE noise estimate needs at least 20 nodes, got {}",
                self.data.n()
            )));
        }
        let folds = fold_assignment(self.data.n(), 10, stream);
        Ok(self.cv_mspe(lambda, &folds, 10)?.sqrt())
    }
}

impl CrossValidate for NetworkModel {
    fn cv_len(&self) -> usize {
        self.data.n()
    }

    fn cv_errors(
        &self,
        grid: &[f64],
        folds: &[usize],
        n_folds: usize,
        _stream: &RandomStream,
    ) -> Result<Vec<f64>> {
        grid.iter()
            .map(|&lambda| self.cv_mspe(lambda, folds, n_folds))
            .collect()
    }

    fn default_grid(&self) -> Vec<f64> {
        log_grid(1e-2, 1e2, 8).expect("static grid")
    }
}

impl AdditiveNoiseModel for NetworkModel {
    fn noise_len(&self) -> usize {
        self.data.n()
    }

    fn layout(&self) -> ParamLayout {
        ParamLayout::Network {
            nodes: self.data.n(),
            covariates: self.data.p(),
        }
    }

    fn responses(&self) -> &[f64] {
        &self.data.y
    }

    fn predict(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.data.n();
        let (alpha, beta) = theta.split_at(n);
        let xb = &self.data.x * Vector::from_column_slice(beta);
        alpha.iter().zip(xb.iter()).map(|(a, b)| a + b).collect()
    }

    fn fit(&self, u_star: &[f64], lambda: f64, _stream: &RandomStream) -> Result<FitOutcome> {
        if u_star.len() != self.data.n() {
            return Err(GfiError::Dimension(format!(
                "noise vector has length {}, expected {}",
                u_star.len(),
                self.data.n()
            )));
        }
        let solver = self.solver(lambda)?;
        let v = Vector::from_iterator(
            self.data.n(),
            self.data.y.iter().zip(u_star).map(|(y, u)| y - u),
        );
        Ok(FitOutcome {
            theta: solver.solve(&v).to_flat(),
            converged: true,
            iterations: 1,
        })
    }

    fn penalty_gradient(&self, theta: &[f64], lambda: f64) -> Vec<f64> {
        let n = self.data.n();
        let la = &self.l * Vector::from_column_slice(&theta[..n]) * lambda;
        la.iter()
            .copied()
            .chain(std::iter::repeat_n(0.0, self.data.p()))
            .collect()
    }

    fn jacobian(&self, _theta: &[f64]) -> DenseMatrix {
        let (n, p) = (self.data.n(), self.data.p());
        let mut j = DenseMatrix::zeros(n, n + p);
        j.view_mut((0, 0), (n, n)).fill_with_identity();
        j.view_mut((0, n), (n, p)).copy_from(&self.data.x);
        j
    }

    fn curvature(&self, theta: &[f64], _weights: &[f64]) -> DenseMatrix {
        DenseMatrix::zeros(theta.len(), theta.len())
    }

    fn active_mask(&self, theta: &[f64]) -> Vec<bool> {
        vec![true; theta.len()]
    }

    fn estimate_sigma(&self, lambda: f64, stream: &RandomStream) -> Result<f64> {
        self.mspe_sigma(lambda, stream)
    }

    fn debias(
        &self,
        u_star: &[f64],
        theta_star: &[f64],
        lambda: f64,
        c: f64,
        _gauss_newton_only: bool,
    ) -> Result<Vec<f64>> {
        let params = RncParams::from_flat(self.data.n(), self.data.p(), theta_star)?;
        Ok(self.nr_debias(u_star, &params, lambda, c)?.to_flat())
    }

    fn targets(&self, theta: &[f64]) -> Vec<f64> {
        theta[self.data.n()..].to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gaussian;
    use crate::simgen::{gen_centered_design, gen_sbm, SbmSpec};
    use approx::assert_relative_eq;

    fn path3() -> DenseMatrix {
        DenseMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.])
    }

    fn single_edge(v: Vec<f64>) -> NetworkDataset {
        let adj = DenseMatrix::from_row_slice(2, 2, &[0., 1., 1., 0.]);
        NetworkDataset::new(adj, DenseMatrix::zeros(2, 0), v).unwrap()
    }

    fn random_dataset(n: usize, p: usize, seed: u64) -> NetworkDataset {
        let spec = SbmSpec {
            n,
            p_w: 0.5,
            p_b: 0.1,
        };
        let adj = gen_sbm(&spec, &RandomStream::new(seed, 1)).unwrap();
        let x = gen_centered_design(n, p, &RandomStream::new(seed, 2)).unwrap();
        let y = gaussian(&RandomStream::new(seed, 3), n, 1.0).unwrap();
        NetworkDataset::new(adj, x, y).unwrap()
    }

    #[test]
    fn laplacian_examples() {
        let l = laplacian(&path3()).unwrap();
        assert_eq!(
            l,
            DenseMatrix::from_row_slice(3, 3, &[1., -1., 0., -1., 2., -1., 0., -1., 1.])
        );
        assert_eq!(
            laplacian(&DenseMatrix::zeros(4, 4)).unwrap(),
            DenseMatrix::zeros(4, 4)
        );
        let k3 = DenseMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        let expect = DenseMatrix::identity(3, 3) * 3.0 - DenseMatrix::from_element(3, 3, 1.0);
        assert_eq!(laplacian(&k3).unwrap(), expect);
        let mut bad = path3();
        bad[(0, 2)] = 1.0;
        assert!(laplacian(&bad).is_err());
    }

    #[test]
    fn components() {
        let mut adj = DenseMatrix::zeros(5, 5);
        for (i, j) in [(0, 2), (3, 4)] {
            adj[(i, j)] = 1.0;
            adj[(j, i)] = 1.0;
        }
        assert_eq!(
            connected_components(&adj),
            vec![vec![0, 2], vec![1], vec![3, 4]]
        );
    }

    #[test]
    fn dataset_validation() {
        let adj = path3();
        let uncentered = DenseMatrix::from_column_slice(3, 1, &[1.0, 2.0, 4.0]);
        assert!(NetworkDataset::new(adj.clone(), uncentered, vec![0.0; 3]).is_err());
        let collinear = DenseMatrix::from_column_slice(3, 2, &[1.0, 0.0, -1.0, 2.0, 0.0, -2.0]);
        assert!(NetworkDataset::new(adj.clone(), collinear, vec![0.0; 3]).is_err());
        assert!(NetworkDataset::new(adj, DenseMatrix::zeros(2, 0), vec![0.0; 3]).is_err());
    }

    #[test]
    fn single_edge_fit() {
        let d = single_edge(vec![0.0, 2.0]);
        let fit = rnc_fit(&d, &[0.0, 0.0], 1.0).unwrap();
        assert_relative_eq!(fit.alpha[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(fit.alpha[1], 4.0 / 3.0, epsilon = 1e-12);
        assert!(rnc_fit(&d, &[0.0, 0.0], 0.0).is_err());
        assert!(rnc_fit(&d, &[0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn strong_cohesion_gives_the_mean() {
        let adj = gen_sbm(
            &SbmSpec {
                n: 12,
                p_w: 0.9,
                p_b: 0.5,
            },
            &RandomStream::new(4, 0),
        )
        .unwrap();
        assert_eq!(connected_components(&adj).len(), 1);
        let v = gaussian(&RandomStream::new(4, 1), 12, 1.0).unwrap();
        let mean = v.iter().sum::<f64>() / 12.0;
        let d = NetworkDataset::new(adj, DenseMatrix::zeros(12, 0), v).unwrap();
        let fit = rnc_fit(&d, &[0.0; 12], 1e8).unwrap();
        for a in fit.alpha {
            assert!((a - mean).abs() < 1e-6);
        }
    }

    #[test]
    fn fit_is_stationary() {
        for seed in 0..5 {
            let d = random_dataset(30, 3, seed);
            let u = gaussian(&RandomStream::new(seed, 9), 30, 0.3).unwrap();
            let lambda = 0.7;
            let fit = rnc_fit(&d, &u, lambda).unwrap();
            let l = laplacian(&d.adjacency).unwrap();
            let alpha = Vector::from_vec(fit.alpha.clone());
            let beta = Vector::from_vec(fit.beta.clone());
            let v = Vector::from_iterator(30, d.y.iter().zip(&u).map(|(y, u)| y - u));
            let r = &v - &d.x * &beta - &alpha;
            let g_alpha = -&r + &l * &alpha * lambda;
            let g_beta = -d.x.tr_mul(&r);
            let scale = v.norm();
            assert!(g_alpha.norm() < 1e-9 * scale, "{}", g_alpha.norm());
            assert!(g_beta.norm() < 1e-9 * scale, "{}", g_beta.norm());
        }
    }

    #[test]
    fn singular_when_network_explains_nothing() {
        // one covariate that is constant on each component cannot be told apart from alpha
        let mut adj = DenseMatrix::zeros(4, 4);
        for (i, j) in [(0, 1), (2, 3)] {
            adj[(i, j)] = 1.0;
            adj[(j, i)] = 1.0;
        }
        let x = DenseMatrix::from_column_slice(4, 1, &[1.0, 1.0, -1.0, -1.0]);
        let d = NetworkDataset::new(adj, x, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(rnc_fit(&d, &[0.0; 4], 1.0).is_err());
    }

    #[test]
    fn single_edge_eta() {
        let d = single_edge(vec![0.0, 2.0]);
        let model = NetworkModel::new(d, RefitResponse::Perturbed).unwrap();
        let alpha = Vector::from_vec(vec![2.0 / 3.0, 4.0 / 3.0]);
        let eta = &model.root.sqrt * alpha;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(eta[0], -s * 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(eta[1], s * 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_eta_leaves_alpha_alone() {
        let d = random_dataset(18, 2, 7);
        let comps = connected_components(&d.adjacency);
        let mut alpha = vec![0.0; 18];
        for (k, comp) in comps.iter().enumerate() {
            for &i in comp {
                alpha[i] = k as f64 - 0.5;
            }
        }
        let model = NetworkModel::new(d.clone(), RefitResponse::Observed).unwrap();
        let theta = RncParams {
            alpha: alpha.clone(),
            beta: vec![0.3, -0.2],
        };
        let de = model.nr_debias(&[0.0; 18], &theta, 2.0, 0.05).unwrap();
        for (a, b) in de.alpha.iter().zip(&alpha) {
            assert!((a - b).abs() < 1e-10);
        }
        let y = Vector::from_vec(d.y.clone()) - Vector::from_vec(alpha);
        let ols = d.x.clone().svd(true, true).solve(&y, 1e-14).unwrap();
        for (a, b) in de.beta.iter().zip(ols.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn alpha_decomposition_identity() {
        for seed in 0..4 {
            let d = random_dataset(15, 1, 20 + seed);
            let model = NetworkModel::new(d, RefitResponse::Observed).unwrap();
            let alpha = Vector::from_vec(gaussian(&RandomStream::new(seed, 5), 15, 2.0).unwrap());
            let back = &model.null_projector * &alpha
                + &model.root.pinv_sqrt * (&model.root.sqrt * &alpha);
            assert!((back - alpha).amax() < 1e-10);
        }
    }

    /// Gradient descent on the unpenalized loss in `eta`, restricted to the retained
    /// eigen-directions of `L^pinv`, then a least-squares refit of `beta`.
    #[test]
    fn debias_matches_restricted_minimizer() {
        let n = 12;
        let adj = gen_sbm(
            &SbmSpec {
                n,
                p_w: 0.7,
                p_b: 0.3,
            },
            &RandomStream::new(31, 0),
        )
        .unwrap();
        assert_eq!(connected_components(&adj).len(), 1);
        let x = gen_centered_design(n, 2, &RandomStream::new(31, 1)).unwrap();
        let y = gaussian(&RandomStream::new(31, 2), n, 1.0).unwrap();
        let d = NetworkDataset::new(adj, x.clone(), y.clone()).unwrap();
        let model = NetworkModel::new(d, RefitResponse::Perturbed).unwrap();
        let u = gaussian(&RandomStream::new(31, 3), n, 0.5).unwrap();
        let (lambda, c) = (0.8, 0.3);
        let fit = model.fit(&u, lambda, &RandomStream::new(0, 0)).unwrap();
        let theta = RncParams::from_flat(n, 2, &fit.theta).unwrap();
        let de = model.nr_debias(&u, &theta, lambda, c).unwrap();

        // independent pieces: the eigendecomposition of L and its spectrum cutoff
        let eig = nalgebra::SymmetricEigen::new(laplacian(&model.data.adjacency).unwrap());
        let mu_pos: Vec<f64> = eig
            .eigenvalues
            .iter()
            .copied()
            .filter(|&m| m > 1e-9)
            .collect();
        let top = mu_pos.iter().map(|m| 1.0 / m).fold(0.0, f64::max);
        let keep: Vec<usize> = (0..n)
            .filter(|&k| eig.eigenvalues[k] > 1e-9 && 1.0 / eig.eigenvalues[k] >= c * top)
            .collect();
        let v_keep = DenseMatrix::from_columns(
            &keep
                .iter()
                .map(|&k| eig.eigenvectors.column(k).into_owned())
                .collect::<Vec<_>>(),
        );
        let k_map = |eta: &Vector| {
            let mut out = Vector::zeros(n);
            for k in 0..n {
                let m = eig.eigenvalues[k];
                if m > 1e-9 {
                    let col = eig.eigenvectors.column(k);
                    out += col * (col.dot(eta) / m.sqrt());
                }
            }
            out
        };
        let alpha = Vector::from_vec(theta.alpha.clone());
        let mut null_part = alpha.clone();
        for k in 0..n {
            if eig.eigenvalues[k] > 1e-9 {
                let col = eig.eigenvectors.column(k);
                null_part -= col * col.dot(&alpha);
            }
        }
        let eta0 = {
            let mut e = Vector::zeros(n);
            for k in 0..n {
                let col = eig.eigenvectors.column(k);
                e += col * (col.dot(&alpha) * eig.eigenvalues[k].max(0.0).sqrt());
            }
            e
        };
        let v = Vector::from_iterator(n, y.iter().zip(&u).map(|(y, u)| y - u));
        let fixed = &v - &x * Vector::from_vec(theta.beta.clone()) - &null_part;
        let mut z = Vector::zeros(keep.len());
        for _ in 0..20000 {
            let r = &fixed - k_map(&(&eta0 + &v_keep * &z));
            let grad = -v_keep.tr_mul(&k_map(&r));
            z -= grad * 0.5 * mu_pos.iter().copied().fold(f64::INFINITY, f64::min);
        }
        let eta_de = &eta0 + &v_keep * &z;
        let alpha_oracle = &null_part + k_map(&eta_de);
        for (a, b) in de.alpha.iter().zip(alpha_oracle.iter()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        let resp = &v - &alpha_oracle;
        let beta_ls = x.clone().svd(true, true).solve(&resp, 1e-14).unwrap();
        for (a, b) in de.beta.iter().zip(beta_ls.iter()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let d = random_dataset(12, 2, 41);
        let model = NetworkModel::new(d, RefitResponse::Observed).unwrap();
        let theta = gaussian(&RandomStream::new(41, 7), 14, 1.0).unwrap();
        let u = gaussian(&RandomStream::new(41, 8), 12, 0.3).unwrap();
        let h = model.hessian(&u, &theta, false).unwrap();
        let grad = |t: &[f64]| {
            let r = Vector::from_vec(model.residual(t, &u));
            -model.jacobian(t).tr_mul(&r)
        };
        let step = 1e-5;
        for j in 0..14 {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += step;
            tm[j] -= step;
            let col = (grad(&tp) - grad(&tm)) / (2.0 * step);
            for i in 0..14 {
                assert!((col[i] - h[(i, j)]).abs() < 1e-6 * h.amax());
            }
        }
    }

    #[test]
    fn mspe_sigma_near_zero_without_noise() {
        let spec = SbmSpec {
            n: 90,
            p_w: 0.2,
            p_b: 0.0,
        };
        let adj = gen_sbm(&spec, &RandomStream::new(50, 0)).unwrap();
        let x = gen_centered_design(90, 5, &RandomStream::new(50, 1)).unwrap();
        let beta = Vector::from_vec(vec![1.0, 0.5, -0.5, 2.0, 0.0]);
        let alpha = Vector::from_fn(90, |i, _| [-1.0, 0.0, 1.0][spec.block_of(i)]);
        let y = (&x * beta + alpha).iter().copied().collect();
        let model = NetworkModel::new(
            NetworkDataset::new(adj, x, y).unwrap(),
            RefitResponse::Observed,
        )
        .unwrap();
        let s = model.mspe_sigma(1.0, &RandomStream::new(50, 2)).unwrap();
        assert!(s < 0.05, "{s}");
    }

    #[test]
    fn targets_are_the_coefficients() {
        let d = random_dataset(12, 2, 3);
        let model = NetworkModel::new(d, RefitResponse::Observed).unwrap();
        let theta: Vec<f64> = (0..14).map(|i| i as f64).collect();
        assert_eq!(model.targets(&theta), vec![12.0, 13.0]);
        assert_eq!(model.param_len(), 14);
    }
}
