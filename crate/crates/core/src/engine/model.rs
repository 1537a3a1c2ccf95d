//! The additive-noise model contract `Y = G(X, theta) + U`.

use serde::{Deserialize, Serialize};

use crate::error::{GfiError, Result};
use crate::numerics::linalg::{ensure_finite, truncated_pinv_detail};
use crate::numerics::{DenseMatrix, RandomStream, Vector};

/// How a flat parameter vector is laid out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ParamLayout {
    Vector {
        len: usize,
    },
    /// CP factors, mode-major: mode d is a `shape[d] x rank` column-major block.
    Cp {
        shape: Vec<usize>,
        rank: usize,
    },
    /// `vec(A)` followed by `vec(B)`, both column-major, `A: rows x rank`, `B: cols x rank`.
    FactorPair {
        rows: usize,
        cols: usize,
        rank: usize,
    },
    /// Individual effects `alpha` (one per node) followed by covariate effects `beta`.
    Network {
        nodes: usize,
        covariates: usize,
    },
}

impl ParamLayout {
    pub fn len(&self) -> usize {
        match self {
            ParamLayout::Vector { len } => *len,
            ParamLayout::Cp { shape, rank } => shape.iter().sum::<usize>() * rank,
            ParamLayout::FactorPair { rows, cols, rank } => (rows + cols) * rank,
            ParamLayout::Network { nodes, covariates } => nodes + covariates,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A parameter vector together with its debiasing mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    pub flat: Vec<f64>,
    pub active: Vec<bool>,
    pub layout: ParamLayout,
}

impl ParameterPoint {
    pub fn new(flat: Vec<f64>, active: Vec<bool>, layout: ParamLayout) -> Result<Self> {
        if flat.len() != active.len() || flat.len() != layout.len() {
            return Err(GfiError::Dimension(format!(
                "parameter of length {} with mask {} and layout {}",
                flat.len(),
                active.len(),
                layout.len()
            )));
        }
        Ok(Self {
            flat,
            active,
            layout,
        })
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// Result of one penalized fit.
#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub theta: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// How the noise scale is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SigmaSpec {
    Known(f64),
    /// Use the model's own estimator once, before any draws are made.
    Estimate,
}

/// A model instance bound to its observed data.
///
/// Objectives follow the half-scale convention: `fit` minimizes
/// `0.5 * |Y - G(theta) - u|^2 + 0.5 * lambda * pen(theta)` where `lambda * pen(theta)`
/// is the usual penalty term, and `penalty_gradient` returns the gradient of the second
/// summand.
pub trait AdditiveNoiseModel: Sync {
    /// Number of noise slots (observed responses).
    fn noise_len(&self) -> usize;

    fn layout(&self) -> ParamLayout;

    fn param_len(&self) -> usize {
        self.layout().len()
    }

    /// Observed responses, one per noise slot.
    fn responses(&self) -> &[f64];

    /// Fitted responses `G(theta)` on every noise slot.
    fn predict(&self, theta: &[f64]) -> Vec<f64>;

    fn fit(&self, u_star: &[f64], lambda: f64, stream: &RandomStream) -> Result<FitOutcome>;

    /// Gradient of the half-scale penalty, `0.5 * lambda * grad pen(theta)`.
    fn penalty_gradient(&self, theta: &[f64], lambda: f64) -> Vec<f64>;

    /// `noise_len x param_len` matrix of `dG_i / dtheta_j`.
    fn jacobian(&self, theta: &[f64]) -> DenseMatrix;

    /// `sum_i w_i * d^2 G_i / dtheta dtheta^T`.
    fn curvature(&self, theta: &[f64], weights: &[f64]) -> DenseMatrix;

    fn hessian(
        &self,
        u_star: &[f64],
        theta: &[f64],
        gauss_newton_only: bool,
    ) -> Result<DenseMatrix> {
        hessian_default(self, u_star, theta, gauss_newton_only)
    }

    /// Coordinates that take part in debiasing; exact zeros are left out by default.
    fn active_mask(&self, theta: &[f64]) -> Vec<bool> {
        theta.iter().map(|&t| t != 0.0).collect()
    }

    fn estimate_sigma(&self, _lambda: f64, _stream: &RandomStream) -> Result<f64> {
        Err(GfiError::Config(
            "this model has no noise-scale estimator; give sigma explicitly".into(),
        ))
    }

    /// One-step correction `theta + pinv_c(H) xi` on the active coordinates.
    fn debias(
        &self,
        u_star: &[f64],
        theta_star: &[f64],
        lambda: f64,
        c: f64,
        gauss_newton_only: bool,
    ) -> Result<Vec<f64>> {
        let mask = self.active_mask(theta_star);
        let h = self.hessian(u_star, theta_star, gauss_newton_only)?;
        let xi = self.penalty_gradient(theta_star, lambda);
        debias_step(&h, &xi, theta_star, &mask, c)
    }

    /// `Y - G(theta) - u`.
    fn residual(&self, theta: &[f64], u_star: &[f64]) -> Vec<f64> {
        let g = self.predict(theta);
        self.responses()
            .iter()
            .zip(g)
            .zip(u_star)
            .map(|((y, g), u)| y - g - u)
            .collect()
    }

    /// Filtering loss `|Y - G(theta) - u|^2`.
    fn loss(&self, theta: &[f64], u_star: &[f64]) -> f64 {
        self.residual(theta, u_star).iter().map(|r| r * r).sum()
    }

    /// Quantities reported for a draw. Defaults to the parameters themselves.
    fn targets(&self, theta: &[f64]) -> Vec<f64> {
        theta.to_vec()
    }
}

/// `H = sum_i [grad G_i grad G_i^T - (d^2 G_i) r_i]` with `r = Y - G - u`.
pub fn hessian_default<M: AdditiveNoiseModel + ?Sized>(
    model: &M,
    u_star: &[f64],
    theta: &[f64],
    gauss_newton_only: bool,
) -> Result<DenseMatrix> {
    if u_star.len() != model.noise_len() {
        return Err(GfiError::Dimension(format!(
            "noise vector has length {}, model expects {}",
            u_star.len(),
            model.noise_len()
        )));
    }
    let j = model.jacobian(theta);
    let mut h = j.tr_mul(&j);
    if !gauss_newton_only {
        let r = model.residual(theta, u_star);
        h -= model.curvature(theta, &r);
    }
    ensure_finite(&h, "Hessian")?;
    Ok(h)
}

/// Apply `theta_de = theta + pinv_c(H_AA) xi_A` on the active set `A`.
pub fn debias_step(
    h: &DenseMatrix,
    xi: &[f64],
    theta: &[f64],
    mask: &[bool],
    c: f64,
) -> Result<Vec<f64>> {
    let n = theta.len();
    if h.nrows() != n || h.ncols() != n || xi.len() != n || mask.len() != n {
        return Err(GfiError::Dimension(format!(
            "debias inputs disagree: H {}x{}, xi {}, theta {}, mask {}",
            h.nrows(),
            h.ncols(),
            xi.len(),
            n,
            mask.len()
        )));
    }
    ensure_finite(h, "Hessian")?;
    let idx: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    let mut out = theta.to_vec();
    if idx.is_empty() {
        return Ok(out);
    }
    let sub = DenseMatrix::from_fn(idx.len(), idx.len(), |a, b| h[(idx[a], idx[b])]);
    let xi_a = Vector::from_iterator(idx.len(), idx.iter().map(|&i| xi[i]));
    let pinv = truncated_pinv_detail(&sub, c)?;
    let step = &pinv.matrix * xi_a;
    for (k, &i) in idx.iter().enumerate() {
        out[i] += step[k];
    }
    Ok(out)
}
