//! The perturb, optimize, debias and filter loop.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filter::acceptance_filter;
use super::model::{AdditiveNoiseModel, ParameterPoint, SigmaSpec};
use crate::error::{GfiError, Result};
use crate::numerics::{gaussian, RandomStream};

const SIGMA_LABEL: u64 = 0x5167;
const FIT_LABEL: u64 = 0xf17;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GfiConfig {
    /// Number of draws made before filtering.
    pub m: usize,
    /// Threshold constant for the truncated pseudo-inverse.
    pub c: f64,
    /// Penalty weight on the usual (not half) scale.
    pub lambda: f64,
    pub sigma: SigmaSpec,
    pub seed: u64,
    pub gauss_newton_only: bool,
}

impl Default for GfiConfig {
    fn default() -> Self {
        Self {
            m: 1000,
            c: 0.05,
            lambda: 0.0,
            sigma: SigmaSpec::Estimate,
            seed: 0,
            gauss_newton_only: false,
        }
    }
}

impl GfiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(GfiError::Config(format!(
                "m must be at least 2, got {}",
                self.m
            )));
        }
        if !(0.0..1.0).contains(&self.c) {
            return Err(GfiError::Config(format!(
                "c must lie in [0, 1), got {}",
                self.c
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(GfiError::Config(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if let SigmaSpec::Known(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(GfiError::Config(format!(
                    "known sigma must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiducialDraw {
    /// Stream id that produced this draw.
    pub index: u64,
    pub u_star: Vec<f64>,
    pub theta_star: ParameterPoint,
    pub theta_de: ParameterPoint,
    /// Model targets evaluated at `theta_de`.
    pub targets: Vec<f64>,
    pub loss: f64,
    pub accepted: bool,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiducialSample {
    /// Successful draws in stream order.
    pub draws: Vec<FiducialDraw>,
    pub epsilon: f64,
    pub sigma_used: f64,
    /// Stream ids whose fit or debias step failed, with the error text.
    pub failed: Vec<(u64, String)>,
}

impl FiducialSample {
    pub fn accepted(&self) -> impl Iterator<Item = &FiducialDraw> {
        self.draws.iter().filter(|d| d.accepted)
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted().count()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted_count() as f64 / self.draws.len().max(1) as f64
    }
}

/// Resolve the noise scale for a run, estimating it once if asked to.
pub fn resolve_sigma<M: AdditiveNoiseModel + ?Sized>(model: &M, cfg: &GfiConfig) -> Result<f64> {
    match cfg.sigma {
        SigmaSpec::Known(s) => Ok(s),
        SigmaSpec::Estimate => {
            let stream = RandomStream::new(cfg.seed, 0).derive(SIGMA_LABEL);
            let s = model.estimate_sigma(cfg.lambda, &stream)?;
            if !(s > 0.0 && s.is_finite()) {
                return Err(GfiError::Solver(format!(
                    "estimated sigma is not positive: {s}"
                )));
            }
            Ok(s)
        }
    }
}

fn one_draw<M: AdditiveNoiseModel + ?Sized>(
    model: &M,
    cfg: &GfiConfig,
    sigma: f64,
    index: u64,
) -> Result<FiducialDraw> {
    let stream = RandomStream::new(cfg.seed, index);
    let u_star = gaussian(&stream, model.noise_len(), sigma)?;
    let fit = model.fit(&u_star, cfg.lambda, &stream.derive(FIT_LABEL))?;
    let layout = model.layout();
    let theta_de = model.debias(
        &u_star,
        &fit.theta,
        cfg.lambda,
        cfg.c,
        cfg.gauss_newton_only,
    )?;
    if theta_de.iter().any(|v| !v.is_finite()) {
        return Err(GfiError::NonFinite("debiased parameters".into()));
    }
    let loss = model.loss(&theta_de, &u_star);
    if !loss.is_finite() {
        return Err(GfiError::NonFinite("draw loss".into()));
    }
    let active = model.active_mask(&fit.theta);
    let targets = model.targets(&theta_de);
    Ok(FiducialDraw {
        index,
        u_star,
        theta_star: ParameterPoint::new(fit.theta, active.clone(), layout.clone())?,
        theta_de: ParameterPoint::new(theta_de, active, layout)?,
        targets,
        loss,
        accepted: false,
        converged: fit.converged,
    })
}

/// Run `cfg.m` draws; draw `i` (1-based) consumes random stream `i` of `cfg.seed`.
///
/// Draws run on the current rayon pool and are collected in stream order, so the
/// result does not depend on the number of threads.
pub fn run_autogfi<M: AdditiveNoiseModel + ?Sized>(
    model: &M,
    cfg: &GfiConfig,
) -> Result<FiducialSample> {
    cfg.validate()?;
    let sigma = resolve_sigma(model, cfg)?;
    let results: Vec<(u64, Result<FiducialDraw>)> = (1..=cfg.m as u64)
        .into_par_iter()
        .map(|i| (i, one_draw(model, cfg, sigma, i)))
        .collect();

    let mut draws = Vec::with_capacity(cfg.m);
    let mut failed = Vec::new();
    for (i, r) in results {
        match r {
            Ok(d) => draws.push(d),
            Err(e) => failed.push((i, e.to_string())),
        }
    }
    if failed.len() * 5 > cfg.m {
        return Err(GfiError::TooManyFailures {
            failed: failed.len(),
            total: cfg.m,
            last: failed.last().map(|f| f.1.clone()).unwrap_or_default(),
        });
    }
    if !failed.is_empty() {
        warn!(
            "{} of {} draws failed and were left out of the filter",
            failed.len(),
            cfg.m
        );
    }
    let unconverged = draws.iter().filter(|d| !d.converged).count();
    if unconverged > 0 {
        warn!("{unconverged} draws stopped at the iteration limit");
    }
    let losses: Vec<f64> = draws.iter().map(|d| d.loss).collect();
    let (epsilon, flags) = acceptance_filter(&losses)?;
    for (d, f) in draws.iter_mut().zip(flags) {
        d.accepted = f;
    }
    if !draws.iter().any(|d| d.accepted) {
        return Err(GfiError::NoAcceptedDraws);
    }
    Ok(FiducialSample {
        draws,
        epsilon,
        sigma_used: sigma,
        failed,
    })
}
