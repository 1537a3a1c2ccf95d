//! Experiment configuration read from `[experiment]`, `[gfi]` and `[scenario]` sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{GfiError, Result};
use crate::network::RefitResponse;
use crate::simgen::ImageKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Tensor,
    Mc,
    Network,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvKeyword {
    Cv,
}

/// A fixed penalty or `"cv"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaChoice {
    Fixed(f64),
    Select(CvKeyword),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaKeyword {
    /// The model's own estimator.
    Estimate,
    /// The noise level the data were simulated with.
    Truth,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaChoice {
    Known(f64),
    Keyword(SigmaKeyword),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearDesign {
    /// Single intercept column.
    Location,
    /// Fixed standard normal design.
    Gaussian,
}

fn default_replicates() -> usize {
    1
}

fn default_workers() -> usize {
    1
}

pub const DEFAULT_LEVELS: [f64; 3] = [0.90, 0.95, 0.99];

fn default_levels() -> Vec<f64> {
    DEFAULT_LEVELS.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub model: ModelKind,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Draws per replicate. `m` under `[gfi]` is accepted as well.
    #[serde(default)]
    pub draws: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GfiSection {
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub lambda: Option<LambdaChoice>,
    #[serde(default)]
    pub sigma: Option<SigmaChoice>,
    #[serde(default)]
    pub gauss_newton_only: bool,
    #[serde(default)]
    pub cv_folds: Option<usize>,
    /// Penalty grid searched when `lambda = "cv"`.
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default)]
    pub refit: RefitResponse,
}

/// Scenario knobs. Unset keys take per-model desk-scale defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    /// Sample size (tensor, linear), matrix side (mc) or node count (network).
    #[serde(default)]
    pub n: Option<usize>,
    /// Observation probability (mc) or number of covariates (network, linear).
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default, alias = "R")]
    pub rank: Option<usize>,
    #[serde(default)]
    pub p_w: Option<f64>,
    #[serde(default)]
    pub p_b: Option<f64>,
    #[serde(default)]
    pub s: Option<f64>,
    /// Noise standard deviation.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Noise variance, an alternative to `sigma`.
    #[serde(default)]
    pub sigma2: Option<f64>,
    #[serde(default)]
    pub image: Option<ImageKind>,
    #[serde(default)]
    pub shape: Option<Vec<usize>>,
    #[serde(default)]
    pub design: Option<LinearDesign>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub gfi: GfiSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
}

/// Command-line values that replace config keys of the same name.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub replicates: Option<usize>,
    pub draws: Option<usize>,
}

/// Fully resolved scenario, with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Scenario {
    Tensor {
        n: usize,
        shape: Vec<usize>,
        image: ImageKind,
        rank: usize,
        sigma: f64,
    },
    Mc {
        n: usize,
        rank: usize,
        p: f64,
        sigma: f64,
    },
    Network {
        n: usize,
        p: usize,
        p_w: f64,
        p_b: f64,
        s: f64,
        sigma: f64,
    },
    Linear {
        n: usize,
        p: usize,
        design: LinearDesign,
        sigma: f64,
    },
}

impl Scenario {
    pub fn noise_sd(&self) -> f64 {
        match self {
            Scenario::Tensor { sigma, .. }
            | Scenario::Mc { sigma, .. }
            | Scenario::Network { sigma, .. }
            | Scenario::Linear { sigma, .. } => *sigma,
        }
    }

    pub fn model(&self) -> ModelKind {
        match self {
            Scenario::Tensor { .. } => ModelKind::Tensor,
            Scenario::Mc { .. } => ModelKind::Mc,
            Scenario::Network { .. } => ModelKind::Network,
            Scenario::Linear { .. } => ModelKind::Linear,
        }
    }
}

/// Everything a run needs, after defaults and overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub scenario: Scenario,
    pub replicates: usize,
    pub draws: usize,
    pub seed: u64,
    pub workers: usize,
    pub levels: Vec<f64>,
    pub c: f64,
    pub lambda: LambdaChoice,
    pub sigma: SigmaChoice,
    pub gauss_newton_only: bool,
    pub cv_folds: usize,
    pub grid: Option<Vec<f64>>,
    pub refit: RefitResponse,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| GfiError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        let e = &mut self.experiment;
        if let Some(v) = o.seed {
            e.seed = v;
        }
        if let Some(v) = o.workers {
            e.workers = v;
        }
        if let Some(v) = &o.out_dir {
            e.out_dir = Some(v.clone());
        }
        if let Some(v) = o.replicates {
            e.replicates = v;
        }
        if let Some(v) = o.draws {
            e.draws = Some(v);
            self.gfi.m = None;
        }
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let e = &self.experiment;
        let g = &self.gfi;
        if e.replicates == 0 {
            return Err(GfiError::Config("replicates must be at least 1".into()));
        }
        if e.workers == 0 {
            return Err(GfiError::Config("workers must be at least 1".into()));
        }
        if e.levels.is_empty() || e.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(GfiError::Config(format!(
                "levels must be a non-empty subset of (0, 1), got {:?}",
                e.levels
            )));
        }
        let draws = match (e.draws, g.m) {
            (Some(a), Some(b)) if a != b => {
                return Err(GfiError::Config(format!(
                    "draws = {a} and m = {b} disagree"
                )))
            }
            (a, b) => a.or(b).unwrap_or(1000),
        };
        let scenario = resolve_scenario(e.model, &self.scenario)?;
        let lambda = g.lambda.unwrap_or(match e.model {
            ModelKind::Linear => LambdaChoice::Fixed(0.0),
            _ => LambdaChoice::Select(CvKeyword::Cv),
        });
        if let LambdaChoice::Fixed(l) = lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(GfiError::Config(format!("lambda must be >= 0, got {l}")));
            }
        }
        if let Some(grid) = &g.grid {
            if grid.is_empty() || grid.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(GfiError::Config(format!("bad penalty grid {grid:?}")));
            }
        }
        let sigma = g.sigma.unwrap_or(SigmaChoice::Keyword(SigmaKeyword::Estimate));
        if let SigmaChoice::Known(s) = sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(GfiError::Config(format!("sigma must be > 0, got {s}")));
            }
        }
        let cv_folds = g.cv_folds.unwrap_or(10);
        if cv_folds < 2 {
            return Err(GfiError::Config("cv_folds must be at least 2".into()));
        }
        let mut levels = e.levels.clone();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        Ok(ResolvedConfig {
            scenario,
            replicates: e.replicates,
            draws,
            seed: e.seed,
            workers: e.workers,
            levels,
            c: g.c.unwrap_or(0.05),
            lambda,
            sigma,
            gauss_newton_only: g.gauss_newton_only,
            cv_folds,
            grid: g.grid.clone(),
            refit: g.refit,
            out_dir: e.out_dir.clone(),
        })
    }
}

fn whole(v: f64, key: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as usize)
    } else {
        Err(GfiError::Config(format!(
            "{key} must be a non-negative integer here, got {v}"
        )))
    }
}

fn unused(model: ModelKind, s: &ScenarioSection, keys: &[&str]) -> Result<()> {
    let set = |k: &str| match k {
        "p" => s.p.is_some(),
        "rank" => s.rank.is_some(),
        "p_w" => s.p_w.is_some(),
        "p_b" => s.p_b.is_some(),
        "s" => s.s.is_some(),
        "image" => s.image.is_some(),
        "shape" => s.shape.is_some(),
        "design" => s.design.is_some(),
        _ => false,
    };
    for k in keys {
        if set(k) {
            return Err(GfiError::Config(format!(
                "scenario key `{k}` does not apply to the {model:?} model"
            )));
        }
    }
    Ok(())
}

fn resolve_scenario(model: ModelKind, s: &ScenarioSection) -> Result<Scenario> {
    let sigma = match (s.sigma, s.sigma2) {
        (Some(_), Some(_)) => {
            return Err(GfiError::Config(
                "give the noise level as sigma or sigma2, not both".into(),
            ))
        }
        (Some(v), None) => Some(v),
        (None, Some(v2)) => Some(v2.sqrt()),
        (None, None) => None,
    };
    if let Some(v) = sigma {
        if !(v > 0.0 && v.is_finite()) {
            return Err(GfiError::Config(format!("noise sd must be > 0, got {v}")));
        }
    }
    let sc = match model {
        ModelKind::Tensor => {
            unused(model, s, &["p", "p_w", "p_b", "s", "design"])?;
            Scenario::Tensor {
                n: s.n.unwrap_or(200),
                shape: s.shape.clone().unwrap_or_else(|| vec![16, 16]),
                image: s.image.unwrap_or(ImageKind::RankExact),
                rank: s.rank.unwrap_or(4),
                sigma: sigma.unwrap_or(0.5f64.sqrt()),
            }
        }
        ModelKind::Mc => {
            unused(model, s, &["p_w", "p_b", "s", "image", "shape", "design"])?;
            Scenario::Mc {
                n: s.n.unwrap_or(100),
                rank: s.rank.unwrap_or(2),
                p: s.p.unwrap_or(0.4),
                sigma: sigma.unwrap_or(1e-3),
            }
        }
        ModelKind::Network => {
            unused(model, s, &["rank", "image", "shape", "design"])?;
            Scenario::Network {
                n: s.n.unwrap_or(90),
                p: whole(s.p.unwrap_or(5.0), "p")?,
                p_w: s.p_w.unwrap_or(0.2),
                p_b: s.p_b.unwrap_or(0.0),
                s: s.s.unwrap_or(0.0),
                sigma: sigma.unwrap_or(0.5),
            }
        }
        ModelKind::Linear => {
            unused(model, s, &["rank", "p_w", "p_b", "s", "image", "shape"])?;
            let design = s.design.unwrap_or(LinearDesign::Location);
            let p = match design {
                LinearDesign::Location => {
                    if s.p.is_some_and(|p| p != 1.0) {
                        return Err(GfiError::Config(
                            "the location design has exactly one coefficient".into(),
                        ));
                    }
                    1
                }
                LinearDesign::Gaussian => whole(s.p.unwrap_or(3.0), "p")?,
            };
            Scenario::Linear {
                n: s.n.unwrap_or(25),
                p,
                design,
                sigma: sigma.unwrap_or(1.0),
            }
        }
    };
    match &sc {
        Scenario::Tensor { n, shape, rank, .. } => {
            if *n == 0 || shape.is_empty() || shape.contains(&0) || *rank == 0 {
                return Err(GfiError::Config(format!(
                    "tensor scenario needs n, shape and rank positive, got n = {n}, shape = {shape:?}, rank = {rank}"
                )));
            }
        }
        Scenario::Mc { n, rank, p, .. } => {
            if *rank == 0 || rank > n || !(*p > 0.0 && *p <= 1.0) {
                return Err(GfiError::Config(format!(
                    "mc scenario needs 1 <= rank <= n and p in (0, 1], got n = {n}, rank = {rank}, p = {p}"
                )));
            }
        }
        Scenario::Network { n, p, .. } => {
            if *n == 0 || n % 3 != 0 || *p == 0 || p >= n {
                return Err(GfiError::Config(format!(
                    "network scenario needs n a positive multiple of 3 and 1 <= p < n, got n = {n}, p = {p}"
                )));
            }
        }
        Scenario::Linear { n, p, .. } => {
            if *p == 0 || n <= p {
                return Err(GfiError::Config(format!(
                    "linear scenario needs 1 <= p < n, got n = {n}, p = {p}"
                )));
            }
        }
    }
    Ok(sc)
}
