//! Replicated simulation runs and their aggregation.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::ols_baseline;
use super::config::{
    LambdaChoice, LinearDesign, ResolvedConfig, Scenario, SigmaChoice, SigmaKeyword,
    DEFAULT_LEVELS,
};
use crate::completion::{project_omega, AlsConfig, McModel};
use crate::engine::{
    cv_lambda, run_autogfi, summarize, CrossValidate, GfiConfig, SigmaSpec, SummaryReport,
};
use crate::error::{GfiError, Result};
use crate::linear::LinearModel;
use crate::network::{NetworkDataset, NetworkModel};
use crate::numerics::{gaussian, DenseMatrix, RandomStream, Vector};
use crate::simgen::{
    gen_centered_design, gen_nr_truth, gen_omega, gen_orthonormal_factors, gen_sbm,
    gen_tensor_coefficient, SbmSpec, DEFAULT_ETA_MEANS,
};
use crate::tensor::{CpSolverConfig, DenseTensor, TensorDataset, TensorModel};

const STRUCTURE: u64 = 0x5717;
const DATA: u64 = 0xda7a;
const CV: u64 = 0xc7;
const GFI: u64 = 0x6f1;

/// Name of the classical comparison group in network runs.
pub const OLS_GROUP: &str = "ols_beta";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCoverage {
    pub level: f64,
    pub coverage: f64,
    pub mean_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub group: String,
    /// Replicate-target pairs in the group.
    pub count: usize,
    pub bias: f64,
    pub rmse: f64,
    pub coverage: Vec<LevelCoverage>,
}

impl GroupReport {
    pub fn at(&self, level: f64) -> Option<&LevelCoverage> {
        self.coverage
            .iter()
            .find(|c| (c.level - level).abs() < 1e-12)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbortedReplicate {
    pub replicate: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub config: ResolvedConfig,
    pub completed: usize,
    pub aborted: Vec<AbortedReplicate>,
    pub groups: Vec<GroupReport>,
    /// What `estimation_error` measures for this model.
    pub estimation_error_kind: String,
    /// Mean over completed replicates.
    pub estimation_error: f64,
    pub mean_lambda: f64,
    pub mean_sigma: f64,
    pub mean_acceptance: f64,
    pub failed_draws: usize,
}

impl CoverageReport {
    pub fn group(&self, name: &str) -> Option<&GroupReport> {
        self.groups.iter().find(|g| g.group == name)
    }
}

/// Everything one replicate produced.
#[derive(Clone, Debug)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub truth: Vec<f64>,
    /// Group index of each target.
    pub groups: Vec<usize>,
    /// Point estimates and intervals at the run levels and the CSV levels.
    pub summary: SummaryReport,
    pub lambda: f64,
    pub sigma: f64,
    pub acceptance_rate: f64,
    pub failed_draws: usize,
    pub estimation_error: f64,
    pub baseline: Option<SummaryReport>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub report: CoverageReport,
    /// Completed replicates in index order.
    pub replicates: Vec<ReplicateResult>,
}

/// Parts of a scenario that stay fixed across replicates.
enum Fixture {
    Tensor {
        truth: DenseTensor,
    },
    Mc,
    Network {
        adjacency: DenseMatrix,
        x: DenseMatrix,
        alpha: Vec<f64>,
        beta: Vec<f64>,
    },
    Linear {
        x: DenseMatrix,
        theta: Vec<f64>,
    },
}

fn group_names(s: &Scenario) -> &'static [&'static str] {
    match s {
        Scenario::Tensor { .. } => &["nonzero", "zero"],
        Scenario::Mc { .. } => &["missing", "observed"],
        Scenario::Network { .. } => &["beta"],
        Scenario::Linear { .. } => &["theta"],
    }
}

fn error_kind(s: &Scenario) -> &'static str {
    match s {
        Scenario::Mc { .. } => "relative_frobenius",
        _ => "rmse",
    }
}

fn build_fixture(s: &Scenario, seed: u64) -> Result<Fixture> {
    let st = RandomStream::new(seed, 0).derive(STRUCTURE);
    Ok(match s {
        Scenario::Tensor { shape, image, .. } => Fixture::Tensor {
            truth: gen_tensor_coefficient(*image, shape, &st.derive(1))?.0,
        },
        Scenario::Mc { .. } => Fixture::Mc,
        Scenario::Network {
            n,
            p,
            p_w,
            p_b,
            s,
            ..
        } => {
            let spec = SbmSpec {
                n: *n,
                p_w: *p_w,
                p_b: *p_b,
            };
            let adjacency = gen_sbm(&spec, &st.derive(1))?;
            let x = gen_centered_design(*n, *p, &st.derive(2))?;
            let (alpha, beta) = gen_nr_truth(*n, *p, *s, DEFAULT_ETA_MEANS, &st.derive(3))?;
            Fixture::Network {
                adjacency,
                x,
                alpha,
                beta,
            }
        }
        Scenario::Linear { n, p, design, .. } => {
            let x = match design {
                LinearDesign::Location => DenseMatrix::from_element(*n, 1, 1.0),
                LinearDesign::Gaussian => {
                    DenseMatrix::from_row_slice(*n, *p, &gaussian(&st.derive(1), n * p, 1.0)?)
                }
            };
            let theta = gaussian(&st.derive(2), *p, 1.0)?;
            Fixture::Linear { x, theta }
        }
    })
}

fn add_noise(mean: &[f64], stream: &RandomStream, sd: f64) -> Result<Vec<f64>> {
    let u = gaussian(stream, mean.len(), sd)?;
    Ok(mean.iter().zip(u).map(|(m, e)| m + e).collect())
}

fn pick_lambda<M: CrossValidate + ?Sized>(
    cfg: &ResolvedConfig,
    model: &M,
    stream: &RandomStream,
) -> Result<f64> {
    match cfg.lambda {
        LambdaChoice::Fixed(l) => Ok(l),
        LambdaChoice::Select(_) => {
            let grid = cfg.grid.clone().unwrap_or_else(|| model.default_grid());
            cv_lambda(model, &grid, cfg.cv_folds, stream)
        }
    }
}

/// Levels summarized for every replicate: the run levels plus the CSV columns.
pub fn summary_levels(levels: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = levels.iter().chain(&DEFAULT_LEVELS).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    all
}

fn rmse(est: &[f64], truth: &[f64]) -> f64 {
    let se: f64 = est.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    (se / truth.len().max(1) as f64).sqrt()
}

struct Fitted {
    summary: SummaryReport,
    lambda: f64,
    sigma: f64,
    acceptance_rate: f64,
    failed_draws: usize,
}

fn fit_and_summarize<M>(
    cfg: &ResolvedConfig,
    model: &M,
    rep: &RandomStream,
    levels: &[f64],
) -> Result<Fitted>
where
    M: crate::engine::AdditiveNoiseModel + CrossValidate,
{
    let lambda = pick_lambda(cfg, model, &rep.derive(CV))?;
    let sigma = match cfg.sigma {
        SigmaChoice::Known(s) => SigmaSpec::Known(s),
        SigmaChoice::Keyword(SigmaKeyword::Truth) => SigmaSpec::Known(cfg.scenario.noise_sd()),
        SigmaChoice::Keyword(SigmaKeyword::Estimate) => SigmaSpec::Estimate,
    };
    let gfi = GfiConfig {
        m: cfg.draws,
        c: cfg.c,
        lambda,
        sigma,
        seed: rep.derive(GFI).rng().next_u64(),
        gauss_newton_only: cfg.gauss_newton_only,
    };
    let sample = run_autogfi(model, &gfi)?;
    Ok(Fitted {
        summary: summarize(&sample, levels)?,
        lambda,
        sigma: sample.sigma_used,
        acceptance_rate: sample.acceptance_rate(),
        failed_draws: sample.failed.len(),
    })
}

fn run_replicate(cfg: &ResolvedConfig, fixture: &Fixture, r: usize) -> Result<ReplicateResult> {
    let rep = RandomStream::new(cfg.seed, r as u64 + 1);
    let data = rep.derive(DATA);
    let levels = summary_levels(&cfg.levels);
    let (fitted, truth, groups, baseline) = match (&cfg.scenario, fixture) {
        (
            Scenario::Tensor {
                n, shape, rank, sigma, ..
            },
            Fixture::Tensor { truth },
        ) => {
            let size: usize = shape.iter().product();
            let x = DenseMatrix::from_row_slice(*n, size, &gaussian(&data.derive(1), n * size, 1.0)?);
            let mean = &x * Vector::from_column_slice(&truth.data);
            let y = add_noise(mean.as_slice(), &data.derive(2), *sigma)?;
            let ds = TensorDataset::from_rows(shape, x, y)?;
            let model = TensorModel::new(ds, *rank, CpSolverConfig::default())?;
            let fitted = fit_and_summarize(cfg, &model, &rep, &levels)?;
            let groups = truth.data.iter().map(|&b| usize::from(b == 0.0)).collect();
            (fitted, truth.data.clone(), groups, None)
        }
        (Scenario::Mc { n, rank, p, sigma }, Fixture::Mc) => {
            let (a, b) = gen_orthonormal_factors(*n, *rank, &data.derive(1))?;
            let m = &a * b.transpose();
            let omega = gen_omega(*n, *n, *p, &data.derive(2))?;
            if omega.is_empty() {
                return Err(GfiError::InvalidInput("no entries were observed".into()));
            }
            let mut obs = project_omega(&m, &omega)?;
            obs.values = add_noise(&obs.values, &data.derive(3), *sigma)?;
            let model = McModel::new(obs, *rank, AlsConfig::default())?;
            let fitted = fit_and_summarize(cfg, &model, &rep, &levels)?;
            let groups = model
                .obs
                .observed_mask()
                .into_iter()
                .map(usize::from)
                .collect();
            (fitted, m.as_slice().to_vec(), groups, None)
        }
        (
            Scenario::Network { sigma, .. },
            Fixture::Network {
                adjacency,
                x,
                alpha,
                beta,
            },
        ) => {
            let xb = x * Vector::from_column_slice(beta);
            let mean: Vec<f64> = xb.iter().zip(alpha).map(|(a, b)| a + b).collect();
            let y = add_noise(&mean, &data, *sigma)?;
            let ds = NetworkDataset::new(adjacency.clone(), x.clone(), y)?;
            let ols = ols_baseline(&ds, *sigma, &levels)?;
            let model = NetworkModel::new(ds, cfg.refit)?;
            let fitted = fit_and_summarize(cfg, &model, &rep, &levels)?;
            (fitted, beta.clone(), vec![0; beta.len()], Some(ols))
        }
        (Scenario::Linear { sigma, .. }, Fixture::Linear { x, theta }) => {
            let mean = x * Vector::from_column_slice(theta);
            let y = add_noise(mean.as_slice(), &data, *sigma)?;
            let model = LinearModel::new(x.clone(), y)?;
            let fitted = fit_and_summarize(cfg, &model, &rep, &levels)?;
            (fitted, theta.clone(), vec![0; theta.len()], None)
        }
        _ => unreachable!("fixture is built from the same scenario"),
    };
    let pm = &fitted.summary.point_mean;
    let estimation_error = match cfg.scenario {
        Scenario::Mc { .. } => {
            let norm = truth.iter().map(|t| t * t).sum::<f64>().sqrt();
            rmse(pm, &truth) * (truth.len() as f64).sqrt() / norm
        }
        _ => rmse(pm, &truth),
    };
    Ok(ReplicateResult {
        replicate: r,
        truth,
        groups,
        summary: fitted.summary,
        lambda: fitted.lambda,
        sigma: fitted.sigma,
        acceptance_rate: fitted.acceptance_rate,
        failed_draws: fitted.failed_draws,
        estimation_error,
        baseline,
    })
}

#[derive(Default)]
struct Tally {
    count: usize,
    err: f64,
    sq: f64,
    hits: Vec<usize>,
    width: Vec<f64>,
}

impl Tally {
    fn add(&mut self, s: &SummaryReport, j: usize, truth: f64, levels: &[f64]) {
        if self.hits.is_empty() {
            self.hits = vec![0; levels.len()];
            self.width = vec![0.0; levels.len()];
        }
        self.count += 1;
        let d = s.point_mean[j] - truth;
        self.err += d;
        self.sq += d * d;
        for (k, &l) in levels.iter().enumerate() {
            let iv = s.interval(l, j).expect("summary holds every run level");
            self.hits[k] += usize::from(iv.contains(truth));
            self.width[k] += iv.width();
        }
    }

    fn report(&self, group: &str, levels: &[f64]) -> GroupReport {
        let c = self.count as f64;
        GroupReport {
            group: group.to_string(),
            count: self.count,
            bias: self.err / c,
            rmse: (self.sq / c).sqrt(),
            coverage: levels
                .iter()
                .enumerate()
                .map(|(k, &level)| LevelCoverage {
                    level,
                    coverage: self.hits[k] as f64 / c,
                    mean_width: self.width[k] / c,
                })
                .collect(),
        }
    }
}

/// Pool coverage over every (replicate, target) pair of each group.
fn aggregate(
    cfg: &ResolvedConfig,
    done: &[ReplicateResult],
    aborted: Vec<AbortedReplicate>,
) -> CoverageReport {
    let names = group_names(&cfg.scenario);
    let mut tallies: Vec<Tally> = names.iter().map(|_| Tally::default()).collect();
    let mut ols = Tally::default();
    for r in done {
        for (j, (&t, &g)) in r.truth.iter().zip(&r.groups).enumerate() {
            tallies[g].add(&r.summary, j, t, &cfg.levels);
            if let Some(b) = &r.baseline {
                ols.add(b, j, t, &cfg.levels);
            }
        }
    }
    let mut groups: Vec<GroupReport> = names
        .iter()
        .zip(&tallies)
        .filter(|(_, t)| t.count > 0)
        .map(|(n, t)| t.report(n, &cfg.levels))
        .collect();
    if ols.count > 0 {
        groups.push(ols.report(OLS_GROUP, &cfg.levels));
    }
    let k = done.len() as f64;
    let mean = |f: &dyn Fn(&ReplicateResult) -> f64| done.iter().map(f).sum::<f64>() / k;
    CoverageReport {
        config: cfg.clone(),
        completed: done.len(),
        aborted,
        groups,
        estimation_error_kind: error_kind(&cfg.scenario).to_string(),
        estimation_error: mean(&|r| r.estimation_error),
        mean_lambda: mean(&|r| r.lambda),
        mean_sigma: mean(&|r| r.sigma),
        mean_acceptance: mean(&|r| r.acceptance_rate),
        failed_draws: done.iter().map(|r| r.failed_draws).sum(),
    }
}

/// Run every replicate on a pool of `cfg.workers` threads and pool the results.
///
/// Replicates that fail are recorded and left out; more than 10% failures is an error.
pub fn run_experiment(cfg: &ResolvedConfig) -> Result<ExperimentOutcome> {
    let fixture = build_fixture(&cfg.scenario, cfg.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| GfiError::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<ReplicateResult>> = pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| run_replicate(cfg, &fixture, r))
            .collect()
    });
    let mut done = Vec::with_capacity(results.len());
    let mut aborted = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => done.push(v),
            Err(e) => {
                log::warn!("replicate {r} aborted: {e}");
                aborted.push(AbortedReplicate {
                    replicate: r,
                    error: e.to_string(),
                });
            }
        }
    }
    if aborted.len() * 10 > cfg.replicates || done.is_empty() {
        return Err(GfiError::Experiment(format!(
            "{} of {} replicates aborted; first error: {}",
            aborted.len(),
            cfg.replicates,
            aborted[0].error
        )));
    }
    let report = aggregate(cfg, &done, aborted);
    Ok(ExperimentOutcome {
        report,
        replicates: done,
    })
}
