use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use ocdeepiv_core::{Dataset, DgpSpec, Error as CoreError, TrainConfig};
use rayon::prelude::*;

use crate::baselines::{fit_2sls, fit_linear_dml, fit_naive_ols};
use crate::error::{BenchError, Result};
use crate::metrics::{mean_std, EstimateResult};
use crate::neural::{fit_ablation_no_ortho, fit_oc_deepiv_code_faithful, fit_oc_deepiv_two_stage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    NaiveOls,
    TwoSls,
    LinearDml,
    DeepIvNoOrtho,
    OcDeepIvCodeFaithful,
    OcDeepIvTwoStage,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 6] = [
        EstimatorKind::NaiveOls,
        EstimatorKind::TwoSls,
        EstimatorKind::LinearDml,
        EstimatorKind::DeepIvNoOrtho,
        EstimatorKind::OcDeepIvCodeFaithful,
        EstimatorKind::OcDeepIvTwoStage,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::NaiveOls => "NaiveOLS",
            EstimatorKind::TwoSls => "TwoSLS",
            EstimatorKind::LinearDml => "LinearDML",
            EstimatorKind::DeepIvNoOrtho => "DeepIVNoOrtho",
            EstimatorKind::OcDeepIvCodeFaithful => "OCDeepIV_CodeFaithful",
            EstimatorKind::OcDeepIvTwoStage => "OCDeepIV_TwoStage",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| BenchError::UnknownEstimator(s.to_string()))
    }
}

/// Which neural pipeline the no-penalty ablation mirrors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeuralMode {
    CodeFaithful,
    TwoStage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub train: TrainConfig,
    /// Overrides `train` for the two-stage estimator when set.
    pub two_stage_train: Option<TrainConfig>,
    pub smoothing_window: usize,
    pub dml_fold_seed: u64,
    /// `None` picks two-stage when the data has an outcome.
    pub ablation_mode: Option<NeuralMode>,
    pub threads: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            two_stage_train: None,
            smoothing_window: ocdeepiv_core::model::DEFAULT_SMOOTHING_WINDOW,
            dml_fold_seed: 0,
            ablation_mode: None,
            threads: 1,
        }
    }
}

impl FitOptions {
    pub fn two_stage_config(&self) -> TrainConfig {
        self.two_stage_train.clone().unwrap_or_else(|| self.train.clone())
    }

    pub fn resolve_mode(&self, data: &Dataset) -> NeuralMode {
        self.ablation_mode.unwrap_or(if data.y.is_some() {
            NeuralMode::TwoStage
        } else {
            NeuralMode::CodeFaithful
        })
    }

    /// Copy with every seed shifted by `offset`, for replications.
    fn reseeded(&self, offset: u64) -> Self {
        let mut o = self.clone();
        o.train.seed = o.train.seed.wrapping_add(offset);
        if let Some(t) = o.two_stage_train.as_mut() {
            t.seed = t.seed.wrapping_add(offset);
        }
        o.dml_fold_seed = o.dml_fold_seed.wrapping_add(offset);
        o
    }
}

/// Fits one estimator.
pub fn fit(kind: EstimatorKind, data: &Dataset, opts: &FitOptions) -> Result<EstimateResult> {
    match kind {
        EstimatorKind::NaiveOls => fit_naive_ols(data, opts),
        EstimatorKind::TwoSls => fit_2sls(data, opts),
        EstimatorKind::LinearDml => fit_linear_dml(data, opts),
        EstimatorKind::DeepIvNoOrtho => fit_ablation_no_ortho(data, opts),
        EstimatorKind::OcDeepIvCodeFaithful => fit_oc_deepiv_code_faithful(data, opts),
        EstimatorKind::OcDeepIvTwoStage => fit_oc_deepiv_two_stage(data, opts),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

impl MetricSummary {
    fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Self { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RowStatus {
    Ok,
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct ComparisonRow {
    pub kind: EstimatorKind,
    pub status: RowStatus,
    /// 1 is the lowest mean raw MSE; `None` for failed rows.
    pub rank: Option<usize>,
    pub replications: usize,
    pub mse_raw: Option<MetricSummary>,
    pub mse_smoothed: Option<MetricSummary>,
    pub final_ortho: Option<MetricSummary>,
    pub wall_time: Duration,
    /// Per-replication results, in replication order.
    pub results: Vec<EstimateResult>,
}

/// Rows in the declared estimator order, with ranks by mean raw MSE.
#[derive(Clone, Debug)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, kind: EstimatorKind) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.kind == kind)
    }

    /// Rows sorted best first; failed rows last.
    pub fn ranked(&self) -> Vec<&ComparisonRow> {
        let mut rows: Vec<&ComparisonRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| r.rank.unwrap_or(usize::MAX));
        rows
    }
}

fn failure_reason(err: &BenchError) -> String {
    match err {
        BenchError::Core(CoreError::Precondition(msg)) => msg.clone(),
        other => other.to_string(),
    }
}

fn run_jobs(datasets: &[Dataset], kinds: &[EstimatorKind], opts: &FitOptions) -> Result<Vec<Result<EstimateResult>>> {
    let jobs: Vec<(usize, EstimatorKind)> = (0..datasets.len())
        .flat_map(|r| kinds.iter().map(move |&k| (r, k)))
        .collect();
    let run = |&(rep, kind): &(usize, EstimatorKind)| fit(kind, &datasets[rep], &opts.reseeded(rep as u64));
    if opts.threads <= 1 {
        return Ok(jobs.iter().map(run).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    Ok(pool.install(|| jobs.par_iter().map(run).collect()))
}

fn assemble(kinds: &[EstimatorKind], replications: usize, results: Vec<Result<EstimateResult>>) -> ComparisonTable {
    let mut per_kind: Vec<Vec<Result<EstimateResult>>> = kinds.iter().map(|_| Vec::new()).collect();
    for (i, r) in results.into_iter().enumerate() {
        per_kind[i % kinds.len()].push(r);
    }

    let mut rows: Vec<ComparisonRow> = kinds
        .iter()
        .zip(per_kind)
        .map(|(&kind, outcomes)| {
            let mut results = Vec::new();
            let mut failure = None;
            for o in outcomes {
                match o {
                    Ok(r) => results.push(r),
                    Err(e) if failure.is_none() => failure = Some(failure_reason(&e)),
                    Err(_) => {}
                }
            }
            let wall_time = results.iter().map(|r| r.wall_time).sum();
            match failure {
                Some(reason) => ComparisonRow {
                    kind,
                    status: RowStatus::Failed(reason),
                    rank: None,
                    replications,
                    mse_raw: None,
                    mse_smoothed: None,
                    final_ortho: None,
                    wall_time,
                    results: Vec::new(),
                },
                None => {
                    let raw: Vec<f64> = results.iter().map(|r| r.mse_raw).collect();
                    let smooth: Vec<f64> = results.iter().map(|r| r.mse_smoothed).collect();
                    let ortho: Option<Vec<f64>> = results.iter().map(|r| r.final_ortho).collect();
                    ComparisonRow {
                        kind,
                        status: RowStatus::Ok,
                        rank: None,
                        replications,
                        mse_raw: Some(MetricSummary::of(&raw)),
                        mse_smoothed: Some(MetricSummary::of(&smooth)),
                        final_ortho: ortho.map(|o| MetricSummary::of(&o)),
                        wall_time,
                        results,
                    }
                }
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].mse_raw.is_some()).collect();
    order.sort_by(|&a, &b| {
        let ka = rows[a].mse_raw.unwrap().mean;
        let kb = rows[b].mse_raw.unwrap().mean;
        ka.total_cmp(&kb).then(a.cmp(&b))
    });
    for (rank, i) in order.into_iter().enumerate() {
        rows[i].rank = Some(rank + 1);
    }
    ComparisonTable { rows }
}

/// Runs every estimator on one dataset. Estimator failures (for example a
/// missing outcome) are recorded in their row; the run continues.
pub fn compare(data: &Dataset, kinds: &[EstimatorKind], opts: &FitOptions) -> Result<ComparisonTable> {
    let results = run_jobs(std::slice::from_ref(data), kinds, opts)?;
    Ok(assemble(kinds, 1, results))
}

/// `replications` independent draws: replication `r` uses data seed
/// `spec.seed + r` and every training/fold seed shifted by `r`.
pub fn compare_replicated(
    spec: &DgpSpec,
    kinds: &[EstimatorKind],
    opts: &FitOptions,
    replications: usize,
) -> Result<ComparisonTable> {
    let replications = replications.max(1);
    let datasets = (0..replications as u64)
        .map(|r| {
            let mut s = spec.clone();
            s.seed = spec.seed.wrapping_add(r);
            s.generate()
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let results = run_jobs(&datasets, kinds, opts)?;
    Ok(assemble(kinds, replications, results))
}
