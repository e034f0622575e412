use std::path::{Path, PathBuf};
use std::time::Instant;

use ocdeepiv_bench::{compare_replicated, ComparisonTable, FitOptions};
use ocdeepiv_core::checks::{run_checks, CheckOutcome, CheckScope};
use ocdeepiv_core::model::INIT_STREAM;
use ocdeepiv_core::{
    build_features, estimate_theta_two_stage_with, moving_average, predict_theta_code_faithful, staged_train_with,
    DualPathNet, LossRecord, RngStream,
};

use crate::config::{ExperimentConfig, TrainEstimator};
use crate::csvio::{
    read_losses, read_theta, write_comparison, write_dataset, write_theta, LossWriter, COMPARISON_FILE, DATASET_FILE,
    LOSSES_FILE, STAGE1_LOSSES_FILE, THETA_FILE,
};
use crate::error::{CliError, Result};
use crate::manifest::RunManifest;
use crate::plot::{render_losses, render_theta, LOSS_PLOT_FILE, THETA_PLOT_FILE};

pub const THREADS_ENV: &str = "OCDEEPIV_THREADS";

/// Reads the fan-out cap from `OCDEEPIV_THREADS`; 1 when unset.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    for w in cfg.dgp.warnings() {
        eprintln!("warning: {w}");
    }
    let data = cfg.dgp.generate()?;
    ensure_dir(out)?;
    write_dataset(&out.join(DATASET_FILE), &data)?;
    let mut manifest = RunManifest::new("simulate", cfg);
    manifest.add_file(out, DATASET_FILE)?;
    manifest.wall_time = start.elapsed();
    manifest.write(out)?;
    Ok(manifest)
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub history: Vec<LossRecord>,
    pub theta_hat: Vec<f64>,
    pub theta_smooth: Vec<f64>,
    pub theta_true: Vec<f64>,
    pub manifest: RunManifest,
}

/// Trains the selected network, streaming `losses.csv` as it goes, then
/// writes `theta.csv` (and plots when enabled) and the manifest. On
/// divergence the partial loss file is left in place.
pub fn train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainRun> {
    let start = Instant::now();
    let data = cfg.dgp.generate()?;
    let estimator = match cfg.train_estimator {
        TrainEstimator::Auto if data.y.is_some() => TrainEstimator::TwoStage,
        TrainEstimator::Auto => TrainEstimator::CodeFaithful,
        other => other,
    };
    ensure_dir(out)?;
    let mut manifest = RunManifest::new("train", cfg);
    let mut write_error = None;

    let (theta_hat, history) = match estimator {
        TrainEstimator::TwoStage => {
            let mut stage1 = LossWriter::create(&out.join(STAGE1_LOSSES_FILE), cfg.train.switch_epoch)?;
            let mut stage2 = LossWriter::create(&out.join(LOSSES_FILE), cfg.train.switch_epoch)?;
            let fit = estimate_theta_two_stage_with(&data, &cfg.train, |stage, r| {
                let w = if stage == 1 { &mut stage1 } else { &mut stage2 };
                if let Err(e) = w.push(r) {
                    write_error.get_or_insert(e);
                }
            })?;
            manifest.add_file(out, STAGE1_LOSSES_FILE)?;
            (fit.theta_hat, fit.stage2_history)
        }
        _ => {
            let mut losses = LossWriter::create(&out.join(LOSSES_FILE), cfg.train.switch_epoch)?;
            let features = build_features(&data.x, &data.t)?;
            let net = DualPathNet::treatment(cfg.train.dropout_p, &mut RngStream::new(cfg.train.seed, INIT_STREAM))?;
            let fit = staged_train_with(net, &data.z, &features, &data.t, &cfg.train, |r| {
                if let Err(e) = losses.push(r) {
                    write_error.get_or_insert(e);
                }
            })?;
            let theta = predict_theta_code_faithful(&fit.net, &data.z, &features)?;
            (theta, fit.history)
        }
    };
    if let Some(e) = write_error {
        return Err(e);
    }
    manifest.add_file(out, LOSSES_FILE)?;

    let theta_hat = theta_hat.into_vec();
    let theta_true = data.theta_true.as_slice().to_vec();
    let theta_smooth = moving_average(&theta_hat, cfg.smoothing_window)?;
    write_theta(&out.join(THETA_FILE), &theta_true, &theta_hat, &theta_smooth)?;
    manifest.add_file(out, THETA_FILE)?;

    if cfg.plot {
        for name in plot(&out.join(THETA_FILE), &out.join(LOSSES_FILE), out, cfg.train.switch_epoch)? {
            manifest.add_file(out, &name)?;
        }
    }
    manifest.wall_time = start.elapsed();
    manifest.write(out)?;
    Ok(TrainRun {
        history,
        theta_hat,
        theta_smooth,
        theta_true,
        manifest,
    })
}

/// Runs every configured estimator over `replications` draws and writes
/// `comparison.csv`. Wall times go to the manifest only, so the CSV digest
/// is reproducible.
pub fn compare(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<(ComparisonTable, RunManifest)> {
    let start = Instant::now();
    let opts = FitOptions {
        train: cfg.train.clone(),
        smoothing_window: cfg.smoothing_window,
        dml_fold_seed: cfg.seed,
        threads,
        ..FitOptions::default()
    };
    let table = compare_replicated(&cfg.dgp, &cfg.estimators, &opts, cfg.replications)?;
    ensure_dir(out)?;
    write_comparison(&out.join(COMPARISON_FILE), &table)?;
    let mut manifest = RunManifest::new("compare", cfg);
    manifest.add_file(out, COMPARISON_FILE)?;
    manifest.timings = table.rows.iter().map(|r| (r.kind.name().to_string(), r.wall_time)).collect();
    manifest.wall_time = start.elapsed();
    manifest.write(out)?;
    Ok((table, manifest))
}

/// Runs the checks in `scope`; any failure becomes [`CliError::GradcheckFailed`]
/// naming the offending parameters. `corrupt` scales analytic gradients
/// (1.0 is the honest check).
pub fn gradcheck(scope: &str, seed: u64, corrupt: f64) -> Result<Vec<CheckOutcome>> {
    let scope: CheckScope = scope.parse()?;
    let outcomes = run_checks(&scope, seed, corrupt)?;
    for o in &outcomes {
        println!(
            "{:<14} max_rel_error={:.3e} worst={} checked={} {}",
            o.kind.name(),
            o.report.max_rel_error,
            o.worst_param,
            o.report.checked,
            if o.passed() { "PASS" } else { "FAIL" }
        );
    }
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed())
        .map(|o| format!("{} ({}: {:.3e})", o.kind.name(), o.worst_param, o.report.max_rel_error))
        .collect();
    if failed.is_empty() {
        Ok(outcomes)
    } else {
        Err(CliError::GradcheckFailed(failed.join(", ")))
    }
}

/// Renders both plots into `out`; returns the file names written.
pub fn plot(theta: &Path, losses: &Path, out: &Path, switch_epoch: usize) -> Result<Vec<String>> {
    let theta_cols = read_theta(theta)?;
    let loss_rows = read_losses(losses)?;
    ensure_dir(out)?;
    render_theta(&out.join(THETA_PLOT_FILE), &theta_cols)?;
    render_losses(&out.join(LOSS_PLOT_FILE), &loss_rows, switch_epoch)?;
    Ok(vec![THETA_PLOT_FILE.to_string(), LOSS_PLOT_FILE.to_string()])
}

/// `--theta`/`--losses` default to the files `train` writes in `out`.
pub fn default_plot_inputs(out: &Path, theta: Option<PathBuf>, losses: Option<PathBuf>) -> (PathBuf, PathBuf) {
    (
        theta.unwrap_or_else(|| out.join(THETA_FILE)),
        losses.unwrap_or_else(|| out.join(LOSSES_FILE)),
    )
}
