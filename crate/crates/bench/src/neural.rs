use std::time::Instant;

use ocdeepiv_core::model::INIT_STREAM;
use ocdeepiv_core::{
    build_features, estimate_theta_two_stage, ortho_penalty, predict_theta_code_faithful,
    staged_train, Dataset, DualPathNet, RngStream, TrainConfig,
};

use crate::compare::{EstimatorKind, FitOptions, NeuralMode};
use crate::error::Result;
use crate::metrics::EstimateResult;

fn code_faithful(data: &Dataset, cfg: &TrainConfig, kind: EstimatorKind, window: usize) -> Result<EstimateResult> {
    let start = Instant::now();
    let features = build_features(&data.x, &data.t)?;
    let net = DualPathNet::treatment(cfg.dropout_p, &mut RngStream::new(cfg.seed, INIT_STREAM))?;
    let out = staged_train(net, &data.z, &features, &data.t, cfg)?;
    let theta = predict_theta_code_faithful(&out.net, &data.z, &features)?;
    let penalty = ortho_penalty(&out.net, 1.0);
    EstimateResult::assemble(kind, data, theta, out.history, Some(penalty), window, start.elapsed())
}

fn two_stage(data: &Dataset, cfg: &TrainConfig, kind: EstimatorKind, window: usize) -> Result<EstimateResult> {
    let start = Instant::now();
    let fit = estimate_theta_two_stage(data, cfg)?;
    let penalty = ortho_penalty(&fit.outcome_net, 1.0);
    EstimateResult::assemble(kind, data, fit.theta_hat, fit.stage2_history, Some(penalty), window, start.elapsed())
}

/// The treatment network trained on `T` and read directly as θ̂(x).
pub fn fit_oc_deepiv_code_faithful(data: &Dataset, opts: &FitOptions) -> Result<EstimateResult> {
    code_faithful(data, &opts.train, EstimatorKind::OcDeepIvCodeFaithful, opts.smoothing_window)
}

/// Two-stage estimate; the loss history is that of the outcome stage.
pub fn fit_oc_deepiv_two_stage(data: &Dataset, opts: &FitOptions) -> Result<EstimateResult> {
    two_stage(data, &opts.two_stage_config(), EstimatorKind::OcDeepIvTwoStage, opts.smoothing_window)
}

/// The selected neural pipeline with the orthogonality penalty disabled.
pub fn fit_ablation_no_ortho(data: &Dataset, opts: &FitOptions) -> Result<EstimateResult> {
    let kind = EstimatorKind::DeepIvNoOrtho;
    match opts.resolve_mode(data) {
        NeuralMode::CodeFaithful => {
            let cfg = TrainConfig { lambda_reg: 0.0, ..opts.train.clone() };
            code_faithful(data, &cfg, kind, opts.smoothing_window)
        }
        NeuralMode::TwoStage => {
            let cfg = TrainConfig { lambda_reg: 0.0, ..opts.two_stage_config() };
            two_stage(data, &cfg, kind, opts.smoothing_window)
        }
    }
}
