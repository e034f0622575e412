use super::features::{build_features, poly_features};
use super::network::DualPathNet;
use super::train::{staged_train_with, LossRecord, TrainConfig, INIT_STREAM};
use crate::error::{Error, Result};
use crate::numkit::{Matrix, RngStream};
use crate::sim::Dataset;

const OUTCOME_INIT_STREAM: u64 = 201;

/// Eval-mode output of the treatment network, read directly as θ̂(x).
///
/// The network was fit to `T` from inputs that contain `x·T`, so this is
/// really a fitted treatment value. Kept because it reproduces the
/// reference experiment exactly; [`estimate_theta_two_stage`] is the
/// estimator with a causal reading.
pub fn predict_theta_code_faithful(net: &DualPathNet, z: &Matrix, features: &Matrix) -> Result<Matrix> {
    net.forward_eval(z, features)
}

/// `g(1, x) − g(0, x)` for an outcome network whose path A reads the
/// treatment and path B reads `build_features(x, t)`.
pub fn theta_contrast(outcome: &DualPathNet, x: &Matrix) -> Result<Matrix> {
    let n = x.rows();
    let treated = Matrix::filled(n, 1, 1.0);
    let control = Matrix::zeros(n, 1);
    let y1 = outcome.forward_eval(&treated, &build_features(x, &treated)?)?;
    let y0 = outcome.forward_eval(&control, &build_features(x, &control)?)?;
    y1.sub(&y0)
}

#[derive(Clone, Debug)]
pub struct TwoStageFit {
    pub theta_hat: Matrix,
    /// Stage-1 fitted treatment `T̂ = E[T | Z, X]`.
    pub t_hat: Matrix,
    pub treatment_net: DualPathNet,
    pub outcome_net: DualPathNet,
    pub stage1_history: Vec<LossRecord>,
    pub stage2_history: Vec<LossRecord>,
}

/// Two-stage estimate of θ(x).
///
/// Stage 1 fits `T` from the instruments and the polynomial covariate
/// expansion (no treatment-derived inputs). Stage 2 fits `Y` from `T̂` and
/// `build_features(X, T̂)`. θ̂(x) is the binary-treatment contrast
/// [`theta_contrast`] of the stage-2 network.
pub fn estimate_theta_two_stage(data: &Dataset, cfg: &TrainConfig) -> Result<TwoStageFit> {
    estimate_theta_two_stage_with(data, cfg, |_, _| {})
}

/// [`estimate_theta_two_stage`] reporting each loss record with its stage
/// number (1 or 2) as it is produced.
pub fn estimate_theta_two_stage_with<F>(data: &Dataset, cfg: &TrainConfig, mut observer: F) -> Result<TwoStageFit>
where
    F: FnMut(usize, &LossRecord),
{
    let y = data.require_y()?;
    cfg.validate()?;

    let covariates = poly_features(&data.x)?;
    let mut init = RngStream::new(cfg.seed, INIT_STREAM);
    let stage1 = DualPathNet::init(data.z.cols(), covariates.cols(), cfg.dropout_p, &mut init)?;
    let stage1 = staged_train_with(stage1, &data.z, &covariates, &data.t, cfg, |r| observer(1, r))?;
    let t_hat = stage1.net.forward_eval(&data.z, &covariates)?;
    if !t_hat.is_finite() {
        return Err(Error::NonFinite("stage-1 treatment prediction".into()));
    }

    let mut init = RngStream::new(cfg.seed, OUTCOME_INIT_STREAM);
    let stage2 = DualPathNet::init(1, 6, cfg.dropout_p, &mut init)?;
    let stage2_cfg = TrainConfig {
        seed: cfg.seed.wrapping_add(1),
        ..cfg.clone()
    };
    let features = build_features(&data.x, &t_hat)?;
    let stage2 = staged_train_with(stage2, &t_hat, &features, y, &stage2_cfg, |r| observer(2, r))?;
    let theta_hat = theta_contrast(&stage2.net, &data.x)?;

    Ok(TwoStageFit {
        theta_hat,
        t_hat,
        treatment_net: stage1.net,
        outcome_net: stage2.net,
        stage1_history: stage1.history,
        stage2_history: stage2.history,
    })
}
