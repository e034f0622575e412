use super::network::DualPathNet;
use super::ortho::{ortho_grad, ortho_penalty};
use crate::error::{Error, Result};
use crate::nn::{mse_loss, Adam, Parameterized};
use crate::numkit::{Matrix, RngStream};

/// Stream ids derived from [`TrainConfig::seed`].
pub const INIT_STREAM: u64 = 101;
pub const DROPOUT_STREAM: u64 = 102;
const SHUFFLE_STREAM: u64 = 103;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Last epoch trained on MSE alone; the penalty is active afterwards.
    pub switch_epoch: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub lambda_reg: f64,
    pub dropout_p: f64,
    pub seed: u64,
    /// Multiplicative learning-rate factor applied after every epoch.
    pub lr_decay: f64,
    /// When non-zero, λ grows linearly over this many epochs after the switch.
    pub lambda_ramp_epochs: usize,
    /// `None` trains full-batch: one optimizer step per epoch.
    pub batch_size: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            switch_epoch: 50,
            lr: 0.001,
            weight_decay: 5e-4,
            lambda_reg: 0.02,
            dropout_p: 0.3,
            seed: 0,
            lr_decay: 1.0,
            lambda_ramp_epochs: 0,
            batch_size: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.switch_epoch > self.epochs {
            return fail(format!(
                "switch_epoch ({}) exceeds epochs ({})",
                self.switch_epoch, self.epochs
            ));
        }
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return fail(format!("lambda_reg must be a finite value ≥ 0, got {}", self.lambda_reg));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail(format!("weight_decay must be ≥ 0, got {}", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return fail(format!("dropout_p must lie in [0, 1), got {}", self.dropout_p));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return fail(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay));
        }
        if matches!(self.batch_size, Some(b) if b < 2) {
            return fail("batch_size must be at least 2 (batch normalisation)".into());
        }
        Ok(())
    }

    /// Penalty weight in effect during `epoch` (1-based).
    pub fn lambda_at(&self, epoch: usize) -> f64 {
        if epoch <= self.switch_epoch {
            0.0
        } else if self.lambda_ramp_epochs == 0 {
            self.lambda_reg
        } else {
            let frac = (epoch - self.switch_epoch) as f64 / self.lambda_ramp_epochs as f64;
            self.lambda_reg * frac.min(1.0)
        }
    }
}

/// Losses for one epoch, measured in Train mode before that epoch's step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub total: f64,
    pub mse: f64,
    /// Zero while the penalty is inactive.
    pub ortho: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub net: DualPathNet,
    pub history: Vec<LossRecord>,
}

pub fn staged_train(
    net: DualPathNet,
    input_a: &Matrix,
    input_b: &Matrix,
    target: &Matrix,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    staged_train_with(net, input_a, input_b, target, cfg, |_| {})
}

/// Staged training: MSE alone up to `switch_epoch`, then MSE plus the
/// orthogonality penalty. `observer` sees every record as it is produced,
/// so callers keep the partial history if training diverges.
pub fn staged_train_with<F>(
    mut net: DualPathNet,
    input_a: &Matrix,
    input_b: &Matrix,
    target: &Matrix,
    cfg: &TrainConfig,
    mut observer: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&LossRecord),
{
    cfg.validate()?;
    let n = input_a.rows();
    if input_b.rows() != n || target.rows() != n {
        return Err(Error::shape("staged_train", input_a.shape(), target.shape()));
    }
    if target.cols() != 1 {
        return Err(Error::shape("staged_train target", target.shape(), (n, 1)));
    }

    let mut dropout_rng = RngStream::new(cfg.seed, DROPOUT_STREAM);
    let mut shuffle_rng = RngStream::new(cfg.seed, SHUFFLE_STREAM);
    let mut adam = Adam::new(cfg.lr, cfg.weight_decay);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let lambda = cfg.lambda_at(epoch);
        let record = match cfg.batch_size {
            None => step(&mut net, &mut adam, input_a, input_b, target, lambda, epoch, &mut dropout_rng)?,
            Some(size) => {
                let order = shuffle_rng.permutation(n);
                let batches = batch_indices(&order, size);
                let mut acc = LossRecord { epoch, total: 0.0, mse: 0.0, ortho: 0.0 };
                for idx in &batches {
                    let r = step(
                        &mut net,
                        &mut adam,
                        &input_a.select_rows(idx),
                        &input_b.select_rows(idx),
                        &target.select_rows(idx),
                        lambda,
                        epoch,
                        &mut dropout_rng,
                    )?;
                    acc.mse += r.mse;
                    acc.ortho += r.ortho;
                }
                let k = batches.len() as f64;
                acc.mse /= k;
                acc.ortho /= k;
                acc.total = acc.mse + acc.ortho;
                acc
            }
        };
        observer(&record);
        history.push(record);
        adam.lr *= cfg.lr_decay;
    }
    Ok(TrainOutcome { net, history })
}

#[allow(clippy::too_many_arguments)]
fn step(
    net: &mut DualPathNet,
    adam: &mut Adam,
    a: &Matrix,
    b: &Matrix,
    target: &Matrix,
    lambda: f64,
    epoch: usize,
    rng: &mut RngStream,
) -> Result<LossRecord> {
    let masks = net.sample_masks(a.rows(), rng)?;
    let (pred, cache) = net.forward_train(a, b, &masks)?;
    let (mse, upstream) = mse_loss(&pred, target)?;
    let ortho = if lambda > 0.0 { ortho_penalty(net, lambda) } else { 0.0 };
    let total = mse + ortho;
    if !total.is_finite() {
        return Err(Error::Divergence { epoch, value: total });
    }

    let mut grads = net.backward(&cache, &upstream)?.params;
    if lambda > 0.0 {
        grads.add_assign(&ortho_grad(net, lambda))?;
    }
    net.commit_running_stats(&cache);
    adam.step(net.params_mut(), &grads)?;
    Ok(LossRecord { epoch, total, mse, ortho })
}

/// Splits a permutation into batches of `size`; a trailing single row is
/// folded into the previous batch so every batch has at least two rows.
fn batch_indices(order: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut batches: Vec<Vec<usize>> = order.chunks(size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() < 2) {
        let tail = batches.pop().unwrap();
        batches.last_mut().unwrap().extend(tail);
    }
    batches
}
