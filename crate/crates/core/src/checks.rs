//! Finite-difference checks for every layer family and the full treatment
//! network, shared by the command-line `gradcheck` command and the tests.
//!
//! Each check draws random 64-bit inputs, contracts the layer output with a
//! fixed random probe to get a scalar loss, and compares the analytic
//! gradient (parameters and inputs) with central differences.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{ortho_grad, ortho_penalty, DualPathNet};
use crate::nn::{
    flatten_params, grad_check, load_params, mse_loss, relu_backward, relu_forward, BatchNorm,
    Dropout, GradCheckReport, LayerNorm, Linear, Parameterized,
};
use crate::numkit::{Matrix, RngStream};

/// Pass threshold on the maximum relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

// Keeps probe losses small enough that central-difference rounding noise on
// structurally zero gradients (a bias feeding batch norm) stays far below
// the 1e-8 relative-error floor.
const PROBE_SCALE: f64 = 1e-3;

const NETWORK_BATCH: usize = 16;
const KINK_MARGIN: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CheckKind {
    Linear,
    BatchNorm,
    LayerNorm,
    Relu,
    Dropout,
    Mse,
    Ortho,
    TreatmentNet,
}

impl CheckKind {
    pub const ALL: [CheckKind; 8] = [
        CheckKind::Linear,
        CheckKind::BatchNorm,
        CheckKind::LayerNorm,
        CheckKind::Relu,
        CheckKind::Dropout,
        CheckKind::Mse,
        CheckKind::Ortho,
        CheckKind::TreatmentNet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Linear => "linear",
            CheckKind::BatchNorm => "batchnorm",
            CheckKind::LayerNorm => "layernorm",
            CheckKind::Relu => "relu",
            CheckKind::Dropout => "dropout",
            CheckKind::Mse => "mse",
            CheckKind::Ortho => "ortho",
            CheckKind::TreatmentNet => "treatment_net",
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which checks to run: `all`, `network`, or `layer:<name>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckScope {
    All,
    Network,
    Layer(CheckKind),
}

impl CheckScope {
    pub fn kinds(&self) -> Vec<CheckKind> {
        match self {
            CheckScope::All => CheckKind::ALL.to_vec(),
            CheckScope::Network => vec![CheckKind::TreatmentNet],
            CheckScope::Layer(k) => vec![*k],
        }
    }
}

impl FromStr for CheckScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(CheckScope::All),
            "network" => Ok(CheckScope::Network),
            _ => {
                let name = s.strip_prefix("layer:").unwrap_or(s);
                CheckKind::ALL
                    .into_iter()
                    .find(|k| k.name() == name)
                    .map(CheckScope::Layer)
                    .ok_or_else(|| Error::Config(format!("unknown gradcheck scope '{s}'")))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub kind: CheckKind,
    pub report: GradCheckReport,
    /// Name of the parameter (or `input`) holding the worst entry.
    pub worst_param: String,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.report.passes(GRADCHECK_TOLERANCE)
    }
}

/// Runs the checks in `scope`. `corrupt` multiplies every analytic gradient
/// before comparison; `1.0` is the honest check and anything else is a
/// deliberately broken backward pass used to prove the harness can fail.
pub fn run_checks(scope: &CheckScope, seed: u64, corrupt: f64) -> Result<Vec<CheckOutcome>> {
    scope
        .kinds()
        .into_iter()
        .map(|kind| run_check(kind, seed, corrupt))
        .collect()
}

pub fn run_check(kind: CheckKind, seed: u64, corrupt: f64) -> Result<CheckOutcome> {
    let mut rng = RngStream::new(seed, 500 + kind as u64);
    match kind {
        CheckKind::Linear => check_linear(&mut rng, corrupt),
        CheckKind::BatchNorm => check_batchnorm(&mut rng, corrupt),
        CheckKind::LayerNorm => check_layernorm(&mut rng, corrupt),
        CheckKind::Relu => check_relu(&mut rng, corrupt),
        CheckKind::Dropout => check_dropout(&mut rng, corrupt),
        CheckKind::Mse => check_mse(&mut rng, corrupt),
        CheckKind::Ortho => check_ortho(&mut rng, corrupt),
        CheckKind::TreatmentNet => check_network(&mut rng, corrupt),
    }
}

fn probe(rng: &mut RngStream, rows: usize, cols: usize) -> Matrix {
    rng.sample_standard_normal(rows, cols).scale(PROBE_SCALE)
}

fn contract(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

fn scaled(values: &[f64], corrupt: f64) -> Vec<f64> {
    values.iter().map(|v| v * corrupt).collect()
}

fn away_from_zero(m: &mut Matrix, rng: &mut RngStream) {
    for v in m.as_mut_slice() {
        while v.abs() < KINK_MARGIN {
            *v = rng.standard_normal();
        }
    }
}

/// Names each flat parameter slot of `model`, followed by `extra` input slots.
fn slot_names<P: Parameterized>(model: &P, inputs: &[(&str, usize)]) -> Vec<(String, usize)> {
    let mut names: Vec<(String, usize)> = model
        .params()
        .into_iter()
        .map(|p| (p.name, p.values.len()))
        .collect();
    names.extend(inputs.iter().map(|(n, len)| (n.to_string(), *len)));
    names
}

fn name_of(slots: &[(String, usize)], mut index: usize) -> String {
    for (name, len) in slots {
        if index < *len {
            return format!("{name}[{index}]");
        }
        index -= len;
    }
    "unknown".into()
}

fn outcome(kind: CheckKind, report: GradCheckReport, slots: &[(String, usize)]) -> CheckOutcome {
    let worst_param = name_of(slots, report.worst_index);
    CheckOutcome {
        kind,
        report,
        worst_param,
    }
}

/// Checks parameter gradients and, when given, the input gradient of a layer.
fn check_model<P, F>(
    kind: CheckKind,
    model: &P,
    input: &Matrix,
    analytic_params: Vec<f64>,
    analytic_input: Option<&Matrix>,
    loss: F,
) -> Result<CheckOutcome>
where
    P: Parameterized + Clone,
    F: Fn(&P, &Matrix) -> f64,
{
    let report = grad_check(&flatten_params(model), &analytic_params, |p| {
        let mut m = model.clone();
        load_params(&mut m, p).expect("flat length matches");
        loss(&m, input)
    })?;
    let (report, slots) = match analytic_input {
        Some(grad_in) => {
            let (rows, cols) = input.shape();
            let r = grad_check(input.as_slice(), grad_in.as_slice(), |v| {
                loss(model, &Matrix::from_vec(rows, cols, v.to_vec()).expect("shape kept"))
            })?;
            (report.merge(r), slot_names(model, &[("input", rows * cols)]))
        }
        None => (report, slot_names(model, &[])),
    };
    Ok(outcome(kind, report, &slots))
}

fn check_linear(rng: &mut RngStream, corrupt: f64) -> Result<CheckOutcome> {
    let layer = Linear::init(3, 4, rng);
    let x = rng.sample_standard_normal(6, 3);
    let up = probe(rng, 6, 4);
    let g = layer.backward(&x, &up)?;
    let mut analytic = g.weight.as_slice().to_vec();
    analytic.extend_from_slice(&g.bias);
    let gi = g.input.scale(corrupt);
    check_model(CheckKind::Linear, &layer, &x, scaled(&analytic, corrupt), Some(&gi), |l, x| {
        contract(&l.forward(x).expect("shapes fixed"), &up)
    })
}

fn check_batchnorm(rng: &mut RngStream, corrupt: f64) -> Result<CheckOutcome> {
    let mut bn = BatchNorm::new(4);
    bn.gamma = (0..4).map(|_| rng.uniform_range(0.5, 1.5)).collect();
    bn.beta = (0..4).map(|_| rng.standard_normal()).collect();
    let x = rng.sample_standard_normal(8, 4);
    let up = probe(rng, 8, 4);
    let (_, cache) = bn.forward_train(&x)?;
    let g = bn.backward(Some(&cache), &up)?;
    let mut analytic = g.gamma.clone();
    analytic.extend_from_slice(&g.beta);
    let gi = g.input.scale(corrupt);
    check_model(CheckKind::BatchNorm, &bn, &x, scaled(&analytic, corrupt), Some(&gi), |b, x| {
        contract(&b.forward_train(x).expect("batch ≥ 2").0, &up)
    })
}

fn check_layernorm(rng: &mut RngStream, corrupt: f64) -> Result<CheckOutcome> {
    let mut ln = LayerNorm::new(5);
    ln.gamma = (0..5).map(|_| rng.uniform_range(0.5, 1.5)).collect();
    ln.beta = (0..5).map(|_| rng.standard_normal()).collect();
    let x = rng.sample_standard_normal(6, 5);
    let up = probe(rng, 6, 5);
    let (_, cache) = ln.forward(&x)?;
    let g = ln.backward(&cache, &up)?;
    let mut analytic = g.gamma.clone();
    analytic.extend_from_slice(&g.beta);
    let gi = g.input.scale(corrupt);
    check_model(CheckKind::LayerNorm, &ln, &x, scaled(&analytic, corrupt), Some(&gi), |l, x| {
        contract(&l.forward(x).expect("width fixed").0, &up)
    })
}

fn check_relu(rng: &mut RngStream, corrupt: f64) -> Result<CheckOutcome> {
    let mut x = rng.sample_standard_normal(6, 5);
    away_from_zero(&mut x, rng);
    let up = probe(rng, 6, 5);
    let g = relu_backward(&x, &up)?.scale(corrupt);
    let report = grad_check(x.as_slice(), g.as_slice(), |v| {
        contract(&relu_forward(&Matrix::from_vec(6, 5, v.to_vec()).expect("shape kept")), &up)
    })?;
    Ok(outcome(CheckKind::Relu, report, &[("input".into(), 30)]))
}

fn check_dropout(rng: &mut RngStream, corrupt: f64) -> Result<CheckOutcome> {
    let d = Dropout::new(0.3)?;
    let x = rng.sample_standard_normal(6, 5);
    let mask = d.sample_mask(6, 5, rng)?;
    let up = probe(rng, 6, 5);
    let g = d.backward(&mask, &up)?.scale(corrupt);
    let report = grad_check(x.as_slice(), g.as_slice(), |v| {
        let xm = Matrix::from_vec(6, 5, v.to_vec()).expect("shape kept");
        contract(&d.apply_mask(&xm, &mask).expect("mask shape"), &up)
    })?;
    Ok(outcome(CheckKind::Dropout, report, &[("input".into(), 30)]))
}

fn check_mse(rng: &mut RngStream, corrupt: f64) -> Result<CheckOutcome> {
    let pred = rng.sample_standard_normal(7, 1);
    let target = rng.sample_standard_normal(7, 1);
    let (_, g) = mse_loss(&pred, &target)?;
    let report = grad_check(pred.as_slice(), &scaled(g.as_slice(), corrupt), |v| {
        mse_loss(&Matrix::column(v), &target).expect("shape kept").0
    })?;
    Ok(outcome(CheckKind::Mse, report, &[("pred".into(), 7)]))
}

fn check_ortho(rng: &mut RngStream, corrupt: f64) -> Result<CheckOutcome> {
    let layer = Linear::init(3, 5, rng);
    let lambda = 0.02;
    let g = ortho_grad(&layer, lambda).flatten();
    let report = grad_check(&flatten_params(&layer), &scaled(&g, corrupt), |p| {
        let mut l = layer.clone();
        load_params(&mut l, p).expect("flat length matches");
        ortho_penalty(&l, lambda)
    })?;
    Ok(outcome(CheckKind::Ortho, report, &slot_names(&layer, &[])))
}

/// Full treatment network in Train mode with dropout masks frozen, batch 16.
fn check_network(rng: &mut RngStream, corrupt: f64) -> Result<CheckOutcome> {
    let net = DualPathNet::treatment(0.3, rng)?;
    // resample inputs until every ReLU pre-activation is clear of its kink
    let (z, f, masks, cache) = loop {
        let z = rng.sample_standard_normal(NETWORK_BATCH, 3);
        let f = rng.sample_standard_normal(NETWORK_BATCH, 6);
        let masks = net.sample_masks(NETWORK_BATCH, rng)?;
        let (_, cache) = net.forward_train(&z, &f, &masks)?;
        if cache.min_relu_input_abs() >= KINK_MARGIN {
            break (z, f, masks, cache);
        }
    };
    let up = probe(rng, NETWORK_BATCH, 1);
    let g = net.backward(&cache, &up)?;

    let loss = |n: &DualPathNet, z: &Matrix, f: &Matrix| {
        contract(&n.forward_train(z, f, &masks).expect("shapes fixed").0, &up)
    };
    let params = grad_check(&flatten_params(&net), &scaled(&g.params.flatten(), corrupt), |p| {
        let mut n = net.clone();
        load_params(&mut n, p).expect("flat length matches");
        loss(&n, &z, &f)
    })?;
    let dz = grad_check(z.as_slice(), &scaled(g.input_a.as_slice(), corrupt), |v| {
        loss(&net, &Matrix::from_vec(NETWORK_BATCH, 3, v.to_vec()).expect("shape"), &f)
    })?;
    let df = grad_check(f.as_slice(), &scaled(g.input_b.as_slice(), corrupt), |v| {
        loss(&net, &z, &Matrix::from_vec(NETWORK_BATCH, 6, v.to_vec()).expect("shape"))
    })?;
    let slots = slot_names(
        &net,
        &[("input_z", NETWORK_BATCH * 3), ("input_features", NETWORK_BATCH * 6)],
    );
    Ok(outcome(CheckKind::TreatmentNet, params.merge(dz).merge(df), &slots))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        for out in run_checks(&CheckScope::All, 0, 1.0).unwrap() {
            assert!(out.passed(), "{} failed: {:?} at {}", out.kind, out.report, out.worst_param);
        }
    }

    #[test]
    fn corrupted_backward_fails() {
        for kind in CheckKind::ALL {
            let out = run_check(kind, 0, 2.0).unwrap();
            assert!(!out.passed(), "{kind} should fail when gradients are doubled");
        }
    }

    #[test]
    fn scope_parsing() {
        assert_eq!("all".parse::<CheckScope>().unwrap(), CheckScope::All);
        assert_eq!(
            "layer:batchnorm".parse::<CheckScope>().unwrap(),
            CheckScope::Layer(CheckKind::BatchNorm)
        );
        assert_eq!("network".parse::<CheckScope>().unwrap().kinds(), vec![CheckKind::TreatmentNet]);
        assert!("layer:conv".parse::<CheckScope>().is_err());
    }

    #[test]
    fn zero_input_linear_gradient_is_zero() {
        let layer = Linear::init(3, 2, &mut RngStream::new(0, 0));
        let up = Matrix::filled(4, 2, 1.0);
        let g = layer.backward(&Matrix::zeros(4, 3), &up).unwrap();
        let report = grad_check(&flatten_params(&layer)[..6], g.weight.as_slice(), |w| {
            let mut l = layer.clone();
            l.weight.as_mut_slice().copy_from_slice(w);
            contract(&l.forward(&Matrix::zeros(4, 3)).unwrap(), &up)
        })
        .unwrap();
        assert_eq!(report.max_rel_error, 0.0);
    }
}
