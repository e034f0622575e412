use crate::error::{Error, Result};
use crate::nn::{
    relu_backward, relu_forward, BatchNorm, BatchNormCache, Dropout, GradientSet, LayerNorm,
    LayerNormCache, Linear, Mode, ParamView, Parameterized, TrainingMasks,
};
use crate::nn::with_prefix;
use crate::numkit::{Matrix, RngStream};

pub const HIDDEN_WIDTH: usize = 64;

/// One path of the network:
/// `fc1 → batch-norm → relu → dropout → fc2 → layer-norm → relu`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureExtractor {
    pub fc1: Linear,
    pub bn1: BatchNorm,
    pub dropout: Dropout,
    pub fc2: Linear,
    pub ln2: LayerNorm,
}

#[derive(Clone, Debug)]
pub struct ExtractorCache {
    input: Matrix,
    bn_cache: BatchNormCache,
    bn_out: Matrix,
    mask: Matrix,
    dropped: Matrix,
    ln_cache: LayerNormCache,
    ln_out: Matrix,
}

struct ExtractorGrads {
    input: Matrix,
    params: Vec<Vec<f64>>,
}

impl FeatureExtractor {
    pub fn init(in_features: usize, hidden: usize, dropout_p: f64, rng: &mut RngStream) -> Result<Self> {
        Ok(Self {
            fc1: Linear::init(in_features, hidden, rng),
            bn1: BatchNorm::new(hidden),
            dropout: Dropout::new(dropout_p)?,
            fc2: Linear::init(hidden, hidden, rng),
            ln2: LayerNorm::new(hidden),
        })
    }

    pub fn in_features(&self) -> usize {
        self.fc1.in_features()
    }

    pub fn out_features(&self) -> usize {
        self.fc2.out_features()
    }

    pub fn forward_eval(&self, x: &Matrix) -> Result<Matrix> {
        let h = relu_forward(&self.bn1.forward_eval(&self.fc1.forward(x)?)?);
        let (ln_out, _) = self.ln2.forward(&self.fc2.forward(&h)?)?;
        Ok(relu_forward(&ln_out))
    }

    fn forward_train(&self, x: &Matrix, mask: &Matrix) -> Result<(Matrix, ExtractorCache)> {
        let (bn_out, bn_cache) = self.bn1.forward_train(&self.fc1.forward(x)?)?;
        let dropped = self.dropout.apply_mask(&relu_forward(&bn_out), mask)?;
        let (ln_out, ln_cache) = self.ln2.forward(&self.fc2.forward(&dropped)?)?;
        let out = relu_forward(&ln_out);
        Ok((
            out,
            ExtractorCache {
                input: x.clone(),
                bn_cache,
                bn_out,
                mask: mask.clone(),
                dropped,
                ln_cache,
                ln_out,
            },
        ))
    }

    fn backward(&self, cache: &ExtractorCache, upstream: &Matrix) -> Result<ExtractorGrads> {
        let g = relu_backward(&cache.ln_out, upstream)?;
        let ln = self.ln2.backward(&cache.ln_cache, &g)?;
        let fc2 = self.fc2.backward(&cache.dropped, &ln.input)?;
        let g = self.dropout.backward(&cache.mask, &fc2.input)?;
        let g = relu_backward(&cache.bn_out, &g)?;
        let bn = self.bn1.backward(Some(&cache.bn_cache), &g)?;
        let fc1 = self.fc1.backward(&cache.input, &bn.input)?;
        Ok(ExtractorGrads {
            input: fc1.input,
            params: vec![
                fc1.weight.into_vec(),
                fc1.bias,
                bn.gamma,
                bn.beta,
                fc2.weight.into_vec(),
                fc2.bias,
                ln.gamma,
                ln.beta,
            ],
        })
    }

    /// Pre-activations feeding the two ReLUs in a Train-mode pass.
    fn relu_inputs(cache: &ExtractorCache) -> [&Matrix; 2] {
        [&cache.bn_out, &cache.ln_out]
    }
}

impl Parameterized for FeatureExtractor {
    fn params(&self) -> Vec<ParamView<'_>> {
        let mut v = with_prefix("fc1", self.fc1.params());
        v.extend(with_prefix("bn1", self.bn1.params()));
        v.extend(with_prefix("fc2", self.fc2.params()));
        v.extend(with_prefix("ln2", self.ln2.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.fc1.params_mut();
        v.extend(self.bn1.params_mut());
        v.extend(self.fc2.params_mut());
        v.extend(self.ln2.params_mut());
        v
    }
}

/// Two feature extractors whose outputs are concatenated and mapped to a
/// scalar by a linear head.
///
/// As the treatment network, path A reads the instruments `Z` and path B the
/// covariate features. As the outcome network, path A reads the treatment
/// and path B the covariate features.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPathNet {
    pub path_a: FeatureExtractor,
    pub path_b: FeatureExtractor,
    pub head: Linear,
}

/// Everything a Train-mode forward pass leaves behind for backward.
#[derive(Clone, Debug)]
pub struct NetCache {
    a: ExtractorCache,
    b: ExtractorCache,
    combined: Matrix,
}

impl NetCache {
    /// Smallest `|pre-activation|` over every ReLU in the pass.
    pub fn min_relu_input_abs(&self) -> f64 {
        FeatureExtractor::relu_inputs(&self.a)
            .into_iter()
            .chain(FeatureExtractor::relu_inputs(&self.b))
            .flat_map(|m| m.as_slice().iter())
            .fold(f64::INFINITY, |acc, v| acc.min(v.abs()))
    }
}

#[derive(Clone, Debug)]
pub struct NetGrads {
    pub params: GradientSet,
    pub input_a: Matrix,
    pub input_b: Matrix,
}

impl DualPathNet {
    pub fn init(in_a: usize, in_b: usize, dropout_p: f64, rng: &mut RngStream) -> Result<Self> {
        Self::with_hidden(in_a, in_b, HIDDEN_WIDTH, dropout_p, rng)
    }

    pub fn with_hidden(
        in_a: usize,
        in_b: usize,
        hidden: usize,
        dropout_p: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let path_a = FeatureExtractor::init(in_a, hidden, dropout_p, rng)?;
        let path_b = FeatureExtractor::init(in_b, hidden, dropout_p, rng)?;
        let head = Linear::init(2 * hidden, 1, rng);
        Ok(Self { path_a, path_b, head })
    }

    /// Treatment network over `Z` (3 columns) and interaction features (6 columns).
    pub fn treatment(dropout_p: f64, rng: &mut RngStream) -> Result<Self> {
        Self::init(3, 6, dropout_p, rng)
    }

    fn check_inputs(&self, a: &Matrix, b: &Matrix) -> Result<()> {
        if a.cols() != self.path_a.in_features() {
            return Err(Error::shape("network path A", a.shape(), (a.rows(), self.path_a.in_features())));
        }
        if b.cols() != self.path_b.in_features() {
            return Err(Error::shape("network path B", b.shape(), (b.rows(), self.path_b.in_features())));
        }
        if a.rows() != b.rows() {
            return Err(Error::shape("network inputs", a.shape(), b.shape()));
        }
        Ok(())
    }

    pub fn sample_masks(&self, batch: usize, rng: &mut RngStream) -> Result<TrainingMasks> {
        Ok(TrainingMasks {
            path_a: self.path_a.dropout.sample_mask(batch, self.path_a.out_features(), rng)?,
            path_b: self.path_b.dropout.sample_mask(batch, self.path_b.out_features(), rng)?,
        })
    }

    /// Deterministic forward pass with running batch-norm statistics.
    pub fn forward_eval(&self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        self.check_inputs(a, b)?;
        let fa = self.path_a.forward_eval(a)?;
        let fb = self.path_b.forward_eval(b)?;
        self.head.forward(&Matrix::hstack(&[&fa, &fb])?)
    }

    /// Train-mode forward pass with fixed dropout masks. Pure: running
    /// statistics are left alone until [`DualPathNet::commit_running_stats`].
    pub fn forward_train(&self, a: &Matrix, b: &Matrix, masks: &TrainingMasks) -> Result<(Matrix, NetCache)> {
        self.check_inputs(a, b)?;
        let (fa, ca) = self.path_a.forward_train(a, &masks.path_a)?;
        let (fb, cb) = self.path_b.forward_train(b, &masks.path_b)?;
        let combined = Matrix::hstack(&[&fa, &fb])?;
        let out = self.head.forward(&combined)?;
        Ok((out, NetCache { a: ca, b: cb, combined }))
    }

    /// Forward pass in either mode. Train mode samples dropout masks from
    /// `rng` and updates running statistics.
    pub fn forward(&mut self, a: &Matrix, b: &Matrix, mode: Mode, rng: &mut RngStream) -> Result<Matrix> {
        match mode {
            Mode::Eval => self.forward_eval(a, b),
            Mode::Train => {
                let masks = self.sample_masks(a.rows(), rng)?;
                let (out, cache) = self.forward_train(a, b, &masks)?;
                self.commit_running_stats(&cache);
                Ok(out)
            }
        }
    }

    pub fn commit_running_stats(&mut self, cache: &NetCache) {
        self.path_a.bn1.update_running(&cache.a.bn_cache);
        self.path_b.bn1.update_running(&cache.b.bn_cache);
    }

    pub fn backward(&self, cache: &NetCache, upstream: &Matrix) -> Result<NetGrads> {
        let head = self.head.backward(&cache.combined, upstream)?;
        let hidden_a = self.path_a.out_features();
        let ga = self.path_a.backward(&cache.a, &head.input.col_range(0, hidden_a))?;
        let gb = self
            .path_b
            .backward(&cache.b, &head.input.col_range(hidden_a, head.input.cols()))?;
        let mut slots = ga.params;
        slots.extend(gb.params);
        slots.push(head.weight.into_vec());
        slots.push(head.bias);
        Ok(NetGrads {
            params: GradientSet { slots },
            input_a: ga.input,
            input_b: gb.input,
        })
    }
}

impl Parameterized for DualPathNet {
    fn params(&self) -> Vec<ParamView<'_>> {
        let mut v = with_prefix("path_a", self.path_a.params());
        v.extend(with_prefix("path_b", self.path_b.params()));
        v.extend(with_prefix("head", self.head.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.path_a.params_mut();
        v.extend(self.path_b.params_mut());
        v.extend(self.head.params_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{flatten_params, grad_check, load_params};

    fn dot(a: &Matrix, b: &Matrix) -> f64 {
        a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn parameter_names_follow_layer_order() {
        let net = DualPathNet::treatment(0.3, &mut RngStream::new(0, 0)).unwrap();
        let names: Vec<String> = net.params().into_iter().map(|p| p.name).collect();
        assert_eq!(names.len(), 18);
        assert_eq!(names[0], "path_a.fc1.weight");
        assert_eq!(names[3], "path_a.bn1.bias");
        assert_eq!(names[7], "path_a.ln2.bias");
        assert_eq!(names[16], "head.weight");
        let grads = GradientSet::zeros_like(&net);
        assert_eq!(grads.flatten().len(), net.param_count());
        // 3·64+64 + 128 + 64·64+64 + 128, then 6·64+64 + ..., then 128+1
        assert_eq!(net.param_count(), (256 + 128 + 4160 + 128) + (448 + 128 + 4160 + 128) + 129);
    }

    #[test]
    fn zero_weights_give_constant_head_bias() {
        let mut net = DualPathNet::treatment(0.3, &mut RngStream::new(1, 0)).unwrap();
        for p in net.params_mut() {
            p.iter_mut().for_each(|v| *v = 0.0);
        }
        // norm gammas back to 1 so the norm layers are not trivially zero
        for path in [&mut net.path_a, &mut net.path_b] {
            path.bn1.gamma.iter_mut().for_each(|g| *g = 1.0);
            path.ln2.gamma.iter_mut().for_each(|g| *g = 1.0);
        }
        net.head.bias = vec![0.42];
        let mut rng = RngStream::new(2, 0);
        let z = rng.sample_standard_normal(8, 3);
        let f = rng.sample_standard_normal(8, 6);
        assert_eq!(net.forward_eval(&z, &f).unwrap(), Matrix::filled(8, 1, 0.42));
        let out = net.forward(&z, &f, Mode::Train, &mut rng).unwrap();
        assert_eq!(out, Matrix::filled(8, 1, 0.42));
    }

    #[test]
    fn eval_is_deterministic_and_rng_free() {
        let mut net = DualPathNet::treatment(0.3, &mut RngStream::new(3, 0)).unwrap();
        let mut rng = RngStream::new(4, 0);
        let z = rng.sample_standard_normal(16, 3);
        let f = rng.sample_standard_normal(16, 6);
        let first = net.forward(&z, &f, Mode::Eval, &mut RngStream::new(9, 9)).unwrap();
        let second = net.forward(&z, &f, Mode::Eval, &mut RngStream::new(10, 1)).unwrap();
        assert_eq!(first.as_slice(), second.as_slice());
    }

    #[test]
    fn input_width_errors() {
        let net = DualPathNet::treatment(0.3, &mut RngStream::new(0, 0)).unwrap();
        assert!(net.forward_eval(&Matrix::zeros(4, 2), &Matrix::zeros(4, 6)).is_err());
        assert!(net.forward_eval(&Matrix::zeros(4, 3), &Matrix::zeros(4, 5)).is_err());
        assert!(net.forward_eval(&Matrix::zeros(4, 3), &Matrix::zeros(3, 6)).is_err());
    }

    #[test]
    fn small_network_matches_finite_differences() {
        let mut rng = RngStream::new(5, 0);
        let net = DualPathNet::with_hidden(2, 3, 5, 0.3, &mut rng).unwrap();
        let a = rng.sample_standard_normal(6, 2);
        let b = rng.sample_standard_normal(6, 3);
        let masks = net.sample_masks(6, &mut rng).unwrap();
        let probe = rng.sample_standard_normal(6, 1).scale(1e-3);
        let (_, cache) = net.forward_train(&a, &b, &masks).unwrap();
        assert!(cache.min_relu_input_abs() > 1e-4);
        let g = net.backward(&cache, &probe).unwrap();
        let report = grad_check(&flatten_params(&net), &g.params.flatten(), |p| {
            let mut n = net.clone();
            load_params(&mut n, p).unwrap();
            dot(&n.forward_train(&a, &b, &masks).unwrap().0, &probe)
        })
        .unwrap();
        assert!(report.passes(1e-5), "{report:?}");
    }
}
