//! Multilayer perceptron: layer stack, forward caches, exact backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::matrix::{affine_backward, affine_forward};
use crate::nn::{Activation, DenseLayer, Matrix, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// Shape-and-activation description of one layer, used by builders and
/// checkpoint headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub batchnorm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    /// Chain of dense layers through `dims`, `hidden` activation plus
    /// optional batchnorm on every hidden layer, `output` activation and no
    /// batchnorm on the last layer.
    pub fn chain(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        batchnorm_hidden: bool,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config("a model needs at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            layers.push(LayerSpec {
                in_dim: w[0],
                out_dim: w[1],
                activation: hidden,
                batchnorm: batchnorm_hidden,
            });
        }
        let last = layers.last_mut().expect("non-empty by construction");
        last.activation = output;
        last.batchnorm = false;
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }
}

/// Per-layer batchnorm intermediates kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct BnCache<T> {
    pub xhat: Matrix<T>,
    pub inv_std: Vec<T>,
}

/// Activation record produced by a cached forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    mode: Mode,
    revision: u64,
    input: Matrix<T>,
    /// Post-activation output of every layer, in order.
    outputs: Vec<Matrix<T>>,
    bn: Vec<Option<BnCache<T>>>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }

    /// Post-activation output of layer `i` (used by feature extraction).
    pub fn layer_output(&self, i: usize) -> &Matrix<T> {
        &self.outputs[i]
    }

    #[cfg(test)]
    pub(crate) fn bn_xhat(&self, i: usize) -> Option<&Matrix<T>> {
        self.bn[i].as_ref().map(|c| &c.xhat)
    }
}

/// Gradient buffers for one layer, congruent with its parameters.
#[derive(Debug, Clone)]
pub struct ParamBlock<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

impl<T: Scalar> ParamBlock<T> {
    pub fn zeros_like(layer: &DenseLayer<T>) -> Self {
        let bn_dim = if layer.batchnorm.is_some() {
            layer.out_dim
        } else {
            0
        };
        Self {
            weights: vec![T::zero(); layer.weights.len()],
            bias: vec![T::zero(); layer.out_dim],
            gamma: vec![T::zero(); bn_dim],
            beta: vec![T::zero(); bn_dim],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|v| v.is_finite())
            && self.bias.iter().all(|v| v.is_finite())
            && self.gamma.iter().all(|v| v.is_finite())
            && self.beta.iter().all(|v| v.is_finite())
    }
}

/// Exact parameter gradients plus the gradient with respect to the input
/// batch (needed when models are chained).
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub blocks: Vec<ParamBlock<T>>,
    pub input: Matrix<T>,
}

impl<T: Scalar> Gradients<T> {
    /// Flat view in declared parameter order: per layer weights, bias,
    /// gamma, beta. Mirrors [`MlpModel::flat_parameters`].
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend_from_slice(&b.weights);
            out.extend_from_slice(&b.bias);
            out.extend_from_slice(&b.gamma);
            out.extend_from_slice(&b.beta);
        }
        out
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        assert_eq!(self.blocks.len(), other.blocks.len());
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += *y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += *y;
            }
            for (x, y) in a.gamma.iter_mut().zip(&b.gamma) {
                *x += *y;
            }
            for (x, y) in a.beta.iter_mut().zip(&b.beta) {
                *x += *y;
            }
        }
    }
}

/// Ordered stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T> {
    layers: Vec<DenseLayer<T>>,
    mode: Mode,
    revision: u64,
}

impl<T: Scalar> MlpModel<T> {
    /// Seeded random initialization from a spec.
    pub fn init<R: Rng + ?Sized>(spec: &ModelSpec, rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(spec.layers.len());
        for ls in &spec.layers {
            layers.push(DenseLayer::init(
                ls.in_dim,
                ls.out_dim,
                ls.activation,
                ls.batchnorm,
                rng,
            )?);
        }
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("a model needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Config(format!(
                    "layer dims do not chain: {} -> {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        for l in &layers {
            l.validate()?;
        }
        Ok(Self {
            layers,
            mode: Mode::Train,
            revision: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").out_dim
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut Vec<DenseLayer<T>> {
        &mut self.layers
    }

    pub(crate) fn bump_revision(&mut self) {
        self.revision += 1;
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            layers: self
                .layers
                .iter()
                .map(|l| LayerSpec {
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    activation: l.activation,
                    batchnorm: l.batchnorm.is_some(),
                })
                .collect(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.parameter_count()).sum()
    }

    fn has_batchnorm(&self) -> bool {
        self.layers.iter().any(|l| l.batchnorm.is_some())
    }

    fn check_input(&self, x: &Matrix<T>) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::Invalid(format!(
                "input width {} does not match model input dim {}",
                x.cols(),
                self.input_dim()
            )));
        }
        if x.rows() == 0 {
            return Err(Error::Invalid("empty input batch".into()));
        }
        if !x.is_finite() {
            return Err(Error::Numeric("non-finite value in input batch".into()));
        }
        Ok(())
    }

    /// Mode-dependent forward pass with activation cache.
    ///
    /// Train mode normalizes with mini-batch statistics (batch of at least 2
    /// whenever any layer carries batchnorm) and updates the running
    /// estimates; Eval mode is deterministic and leaves the model untouched.
    pub fn forward(&mut self, x: &Matrix<T>) -> Result<(Matrix<T>, ForwardCache<T>)> {
        self.check_input(x)?;
        if self.mode == Mode::Train && self.has_batchnorm() && x.rows() < 2 {
            return Err(Error::Contract(
                "train-mode forward through batchnorm requires a mini-batch (>= 2 samples)".into(),
            ));
        }
        match self.mode {
            Mode::Train => self.forward_train(x),
            Mode::Eval => self.run_eval(x, true).map(|(y, c)| (y, c.expect("cached"))),
        }
    }

    /// Evaluation forward: running statistics, no cache, no mutation.
    pub fn infer(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(x)?;
        self.run_eval(x, false).map(|(y, _)| y)
    }

    /// Evaluation forward that keeps the activation record, for
    /// input-gradient backpropagation through a frozen model.
    pub fn infer_cached(&self, x: &Matrix<T>) -> Result<(Matrix<T>, ForwardCache<T>)> {
        self.check_input(x)?;
        self.run_eval(x, true).map(|(y, c)| (y, c.expect("cached")))
    }

    /// Single-sample evaluation convenience.
    pub fn infer_single(&self, input: &[T]) -> Result<Vec<T>> {
        let y = self.infer(&Matrix::from_row(input))?;
        Ok(y.row(0).to_vec())
    }

    fn forward_train(&mut self, x: &Matrix<T>) -> Result<(Matrix<T>, ForwardCache<T>)> {
        let batch = x.rows();
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut bn_caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &mut self.layers {
            let mut z = affine_forward(&cur, &layer.weights, &layer.bias, layer.out_dim);
            let bn_cache = if let Some(bn) = &mut layer.batchnorm {
                let dim = layer.out_dim;
                let mut xhat = Matrix::zeros(batch, dim);
                let mut inv_std = vec![T::zero(); dim];
                let b = T::from_f64(batch as f64);
                let eps = T::from_f64(bn.epsilon);
                let momentum = T::from_f64(bn.momentum);
                let keep = T::one() - momentum;
                // Column walk across z, xhat, and the batchnorm parameter
                // vectors in lockstep; an iterator buys nothing here.
                #[allow(clippy::needless_range_loop)]
                for j in 0..dim {
                    let mut mean = T::zero();
                    for s in 0..batch {
                        mean += z.row(s)[j];
                    }
                    mean /= b;
                    let mut var = T::zero();
                    for s in 0..batch {
                        let d = z.row(s)[j] - mean;
                        var += d * d;
                    }
                    var /= b;
                    let istd = T::one() / (var + eps).sqrt();
                    inv_std[j] = istd;
                    for s in 0..batch {
                        let v = (z.row(s)[j] - mean) * istd;
                        xhat.row_mut(s)[j] = v;
                        z.row_mut(s)[j] = bn.gamma[j] * v + bn.beta[j];
                    }
                    // Running estimates use the unbiased batch variance.
                    let var_unbiased = if batch > 1 {
                        var * b / (b - T::one())
                    } else {
                        var
                    };
                    bn.running_mean[j] = momentum * bn.running_mean[j] + keep * mean;
                    bn.running_var[j] = momentum * bn.running_var[j] + keep * var_unbiased;
                }
                Some(BnCache { xhat, inv_std })
            } else {
                None
            };
            for v in z.data_mut() {
                *v = layer.activation.forward(*v);
            }
            if !z.is_finite() {
                return Err(Error::Numeric(
                    "non-finite activation during train forward".into(),
                ));
            }
            bn_caches.push(bn_cache);
            outputs.push(z.clone());
            cur = z;
        }
        let cache = ForwardCache {
            mode: Mode::Train,
            revision: self.revision,
            input: x.clone(),
            outputs,
            bn: bn_caches,
        };
        Ok((cur, cache))
    }

    fn run_eval(
        &self,
        x: &Matrix<T>,
        keep_cache: bool,
    ) -> Result<(Matrix<T>, Option<ForwardCache<T>>)> {
        let mut outputs = Vec::new();
        let mut cur = x.clone();
        for layer in &self.layers {
            let mut z = affine_forward(&cur, &layer.weights, &layer.bias, layer.out_dim);
            if let Some(bn) = &layer.batchnorm {
                let eps = T::from_f64(bn.epsilon);
                for j in 0..layer.out_dim {
                    let istd = T::one() / (bn.running_var[j] + eps).sqrt();
                    let mean = bn.running_mean[j];
                    for s in 0..z.rows() {
                        let v = (z.row(s)[j] - mean) * istd;
                        z.row_mut(s)[j] = bn.gamma[j] * v + bn.beta[j];
                    }
                }
            }
            for v in z.data_mut() {
                *v = layer.activation.forward(*v);
            }
            if keep_cache {
                outputs.push(z.clone());
            }
            cur = z;
        }
        let cache = keep_cache.then(|| ForwardCache {
            mode: Mode::Eval,
            revision: self.revision,
            input: x.clone(),
            outputs,
            bn: self.layers.iter().map(|_| None).collect(),
        });
        Ok((cur, cache))
    }

    /// Exact parameter gradients for a train-mode cache.
    ///
    /// `upstream` is dL/d(output), one row per sample; parameter gradients
    /// are summed over the batch in row order.
    pub fn backward(&self, cache: &ForwardCache<T>, upstream: &Matrix<T>) -> Result<Gradients<T>> {
        if cache.mode != Mode::Train {
            return Err(Error::Contract(
                "backward requires a cache from a train-mode forward".into(),
            ));
        }
        self.backward_internal(cache, upstream, true)
    }

    /// Gradient with respect to the input batch only. Works with train- or
    /// eval-mode caches; parameters are left out, so this is the path for
    /// backpropagating through a frozen model.
    pub fn backward_input(
        &self,
        cache: &ForwardCache<T>,
        upstream: &Matrix<T>,
    ) -> Result<Matrix<T>> {
        Ok(self.backward_internal(cache, upstream, false)?.input)
    }

    fn backward_internal(
        &self,
        cache: &ForwardCache<T>,
        upstream: &Matrix<T>,
        want_params: bool,
    ) -> Result<Gradients<T>> {
        if cache.revision != self.revision {
            return Err(Error::Contract(
                "stale cache: parameters changed since the matching forward".into(),
            ));
        }
        if cache.outputs.len() != self.layers.len() {
            return Err(Error::Contract("cache does not match this model".into()));
        }
        let batch = cache.input.rows();
        if upstream.rows() != batch || upstream.cols() != self.output_dim() {
            return Err(Error::Invalid(format!(
                "loss gradient shape ({} x {}) does not match output batch ({} x {})",
                upstream.rows(),
                upstream.cols(),
                batch,
                self.output_dim()
            )));
        }

        let mut blocks: Vec<ParamBlock<T>> = self
            .layers
            .iter()
            .map(|l| {
                if want_params {
                    ParamBlock::zeros_like(l)
                } else {
                    ParamBlock {
                        weights: Vec::new(),
                        bias: Vec::new(),
                        gamma: Vec::new(),
                        beta: Vec::new(),
                    }
                }
            })
            .collect();

        let mut grad = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.outputs[i];
            // Through the activation.
            let mut du = grad;
            for (g, yv) in du.data_mut().iter_mut().zip(y.data()) {
                *g *= layer.activation.grad_from_output(*yv);
            }
            // Through batchnorm.
            let dz = if let Some(bn) = &layer.batchnorm {
                match (&cache.bn[i], cache.mode) {
                    (Some(bnc), Mode::Train) => {
                        let dim = layer.out_dim;
                        let b = T::from_f64(batch as f64);
                        let mut dz = Matrix::zeros(batch, dim);
                        for j in 0..dim {
                            let mut sum_dxhat = T::zero();
                            let mut sum_dxhat_xhat = T::zero();
                            let mut dgamma = T::zero();
                            let mut dbeta = T::zero();
                            for s in 0..batch {
                                let g = du.row(s)[j];
                                let xh = bnc.xhat.row(s)[j];
                                dgamma += g * xh;
                                dbeta += g;
                                let dxh = g * bn.gamma[j];
                                sum_dxhat += dxh;
                                sum_dxhat_xhat += dxh * xh;
                            }
                            if want_params {
                                blocks[i].gamma[j] = dgamma;
                                blocks[i].beta[j] = dbeta;
                            }
                            let istd_over_b = bnc.inv_std[j] / b;
                            for s in 0..batch {
                                let dxh = du.row(s)[j] * bn.gamma[j];
                                let xh = bnc.xhat.row(s)[j];
                                dz.row_mut(s)[j] = istd_over_b
                                    * (b * dxh - sum_dxhat - xh * sum_dxhat_xhat);
                            }
                        }
                        dz
                    }
                    // Eval-mode batchnorm is a fixed per-feature affine map.
                    _ => {
                        let eps = T::from_f64(bn.epsilon);
                        let mut dz = du;
                        for j in 0..layer.out_dim {
                            let scale =
                                bn.gamma[j] / (bn.running_var[j] + eps).sqrt();
                            for s in 0..batch {
                                dz.row_mut(s)[j] = dz.row(s)[j] * scale;
                            }
                        }
                        dz
                    }
                }
            } else {
                du
            };
            // Through the affine map.
            let input = if i == 0 {
                &cache.input
            } else {
                &cache.outputs[i - 1]
            };
            let mut scratch_w = Vec::new();
            let mut scratch_b = Vec::new();
            let (dw, db): (&mut [T], &mut [T]) = if want_params {
                let block = &mut blocks[i];
                (&mut block.weights, &mut block.bias)
            } else {
                scratch_w.resize(layer.weights.len(), T::zero());
                scratch_b.resize(layer.out_dim, T::zero());
                (&mut scratch_w, &mut scratch_b)
            };
            grad = affine_backward(input, &layer.weights, &dz, dw, db);
        }

        Ok(Gradients {
            blocks,
            input: grad,
        })
    }

    /// All trainable parameters in declared order: per layer weights, bias,
    /// then gamma and beta when the layer carries batchnorm. Running
    /// statistics are not trainable and are excluded.
    pub fn flat_parameters(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
            if let Some(bn) = &l.batchnorm {
                out.extend_from_slice(&bn.gamma);
                out.extend_from_slice(&bn.beta);
            }
        }
        out
    }

    pub fn set_flat_parameters(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Invalid(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        let mut off = 0;
        let fill = |dst: &mut [T], off: &mut usize| {
            dst.copy_from_slice(&params[*off..*off + dst.len()]);
            *off += dst.len();
        };
        for l in &mut self.layers {
            fill(&mut l.weights, &mut off);
            fill(&mut l.bias, &mut off);
            if let Some(bn) = &mut l.batchnorm {
                fill(&mut bn.gamma, &mut off);
                fill(&mut bn.beta, &mut off);
            }
        }
        self.revision += 1;
        Ok(())
    }
}
