use alloc::vec::Vec;

use rand::Rng;

use super::{Activation, NnError};
use crate::linalg::{gemm, Matrix, Op};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub const fn new(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Self { input_dim, output_dim, activation }
    }

    pub fn param_count(&self) -> usize {
        self.output_dim * self.input_dim + self.output_dim
    }
}

/// Weights (`output_dim x input_dim`) and biases of one dense layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl DenseParams {
    pub fn zeros(spec: &LayerSpec) -> Self {
        Self { weights: Matrix::zeros(spec.output_dim, spec.input_dim), biases: alloc::vec![0.0; spec.output_dim] }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.is_finite() && self.biases.iter().all(|b| b.is_finite())
    }

    fn shape_matches(&self, spec: &LayerSpec) -> bool {
        self.weights.shape() == (spec.output_dim, spec.input_dim) && self.biases.len() == spec.output_dim
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub params: DenseParams,
}

/// A feed-forward stack of dense layers.
///
/// `version` is bumped on every parameter mutation so a [`ForwardCache`]
/// taken before an update can be recognised as stale.
#[derive(Clone, Debug)]
pub struct Network {
    layers: Vec<Layer>,
    seed: u64,
    version: u64,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Everything `backward` needs from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    version: u64,
    /// `activations[0]` is the batch, `activations[k + 1]` the output of layer k.
    activations: Vec<Matrix>,
    /// Pre-activation values per layer.
    pre_activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("cache always holds the input")
    }

    pub fn pre_activations(&self) -> &[Matrix] {
        &self.pre_activations
    }

    pub fn activations(&self) -> &[Matrix] {
        &self.activations
    }
}

/// Parameter gradients, one entry per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseParams>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self { layers: net.layers.iter().map(|l| DenseParams::zeros(&l.spec)).collect() }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.as_mut_slice().iter_mut().zip(b.weights.as_slice()) {
                *x += scale * y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += scale * y;
            }
        }
    }

    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers.iter().position(|l| !l.is_finite())
    }
}

impl Network {
    /// Glorot-uniform weights and zero biases, deterministic in `seed`.
    ///
    /// Weights are drawn in single precision and widened, so that they
    /// survive the 32-bit weight exchange format unchanged.
    pub fn init(specs: &[LayerSpec], seed: u64) -> Result<Self, NnError> {
        let mut rng = rng::stream(seed, rng::INIT_STREAM);
        Self::init_with_rng(specs, seed, &mut rng)
    }

    pub(crate) fn init_with_rng(specs: &[LayerSpec], seed: u64, rng: &mut rng::StreamRng) -> Result<Self, NnError> {
        validate_specs(specs)?;
        let layers = specs
            .iter()
            .map(|spec| {
                let bound = glorot_bound_f32(spec.input_dim, spec.output_dim);
                let weights =
                    Matrix::from_fn(spec.output_dim, spec.input_dim, |_, _| f64::from(rng.random_range(-bound..=bound)));
                Layer { spec: *spec, params: DenseParams { weights, biases: alloc::vec![0.0; spec.output_dim] } }
            })
            .collect();
        Ok(Self { layers, seed, version: 0 })
    }

    /// Builds a network from explicit parameters.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NnError> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        validate_specs(&specs)?;
        for (index, layer) in layers.iter().enumerate() {
            if !layer.params.shape_matches(&layer.spec) {
                return Err(NnError::ParamShape { layer: index });
            }
        }
        Ok(Self { layers, seed: 0, version: 0 })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.output_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.spec.param_count()).sum()
    }

    /// Mutable access to the parameters; invalidates outstanding caches.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut DenseParams> {
        self.version += 1;
        self.layers.iter_mut().map(|l| &mut l.params)
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, ForwardCache), NnError> {
        let cache = self.forward_cached(batch)?;
        Ok((cache.output().clone(), cache))
    }

    /// Forward pass keeping only the cache; the output is `cache.output()`.
    pub fn forward_cached(&self, batch: &Matrix) -> Result<ForwardCache, NnError> {
        if batch.cols() != self.input_dim() {
            return Err(NnError::Shape {
                context: "forward input",
                expected: (batch.rows(), self.input_dim()),
                found: batch.shape(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(batch.clone());
        for layer in &self.layers {
            let input = activations.last().expect("non-empty");
            let mut z = Matrix::zeros(input.rows(), layer.spec.output_dim);
            gemm(1.0, input, Op::N, &layer.params.weights, Op::T, 0.0, &mut z);
            z.add_row_vector(&layer.params.biases);
            let mut a = z.clone();
            let act = layer.spec.activation;
            a.map_inplace(|x| act.apply(x));
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(ForwardCache { version: self.version, activations, pre_activations })
    }

    /// Output only, without keeping intermediate values.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix, NnError> {
        if batch.cols() != self.input_dim() {
            return Err(NnError::Shape {
                context: "forward input",
                expected: (batch.rows(), self.input_dim()),
                found: batch.shape(),
            });
        }
        let mut current = batch.clone();
        for layer in &self.layers {
            let mut z = Matrix::zeros(current.rows(), layer.spec.output_dim);
            gemm(1.0, &current, Op::N, &layer.params.weights, Op::T, 0.0, &mut z);
            z.add_row_vector(&layer.params.biases);
            let act = layer.spec.activation;
            z.map_inplace(|x| act.apply(x));
            current = z;
        }
        Ok(current)
    }

    /// Backpropagates `output_gradient` (dL/d output) through the cached
    /// pass, returning parameter gradients and dL/d input.
    pub fn backward(&self, cache: &ForwardCache, output_gradient: &Matrix) -> Result<(Gradients, Matrix), NnError> {
        let (grads, input_grad) = self.backward_impl(cache, output_gradient, true, false)?;
        Ok((grads.expect("requested"), input_grad))
    }

    /// Like [`Network::backward`], but `logit_gradient` is taken with respect
    /// to the last layer's pre-activation, bypassing its activation. Losses
    /// on sigmoid outputs use this to avoid vanishing gradients when the
    /// sigmoid saturates.
    pub fn backward_from_logits(
        &self,
        cache: &ForwardCache,
        logit_gradient: &Matrix,
    ) -> Result<(Gradients, Matrix), NnError> {
        let (grads, input_grad) = self.backward_impl(cache, logit_gradient, true, true)?;
        Ok((grads.expect("requested"), input_grad))
    }

    /// Input gradient only, starting from the last pre-activation.
    pub fn input_gradient_from_logits(&self, cache: &ForwardCache, logit_gradient: &Matrix) -> Result<Matrix, NnError> {
        Ok(self.backward_impl(cache, logit_gradient, false, true)?.1)
    }

    /// Like [`Network::backward`] but skips the parameter gradients.
    pub fn input_gradient(&self, cache: &ForwardCache, output_gradient: &Matrix) -> Result<Matrix, NnError> {
        Ok(self.backward_impl(cache, output_gradient, false, false)?.1)
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        output_gradient: &Matrix,
        want_params: bool,
        from_logits: bool,
    ) -> Result<(Option<Gradients>, Matrix), NnError> {
        self.check_cache(cache)?;
        let batch_rows = cache.activations[0].rows();
        if output_gradient.shape() != (batch_rows, self.output_dim()) {
            return Err(NnError::Shape {
                context: "output gradient",
                expected: (batch_rows, self.output_dim()),
                found: output_gradient.shape(),
            });
        }
        let mut grads = want_params.then(|| Vec::with_capacity(self.layers.len()));
        let mut delta = output_gradient.clone();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate().rev() {
            if !(from_logits && k == last) {
                let act = layer.spec.activation;
                for (d, z) in delta.as_mut_slice().iter_mut().zip(cache.pre_activations[k].as_slice()) {
                    *d *= act.derivative(*z);
                }
            }
            if let Some(g) = grads.as_mut() {
                let mut dw = Matrix::zeros(layer.spec.output_dim, layer.spec.input_dim);
                gemm(1.0, &delta, Op::T, &cache.activations[k], Op::N, 0.0, &mut dw);
                g.push(DenseParams { weights: dw, biases: delta.column_sums() });
            }
            let mut prev = Matrix::zeros(batch_rows, layer.spec.input_dim);
            gemm(1.0, &delta, Op::N, &layer.params.weights, Op::N, 0.0, &mut prev);
            delta = prev;
        }
        let grads = grads.map(|mut g| {
            g.reverse();
            Gradients { layers: g }
        });
        Ok((grads, delta))
    }

    pub(crate) fn check_cache(&self, cache: &ForwardCache) -> Result<(), NnError> {
        let shapes_match = cache.pre_activations.len() == self.layers.len()
            && cache.pre_activations.iter().zip(&self.layers).all(|(z, l)| z.cols() == l.spec.output_dim);
        if cache.version != self.version || !shapes_match {
            return Err(NnError::StaleCache);
        }
        Ok(())
    }

    /// Appends every parameter as `f32`, layer by layer, each layer as the
    /// row-major `output_dim x (input_dim + 1)` matrix `[weights | bias]`.
    pub fn write_f32(&self, out: &mut Vec<f32>) {
        for layer in &self.layers {
            for (r, bias) in layer.params.biases.iter().enumerate() {
                out.extend(layer.params.weights.row(r).iter().map(|&w| w as f32));
                out.push(*bias as f32);
            }
        }
    }

    /// Inverse of [`Network::write_f32`]; returns the number of values consumed.
    pub fn read_f32(&mut self, values: &[f32]) -> Result<usize, NnError> {
        let needed = self.param_count();
        if values.len() < needed {
            return Err(NnError::ValueCount { expected: needed, found: values.len() });
        }
        self.version += 1;
        let mut it = values.iter();
        for layer in &mut self.layers {
            let p = &mut layer.params;
            for (r, bias) in p.biases.iter_mut().enumerate() {
                for (w, v) in p.weights.row_mut(r).iter_mut().zip(&mut it) {
                    *w = f64::from(*v);
                }
                *bias = f64::from(*it.next().expect("length checked"));
            }
        }
        Ok(needed)
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        self.version += 1;
        &mut self.layers
    }
}

fn validate_specs(specs: &[LayerSpec]) -> Result<(), NnError> {
    if specs.is_empty() {
        return Err(NnError::Empty);
    }
    for (index, spec) in specs.iter().enumerate() {
        if spec.input_dim == 0 || spec.output_dim == 0 {
            return Err(NnError::ZeroDim { layer: index });
        }
        if index > 0 && specs[index - 1].output_dim != spec.input_dim {
            return Err(NnError::DimensionChain {
                layer: index,
                expected: specs[index - 1].output_dim,
                found: spec.input_dim,
            });
        }
    }
    Ok(())
}

/// `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

/// Largest `f32` not exceeding the Glorot bound.
fn glorot_bound_f32(fan_in: usize, fan_out: usize) -> f32 {
    let bound = glorot_bound(fan_in, fan_out);
    let b = bound as f32;
    if f64::from(b) > bound {
        f32::from_bits(b.to_bits() - 1)
    } else {
        b
    }
}
