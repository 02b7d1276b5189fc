use alloc::vec::Vec;

use super::{DenseParams, Gradients, Network, NnError};

pub const DEFAULT_BETA1: f64 = 0.5;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Adam moments for every parameter of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    first_moment: Vec<DenseParams>,
    second_moment: Vec<DenseParams>,
}

impl AdamState {
    pub fn new(net: &Network, learning_rate: f64) -> Self {
        Self::with_constants(net, learning_rate, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON)
    }

    pub fn with_constants(net: &Network, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros: Vec<DenseParams> = net.layers().iter().map(|l| DenseParams::zeros(&l.spec)).collect();
        Self { learning_rate, beta1, beta2, epsilon, step_count: 0, first_moment: zeros.clone(), second_moment: zeros }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn second_moment(&self) -> &[DenseParams] {
        &self.second_moment
    }

    /// One bias-corrected Adam update of `net` along `grads`.
    ///
    /// Nothing is modified if any gradient entry is non-finite.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<(), NnError> {
        if grads.layers.len() != net.layers().len()
            || grads.layers.iter().zip(net.layers()).any(|(g, l)| {
                g.weights.shape() != l.params.weights.shape() || g.biases.len() != l.params.biases.len()
            })
        {
            return Err(NnError::GradientShape);
        }
        if let Some(layer) = grads.first_non_finite_layer() {
            return Err(NnError::NonFiniteGradient { layer });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - libm::pow(self.beta1, f64::from(t));
        let bias2 = 1.0 - libm::pow(self.beta2, f64::from(t));
        let (lr, b1, b2, eps) = (self.learning_rate, self.beta1, self.beta2, self.epsilon);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= lr * m_hat / (libm::sqrt(v_hat) + eps);
        };
        for (((layer, g), m), v) in
            net.layers_mut().iter_mut().zip(&grads.layers).zip(&mut self.first_moment).zip(&mut self.second_moment)
        {
            let p = &mut layer.params;
            for (((w, gw), mw), vw) in p
                .weights
                .as_mut_slice()
                .iter_mut()
                .zip(g.weights.as_slice())
                .zip(m.weights.as_mut_slice())
                .zip(v.weights.as_mut_slice())
            {
                update(w, *gw, mw, vw);
            }
            for (((b, gb), mb), vb) in p.biases.iter_mut().zip(&g.biases).zip(&mut m.biases).zip(&mut v.biases) {
                update(b, *gb, mb, vb);
            }
        }
        Ok(())
    }
}
