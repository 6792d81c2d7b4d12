//! Dueling feed-forward Q-network with three ReLU hidden layers.
//!
//! All parameters live in one flat buffer. Blocks are laid out in the order
//! hidden 1..3 (weight then bias), value head, advantage head. Weights are
//! `fan_out × fan_in` row-major. The same layout backs [`GradientSet`] and the
//! Adam moments, so optimizer and checkpoint code can treat parameters as a
//! single slice.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{affine, affine_backward, Matrix};
use crate::error::{Error, Result};

pub const HIDDEN_LAYERS: usize = 3;
/// Hidden layers followed by the value and advantage heads.
pub const LAYER_COUNT: usize = HIDDEN_LAYERS + 2;
pub const VALUE_HEAD: usize = HIDDEN_LAYERS;
pub const ADVANTAGE_HEAD: usize = HIDDEN_LAYERS + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Input width, twice the number of features (masked values and mask).
    pub inputs: usize,
    pub hidden: [usize; HIDDEN_LAYERS],
    /// Number of actions `|A|`.
    pub actions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight: (usize, usize),
    pub bias: (usize, usize),
}

impl LayerShape {
    pub fn weight_range(&self) -> Range<usize> {
        self.weight.0..self.weight.1
    }

    pub fn bias_range(&self) -> Range<usize> {
        self.bias.0..self.bias.1
    }
}

impl Architecture {
    pub fn new(inputs: usize, hidden: [usize; HIDDEN_LAYERS], actions: usize) -> Result<Self> {
        let arch = Self {
            inputs,
            hidden,
            actions,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 || self.actions == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "all layer widths must be positive: {self:?}"
            )));
        }
        if self.checked_len().is_none() {
            return Err(Error::InvalidInput(format!(
                "architecture too large: {self:?}"
            )));
        }
        Ok(())
    }

    fn widths(&self) -> [(usize, usize); LAYER_COUNT] {
        let [h1, h2, h3] = self.hidden;
        [
            (self.inputs, h1),
            (h1, h2),
            (h2, h3),
            (h3, 1),
            (h3, self.actions),
        ]
    }

    fn checked_len(&self) -> Option<usize> {
        self.widths().iter().try_fold(0usize, |acc, &(i, o)| {
            i.checked_mul(o)?.checked_add(o)?.checked_add(acc)
        })
    }

    /// Total number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        self.checked_len().expect("validated architecture")
    }

    pub fn layers(&self) -> [LayerShape; LAYER_COUNT] {
        let mut offset = 0;
        self.widths().map(|(fan_in, fan_out)| {
            let w = (offset, offset + fan_in * fan_out);
            let b = (w.1, w.1 + fan_out);
            offset = b.1;
            LayerShape {
                fan_in,
                fan_out,
                weight: w,
                bias: b,
            }
        })
    }
}

/// Parameters of the dueling network (online `θ` or target `φ`).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    arch: Architecture,
    values: Vec<f64>,
}

/// Gradient of the loss with respect to every entry of [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    arch: Architecture,
    values: Vec<f64>,
}

impl NetworkParams {
    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights and zero biases.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let mut values = vec![0.0; arch.parameter_count()];
        for layer in arch.layers() {
            let bound = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
            for w in &mut values[layer.weight_range()] {
                *w = rng.random_range(-bound..=bound);
            }
        }
        Ok(Self { arch, values })
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        Ok(Self {
            arch,
            values: vec![0.0; arch.parameter_count()],
        })
    }

    pub fn from_values(arch: Architecture, values: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if values.len() != arch.parameter_count() {
            return Err(Error::InvalidInput(format!(
                "expected {} parameters, got {}",
                arch.parameter_count(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        Ok(Self { arch, values })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn weight(&self, layer: &LayerShape) -> &[f64] {
        &self.values[layer.weight_range()]
    }

    fn bias(&self, layer: &LayerShape) -> &[f64] {
        &self.values[layer.bias_range()]
    }

    /// Q-values for every action, one row per observation.
    pub fn forward(&self, observations: &Matrix) -> Result<Matrix> {
        Ok(self.forward_pass(observations)?.q)
    }

    /// Full forward pass retaining the activations needed by [`backward`](Self::backward).
    pub fn forward_pass(&self, observations: &Matrix) -> Result<ForwardPass> {
        if observations.cols() != self.arch.inputs {
            return Err(Error::InvalidInput(format!(
                "observation width {} does not match network input {}",
                observations.cols(),
                self.arch.inputs
            )));
        }
        let layers = self.arch.layers();
        let mut activations = Vec::with_capacity(HIDDEN_LAYERS);
        let mut x = observations.clone();
        for layer in &layers[..HIDDEN_LAYERS] {
            let mut h = affine(&x, self.weight(layer), self.bias(layer), layer.fan_out);
            for v in h.as_mut_slice() {
                *v = v.max(0.0);
            }
            activations.push(h.clone());
            x = h;
        }
        let value_layer = &layers[VALUE_HEAD];
        let adv_layer = &layers[ADVANTAGE_HEAD];
        let value = affine(&x, self.weight(value_layer), self.bias(value_layer), 1).into_vec();
        let advantage = affine(
            &x,
            self.weight(adv_layer),
            self.bias(adv_layer),
            self.arch.actions,
        );
        let q = combine_dueling(&value, &advantage);
        Ok(ForwardPass {
            input: observations.clone(),
            activations,
            value,
            advantage,
            q,
        })
    }

    /// Backpropagates `d_q` (gradient of the loss with respect to every Q
    /// output) through the network.
    pub fn backward(&self, pass: &ForwardPass, d_q: &Matrix) -> Result<GradientSet> {
        if d_q.rows() != pass.q.rows() || d_q.cols() != pass.q.cols() {
            return Err(Error::InvalidInput(format!(
                "output gradient is {}x{}, expected {}x{}",
                d_q.rows(),
                d_q.cols(),
                pass.q.rows(),
                pass.q.cols()
            )));
        }
        let layers = self.arch.layers();
        let mut grads = GradientSet::zeros(self.arch);
        let actions = self.arch.actions as f64;

        // Q = V + A - mean(A)
        let batch = d_q.rows();
        let mut d_value = Matrix::zeros(batch, 1);
        let mut d_adv = Matrix::zeros(batch, self.arch.actions);
        for b in 0..batch {
            let row = d_q.row(b);
            let total: f64 = row.iter().sum();
            d_value.set(b, 0, total);
            let shift = total / actions;
            for (da, g) in d_adv.row_mut(b).iter_mut().zip(row) {
                *da = g - shift;
            }
        }

        let last = &pass.activations[HIDDEN_LAYERS - 1];
        let mut d_hidden = {
            let layer = &layers[VALUE_HEAD];
            let (dw, db) = grads.split_layer_mut(layer);
            affine_backward(last, self.weight(layer), &d_value, dw, db)
        };
        let d_from_adv = {
            let layer = &layers[ADVANTAGE_HEAD];
            let (dw, db) = grads.split_layer_mut(layer);
            affine_backward(last, self.weight(layer), &d_adv, dw, db)
        };
        for (a, b) in d_hidden
            .as_mut_slice()
            .iter_mut()
            .zip(d_from_adv.as_slice())
        {
            *a += b;
        }

        for idx in (0..HIDDEN_LAYERS).rev() {
            let out = &pass.activations[idx];
            for (g, &h) in d_hidden.as_mut_slice().iter_mut().zip(out.as_slice()) {
                if h <= 0.0 {
                    *g = 0.0;
                }
            }
            let input = if idx == 0 {
                &pass.input
            } else {
                &pass.activations[idx - 1]
            };
            let layer = &layers[idx];
            let (dw, db) = grads.split_layer_mut(layer);
            d_hidden = affine_backward(input, self.weight(layer), &d_hidden, dw, db);
        }

        if !grads.is_finite() {
            return Err(Error::Divergence("non-finite gradient".into()));
        }
        Ok(grads)
    }

    /// Mean squared error between `targets` and the Q-value of the selected
    /// action in each row, with its gradient.
    pub fn loss_and_gradient(
        &self,
        observations: &Matrix,
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, GradientSet)> {
        let pass = self.forward_pass(observations)?;
        let (loss, d_q) = selected_mse(&pass.q, actions, targets)?;
        Ok((loss, self.backward(&pass, &d_q)?))
    }
}

/// Activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    input: Matrix,
    activations: Vec<Matrix>,
    /// `V(s)` per row.
    pub value: Vec<f64>,
    /// `A(s, a)` per row and action.
    pub advantage: Matrix,
    /// Combined `Q(s, a)`.
    pub q: Matrix,
}

pub fn combine_dueling(value: &[f64], advantage: &Matrix) -> Matrix {
    let mut q = Matrix::zeros(advantage.rows(), advantage.cols());
    let n = advantage.cols() as f64;
    for (b, &v) in value.iter().enumerate() {
        let adv = advantage.row(b);
        let mean = adv.iter().sum::<f64>() / n;
        for (out, a) in q.row_mut(b).iter_mut().zip(adv) {
            *out = v + a - mean;
        }
    }
    q
}

/// Loss `(1/B) Σ (target_b − Q[b, a_b])²` and its gradient with respect to
/// every entry of `q` (zero outside the selected actions).
pub fn selected_mse(q: &Matrix, actions: &[usize], targets: &[f64]) -> Result<(f64, Matrix)> {
    let batch = q.rows();
    if actions.len() != batch || targets.len() != batch {
        return Err(Error::InvalidInput(format!(
            "batch of {batch} rows with {} actions and {} targets",
            actions.len(),
            targets.len()
        )));
    }
    if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite target in row {i}")));
    }
    if let Some(i) = actions.iter().position(|&a| a >= q.cols()) {
        return Err(Error::InvalidInput(format!(
            "action {} out of range in row {i}",
            actions[i]
        )));
    }
    let mut d_q = Matrix::zeros(batch, q.cols());
    if batch == 0 {
        return Ok((0.0, d_q));
    }
    let scale = 1.0 / batch as f64;
    let mut loss = 0.0;
    for (b, (&a, &t)) in actions.iter().zip(targets).enumerate() {
        let err = q.get(b, a) - t;
        loss += err * err;
        d_q.set(b, a, 2.0 * err * scale);
    }
    Ok((loss * scale, d_q))
}

impl GradientSet {
    pub fn zeros(arch: Architecture) -> Self {
        Self {
            arch,
            values: vec![0.0; arch.parameter_count()],
        }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn zero(&mut self) {
        self.values.fill(0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Global L2 norm over all parameters.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rescales in place so the global norm does not exceed `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.norm();
        if norm > max_norm {
            let scale = max_norm / norm;
            for v in &mut self.values {
                *v *= scale;
            }
        }
        norm
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    fn split_layer_mut(&mut self, layer: &LayerShape) -> (&mut [f64], &mut [f64]) {
        let region = &mut self.values[layer.weight.0..layer.bias.1];
        region.split_at_mut(layer.weight.1 - layer.weight.0)
    }
}
