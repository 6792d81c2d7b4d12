//! Dense dueling Q-network, manual backpropagation and optimizers.

mod checkpoint;
mod matrix;
mod network;
mod optim;

pub use checkpoint::{Checkpoint, CheckpointMeta, FORMAT_VERSION};
pub use matrix::Matrix;
pub use network::{
    combine_dueling, selected_mse, Architecture, ForwardPass, GradientSet, LayerShape,
    NetworkParams, ADVANTAGE_HEAD, HIDDEN_LAYERS, LAYER_COUNT, VALUE_HEAD,
};
pub use optim::{soft_update, AdamConfig, AdamState};

/// Rescales `grads` so its global L2 norm is at most `max_norm`.
pub fn clip_gradient_norm(grads: &mut GradientSet, max_norm: f64) -> f64 {
    grads.clip_norm(max_norm)
}
