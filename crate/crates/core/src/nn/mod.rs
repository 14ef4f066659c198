//! Minimal fully connected classifier with batch normalization, Swish, dropout,
//! AdamW training, checkpointing, and input gradients of the signal probability.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{
    Activation, Architecture, BatchNormState, HiddenBlock, LinearLayer, MlpClassifier, Mode,
};
pub use train::{accuracy, bce_with_logits, train, EpochRecord, TrainConfig, TrainingLog};

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `x · sigmoid(x)`.
#[inline]
pub fn swish(x: f64) -> f64 {
    x * sigmoid(x)
}

/// d/dx of [`swish`]: `σ(x) + x σ(x)(1 − σ(x))`.
#[inline]
pub fn swish_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s + x * s * (1.0 - s)
}
