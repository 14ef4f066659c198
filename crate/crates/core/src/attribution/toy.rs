//! A three-feature construction where the zero baseline cannot see a feature
//! the model relies on.

use super::baseline::{BaselineSpec, BaselineTag};
use crate::matrix::Matrix;
use crate::nn::MlpClassifier;

/// Index of the feature that is zero in [`ZeroBlindnessToy::input`].
pub const BLIND_FEATURE: usize = 1;

#[derive(Debug, Clone)]
pub struct ZeroBlindnessToy {
    /// `sigmoid(1.5 x0 − 2 x1 + 0.8 x2)`: every input has a nonzero weight.
    pub model: MlpClassifier,
    /// Signal-like event whose blind feature sits exactly at zero.
    pub input: Vec<f64>,
    /// Background-like events, all with a positive blind feature.
    pub background: BaselineSpec,
}

impl ZeroBlindnessToy {
    pub fn new() -> Self {
        let vectors = Matrix::from_rows(&[
            [-0.6, 0.9, -0.2],
            [-1.1, 1.4, 0.3],
            [-0.3, 0.7, -0.8],
            [-0.9, 1.2, 0.1],
        ])
        .expect("rectangular");
        Self {
            model: MlpClassifier::logistic(&[1.5, -2.0, 0.8], 0.0),
            input: vec![1.2, 0.0, 0.5],
            background: BaselineSpec::new(BaselineTag::BackgroundUniform, vectors, vec![0.25; 4])
                .expect("probabilities sum to one"),
        }
    }

    pub fn zero_baseline(&self) -> BaselineSpec {
        BaselineSpec::zero(self.input.len())
    }
}

impl Default for ZeroBlindnessToy {
    fn default() -> Self {
        Self::new()
    }
}
