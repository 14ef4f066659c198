#![allow(dead_code)]

use igx_core::data::{EventDataset, FeatureSchema};
use igx_core::nn::{train, Architecture, MlpClassifier, TrainConfig};
use igx_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn toy_dataset(x: Matrix, labels: Vec<u8>) -> EventDataset {
    let names: Vec<String> = (0..x.cols()).map(|i| format!("x{i}")).collect();
    let schema = FeatureSchema::from_names(&names).unwrap();
    let n = x.rows();
    let pids = labels.iter().map(|&l| u16::from(l == 0)).collect();
    EventDataset::new(x, labels, pids, vec![1.0; n], schema).unwrap()
}

/// Gaussian inputs labelled by a random hyperplane.
pub fn planted_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> EventDataset {
    let w = gaussian_vec(rng, d);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = gaussian_vec(rng, d);
        let s: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        labels.push(u8::from(s > 0.0));
        rows.push(x);
    }
    toy_dataset(Matrix::from_rows(&rows).unwrap(), labels)
}

/// A small network of random shape, briefly trained so that batch-norm
/// statistics and weights are away from their initial values.
pub fn random_trained_model(seed: u64) -> MlpClassifier {
    let mut r = rng(seed);
    let d = r.random_range(3..=8);
    let hidden = r.random_range(4..=16);
    let n_hidden = r.random_range(1..=3);
    let data = planted_dataset(&mut r, 128, d);
    let val = planted_dataset(&mut r, 32, d);
    let model = MlpClassifier::new(Architecture::new(d).with_hidden(hidden, n_hidden), &mut r).unwrap();
    let cfg = TrainConfig {
        batch_size: 32,
        max_epochs: 3,
        patience: 3,
        learning_rate: 1e-2,
        seed,
        ..TrainConfig::default()
    };
    train(model, &data, &val, &cfg).unwrap().0
}
