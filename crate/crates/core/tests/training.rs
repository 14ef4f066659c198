mod common;

use common::{gaussian_vec, random_trained_model, rng, toy_dataset};
use igx_core::nn::{accuracy, load_checkpoint, save_checkpoint, train, Architecture, MlpClassifier, TrainConfig};
use igx_core::data::Standardizer;
use igx_core::Matrix;
use rand::seq::SliceRandom;
use rand::Rng;

/// Points on either side of `x0 + x1 = 0`, at least 1.0 from the plane (gap 2.0).
fn margin_toy(seed: u64, n: usize) -> (Matrix, Vec<u8>) {
    let mut r = rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while rows.len() < n {
        let x: [f64; 2] = [r.random_range(-4.0..4.0), r.random_range(-4.0..4.0)];
        let dist = (x[0] + x[1]) / 2f64.sqrt();
        if dist.abs() < 1.0 {
            continue;
        }
        labels.push(u8::from(dist > 0.0));
        rows.push(x);
    }
    (Matrix::from_rows(&rows).unwrap(), labels)
}

fn small_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 32,
        max_epochs: 60,
        patience: 10,
        learning_rate: 1e-2,
        seed,
        ..TrainConfig::default()
    }
}

fn fit(train_x: (Matrix, Vec<u8>), val_x: (Matrix, Vec<u8>), seed: u64) -> (MlpClassifier, f64) {
    let tr = toy_dataset(train_x.0, train_x.1);
    let va = toy_dataset(val_x.0, val_x.1);
    let mut r = rng(seed);
    let model = MlpClassifier::new(Architecture::new(2).with_hidden(16, 2), &mut r).unwrap();
    let (model, _) = train(model, &tr, &va, &small_cfg(seed)).unwrap();
    let acc = accuracy(&model.predict_proba(&va.features).unwrap(), &va.labels, 0.5);
    (model, acc)
}

#[test]
fn separable_toy_is_learned() {
    let (_, acc) = fit(margin_toy(1, 200), margin_toy(2, 200), 3);
    assert!(acc >= 0.99, "validation accuracy {acc}");
}

#[test]
fn shuffled_labels_give_chance_accuracy() {
    let (x, mut y) = margin_toy(4, 200);
    let (vx, mut vy) = margin_toy(5, 200);
    let mut r = rng(6);
    y.shuffle(&mut r);
    vy.shuffle(&mut r);
    let (_, acc) = fit((x, y), (vx, vy), 7);
    assert!((0.4..=0.6).contains(&acc), "validation accuracy {acc}");
}

#[test]
fn same_seed_same_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let st = Standardizer::new(vec!["x0".into(), "x1".into()], vec![0.0; 2], vec![1.0; 2]).unwrap();
    let mut bytes = Vec::new();
    for run in 0..2 {
        let (model, _) = fit(margin_toy(8, 200), margin_toy(9, 100), 10);
        let p = dir.path().join(format!("run{run}.igxm"));
        save_checkpoint(&model, &st, &p).unwrap();
        bytes.push(std::fs::read(&p).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn checkpoint_reports_its_architecture() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(11);
    let model = MlpClassifier::new(Architecture::new(5).with_hidden(8, 2), &mut r).unwrap().eval();
    let st = Standardizer::new((0..5).map(|i| format!("f{i}")).collect(), vec![0.0; 5], vec![2.0; 5]).unwrap();
    let p = dir.path().join("m.igxm");
    save_checkpoint(&model, &st, &p).unwrap();
    let (loaded, st2) = load_checkpoint(&p).unwrap();
    assert_eq!(loaded.architecture().hidden_dim, 8);
    assert_eq!(loaded.architecture().n_hidden, 2);
    assert_eq!(st2, st);
}

/// Central differences with h = 1e-5; relative tolerance 1e-4, with an
/// absolute floor where the gradient itself is near zero.
fn fd_agrees(model: &MlpClassifier, x: &[f64]) -> Result<(), String> {
    let h = 1e-5;
    let g = model.input_gradient(x).unwrap();
    for i in 0..x.len() {
        let (mut up, mut dn) = (x.to_vec(), x.to_vec());
        up[i] += h;
        dn[i] -= h;
        let fu = model.predict_proba(&Matrix::row_vector(&up)).unwrap()[0];
        let fd = model.predict_proba(&Matrix::row_vector(&dn)).unwrap()[0];
        let num = (fu - fd) / (2.0 * h);
        let err = (g[i] - num).abs();
        if err > 1e-4 * g[i].abs().max(num.abs()) && err > 1e-9 {
            return Err(format!("coordinate {i}: analytic {} numeric {num}", g[i]));
        }
    }
    Ok(())
}

#[test]
fn input_gradients_match_finite_differences_on_50_models() {
    for seed in 0..50 {
        let model = random_trained_model(100 + seed);
        let mut r = rng(500 + seed);
        let x = gaussian_vec(&mut r, model.input_dim());
        fd_agrees(&model, &x).unwrap_or_else(|e| panic!("model {seed}: {e}"));
    }
}
