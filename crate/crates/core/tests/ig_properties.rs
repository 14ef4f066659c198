mod common;

use common::{gaussian_vec, random_trained_model, rng};
use igx_core::attribution::{
    averaged_ig, class_attribution, completeness_check, integrated_gradients, AffineFunction,
    BaselineSpec, BaselineTag, IgConfig, QuadratureRule, ZeroBlindnessToy, BLIND_FEATURE,
};
use igx_core::nn::{Architecture, MlpClassifier};
use igx_core::{Error, Execution, Matrix};
use proptest::prelude::*;
use rand::Rng;

fn gaussian_rows(seed: u64, n: usize, d: usize) -> Matrix {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| gaussian_vec(&mut r, d)).collect();
    Matrix::from_rows(&rows).unwrap()
}

fn spec(vectors: Matrix, probs: Vec<f64>) -> BaselineSpec {
    BaselineSpec::new(BaselineTag::BackgroundUniform, vectors, probs).unwrap()
}

#[test]
fn affine_models_are_exact_at_two_steps() {
    let cfg = IgConfig::with_steps(2);
    for case in 0..50 {
        let mut r = rng(case);
        let d = 1 + (case as usize % 7);
        let f = AffineFunction {
            coef: gaussian_vec(&mut r, d),
            intercept: gaussian_vec(&mut r, 1)[0],
        };
        let x = gaussian_vec(&mut r, d);
        let xp = gaussian_vec(&mut r, d);
        let v = integrated_gradients(&f, &x, &xp, &cfg).unwrap();
        for i in 0..d {
            let want = f.coef[i] * (x[i] - xp[i]);
            assert!((v.phi[i] - want).abs() <= 1e-12, "case {case}, feature {i}");
        }
        assert!(v.completeness_residual < 1e-12);
    }
}

#[test]
fn constant_model_has_no_attribution() {
    let model = MlpClassifier::zeroed(Architecture::new(4).with_hidden(6, 2)).unwrap();
    let b = spec(gaussian_rows(1, 3, 4), vec![0.2, 0.3, 0.5]);
    let rep = completeness_check(&model, &[1.0, -2.0, 0.5, 3.0], &b, &IgConfig::default()).unwrap();
    assert_eq!(rep.sum_phi, 0.0);
    assert_eq!(rep.residual, 0.0);
    assert!(!rep.flagged);
}

#[test]
fn completeness_tightens_with_steps() {
    for (steps, tol) in [(50, 5e-2), (300, 1e-2), (3000, 1e-3)] {
        let cfg = IgConfig::with_steps(steps);
        for case in 0..20 {
            let model = random_trained_model(1000 + case);
            let mut r = rng(2000 + case);
            let d = model.input_dim();
            let x: Vec<f64> = gaussian_vec(&mut r, d).iter().map(|v| 2.0 * v).collect();
            let xp = gaussian_vec(&mut r, d);
            let v = integrated_gradients(&model, &x, &xp, &cfg).unwrap();
            assert!(
                v.completeness_residual <= tol,
                "steps {steps}, case {case}: residual {}",
                v.completeness_residual
            );
        }
    }
}

#[test]
fn doubling_steps_rarely_hurts() {
    let mut ok = 0;
    for case in 0..100 {
        let model = random_trained_model(3000 + case);
        let mut r = rng(4000 + case);
        let d = model.input_dim();
        let x: Vec<f64> = gaussian_vec(&mut r, d).iter().map(|v| 3.0 * v).collect();
        let b = BaselineSpec::new(BaselineTag::Zero, Matrix::row_vector(&gaussian_vec(&mut r, d)), vec![1.0]).unwrap();
        let coarse = completeness_check(&model, &x, &b, &IgConfig::with_steps(8)).unwrap().residual;
        let fine = completeness_check(&model, &x, &b, &IgConfig::with_steps(16)).unwrap().residual;
        if fine <= coarse {
            ok += 1;
        }
    }
    assert!(ok >= 90, "{ok} of 100 cases refined");
}

#[test]
fn single_vector_distribution_equals_plain_ig() {
    let model = random_trained_model(7);
    let d = model.input_dim();
    let x = gaussian_vec(&mut rng(8), d);
    let xp = gaussian_vec(&mut rng(9), d);
    let cfg = IgConfig::with_steps(40);
    let plain = integrated_gradients(&model, &x, &xp, &cfg).unwrap();
    let avg = averaged_ig(&model, &x, &spec(Matrix::row_vector(&xp), vec![1.0]), &cfg).unwrap();
    assert_eq!(plain.phi, avg.phi);
}

#[test]
fn two_equal_weights_give_the_mean() {
    let model = random_trained_model(10);
    let d = model.input_dim();
    let x = gaussian_vec(&mut rng(11), d);
    let vs = gaussian_rows(12, 2, d);
    let cfg = IgConfig::with_steps(40);
    let a = integrated_gradients(&model, &x, vs.row(0), &cfg).unwrap();
    let b = integrated_gradients(&model, &x, vs.row(1), &cfg).unwrap();
    let m = averaged_ig(&model, &x, &spec(vs, vec![0.5, 0.5]), &cfg).unwrap();
    for i in 0..d {
        assert!((m.phi[i] - 0.5 * (a.phi[i] + b.phi[i])).abs() <= 1e-15);
    }
}

#[test]
fn point_mass_weighting_selects_one_vector() {
    let model = random_trained_model(13);
    let d = model.input_dim();
    let x = gaussian_vec(&mut rng(14), d);
    let vs = gaussian_rows(15, 4, d);
    let cfg = IgConfig::with_steps(40);
    let first = integrated_gradients(&model, &x, vs.row(0), &cfg).unwrap();
    let b = BaselineSpec::new(BaselineTag::BackgroundWeighted, vs, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    assert_eq!(averaged_ig(&model, &x, &b, &cfg).unwrap().phi, first.phi);
}

#[test]
fn probabilities_must_sum_to_one() {
    let err = BaselineSpec::new(BaselineTag::BackgroundUniform, gaussian_rows(1, 2, 3), vec![0.5, 0.4]).unwrap_err();
    assert!(matches!(err, Error::Baseline(_)));
}

#[test]
fn zero_baseline_is_blind_to_a_zero_feature() {
    let toy = ZeroBlindnessToy::new();
    let cfg = IgConfig::default();
    let zero = averaged_ig(&toy.model, &toy.input, &toy.zero_baseline(), &cfg).unwrap();
    let bg = averaged_ig(&toy.model, &toy.input, &toy.background, &cfg).unwrap();
    assert_eq!(zero.phi[BLIND_FEATURE], 0.0);
    assert!(bg.phi[BLIND_FEATURE].abs() > 0.0);
    // the model does use the feature
    let g = toy.model.input_gradient(&toy.input).unwrap();
    assert!(g[BLIND_FEATURE] != 0.0);
}

#[test]
fn duplicated_inputs_leave_the_report_unchanged() {
    let model = random_trained_model(20);
    let d = model.input_dim();
    let xs = gaussian_rows(21, 6, d);
    let mut doubled = Vec::new();
    for r in xs.row_iter() {
        doubled.push(r.to_vec());
    }
    for r in xs.row_iter() {
        doubled.push(r.to_vec());
    }
    let names: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
    let b = spec(gaussian_rows(22, 3, d), vec![0.2, 0.3, 0.5]);
    let cfg = IgConfig::with_steps(30);
    let one = class_attribution(&model, &xs, &names, &b, &cfg, Execution::Sequential).unwrap();
    let two = class_attribution(&model, &Matrix::from_rows(&doubled).unwrap(), &names, &b, &cfg, Execution::Sequential).unwrap();
    assert_eq!(one.ranking, two.ranking);
    for i in 0..d {
        let (a, b) = (one.scores[i], two.scores[i]);
        assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()), "{a} vs {b}");
    }
}

#[test]
fn execution_policy_does_not_change_reports() {
    let model = random_trained_model(30);
    let d = model.input_dim();
    let xs = gaussian_rows(31, 17, d);
    let names: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
    let b = spec(gaussian_rows(32, 5, d), vec![0.2; 5]);
    let cfg = IgConfig::with_steps(20);
    let s = class_attribution(&model, &xs, &names, &b, &cfg, Execution::Sequential).unwrap();
    let p = class_attribution(&model, &xs, &names, &b, &cfg, Execution::Parallel).unwrap();
    assert_eq!(s.to_json(), p.to_json());
}

fn symmetric_model(seed: u64, i: usize, j: usize) -> MlpClassifier {
    let mut model = random_trained_model(seed);
    let w = &mut model.hidden_blocks_mut()[0].linear.weights;
    for r in 0..w.rows() {
        let v = w.get(r, i);
        w.set(r, j, v);
    }
    model
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn mixture_linearity(seed in 0u64..10_000, lambda in 0.0f64..1.0) {
        let model = random_trained_model(seed);
        let d = model.input_dim();
        let m = 4;
        let vs = gaussian_rows(seed + 1, m, d);
        let x = gaussian_vec(&mut rng(seed + 2), d);
        let mut r = rng(seed + 3);
        let norm = |v: Vec<f64>| { let s: f64 = v.iter().sum(); v.into_iter().map(|a| a / s).collect::<Vec<_>>() };
        let p = norm((0..m).map(|_| r.random_range(0.05..1.0)).collect());
        let q = norm((0..m).map(|_| r.random_range(0.05..1.0)).collect());
        let mix: Vec<f64> = p.iter().zip(&q).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let cfg = IgConfig::with_steps(20);
        let fp = averaged_ig(&model, &x, &spec(vs.clone(), p), &cfg).unwrap();
        let fq = averaged_ig(&model, &x, &spec(vs.clone(), q), &cfg).unwrap();
        let fm = averaged_ig(&model, &x, &spec(vs, mix), &cfg).unwrap();
        for i in 0..d {
            prop_assert!((fm.phi[i] - (lambda * fp.phi[i] + (1.0 - lambda) * fq.phi[i])).abs() <= 1e-12);
        }
    }

    #[test]
    fn null_feature_gets_exactly_zero(seed in 0u64..10_000, rule_mid in any::<bool>()) {
        let model = random_trained_model(seed);
        let d = model.input_dim();
        let i = (seed as usize) % d;
        let x = gaussian_vec(&mut rng(seed + 1), d);
        let mut vs = gaussian_rows(seed + 2, 3, d);
        for r in 0..3 {
            vs.set(r, i, x[i]);
        }
        let rule = if rule_mid { QuadratureRule::Midpoint } else { QuadratureRule::Trapezoid };
        let cfg = IgConfig { rule, ..IgConfig::with_steps(25) };
        let v = averaged_ig(&model, &x, &spec(vs, vec![0.2, 0.3, 0.5]), &cfg).unwrap();
        prop_assert_eq!(v.phi[i], 0.0);
    }

    #[test]
    fn swapped_symmetric_features_share_attribution(seed in 0u64..10_000) {
        let model = symmetric_model(seed, 0, 1);
        let d = model.input_dim();
        let mut x = gaussian_vec(&mut rng(seed + 1), d);
        let mut xp = gaussian_vec(&mut rng(seed + 2), d);
        x[1] = x[0];
        xp[1] = xp[0];
        let v = integrated_gradients(&model, &x, &xp, &IgConfig::with_steps(30)).unwrap();
        prop_assert!((v.phi[0] - v.phi[1]).abs() <= 1e-10);
    }
}
