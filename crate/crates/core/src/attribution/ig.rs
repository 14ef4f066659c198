use serde::{Deserialize, Serialize};

use super::baseline::{BaselineSpec, BaselineTag};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::MlpClassifier;

/// A scalar function of the input that can report its gradient.
pub trait AttributionTarget: Sync {
    fn input_dim(&self) -> usize;

    /// `f` and `∇f` at every row of `points`.
    fn value_and_gradient(&self, points: &Matrix) -> Result<(Vec<f64>, Matrix)>;
}

/// The classifier's signal probability `sigmoid(logit)`; requires eval mode.
impl AttributionTarget for MlpClassifier {
    fn input_dim(&self) -> usize {
        MlpClassifier::input_dim(self)
    }

    fn value_and_gradient(&self, points: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        self.input_gradient_batch(points)
    }
}

/// `f(x) = c·x + b`, with no squashing.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFunction {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl AttributionTarget for AffineFunction {
    fn input_dim(&self) -> usize {
        self.coef.len()
    }

    fn value_and_gradient(&self, points: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        if points.cols() != self.coef.len() {
            return Err(Error::Shape(format!(
                "{} columns for an affine function of {} inputs",
                points.cols(),
                self.coef.len()
            )));
        }
        let values = points
            .row_iter()
            .map(|r| crate::matrix::dot(r, &self.coef) + self.intercept)
            .collect();
        let mut grads = Matrix::zeros(points.rows(), self.coef.len());
        for r in 0..points.rows() {
            grads.row_mut(r).copy_from_slice(&self.coef);
        }
        Ok((values, grads))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadratureRule {
    /// Midpoint Riemann sum over `steps` equal intervals.
    Midpoint,
    /// Trapezoid rule over `steps` equal intervals (`steps + 1` nodes).
    #[default]
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IgConfig {
    pub steps: usize,
    pub rule: QuadratureRule,
    /// Absolute tolerance on the completeness residual, probability scale.
    pub completeness_tol: f64,
}

impl Default for IgConfig {
    fn default() -> Self {
        Self {
            steps: 300,
            rule: QuadratureRule::Trapezoid,
            completeness_tol: 1e-2,
        }
    }
}

impl IgConfig {
    pub fn with_steps(steps: usize) -> Self {
        Self {
            steps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::Config(format!(
                "ig.steps must be >= 2, got {}",
                self.steps
            )));
        }
        if !(self.completeness_tol > 0.0) {
            return Err(Error::Config("ig.completeness_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Nodes in `[0, 1]` and weights summing to 1 for the configured rule.
pub fn quadrature(steps: usize, rule: QuadratureRule) -> (Vec<f64>, Vec<f64>) {
    let h = 1.0 / steps as f64;
    match rule {
        QuadratureRule::Midpoint => (
            (0..steps).map(|k| (k as f64 + 0.5) * h).collect(),
            vec![h; steps],
        ),
        QuadratureRule::Trapezoid => {
            let nodes = (0..=steps).map(|k| k as f64 * h).collect();
            let mut w = vec![h; steps + 1];
            w[0] = 0.5 * h;
            w[steps] = 0.5 * h;
            (nodes, w)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionVector {
    pub phi: Vec<f64>,
    /// `|Σφ − (f(x) − E[f(x')])|`
    pub completeness_residual: f64,
    pub f_input: f64,
    /// `f(x')`, or its probability-weighted mean for averaged baselines.
    pub f_baseline: f64,
    pub baseline_tag: Option<BaselineTag>,
    pub input_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletenessReport {
    pub sum_phi: f64,
    pub f_input: f64,
    pub f_baseline_mean: f64,
    pub residual: f64,
    pub flagged: bool,
}

/// Rows per gradient batch when several paths are stacked together.
const MAX_BATCH_ROWS: usize = 4096;

/// Per-baseline path results: `(phi, f(x'))`, plus `f(x)`.
fn path_attributions<T: AttributionTarget + ?Sized>(
    target: &T,
    x: &[f64],
    baselines: &Matrix,
    cfg: &IgConfig,
) -> Result<(Vec<(Vec<f64>, f64)>, f64)> {
    cfg.validate()?;
    let d = target.input_dim();
    if x.len() != d || baselines.cols() != d {
        return Err(Error::Shape(format!(
            "input of length {} and baselines of width {} for a {d}-input target",
            x.len(),
            baselines.cols()
        )));
    }
    if x.iter().chain(baselines.as_slice()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite input or baseline".into()));
    }
    let (nodes, weights) = quadrature(cfg.steps, cfg.rule);
    // each path: its nodes, then the baseline itself
    let per_path = nodes.len() + 1;
    let paths_per_batch = (MAX_BATCH_ROWS / per_path).max(1);

    let mut f_input = None;
    let mut out = Vec::with_capacity(baselines.rows());
    let mut start = 0;
    while start < baselines.rows() {
        let end = (start + paths_per_batch).min(baselines.rows());
        let n_paths = end - start;
        let mut pts = Matrix::zeros(n_paths * per_path + 1, d);
        for (p, b) in (start..end).enumerate() {
            let base = baselines.row(b);
            for (j, &a) in nodes.iter().enumerate() {
                let row = pts.row_mut(p * per_path + j);
                for i in 0..d {
                    row[i] = base[i] + a * (x[i] - base[i]);
                }
            }
            pts.row_mut(p * per_path + nodes.len()).copy_from_slice(base);
        }
        pts.row_mut(n_paths * per_path).copy_from_slice(x);

        let (values, grads) = target.value_and_gradient(&pts)?;
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite model output at batch row {bad}")));
        }
        f_input.get_or_insert(values[n_paths * per_path]);

        for p in 0..n_paths {
            let b = start + p;
            let base = baselines.row(b);
            let mut avg = vec![0.0; d];
            for (j, (&w, &a)) in weights.iter().zip(&nodes).enumerate() {
                let g = grads.row(p * per_path + j);
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric(format!(
                        "non-finite gradient at alpha = {a} on baseline {b}"
                    )));
                }
                for (s, gi) in avg.iter_mut().zip(g) {
                    *s += w * gi;
                }
            }
            let phi = avg
                .iter()
                .zip(x)
                .zip(base)
                .map(|((g, xi), bi)| (xi - bi) * g)
                .collect();
            out.push((phi, values[p * per_path + nodes.len()]));
        }
        start = end;
    }
    let f_input = match f_input {
        Some(v) => v,
        None => target.value_and_gradient(&Matrix::row_vector(x))?.0[0],
    };
    Ok((out, f_input))
}

/// `φ_i = (x_i − x'_i) · ∫₀¹ ∂f/∂x_i (x' + α(x − x')) dα`, by quadrature.
pub fn integrated_gradients<T: AttributionTarget + ?Sized>(
    target: &T,
    x: &[f64],
    x_prime: &[f64],
    cfg: &IgConfig,
) -> Result<AttributionVector> {
    let (mut paths, f_input) = path_attributions(target, x, &Matrix::row_vector(x_prime), cfg)?;
    let (phi, f_baseline) = paths.pop().expect("one path");
    let sum: f64 = phi.iter().sum();
    Ok(AttributionVector {
        completeness_residual: (sum - (f_input - f_baseline)).abs(),
        phi,
        f_input,
        f_baseline,
        baseline_tag: None,
        input_id: None,
    })
}

/// Probability-weighted mean of single-baseline IG over the baseline's vectors.
pub fn averaged_ig<T: AttributionTarget + ?Sized>(
    target: &T,
    x: &[f64],
    baseline: &BaselineSpec,
    cfg: &IgConfig,
) -> Result<AttributionVector> {
    baseline.validate()?;
    let (paths, f_input) = path_attributions(target, x, &baseline.vectors, cfg)?;
    let mut phi = vec![0.0; x.len()];
    let mut f_baseline = 0.0;
    for ((p_phi, f_b), &w) in paths.iter().zip(&baseline.probs) {
        for (a, b) in phi.iter_mut().zip(p_phi) {
            *a += w * b;
        }
        f_baseline += w * f_b;
    }
    let sum: f64 = phi.iter().sum();
    Ok(AttributionVector {
        completeness_residual: (sum - (f_input - f_baseline)).abs(),
        phi,
        f_input,
        f_baseline,
        baseline_tag: Some(baseline.tag),
        input_id: None,
    })
}

pub fn completeness_check<T: AttributionTarget + ?Sized>(
    target: &T,
    x: &[f64],
    baseline: &BaselineSpec,
    cfg: &IgConfig,
) -> Result<CompletenessReport> {
    let v = averaged_ig(target, x, baseline, cfg)?;
    Ok(CompletenessReport {
        sum_phi: v.phi.iter().sum(),
        f_input: v.f_input,
        f_baseline_mean: v.f_baseline,
        residual: v.completeness_residual,
        flagged: v.completeness_residual > cfg.completeness_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_weights_sum_to_one() {
        for rule in [QuadratureRule::Midpoint, QuadratureRule::Trapezoid] {
            for steps in [2, 3, 50, 301] {
                let (n, w) = quadrature(steps, rule);
                assert_eq!(n.len(), w.len());
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(n.iter().all(|a| (0.0..=1.0).contains(a)));
            }
        }
    }

    #[test]
    fn identical_input_and_baseline_give_zero() {
        let f = AffineFunction {
            coef: vec![1.0, -2.0],
            intercept: 0.5,
        };
        let v = integrated_gradients(&f, &[0.3, 0.7], &[0.3, 0.7], &IgConfig::default()).unwrap();
        assert_eq!(v.phi, vec![0.0, 0.0]);
        assert_eq!(v.completeness_residual, 0.0);
    }

    #[test]
    fn affine_closed_form_at_two_steps() {
        let c = [0.7, -1.3, 2.5];
        let f = AffineFunction {
            coef: c.to_vec(),
            intercept: -0.2,
        };
        let x = [1.0, 2.0, -0.5];
        let b = [0.25, -1.0, 3.0];
        for rule in [QuadratureRule::Trapezoid, QuadratureRule::Midpoint] {
            let cfg = IgConfig {
                steps: 2,
                rule,
                ..Default::default()
            };
            let v = integrated_gradients(&f, &x, &b, &cfg).unwrap();
            for i in 0..3 {
                assert!((v.phi[i] - c[i] * (x[i] - b[i])).abs() < 1e-12);
            }
            assert!(v.completeness_residual < 1e-12);
        }
    }

    #[test]
    fn steps_below_two_rejected() {
        let f = AffineFunction {
            coef: vec![1.0],
            intercept: 0.0,
        };
        assert!(integrated_gradients(&f, &[1.0], &[0.0], &IgConfig::with_steps(1)).is_err());
    }

    struct NanAtMiddle;
    impl AttributionTarget for NanAtMiddle {
        fn input_dim(&self) -> usize {
            1
        }
        fn value_and_gradient(&self, points: &Matrix) -> Result<(Vec<f64>, Matrix)> {
            let mut g = Matrix::zeros(points.rows(), 1);
            for r in 0..points.rows() {
                let x = points.get(r, 0);
                g.set(r, 0, if (x - 0.5).abs() < 1e-12 { f64::NAN } else { 1.0 });
            }
            Ok((points.column(0), g))
        }
    }

    #[test]
    fn non_finite_gradient_names_alpha() {
        let err = integrated_gradients(&NanAtMiddle, &[1.0], &[0.0], &IgConfig::with_steps(4)).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert!(err.to_string().contains("alpha = 0.5"), "{err}");
    }
}
