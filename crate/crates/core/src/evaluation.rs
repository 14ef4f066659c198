//! Judging a feature ranking by retraining on its top-k features.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attribution::{AttributionReport, BaselineSpec, BaselineTag};
use crate::data::{EventDataset, Standardizer};
use crate::error::{Error, Result};
use crate::nn::{accuracy, train, Architecture, MlpClassifier, TrainConfig};
use crate::parallel::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SignificanceFormula {
    /// `S / sqrt(S + B)`
    #[default]
    #[serde(rename = "S/sqrt(S+B)")]
    SimpleZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignificanceConfig {
    /// Multiplies the summed event weights (pb) to give expected counts.
    pub luminosity_scale: f64,
    pub threshold: f64,
    pub formula: SignificanceFormula,
}

impl Default for SignificanceConfig {
    fn default() -> Self {
        Self {
            luminosity_scale: 1000.0,
            threshold: 0.5,
            formula: SignificanceFormula::SimpleZ,
        }
    }
}

impl SignificanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.luminosity_scale > 0.0 && self.luminosity_scale.is_finite()) {
            return Err(Error::Config("eval.luminosity_scale must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config("eval.threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Weighted discovery significance of the events selected at `cfg.threshold`.
///
/// `S` and `B` are the luminosity-scaled weight sums of selected signal and
/// background rows; returns 0 when nothing is selected.
pub fn z_score(predictions: &[f64], labels: &[u8], weights: &[f64], cfg: &SignificanceConfig) -> f64 {
    let (mut s, mut b) = (0.0, 0.0);
    for ((&p, &y), &w) in predictions.iter().zip(labels).zip(weights) {
        if p >= cfg.threshold {
            if y == 1 {
                s += w;
            } else {
                b += w;
            }
        }
    }
    significance(cfg.luminosity_scale * s, cfg.luminosity_scale * b, cfg.formula)
}

pub fn significance(s: f64, b: f64, formula: SignificanceFormula) -> f64 {
    match formula {
        SignificanceFormula::SimpleZ => {
            if s + b <= 0.0 {
                0.0
            } else {
                s / (s + b).sqrt()
            }
        }
    }
}

/// The first `k` entries of the report's ranking.
pub fn select_top_k(report: &AttributionReport, k: usize) -> Result<Vec<usize>> {
    let d = report.ranking.len();
    if k == 0 || k > d {
        return Err(Error::Argument(format!("k = {k} outside 1..={d}")));
    }
    Ok(report.ranking[..k].to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKResult {
    pub k: usize,
    pub baseline_tag: BaselineTag,
    /// Selected feature names in rank order.
    pub selected: Vec<String>,
    pub accuracy: f64,
    pub z_score: f64,
    pub seed: u64,
}

/// Raw (unstandardized) full-schema splits plus the training recipe shared by
/// every retrain.
#[derive(Debug, Clone)]
pub struct RetrainSetup<'a> {
    pub train: &'a EventDataset,
    pub val: &'a EventDataset,
    pub test: &'a EventDataset,
    pub train_cfg: TrainConfig,
    pub hidden_dim: usize,
    pub n_hidden: usize,
    pub significance: SignificanceConfig,
}

/// Outcome of training on one feature subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetScore {
    pub accuracy: f64,
    pub z_score: f64,
    pub seed: u64,
}

/// Seed for a retrain, a function of the base seed and the feature *set*.
pub fn subset_seed(base_seed: u64, features: &[usize]) -> u64 {
    let mut sorted = features.to_vec();
    sorted.sort_unstable();
    let mut h = splitmix64(base_seed ^ 0x6a09_e667_f3bc_c908);
    for f in sorted {
        h = splitmix64(h ^ (f as u64 + 1));
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Trains a fresh model (fresh standardizer too) on the given columns and
/// scores it on the test split. Columns are used in ascending index order, so
/// the result depends only on the set.
pub fn retrain_subset(setup: &RetrainSetup<'_>, features: &[usize]) -> Result<SubsetScore> {
    let d = setup.train.n_features();
    if features.is_empty() || features.iter().any(|&f| f >= d) {
        return Err(Error::Argument(format!("feature subset {features:?} invalid for {d} features")));
    }
    setup.significance.validate()?;
    let mut cols = features.to_vec();
    cols.sort_unstable();
    cols.dedup();
    let seed = subset_seed(setup.train_cfg.seed, &cols);

    let train_raw = setup.train.select_features(&cols);
    let st = Standardizer::fit(&train_raw)?;
    let train_set = st.apply(&train_raw)?;
    let val_set = st.apply(&setup.val.select_features(&cols))?;
    let test_set = st.apply(&setup.test.select_features(&cols))?;

    let arch = Architecture::new(cols.len())
        .with_hidden(setup.hidden_dim, setup.n_hidden)
        .with_dropout(setup.train_cfg.dropout_p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = MlpClassifier::new(arch, &mut rng)?;
    let cfg = TrainConfig {
        seed,
        ..setup.train_cfg.clone()
    };
    let (model, _) = train(model, &train_set, &val_set, &cfg)?;
    let probs = model.predict_proba(&test_set.features)?;
    Ok(SubsetScore {
        accuracy: accuracy(&probs, &test_set.labels, setup.significance.threshold),
        z_score: z_score(&probs, &test_set.labels, &test_set.weights, &setup.significance),
        seed,
    })
}

pub fn retrain_topk(setup: &RetrainSetup<'_>, report: &AttributionReport, k: usize) -> Result<TopKResult> {
    check_report(setup, report)?;
    let sel = select_top_k(report, k)?;
    let score = retrain_subset(setup, &sel)?;
    Ok(topk_result(report, k, &sel, score))
}

fn topk_result(report: &AttributionReport, k: usize, sel: &[usize], s: SubsetScore) -> TopKResult {
    TopKResult {
        k,
        baseline_tag: report.baseline_tag,
        selected: sel.iter().map(|&i| report.feature_names[i].clone()).collect(),
        accuracy: s.accuracy,
        z_score: s.z_score,
        seed: s.seed,
    }
}

fn check_report(setup: &RetrainSetup<'_>, report: &AttributionReport) -> Result<()> {
    if report.feature_names != setup.train.feature_names() {
        return Err(Error::Data(format!(
            "{} report features do not match the dataset schema",
            report.baseline_tag
        )));
    }
    Ok(())
}

/// Top-k results for every report and every `k`, ordered by report then `k`.
///
/// Identical feature sets (common across baselines) are trained once; distinct
/// sets are independent and run under `exec`, inside a `jobs`-thread pool when
/// `jobs > 0`. Output does not depend on `exec` or `jobs`.
pub fn topk_curves(
    setup: &RetrainSetup<'_>,
    reports: &[AttributionReport],
    ks: &[usize],
    exec: Execution,
    jobs: usize,
) -> Result<Vec<TopKResult>> {
    let mut wanted: BTreeMap<Vec<usize>, Option<SubsetScore>> = BTreeMap::new();
    let mut plan = Vec::new();
    for report in reports {
        check_report(setup, report)?;
        for &k in ks {
            let sel = select_top_k(report, k)?;
            let mut key = sel.clone();
            key.sort_unstable();
            wanted.insert(key.clone(), None);
            plan.push((report, k, sel, key));
        }
    }
    let keys: Vec<Vec<usize>> = wanted.keys().cloned().collect();
    log::info!(
        "top-k curves: {} points, {} distinct feature sets to train",
        plan.len(),
        keys.len()
    );
    let scores = exec.with_jobs(jobs, || exec.map(keys.len(), |i| retrain_subset(setup, &keys[i])));
    for (key, s) in keys.into_iter().zip(scores) {
        wanted.insert(key, Some(s?));
    }
    Ok(plan
        .into_iter()
        .map(|(report, k, sel, key)| {
            let s = wanted[&key].expect("every set trained");
            topk_result(report, k, &sel, s)
        })
        .collect())
}

pub const CURVES_HEADER: &str = "baseline,k,accuracy,z_score,seed";

pub fn curves_to_csv(results: &[TopKResult]) -> String {
    let mut s = String::from(CURVES_HEADER);
    s.push('\n');
    for r in results {
        let _ = writeln!(s, "{},{},{},{},{}", r.baseline_tag, r.k, r.accuracy, r.z_score, r.seed);
    }
    s
}

pub fn save_curves(results: &[TopKResult], path: &Path) -> Result<()> {
    fs::write(path, curves_to_csv(results)).map_err(|e| Error::io(path, e))
}

/// Accuracy lost when one column is replaced by the baseline's
/// probability-weighted mean at that coordinate. `test` must be standardized.
pub fn ablation_probe(
    model: &MlpClassifier,
    test: &EventDataset,
    feature: usize,
    neutral: &BaselineSpec,
) -> Result<f64> {
    if feature >= test.n_features() {
        return Err(Error::Argument(format!(
            "feature index {feature} out of range for {} features",
            test.n_features()
        )));
    }
    neutral.validate()?;
    if neutral.dim() != test.n_features() {
        return Err(Error::Shape("baseline width differs from the test set".into()));
    }
    let fill = neutral.mean_vector()[feature];
    let base = accuracy(&model.predict_proba(&test.features)?, &test.labels, 0.5);
    let mut ablated = test.features.clone();
    for r in 0..ablated.rows() {
        ablated.set(r, feature, fill);
    }
    let after = accuracy(&model.predict_proba(&ablated)?, &test.labels, 0.5);
    Ok(base - after)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::{rank_descending, IgConfig};
    use crate::data::FeatureSchema;
    use crate::matrix::Matrix;

    fn report(scores: &[f64]) -> AttributionReport {
        AttributionReport {
            baseline_tag: BaselineTag::BackgroundUniform,
            feature_names: (0..scores.len()).map(|i| format!("f{i}")).collect(),
            scores: scores.to_vec(),
            ranking: rank_descending(scores),
            n_inputs: 1,
            n_baselines: 1,
            baseline_prob_sum: 1.0,
            config: IgConfig::default(),
            max_residual: 0.0,
            mean_residual: 0.0,
            n_flagged: 0,
        }
    }

    #[test]
    fn z_examples() {
        let cfg = SignificanceConfig {
            luminosity_scale: 1.0,
            ..Default::default()
        };
        assert_eq!(z_score(&[0.1, 0.2], &[1, 0], &[5.0, 5.0], &cfg), 0.0);
        assert_eq!(z_score(&[0.9], &[1], &[100.0], &cfg), 10.0);
        let z = z_score(&[0.9, 0.6], &[1, 0], &[50.0, 200.0], &cfg);
        assert!((z - 50.0 / 250f64.sqrt()).abs() < 1e-12);
        assert!((z - 3.1623).abs() < 1e-4);
    }

    #[test]
    fn z_grows_with_signal() {
        let mut prev = 0.0;
        for s in 1..100 {
            let z = significance(s as f64, 40.0, SignificanceFormula::SimpleZ);
            assert!(z > prev);
            prev = z;
        }
    }

    #[test]
    fn top_k_prefix_and_range() {
        let r = report(&[0.1, 0.5, -0.2, 0.3]);
        assert_eq!(select_top_k(&r, 4).unwrap(), vec![1, 3, 0, 2]);
        for k in 1..4 {
            let a = select_top_k(&r, k).unwrap();
            let b = select_top_k(&r, k + 1).unwrap();
            assert_eq!(a[..], b[..k]);
        }
        assert!(matches!(select_top_k(&r, 0), Err(Error::Argument(_))));
        assert!(select_top_k(&r, 5).is_err());
    }

    #[test]
    fn subset_seed_ignores_order() {
        assert_eq!(subset_seed(7, &[3, 1, 2]), subset_seed(7, &[1, 2, 3]));
        assert_ne!(subset_seed(7, &[1, 2]), subset_seed(7, &[1, 3]));
        assert_ne!(subset_seed(7, &[1, 2]), subset_seed(8, &[1, 2]));
    }

    #[test]
    fn ablation_of_ignored_or_unchanged_column_is_zero() {
        // model uses only feature 0
        let model = MlpClassifier::logistic(&[3.0, 0.0], 0.0);
        let schema = FeatureSchema::from_names(&["a", "b"]).unwrap();
        let x = Matrix::from_rows(&[[1.0, 0.7], [-1.0, 0.7], [0.5, 0.7], [-2.0, 0.7]]).unwrap();
        let ds = EventDataset::new(x, vec![1, 0, 0, 0], vec![0; 4], vec![1.0; 4], schema).unwrap();
        let neutral = BaselineSpec::new(
            BaselineTag::BackgroundUniform,
            Matrix::from_rows(&[[0.0, 0.7], [0.0, 0.7]]).unwrap(),
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(ablation_probe(&model, &ds, 1, &neutral).unwrap(), 0.0);
        let far = BaselineSpec::new(
            BaselineTag::BackgroundUniform,
            Matrix::from_rows(&[[0.0, 50.0]]).unwrap(),
            vec![1.0],
        )
        .unwrap();
        assert_eq!(ablation_probe(&model, &ds, 1, &far).unwrap(), 0.0);
        assert!(ablation_probe(&model, &ds, 0, &far).unwrap() > 0.0);
        assert!(matches!(ablation_probe(&model, &ds, 2, &far), Err(Error::Argument(_))));
    }

    #[test]
    fn curves_csv_layout() {
        let r = TopKResult {
            k: 3,
            baseline_tag: BaselineTag::Zero,
            selected: vec![],
            accuracy: 0.5,
            z_score: 1.25,
            seed: 9,
        };
        assert_eq!(curves_to_csv(&[r]), "baseline,k,accuracy,z_score,seed\nB0,3,0.5,1.25,9\n");
    }
}
