use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::baseline::{BaselineSpec, BaselineTag};
use super::ig::{averaged_ig, AttributionTarget, IgConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::parallel::Execution;

/// Class-level attribution: the signed mean of per-input attributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub baseline_tag: BaselineTag,
    pub feature_names: Vec<String>,
    pub scores: Vec<f64>,
    /// Feature indices by descending score; ties go to the lower index.
    pub ranking: Vec<usize>,
    pub n_inputs: usize,
    pub n_baselines: usize,
    pub baseline_prob_sum: f64,
    pub config: IgConfig,
    pub max_residual: f64,
    pub mean_residual: f64,
    /// Inputs whose completeness residual exceeded `config.completeness_tol`.
    pub n_flagged: usize,
}

/// Indices sorted by descending score, ties broken by index.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Averages [`averaged_ig`] over every row of `signal_inputs`.
///
/// Per-input attributions are independent, so `exec` may spread them over
/// threads; they are always summed in row order.
pub fn class_attribution<T: AttributionTarget + ?Sized>(
    target: &T,
    signal_inputs: &Matrix,
    feature_names: &[String],
    baseline: &BaselineSpec,
    cfg: &IgConfig,
    exec: Execution,
) -> Result<AttributionReport> {
    if signal_inputs.rows() == 0 {
        return Err(Error::Data("no signal inputs to attribute".into()));
    }
    if feature_names.len() != signal_inputs.cols() {
        return Err(Error::Shape(format!(
            "{} feature names for {} columns",
            feature_names.len(),
            signal_inputs.cols()
        )));
    }
    cfg.validate()?;
    baseline.validate()?;
    let per_input = exec.map(signal_inputs.rows(), |r| {
        averaged_ig(target, signal_inputs.row(r), baseline, cfg)
    });
    let d = signal_inputs.cols();
    let mut sum = vec![0.0; d];
    let mut max_residual: f64 = 0.0;
    let mut residual_sum = 0.0;
    let mut n_flagged = 0;
    for v in per_input {
        let v = v?;
        for (s, p) in sum.iter_mut().zip(&v.phi) {
            *s += p;
        }
        max_residual = max_residual.max(v.completeness_residual);
        residual_sum += v.completeness_residual;
        if v.completeness_residual > cfg.completeness_tol {
            n_flagged += 1;
        }
    }
    let n = signal_inputs.rows() as f64;
    let scores: Vec<f64> = sum.into_iter().map(|s| s / n).collect();
    Ok(AttributionReport {
        baseline_tag: baseline.tag,
        feature_names: feature_names.to_vec(),
        ranking: rank_descending(&scores),
        scores,
        n_inputs: signal_inputs.rows(),
        n_baselines: baseline.len(),
        baseline_prob_sum: baseline.probs.iter().sum(),
        config: *cfg,
        max_residual,
        mean_residual: residual_sum / n,
        n_flagged,
    })
}

impl AttributionReport {
    /// Names of the `k` best-ranked features.
    pub fn top_names(&self, k: usize) -> Vec<&str> {
        self.ranking
            .iter()
            .take(k)
            .map(|&i| self.feature_names[i].as_str())
            .collect()
    }

    /// `feature,score,rank` rows in rank order (rank starts at 1).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("feature,score,rank\n");
        for (r, &i) in self.ranking.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", self.feature_names[i], self.scores[i], r + 1));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn save(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        fs::write(csv_path, self.to_csv()).map_err(|e| Error::io(csv_path, e))?;
        fs::write(json_path, self.to_json()).map_err(|e| Error::io(json_path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        let r: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.feature_names.len();
        if self.scores.len() != d || self.ranking.len() != d {
            return Err(Error::Data("report vectors disagree in length".into()));
        }
        let mut seen = vec![false; d];
        for &i in &self.ranking {
            if i >= d || seen[i] {
                return Err(Error::Data("ranking is not a permutation".into()));
            }
            seen[i] = true;
        }
        Ok(())
    }
}
