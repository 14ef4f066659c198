use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EventDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-feature affine map `(x - mean) / std`, fit on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn new(feature_names: Vec<String>, mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if feature_names.len() != mean.len() || mean.len() != std.len() {
            return Err(Error::Shape(format!(
                "{} names, {} means, {} stds",
                feature_names.len(),
                mean.len(),
                std.len()
            )));
        }
        for ((n, m), s) in feature_names.iter().zip(&mean).zip(&std) {
            if !m.is_finite() || !(*s > 0.0 && s.is_finite()) {
                return Err(Error::Data(format!("invalid scaling for feature {n}")));
            }
        }
        Ok(Self {
            feature_names,
            mean,
            std,
        })
    }

    /// Column means and population standard deviations of the training features.
    pub fn fit(train: &EventDataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Data("cannot fit a standardizer on an empty set".into()));
        }
        let n = train.len() as f64;
        let d = train.n_features();
        let mut mean = vec![0.0; d];
        for row in train.features.row_iter() {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in train.features.row_iter() {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let names = train.feature_names();
        let mut std = Vec::with_capacity(d);
        for (j, v) in var.iter().enumerate() {
            let s = (v / n).sqrt();
            if !(s > 1e-12 * mean[j].abs().max(1.0)) {
                return Err(Error::Data(format!("zero variance: {}", names[j])));
            }
            std.push(s);
        }
        Self::new(names, mean, std)
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    pub fn transform_matrix(&self, m: &Matrix) -> Result<Matrix> {
        self.check_cols(m.cols())?;
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((x, mu), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - mu) / s;
            }
        }
        Ok(out)
    }

    pub fn inverse_matrix(&self, m: &Matrix) -> Result<Matrix> {
        self.check_cols(m.cols())?;
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((x, mu), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *x = *x * s + mu;
            }
        }
        Ok(out)
    }

    /// Applies the map to a dataset whose schema matches the fitted features.
    pub fn apply(&self, ds: &EventDataset) -> Result<EventDataset> {
        if ds.feature_names() != self.feature_names {
            return Err(Error::Data(
                "dataset features do not match the standardizer".into(),
            ));
        }
        let mut out = ds.clone();
        out.features = self.transform_matrix(&ds.features)?;
        Ok(out)
    }

    fn check_cols(&self, cols: usize) -> Result<()> {
        if cols != self.len() {
            return Err(Error::Shape(format!(
                "matrix has {cols} columns, standardizer has {}",
                self.len()
            )));
        }
        Ok(())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("standardizer serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        let s: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::new(s.feature_names, s.mean, s.std)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{default_processes, default_schema, generate, split, FeatureSchema, SplitFractions};

    #[test]
    fn training_split_is_centered_and_scaled() {
        let ds = generate(&default_processes(), &default_schema(), 2000, 8).unwrap();
        let (train, val, _) = split(&ds, SplitFractions::default(), 2).unwrap();
        let st = Standardizer::fit(&train).unwrap();
        let t = st.apply(&train).unwrap();
        let n = t.len() as f64;
        for c in 0..t.n_features() {
            let col = t.features.column(c);
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() < 1e-10);
            assert!((sd - 1.0).abs() < 1e-10);
        }
        // validation data is transformed with training parameters only
        let v = st.apply(&val).unwrap();
        let vmean = v.features.column(0).iter().sum::<f64>() / v.len() as f64;
        assert!(vmean != 0.0);
    }

    #[test]
    fn inverse_recovers_original() {
        let ds = generate(&default_processes(), &default_schema(), 300, 8).unwrap();
        let st = Standardizer::fit(&ds).unwrap();
        let back = st.inverse_matrix(&st.transform_matrix(&ds.features).unwrap()).unwrap();
        for (a, b) in back.as_slice().iter().zip(ds.features.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn constant_column_names_the_feature() {
        let schema = FeatureSchema::from_names(&["a", "flat"]).unwrap();
        let m = Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]).unwrap();
        let ds = EventDataset::new(m, vec![0, 1, 0], vec![0; 3], vec![1.0; 3], schema).unwrap();
        let err = Standardizer::fit(&ds).unwrap_err();
        assert!(err.to_string().contains("zero variance: flat"), "{err}");
    }
}
