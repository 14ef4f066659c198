//! Synthetic signal/background event data: schema, processes, generation,
//! stratified splitting, standardization and CSV persistence.

mod csv_io;
mod generate;
mod process;
mod schema;
mod split;
mod standardize;

pub use csv_io::{load_csv, save_csv, write_csv};
pub use generate::generate;
pub use process::{default_processes, sample_median, FeatureDist, Family, Label, ProcessSpec};
pub use schema::{default_schema, Bounds, FeatureCategory, FeatureDef, FeatureSchema};
pub use split::{split, SplitFractions};
pub use standardize::Standardizer;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Feature matrix plus per-row label, process id and cross-section weight.
#[derive(Debug, Clone, PartialEq)]
pub struct EventDataset {
    pub features: Matrix,
    /// 1 = signal, 0 = background.
    pub labels: Vec<u8>,
    /// Index into the process list the data was generated from.
    pub process_ids: Vec<u16>,
    pub weights: Vec<f64>,
    pub schema: FeatureSchema,
}

impl EventDataset {
    pub fn new(
        features: Matrix,
        labels: Vec<u8>,
        process_ids: Vec<u16>,
        weights: Vec<f64>,
        schema: FeatureSchema,
    ) -> Result<Self> {
        let ds = Self {
            features,
            labels,
            process_ids,
            weights,
            schema,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.features.rows();
        if self.labels.len() != n || self.process_ids.len() != n || self.weights.len() != n {
            return Err(Error::Shape(format!(
                "{n} feature rows but {} labels, {} process ids, {} weights",
                self.labels.len(),
                self.process_ids.len(),
                self.weights.len()
            )));
        }
        if self.features.cols() != self.schema.len() {
            return Err(Error::Shape(format!(
                "{} feature columns for a {}-feature schema",
                self.features.cols(),
                self.schema.len()
            )));
        }
        if let Some(i) = self.labels.iter().position(|&l| l > 1) {
            return Err(Error::Data(format!("row {i}: label must be 0 or 1")));
        }
        if let Some(i) = self.weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Data(format!("row {i}: weight must be positive")));
        }
        if !self.features.is_finite() {
            return Err(Error::Data("non-finite feature value".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.schema.names()
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            process_ids: rows.iter().map(|&i| self.process_ids[i]).collect(),
            weights: rows.iter().map(|&i| self.weights[i]).collect(),
            schema: self.schema.clone(),
        }
    }

    /// Keeps only the given columns, in the given order.
    pub fn select_features(&self, cols: &[usize]) -> Self {
        Self {
            features: self.features.select_columns(cols),
            labels: self.labels.clone(),
            process_ids: self.process_ids.clone(),
            weights: self.weights.clone(),
            schema: self.schema.project(cols),
        }
    }

    pub fn rows_with_label(&self, label: u8) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn signal(&self) -> Self {
        self.subset(&self.rows_with_label(1))
    }

    pub fn background(&self) -> Self {
        self.subset(&self.rows_with_label(0))
    }

    pub fn signal_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&l| l == 1).count() as f64 / self.len() as f64
    }
}
