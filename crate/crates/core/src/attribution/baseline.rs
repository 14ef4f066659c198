use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EventDataset, Label, ProcessSpec, Standardizer};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaselineTag {
    /// The all-zeros vector.
    #[serde(rename = "B0")]
    Zero,
    /// Background events, every process equally weighted.
    #[serde(rename = "Bbg")]
    BackgroundUniform,
    /// Background events weighted by process cross-section.
    #[serde(rename = "Bbgw")]
    BackgroundWeighted,
}

impl BaselineTag {
    pub const ALL: [BaselineTag; 3] = [
        BaselineTag::Zero,
        BaselineTag::BackgroundUniform,
        BaselineTag::BackgroundWeighted,
    ];

    /// Short label used in file names, reports and plot legends.
    pub fn label(self) -> &'static str {
        match self {
            BaselineTag::Zero => "B0",
            BaselineTag::BackgroundUniform => "Bbg",
            BaselineTag::BackgroundWeighted => "Bbgw",
        }
    }

    /// Command-line spelling.
    pub fn cli_name(self) -> &'static str {
        match self {
            BaselineTag::Zero => "zero",
            BaselineTag::BackgroundUniform => "bg-uniform",
            BaselineTag::BackgroundWeighted => "bg-weighted",
        }
    }
}

impl fmt::Display for BaselineTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BaselineTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineTag::ALL
            .into_iter()
            .find(|t| t.cli_name() == s || t.label() == s)
            .ok_or_else(|| Error::Argument(format!("unknown baseline {s:?}")))
    }
}

/// Coordinate system the zero baseline is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineSpace {
    /// Zero in standardized coordinates, i.e. the training mean.
    #[default]
    Std,
    /// Zero in raw physical units, mapped through the standardizer.
    Raw,
}

impl FromStr for BaselineSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "std" => Ok(BaselineSpace::Std),
            "raw" => Ok(BaselineSpace::Raw),
            _ => Err(Error::Argument(format!("unknown baseline space {s:?}"))),
        }
    }
}

/// A finite baseline distribution: vectors (standardized space) and their
/// probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSpec {
    pub tag: BaselineTag,
    pub vectors: Matrix,
    pub probs: Vec<f64>,
    /// Source process of each vector, empty for the zero baseline.
    pub process_ids: Vec<u16>,
}

const PROB_SUM_TOL: f64 = 1e-9;

impl BaselineSpec {
    pub fn new(tag: BaselineTag, vectors: Matrix, probs: Vec<f64>) -> Result<Self> {
        let spec = Self {
            tag,
            vectors,
            probs,
            process_ids: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            tag: BaselineTag::Zero,
            vectors: Matrix::zeros(1, dim),
            probs: vec![1.0],
            process_ids: Vec::new(),
        }
    }

    /// The raw-unit zero vector expressed in standardized coordinates.
    pub fn zero_raw(standardizer: &Standardizer) -> Self {
        let v = standardizer.transform_row(&vec![0.0; standardizer.len()]);
        Self {
            tag: BaselineTag::Zero,
            vectors: Matrix::row_vector(&v),
            probs: vec![1.0],
            process_ids: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.vectors.rows() == 0 {
            return Err(Error::Baseline("no baseline vectors".into()));
        }
        if self.probs.len() != self.vectors.rows() {
            return Err(Error::Baseline(format!(
                "{} probabilities for {} vectors",
                self.probs.len(),
                self.vectors.rows()
            )));
        }
        if self.probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::Baseline("probabilities must be non-negative".into()));
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::Baseline(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    /// `Σ_k p_k · vectors[k]`.
    pub fn mean_vector(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (row, p) in self.vectors.row_iter().zip(&self.probs) {
            for (a, b) in m.iter_mut().zip(row) {
                *a += p * b;
            }
        }
        m
    }
}

/// Builds a baseline distribution from (standardized) background events.
///
/// `Zero` ignores the data and returns the zero vector. The background tags
/// draw `per_process` rows without replacement from every background process
/// in `processes` (process ids index that slice). `BackgroundUniform` gives each
/// vector probability `1/m`; `BackgroundWeighted` gives a vector from process
/// `p` probability `σ_p / (per_process · Σσ)`.
pub fn build_baseline(
    tag: BaselineTag,
    background_set: &EventDataset,
    processes: &[ProcessSpec],
    per_process: usize,
    seed: u64,
) -> Result<BaselineSpec> {
    if tag == BaselineTag::Zero {
        return Ok(BaselineSpec::zero(background_set.n_features()));
    }
    if per_process == 0 {
        return Err(Error::Argument("per_process must be positive".into()));
    }
    let bkg: Vec<usize> = (0..processes.len())
        .filter(|&i| processes[i].label == Label::Background)
        .collect();
    if bkg.is_empty() {
        return Err(Error::Data("no background processes".into()));
    }
    let total_xs: f64 = bkg.iter().map(|&i| processes[i].cross_section).sum();
    let m = bkg.len() * per_process;

    let mut rows = Vec::with_capacity(m);
    let mut probs = Vec::with_capacity(m);
    let mut pids = Vec::with_capacity(m);
    for &pid in &bkg {
        let candidates: Vec<usize> = (0..background_set.len())
            .filter(|&r| background_set.labels[r] == 0 && background_set.process_ids[r] as usize == pid)
            .collect();
        if candidates.len() < per_process {
            return Err(Error::Data(format!(
                "process {} has {} background rows, {per_process} needed",
                processes[pid].name,
                candidates.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(pid as u64);
        let mut picked = rand::seq::index::sample(&mut rng, candidates.len(), per_process).into_vec();
        picked.sort_unstable();
        let p = match tag {
            BaselineTag::BackgroundUniform => 1.0 / m as f64,
            _ => processes[pid].cross_section / (per_process as f64 * total_xs),
        };
        for k in picked {
            rows.push(candidates[k]);
            probs.push(p);
            pids.push(pid as u16);
        }
    }
    let mut spec = BaselineSpec::new(tag, background_set.features.select_rows(&rows), probs)?;
    spec.process_ids = pids;
    Ok(spec)
}
