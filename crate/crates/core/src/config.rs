//! Run configuration, read from a single TOML file.
//!
//! Every section and key is optional and falls back to the library defaults;
//! unknown keys are rejected. Key set:
//!
//! ```toml
//! seed = 2024
//!
//! [data]
//! n_total = 50000
//! schema = "default"
//! fractions = { train = 0.5, val = 0.2, test = 0.3 }
//! process_overrides = [{ name = "ttH", cross_section = 0.9 }]
//!
//! [train]
//! hidden_dim = 128
//! n_hidden = 2
//! learning_rate = 1e-3
//! weight_decay = 1e-4
//! dropout_p = 0.2
//! batch_size = 256
//! max_epochs = 100
//! patience = 10
//!
//! [ig]
//! steps = 300
//! rule = "trapezoid"          # or "midpoint"
//! completeness_tol = 1e-2
//! per_process = 20
//! n_signal_inputs = 5000
//! baseline_space = "std"      # or "raw"
//!
//! [eval]
//! k_min = 1
//! k_max = 20
//! include_full = false        # also evaluate k = number of features
//! luminosity_scale = 1000.0
//! threshold = 0.5
//! jobs = 0                    # 0: rayon default
//!
//! [paths]
//! out_dir = "out"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attribution::{BaselineSpace, IgConfig, QuadratureRule};
use crate::data::{default_processes, default_schema, FeatureSchema, ProcessSpec, SplitFractions};
use crate::error::{Error, Result};
use crate::evaluation::{SignificanceConfig, SignificanceFormula};
use crate::nn::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataSection,
    pub train: TrainSection,
    pub ig: IgSection,
    pub eval: EvalSection,
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            data: DataSection::default(),
            train: TrainSection::default(),
            ig: IgSection::default(),
            eval: EvalSection::default(),
            paths: PathsSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub n_total: usize,
    pub schema: String,
    pub fractions: SplitFractions,
    pub process_overrides: Vec<ProcessOverride>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            n_total: 50_000,
            schema: "default".into(),
            fractions: SplitFractions::default(),
            process_overrides: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessOverride {
    pub name: String,
    pub cross_section: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub hidden_dim: usize,
    pub n_hidden: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub dropout_p: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden_dim: 128,
            n_hidden: 2,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            dropout_p: t.dropout_p,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IgSection {
    pub steps: usize,
    pub rule: QuadratureRule,
    pub completeness_tol: f64,
    pub per_process: usize,
    pub n_signal_inputs: usize,
    pub baseline_space: BaselineSpace,
}

impl Default for IgSection {
    fn default() -> Self {
        let ig = IgConfig::default();
        Self {
            steps: ig.steps,
            rule: ig.rule,
            completeness_tol: ig.completeness_tol,
            per_process: 20,
            n_signal_inputs: 5000,
            baseline_space: BaselineSpace::Std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k_min: usize,
    pub k_max: usize,
    pub include_full: bool,
    pub luminosity_scale: f64,
    pub threshold: f64,
    pub jobs: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        let s = SignificanceConfig::default();
        Self {
            k_min: 1,
            k_max: 20,
            include_full: false,
            luminosity_scale: s.luminosity_scale,
            threshold: s.threshold,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub out_dir: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Independent seeds for the pipeline stages, all derived from `RunConfig::seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    Data = 1,
    Split = 2,
    Model = 3,
    Baseline = 4,
    Inputs = 5,
    Retrain = 6,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.data.fractions.validate()?;
        self.schema()?;
        self.processes()?;
        self.train_config().validate()?;
        if self.train.hidden_dim == 0 || self.train.n_hidden == 0 {
            return Err(Error::Config("train.hidden_dim and train.n_hidden must be >= 1".into()));
        }
        self.ig_config().validate()?;
        if self.ig.per_process == 0 {
            return Err(Error::Config("ig.per_process must be >= 1".into()));
        }
        if self.ig.n_signal_inputs == 0 {
            return Err(Error::Config("ig.n_signal_inputs must be >= 1".into()));
        }
        let d = self.schema()?.len();
        if self.eval.k_min == 0 || self.eval.k_min > self.eval.k_max || self.eval.k_max > d {
            return Err(Error::Config(format!(
                "eval.k_min..eval.k_max = {}..{} must lie within 1..={d}",
                self.eval.k_min, self.eval.k_max
            )));
        }
        self.significance().validate()
    }

    pub fn seed_for(&self, stream: SeedStream) -> u64 {
        let mut z = self.seed ^ (stream as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn schema(&self) -> Result<FeatureSchema> {
        match self.data.schema.as_str() {
            "default" => Ok(default_schema()),
            other => Err(Error::Config(format!("data.schema: unknown schema {other:?}"))),
        }
    }

    /// Default processes with `data.process_overrides` applied.
    pub fn processes(&self) -> Result<Vec<ProcessSpec>> {
        let mut procs = default_processes();
        for o in &self.data.process_overrides {
            let p = procs
                .iter_mut()
                .find(|p| p.name == o.name)
                .ok_or_else(|| Error::Config(format!("data.process_overrides: unknown process {:?}", o.name)))?;
            if !(o.cross_section > 0.0 && o.cross_section.is_finite()) {
                return Err(Error::Config(format!(
                    "data.process_overrides: cross_section for {} must be positive",
                    o.name
                )));
            }
            p.cross_section = o.cross_section;
        }
        Ok(procs)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.learning_rate,
            weight_decay: self.train.weight_decay,
            dropout_p: self.train.dropout_p,
            batch_size: self.train.batch_size,
            max_epochs: self.train.max_epochs,
            patience: self.train.patience,
            seed: self.seed_for(SeedStream::Model),
        }
    }

    pub fn ig_config(&self) -> IgConfig {
        IgConfig {
            steps: self.ig.steps,
            rule: self.ig.rule,
            completeness_tol: self.ig.completeness_tol,
        }
    }

    pub fn significance(&self) -> SignificanceConfig {
        SignificanceConfig {
            luminosity_scale: self.eval.luminosity_scale,
            threshold: self.eval.threshold,
            formula: SignificanceFormula::SimpleZ,
        }
    }

    /// The k values evaluated, ascending, with the full width appended when
    /// `eval.include_full` is set.
    pub fn k_values(&self) -> Result<Vec<usize>> {
        let d = self.schema()?.len();
        let mut ks: Vec<usize> = (self.eval.k_min..=self.eval.k_max).collect();
        if self.eval.include_full && !ks.contains(&d) {
            ks.push(d);
        }
        Ok(ks)
    }
}
