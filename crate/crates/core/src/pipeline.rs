//! The end-to-end stages behind the command line subcommands.
//!
//! Output layout under `paths.out_dir`:
//!
//! ```text
//! run_config.toml
//! data/{train,val,test}.csv  data/standardizer.json
//! model/checkpoint.igxm  model/training_log.csv  model/summary.json
//! attribution/{B0,Bbg,Bbgw}.{csv,json}  attribution/{tag}_top{5,20}.svg
//! eval/curves.csv  eval/ablation.csv  eval/accuracy.svg  eval/z.svg
//! ```
//!
//! No file contains timings or host details, so reruns are byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attribution::{
    build_baseline, class_attribution, AttributionReport, BaselineSpace, BaselineSpec, BaselineTag,
};
use crate::config::{RunConfig, SeedStream};
use crate::data::{generate, load_csv, save_csv, split, EventDataset, Standardizer};
use crate::error::{Error, Result};
use crate::evaluation::{
    ablation_probe, save_curves, topk_curves, z_score, RetrainSetup, TopKResult,
};
use crate::nn::{accuracy, load_checkpoint, save_checkpoint, train, Architecture, MlpClassifier};
use crate::parallel::Execution;
use crate::reporting::{render_curves, render_ranking, CurveMetric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Generate,
    Train,
    Attribute,
    Evaluate,
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generate" => Ok(Stage::Generate),
            "train" => Ok(Stage::Train),
            "attribute" => Ok(Stage::Attribute),
            "evaluate" => Ok(Stage::Evaluate),
            _ => Err(Error::Argument(format!("unknown stage {s:?}"))),
        }
    }
}

/// File locations for one run.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_echo(&self) -> PathBuf {
        self.root.join("run_config.toml")
    }

    pub fn split_csv(&self, name: &str) -> PathBuf {
        self.root.join("data").join(format!("{name}.csv"))
    }

    pub fn standardizer(&self) -> PathBuf {
        self.root.join("data/standardizer.json")
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.root.join("model/checkpoint.igxm")
    }

    pub fn training_log(&self) -> PathBuf {
        self.root.join("model/training_log.csv")
    }

    pub fn model_summary(&self) -> PathBuf {
        self.root.join("model/summary.json")
    }

    pub fn report_csv(&self, tag: BaselineTag) -> PathBuf {
        self.root.join("attribution").join(format!("{}.csv", tag.label()))
    }

    pub fn report_json(&self, tag: BaselineTag) -> PathBuf {
        self.root.join("attribution").join(format!("{}.json", tag.label()))
    }

    pub fn ranking_svg(&self, tag: BaselineTag, top_n: usize) -> PathBuf {
        self.root
            .join("attribution")
            .join(format!("{}_top{top_n}.svg", tag.label()))
    }

    pub fn curves_csv(&self) -> PathBuf {
        self.root.join("eval/curves.csv")
    }

    pub fn ablation_csv(&self) -> PathBuf {
        self.root.join("eval/ablation.csv")
    }

    pub fn curves_svg(&self, metric: CurveMetric) -> PathBuf {
        match metric {
            CurveMetric::Accuracy => self.root.join("eval/accuracy.svg"),
            CurveMetric::Z => self.root.join("eval/z.svg"),
        }
    }
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingInput(path.to_path_buf()))
    }
}

fn echo_config(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    write_file(&layout.config_echo(), cfg.to_toml_string())
}

struct Splits {
    train: EventDataset,
    val: EventDataset,
    test: EventDataset,
}

fn load_splits(cfg: &RunConfig, layout: &Layout) -> Result<Splits> {
    let schema = cfg.schema()?;
    let load = |name: &str| {
        let p = layout.split_csv(name);
        require(&p)?;
        load_csv(&p, &schema)
    };
    Ok(Splits {
        train: load("train")?,
        val: load("val")?,
        test: load("test")?,
    })
}

/// Generates the synthetic events, splits them and fits the standardizer on
/// the training split.
pub fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.paths.out_dir);
    ensure_dir(layout.root())?;
    echo_config(cfg, &layout)?;
    let schema = cfg.schema()?;
    let procs = cfg.processes()?;
    let all = generate(&procs, &schema, cfg.data.n_total, cfg.seed_for(SeedStream::Data))?;
    let (train_set, val_set, test_set) = split(&all, cfg.data.fractions, cfg.seed_for(SeedStream::Split))?;
    let st = Standardizer::fit(&train_set)?;
    save_csv(&train_set, &layout.split_csv("train"))?;
    save_csv(&val_set, &layout.split_csv("val"))?;
    save_csv(&test_set, &layout.split_csv("test"))?;
    st.save_json(&layout.standardizer())?;
    log::info!(
        "generated {} events: {} train, {} val, {} test",
        all.len(),
        train_set.len(),
        val_set.len(),
        test_set.len()
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub best_val_loss: f64,
    pub test_accuracy: f64,
    pub test_z_score: f64,
}

/// Trains the full-width classifier and writes the checkpoint and logs.
pub fn cmd_train(cfg: &RunConfig) -> Result<ModelSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.paths.out_dir);
    let splits = load_splits(cfg, &layout)?;
    require(&layout.standardizer())?;
    let st = Standardizer::load_json(&layout.standardizer())?;
    echo_config(cfg, &layout)?;
    let train_set = st.apply(&splits.train)?;
    let val_set = st.apply(&splits.val)?;
    let test_set = st.apply(&splits.test)?;

    let tc = cfg.train_config();
    let arch = Architecture::new(train_set.n_features())
        .with_hidden(cfg.train.hidden_dim, cfg.train.n_hidden)
        .with_dropout(tc.dropout_p);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let model = MlpClassifier::new(arch, &mut rng)?;
    let (model, log) = train(model, &train_set, &val_set, &tc)?;

    let probs = model.predict_proba(&test_set.features)?;
    let sig = cfg.significance();
    let summary = ModelSummary {
        best_epoch: log.best_epoch,
        epochs_run: log.epochs.len(),
        best_val_loss: log.best_val_loss,
        test_accuracy: accuracy(&probs, &test_set.labels, sig.threshold),
        test_z_score: z_score(&probs, &test_set.labels, &test_set.weights, &sig),
    };
    ensure_parent(&layout.checkpoint())?;
    save_checkpoint(&model, &st, &layout.checkpoint())?;
    write_file(&layout.training_log(), log.to_csv())?;
    write_file(
        &layout.model_summary(),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;
    log::info!(
        "trained {} epochs (best {}), test accuracy {:.4}",
        summary.epochs_run,
        summary.best_epoch,
        summary.test_accuracy
    );
    Ok(summary)
}

/// The baseline distribution for `tag`, in the model's standardized space.
pub fn baseline_for(
    cfg: &RunConfig,
    tag: BaselineTag,
    standardized_train: &EventDataset,
    st: &Standardizer,
) -> Result<BaselineSpec> {
    match (tag, cfg.ig.baseline_space) {
        (BaselineTag::Zero, BaselineSpace::Std) => Ok(BaselineSpec::zero(st.len())),
        (BaselineTag::Zero, BaselineSpace::Raw) => Ok(BaselineSpec::zero_raw(st)),
        _ => build_baseline(
            tag,
            &standardized_train.background(),
            &cfg.processes()?,
            cfg.ig.per_process,
            cfg.seed_for(SeedStream::Baseline),
        ),
    }
}

/// Seeded sample (sorted) of at most `n` test signal rows.
fn attribution_inputs(cfg: &RunConfig, test_set: &EventDataset) -> EventDataset {
    let signal = test_set.signal();
    let n = cfg.ig.n_signal_inputs.min(signal.len());
    if n < cfg.ig.n_signal_inputs {
        log::warn!(
            "only {} test signal events available, {} requested",
            signal.len(),
            cfg.ig.n_signal_inputs
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed_for(SeedStream::Inputs));
    let mut rows = rand::seq::index::sample(&mut rng, signal.len(), n).into_vec();
    rows.sort_unstable();
    signal.subset(&rows)
}

/// Class-level attribution of the trained model over test signal events.
pub fn cmd_attribute(cfg: &RunConfig, tag: BaselineTag, exec: Execution) -> Result<AttributionReport> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.paths.out_dir);
    require(&layout.checkpoint())?;
    let (model, st) = load_checkpoint(&layout.checkpoint())?;
    let schema = cfg.schema()?;
    let load = |name: &str| {
        let p = layout.split_csv(name);
        require(&p)?;
        load_csv(&p, &schema)
    };
    let train_set = st.apply(&load("train")?)?;
    let test_set = st.apply(&load("test")?)?;
    echo_config(cfg, &layout)?;

    let baseline = baseline_for(cfg, tag, &train_set, &st)?;
    let inputs = attribution_inputs(cfg, &test_set);
    log::info!(
        "attributing {} inputs against {} baseline vectors ({}), {} steps",
        inputs.len(),
        baseline.len(),
        tag,
        cfg.ig.steps
    );
    let names = schema.names();
    let report = exec.with_jobs(cfg.eval.jobs, || {
        class_attribution(&model, &inputs.features, &names, &baseline, &cfg.ig_config(), exec)
    })?;
    if report.n_flagged > 0 {
        log::warn!(
            "{}: {} of {} inputs exceed the completeness tolerance (max residual {:.3e})",
            tag,
            report.n_flagged,
            report.n_inputs,
            report.max_residual
        );
    }
    ensure_parent(&layout.report_csv(tag))?;
    report.save(&layout.report_csv(tag), &layout.report_json(tag))?;
    for top_n in [5, 20] {
        render_ranking(&report, top_n.min(names.len()), &layout.ranking_svg(tag, top_n))?;
    }
    log::info!("{}: top features {:?}", tag, report.top_names(5));
    Ok(report)
}

/// Top-k retraining curves for the three stored reports, plus the
/// single-feature ablation table.
pub fn cmd_evaluate(cfg: &RunConfig, exec: Execution) -> Result<Vec<TopKResult>> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.paths.out_dir);
    let mut reports = Vec::new();
    for tag in BaselineTag::ALL {
        reports.push(AttributionReport::load_json(&layout.report_json(tag))?);
    }
    let splits = load_splits(cfg, &layout)?;
    echo_config(cfg, &layout)?;

    let train_cfg = crate::nn::TrainConfig {
        seed: cfg.seed_for(SeedStream::Retrain),
        ..cfg.train_config()
    };
    let setup = RetrainSetup {
        train: &splits.train,
        val: &splits.val,
        test: &splits.test,
        train_cfg,
        hidden_dim: cfg.train.hidden_dim,
        n_hidden: cfg.train.n_hidden,
        significance: cfg.significance(),
    };
    let ks = cfg.k_values()?;
    let results = topk_curves(&setup, &reports, &ks, exec, cfg.eval.jobs)?;
    ensure_parent(&layout.curves_csv())?;
    save_curves(&results, &layout.curves_csv())?;
    for metric in [CurveMetric::Accuracy, CurveMetric::Z] {
        render_curves(&layout.curves_csv(), metric, &layout.curves_svg(metric))?;
    }
    write_ablation(cfg, &layout)?;
    Ok(results)
}

fn write_ablation(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    require(&layout.checkpoint())?;
    let (model, st) = load_checkpoint(&layout.checkpoint())?;
    let schema = cfg.schema()?;
    let train_set = st.apply(&load_csv(&layout.split_csv("train"), &schema)?)?;
    let test_set = st.apply(&load_csv(&layout.split_csv("test"), &schema)?)?;
    let baselines = BaselineTag::ALL
        .iter()
        .map(|&t| baseline_for(cfg, t, &train_set, &st))
        .collect::<Result<Vec<_>>>()?;
    let mut out = String::from("feature");
    for b in &baselines {
        let _ = write!(out, ",{}", b.tag);
    }
    out.push('\n');
    for (i, name) in schema.names().iter().enumerate() {
        out.push_str(name);
        for b in &baselines {
            let _ = write!(out, ",{}", ablation_probe(&model, &test_set, i, b)?);
        }
        out.push('\n');
    }
    write_file(&layout.ablation_csv(), out)
}

/// Runs every stage from `from` onwards; earlier stages' outputs must exist.
pub fn cmd_repro(cfg: &RunConfig, from: Stage, exec: Execution) -> Result<()> {
    cfg.validate()?;
    if from <= Stage::Generate {
        cmd_generate(cfg)?;
    }
    if from <= Stage::Train {
        cmd_train(cfg)?;
    }
    if from <= Stage::Attribute {
        for tag in BaselineTag::ALL {
            cmd_attribute(cfg, tag, exec)?;
        }
    }
    cmd_evaluate(cfg, exec)?;
    Ok(())
}
