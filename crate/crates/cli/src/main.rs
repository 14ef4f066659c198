use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use igx_core::attribution::{BaselineSpace, BaselineTag};
use igx_core::config::RunConfig;
use igx_core::pipeline::{self, Stage};
use igx_core::{Error, Execution, Result};

/// Integrated Gradients baselines for signal/background classification.
#[derive(Parser, Debug)]
#[command(name = "igx", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate, split and standardize the synthetic events.
    Generate(Common),
    /// Train the classifier on the generated data.
    Train(Common),
    /// Class-level attribution for one baseline.
    Attribute {
        #[command(flatten)]
        common: Common,
        /// zero, bg-uniform or bg-weighted
        #[arg(long)]
        baseline: String,
    },
    /// Top-k retraining curves for all three baselines.
    Evaluate(Common),
    /// Run the whole pipeline.
    Repro {
        #[command(flatten)]
        common: Common,
        /// First stage to run: generate, train, attribute or evaluate.
        #[arg(long, default_value = "generate")]
        stage: String,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; library defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// IG integration steps.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Worker threads for attribution and retraining (0: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// raw or std
    #[arg(long)]
    baseline_space: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run single-threaded.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn load(&self) -> Result<(RunConfig, Execution)> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = self.steps {
            cfg.ig.steps = s;
        }
        if let Some(k) = self.k_max {
            cfg.eval.k_max = k;
        }
        if let Some(j) = self.jobs {
            cfg.eval.jobs = j;
        }
        if let Some(s) = &self.baseline_space {
            cfg.ig.baseline_space = s.parse::<BaselineSpace>().map_err(as_config)?;
        }
        if let Some(o) = &self.out {
            cfg.paths.out_dir = o.clone();
        }
        cfg.validate()?;
        let exec = if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        };
        Ok((cfg, exec))
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Argument(m) => Error::Config(m),
        other => other,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(c) => pipeline::cmd_generate(&c.load()?.0),
        Command::Train(c) => {
            let summary = pipeline::cmd_train(&c.load()?.0)?;
            println!("test accuracy {:.4}", summary.test_accuracy);
            Ok(())
        }
        Command::Attribute { common, baseline } => {
            let tag: BaselineTag = baseline.parse()?;
            let (cfg, exec) = common.load()?;
            let report = pipeline::cmd_attribute(&cfg, tag, exec)?;
            println!("{}: {}", report.baseline_tag, report.top_names(5).join(" "));
            Ok(())
        }
        Command::Evaluate(c) => {
            let (cfg, exec) = c.load()?;
            let rows = pipeline::cmd_evaluate(&cfg, exec)?;
            println!("{} top-k results written", rows.len());
            Ok(())
        }
        Command::Repro { common, stage } => {
            let stage: Stage = stage.parse()?;
            let (cfg, exec) = common.load()?;
            pipeline::cmd_repro(&cfg, stage, exec)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
