//! Argument parsing and dispatch for the `gatefuse` binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gatefuse_core::data::Split;
use gatefuse_core::train::HyperGrid;
use gatefuse_core::ModalitySet;

use crate::error::{Error, Result};
use crate::report::{self, ReportFormat};
use crate::runner::{self, SynthOptions};

#[derive(Debug, Parser)]
#[command(name = "gatefuse", version, about = "Gated multimodal fusion classifier on precomputed embeddings")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one configuration and write a run directory.
    Train(TrainArgs),
    /// Score a checkpoint on one split of a manifest.
    Eval(EvalArgs),
    /// Train every configuration of a grid into numbered run directories.
    Gridsearch(GridArgs),
    /// Score an external predictions file against manifest labels.
    Score(ScoreArgs),
    /// Write a synthetic cross-modal incongruity manifest.
    Synth(SynthArgs),
    /// Tabulate weighted P/R/F1 across run directories.
    Report(ReportArgs),
}

fn parse_modalities(s: &str) -> std::result::Result<ModalitySet, String> {
    ModalitySet::parse_list(s).map_err(|e| e.to_string())
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    s.parse().map_err(|e: gatefuse_core::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma list from t, a, v.
    #[arg(long, value_parser = parse_modalities)]
    pub modalities: ModalitySet,
    /// JSON training config.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_parser = parse_modalities)]
    pub modalities: ModalitySet,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_parser = parse_split, default_value = "test")]
    pub split: Split,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_parser = parse_modalities)]
    pub modalities: ModalitySet,
    /// JSON grid; the default is the full 108-configuration grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Overrides the grid base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Configurations trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, value_parser = parse_split, default_value = "test")]
    pub split: Split,
    #[arg(long, value_enum, default_value = "md")]
    pub format: ReportFormat,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 500)]
    pub n_val: usize,
    #[arg(long, default_value_t = 500)]
    pub n_test: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 3.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Manifest path to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories; each is tagged by its directory name.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long, value_parser = parse_split, default_value = "test")]
    pub split: Split,
    #[arg(long, value_enum, default_value = "md")]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn require_file(flag: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Usage(format!("{flag}: no such file {}", path.display())))
    }
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::Usage(format!("no such run directory {}", path.display())))
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(Error::io(path)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(Error::io("<stdout>"))
        }
    }
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train(a) => {
            require_file("--manifest", &a.manifest)?;
            require_file("--config", &a.config)?;
            let mut cfg = runner::load_config(&a.config)?;
            if let Some(seed) = a.seed {
                cfg.seed = seed;
            }
            let data = runner::load_manifest(&a.manifest)?;
            let metrics = runner::train_run(&data, a.modalities, &cfg, &a.out)?;
            for (split, r) in &metrics {
                let [p, rc, f] = report::percent_row(r);
                log::info!("{split}: P {p} R {rc} F1 {f}");
            }
            Ok(())
        }
        Command::Eval(a) => {
            require_file("--manifest", &a.manifest)?;
            require_file("--checkpoint", &a.checkpoint)?;
            let data = runner::load_manifest(&a.manifest)?;
            let r = runner::eval_run(&data, a.modalities, &a.checkpoint, a.split, &a.out)?;
            let [p, rc, f] = report::percent_row(&r);
            log::info!("{}: P {p} R {rc} F1 {f}", a.split);
            Ok(())
        }
        Command::Gridsearch(a) => {
            require_file("--manifest", &a.manifest)?;
            let mut grid = match &a.grid {
                Some(path) => {
                    require_file("--grid", path)?;
                    runner::load_grid(path)?
                }
                None => HyperGrid::standard(),
            };
            if let Some(seed) = a.seed {
                grid.seed = seed;
            }
            let data = runner::load_manifest(&a.manifest)?;
            let summary = runner::grid_run(&data, a.modalities, &grid, a.jobs, &a.out)?;
            if let Some(b) = &summary.best {
                log::info!("best: {} (val F1 {:.4})", b.run_dir, b.best_val_f1);
            }
            Ok(())
        }
        Command::Score(a) => {
            require_file("--manifest", &a.manifest)?;
            require_file("--predictions", &a.predictions)?;
            let data = runner::load_manifest(&a.manifest)?;
            let (r, coverage) = runner::score_file(&data, &a.predictions, a.split)?;
            log::info!(
                "scored {} {} samples; {} predictions for other splits ignored",
                coverage.scored,
                a.split,
                coverage.other_split
            );
            let tag = a.predictions.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            emit(&report::render(&[(tag, r)], a.format), a.out.as_deref())
        }
        Command::Synth(a) => {
            let opts = SynthOptions {
                n_train: a.n_train,
                n_val: a.n_val,
                n_test: a.n_test,
                dim: a.dim,
                snr: a.snr,
                seed: a.seed,
            };
            runner::synth_manifest(&opts, &a.out)?;
            Ok(())
        }
        Command::Report(a) => {
            for dir in &a.runs {
                require_dir(dir)?;
            }
            emit(&runner::report_dirs(&a.runs, a.split, a.format)?, a.out.as_deref())
        }
    }
}
