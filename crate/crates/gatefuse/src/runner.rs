//! Experiment runs on disk.
//!
//! A run directory holds `config.json`, `history.json`, `model.gfm`,
//! `metrics.json` (metrics keyed by split) and `run.json` (tool version,
//! seed, modalities and SHA-256 of the inputs and the checkpoint). While a
//! run is being written it also holds an `INCOMPLETE` file, removed last.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gatefuse_core::data::{synth_incongruity, Manifest, Split};
use gatefuse_core::metrics::{self, Coverage};
use gatefuse_core::model::FusionParams;
use gatefuse_core::train::{self, GridRun, HyperGrid, TrainHistory};
use gatefuse_core::{MetricsReport, ModalitySet, TrainConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint;
use crate::error::{Error, Result};
use crate::manifest;
use crate::predictions;
use crate::report::{self, ReportFormat};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SENTINEL: &str = "INCOMPLETE";
pub const CONFIG_FILE: &str = "config.json";
pub const HISTORY_FILE: &str = "history.json";
pub const CHECKPOINT_FILE: &str = "model.gfm";
pub const METRICS_FILE: &str = "metrics.json";
pub const RUN_FILE: &str = "run.json";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const BEST_FILE: &str = "best.json";
pub const ERROR_FILE: &str = "error.txt";

/// Metrics keyed by split name.
pub type SplitMetrics = BTreeMap<Split, MetricsReport>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub modalities: String,
    pub manifest: PathBuf,
    pub manifest_sha256: String,
    pub checkpoint_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<TrainConfig>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(Error::io(path))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(Error::io(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(path, text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Manifest plus the hash of the exact bytes it was parsed from.
pub struct LoadedManifest {
    pub path: PathBuf,
    pub sha256: String,
    pub manifest: Manifest,
}

pub fn load_manifest(path: &Path) -> Result<LoadedManifest> {
    let bytes = read_bytes(path)?;
    let manifest = manifest::read_manifest(bytes.as_slice(), path)?;
    Ok(LoadedManifest { path: path.to_path_buf(), sha256: sha256_hex(&bytes), manifest })
}

pub fn load_config(path: &Path) -> Result<TrainConfig> {
    let cfg: TrainConfig = read_json(path)?;
    cfg.validate().map_err(|source| Error::Invalid { path: path.to_path_buf(), line: 1, source })?;
    Ok(cfg)
}

pub fn load_grid(path: &Path) -> Result<HyperGrid> {
    read_json(path)
}

/// Marks `dir` as being written. Creates it if needed.
fn begin(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    write_file(&dir.join(SENTINEL), "run in progress or failed\n")
}

fn finish(dir: &Path) -> Result<()> {
    let p = dir.join(SENTINEL);
    fs::remove_file(&p).map_err(Error::io(p))
}

/// Val metrics always; test metrics when the manifest has a test split.
fn split_metrics(m: &Manifest, p: &FusionParams) -> Result<SplitMetrics> {
    let mut out = SplitMetrics::new();
    for split in [Split::Val, Split::Test] {
        if m.split(split).next().is_some() {
            out.insert(split, train::evaluate_split(m, split, p)?);
        }
    }
    Ok(out)
}

/// Writes every artifact of a finished training run. Metrics are computed
/// from the f32 checkpoint contents so that they reproduce after reloading.
fn write_trained(
    dir: &Path,
    data: &LoadedManifest,
    modalities: ModalitySet,
    cfg: &TrainConfig,
    mut params: FusionParams,
    history: &TrainHistory,
) -> Result<SplitMetrics> {
    params.quantize_f32();
    let bytes = checkpoint::encode(&params);
    let metrics = split_metrics(&data.manifest, &params)?;
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    write_json(&dir.join(HISTORY_FILE), history)?;
    write_file(&dir.join(CHECKPOINT_FILE), &bytes)?;
    write_json(&dir.join(METRICS_FILE), &metrics)?;
    let meta = RunMetadata {
        tool_version: TOOL_VERSION.into(),
        command: "train".into(),
        seed: cfg.seed,
        modalities: modalities.to_string(),
        manifest: data.path.clone(),
        manifest_sha256: data.sha256.clone(),
        checkpoint_sha256: sha256_hex(&bytes),
        config: Some(*cfg),
    };
    write_json(&dir.join(RUN_FILE), &meta)?;
    Ok(metrics)
}

pub fn train_run(
    data: &LoadedManifest,
    modalities: ModalitySet,
    cfg: &TrainConfig,
    out: &Path,
) -> Result<SplitMetrics> {
    begin(out)?;
    let outcome = train::train(&data.manifest, modalities, cfg)?;
    let metrics = write_trained(out, data, modalities, cfg, outcome.params, &outcome.history)?;
    finish(out)?;
    Ok(metrics)
}

/// Scores a saved checkpoint on one split. The checkpoint must have been
/// trained on exactly `modalities`; this is checked before any inference.
pub fn eval_run(
    data: &LoadedManifest,
    modalities: ModalitySet,
    checkpoint_path: &Path,
    split: Split,
    out: &Path,
) -> Result<MetricsReport> {
    let bytes = read_bytes(checkpoint_path)?;
    let params = checkpoint::decode(&bytes, checkpoint_path)?;
    let trained = params.modalities();
    if trained != modalities {
        return Err(Error::Usage(format!(
            "--modalities {modalities} does not match checkpoint {} (trained on {trained})",
            checkpoint_path.display()
        )));
    }
    let expected = train::raw_dims(&data.manifest, modalities)?;
    if expected != params.raw_dims() {
        return Err(Error::Checkpoint {
            path: checkpoint_path.to_path_buf(),
            message: format!("input dims {:?} do not match manifest dims {:?}", params.raw_dims(), expected),
        });
    }

    begin(out)?;
    let preds = train::predict_split(&data.manifest, split, &params)?;
    let (report, _) = metrics::score_predictions(&data.manifest, &preds, split)?;
    predictions::save_predictions(&preds, out.join(PREDICTIONS_FILE))?;
    write_json(&out.join(METRICS_FILE), &SplitMetrics::from([(split, report)]))?;
    let meta = RunMetadata {
        tool_version: TOOL_VERSION.into(),
        command: "eval".into(),
        seed: 0,
        modalities: modalities.to_string(),
        manifest: data.path.clone(),
        manifest_sha256: data.sha256.clone(),
        checkpoint_sha256: sha256_hex(&bytes),
        config: None,
    };
    write_json(&out.join(RUN_FILE), &meta)?;
    finish(out)?;
    Ok(report)
}

pub fn run_dir_name(index: usize) -> String {
    format!("run-{index:03}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRun {
    pub index: usize,
    pub run_dir: String,
    pub best_val_f1: f64,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub runs: Vec<GridRun>,
    pub metrics: Vec<Option<SplitMetrics>>,
    pub best: Option<BestRun>,
}

impl GridSummary {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }
}

fn grid_one(
    data: &LoadedManifest,
    modalities: ModalitySet,
    index: usize,
    cfg: TrainConfig,
    out: &Path,
) -> Result<(GridRun, Option<SplitMetrics>)> {
    let dir = out.join(run_dir_name(index));
    begin(&dir)?;
    match train::train(&data.manifest, modalities, &cfg) {
        Ok(o) => {
            let metrics = write_trained(&dir, data, modalities, &cfg, o.params, &o.history)?;
            finish(&dir)?;
            Ok((GridRun { index, config: cfg, outcome: Ok(o.history) }, Some(metrics)))
        }
        Err(e) => {
            log::warn!("{}: {e}", dir.display());
            write_json(&dir.join(CONFIG_FILE), &cfg)?;
            write_file(&dir.join(ERROR_FILE), format!("{e}\n"))?;
            Ok((GridRun { index, config: cfg, outcome: Err(e) }, None))
        }
    }
}

fn summary_csv(summary: &GridSummary) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "index",
        "run_dir",
        "dropout",
        "learning_rate",
        "batch_size",
        "shared_dim",
        "proj_dim",
        "max_epochs",
        "patience",
        "seed",
        "status",
        "epochs_run",
        "best_epoch",
        "best_val_f1",
        "val_f1",
        "test_f1",
    ])
    .unwrap();
    for (run, metrics) in summary.runs.iter().zip(&summary.metrics) {
        let c = &run.config;
        let mut row = vec![
            run.index.to_string(),
            run_dir_name(run.index),
            c.dropout.to_string(),
            c.learning_rate.to_string(),
            c.batch_size.to_string(),
            c.shared_dim.to_string(),
            c.proj_dim.to_string(),
            c.max_epochs.to_string(),
            c.patience.to_string(),
            c.seed.to_string(),
        ];
        let f1 = |s: Split| metrics.as_ref().and_then(|m| m.get(&s)).map(|r| r.f1.to_string()).unwrap_or_default();
        match &run.outcome {
            Ok(h) => row.extend([
                "ok".to_string(),
                h.epochs_run().to_string(),
                h.best_epoch.to_string(),
                h.best_val_f1.to_string(),
                f1(Split::Val),
                f1(Split::Test),
            ]),
            Err(e) => row.extend([
                format!("failed: {e}"),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]),
        }
        w.write_record(&row).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Trains every grid configuration into `out/run-NNN`, then writes
/// `summary.csv` (one row per configuration, in enumeration order) and
/// `best.json`. `jobs` workers train configurations concurrently; each run
/// only depends on its own configuration, so results do not depend on `jobs`.
///
/// Failed configurations keep their `INCOMPLETE` marker and an `error.txt`;
/// the call then returns an error after writing the summary.
pub fn grid_run(
    data: &LoadedManifest,
    modalities: ModalitySet,
    grid: &HyperGrid,
    jobs: usize,
    out: &Path,
) -> Result<GridSummary> {
    let configs = grid.configs()?;
    train::raw_dims(&data.manifest, modalities)?;
    begin(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("--jobs: {e}")))?;
    let results: Vec<(GridRun, Option<SplitMetrics>)> = pool.install(|| {
        configs
            .into_par_iter()
            .enumerate()
            .map(|(i, cfg)| grid_one(data, modalities, i, cfg, out))
            .collect::<Result<_>>()
    })?;
    let (runs, metrics): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let best = train::select_best(&runs).map(|i| {
        let run = &runs[i];
        BestRun {
            index: i,
            run_dir: run_dir_name(i),
            best_val_f1: run.outcome.as_ref().map(|h| h.best_val_f1).unwrap_or(f64::NAN),
            config: run.config,
        }
    });
    let summary = GridSummary { runs, metrics, best };
    write_file(&out.join(SUMMARY_FILE), summary_csv(&summary))?;
    match &summary.best {
        Some(b) => write_json(&out.join(BEST_FILE), b)?,
        None => return Err(gatefuse_core::Error::AllConfigsFailed.into()),
    }
    finish(out)?;
    match summary.failures() {
        0 => Ok(summary),
        n => Err(Error::Usage(format!(
            "{n} of {} grid configurations failed; see {}",
            summary.runs.len(),
            out.display()
        ))),
    }
}

pub fn score_file(data: &LoadedManifest, predictions_path: &Path, split: Split) -> Result<(MetricsReport, Coverage)> {
    let preds = predictions::load_predictions(predictions_path)?;
    Ok(metrics::score_predictions(&data.manifest, &preds, split)?)
}

pub struct SynthOptions {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub dim: usize,
    pub snr: f64,
    pub seed: u64,
}

pub fn synth_manifest(opts: &SynthOptions, out: &Path) -> Result<Manifest> {
    let m = synth_incongruity(opts.n_train, opts.n_val, opts.n_test, opts.dim, opts.snr, opts.seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    manifest::save_manifest(&m, out)?;
    Ok(m)
}

/// Collects `split` metrics from run directories, tagged by directory name.
pub fn collect_reports(dirs: &[PathBuf], split: Split) -> Result<Vec<(String, MetricsReport)>> {
    let mut out = Vec::with_capacity(dirs.len());
    for dir in dirs {
        if dir.join(SENTINEL).exists() {
            return Err(Error::Usage(format!("{} is incomplete", dir.display())));
        }
        let path = dir.join(METRICS_FILE);
        let metrics: SplitMetrics = read_json(&path)?;
        let report =
            *metrics.get(&split).ok_or_else(|| Error::Usage(format!("{} has no {split} metrics", path.display())))?;
        let tag =
            dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| dir.display().to_string());
        out.push((tag, report));
    }
    Ok(out)
}

pub fn report_dirs(dirs: &[PathBuf], split: Split, format: ReportFormat) -> Result<String> {
    Ok(report::render(&collect_reports(dirs, split)?, format))
}
