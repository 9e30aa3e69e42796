//! Adam optimization with early stopping on validation weighted F1, and the
//! hyperparameter grid search built on top of it.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::RngCore;

use crate::data::{Manifest, Split};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricsReport, Prediction};
use crate::modality::ModalitySet;
use crate::model::{self, FusionParams, Mode, PreparedSample};
use crate::rng;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const DEFAULT_MAX_EPOCHS: usize = 100;
pub const DEFAULT_PATIENCE: usize = 10;

#[cfg(feature = "serde")]
fn default_max_epochs() -> usize {
    DEFAULT_MAX_EPOCHS
}

#[cfg(feature = "serde")]
fn default_patience() -> usize {
    DEFAULT_PATIENCE
}

/// One training run. Together with the dataset it fully determines the result.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct TrainConfig {
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub shared_dim: usize,
    pub proj_dim: usize,
    #[cfg_attr(feature = "serde", serde(default = "default_max_epochs"))]
    pub max_epochs: usize,
    #[cfg_attr(feature = "serde", serde(default = "default_patience"))]
    pub patience: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        // Zero is accepted: it is the frozen-parameter control run.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be finite and non-negative, got {}", self.learning_rate));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("shared_dim", self.shared_dim),
            ("proj_dim", self.proj_dim),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

/// Candidate values per axis. Enumeration nests the axes in declaration
/// order, the first axis outermost.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct HyperGrid {
    pub dropout: Vec<f64>,
    pub learning_rate: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub shared_dim: Vec<usize>,
    pub proj_dim: Vec<usize>,
    #[cfg_attr(feature = "serde", serde(default = "default_max_epochs_axis"))]
    pub max_epochs: Vec<usize>,
    #[cfg_attr(feature = "serde", serde(default = "default_patience_axis"))]
    pub patience: Vec<usize>,
    /// Base seed; config `i` trains with `seed ^ i`.
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
}

#[cfg(feature = "serde")]
fn default_max_epochs_axis() -> Vec<usize> {
    alloc::vec![DEFAULT_MAX_EPOCHS]
}

#[cfg(feature = "serde")]
fn default_patience_axis() -> Vec<usize> {
    alloc::vec![DEFAULT_PATIENCE]
}

impl HyperGrid {
    /// Dropout {0.2, 0.3, 0.4} x learning rate {1e-3, 1e-4} x batch
    /// {32, 64, 128} x shared dim {1024, 2048, 4096} x projection dim
    /// {256, 1024}: 108 configurations.
    pub fn standard() -> Self {
        Self {
            dropout: alloc::vec![0.2, 0.3, 0.4],
            learning_rate: alloc::vec![1e-3, 1e-4],
            batch_size: alloc::vec![32, 64, 128],
            shared_dim: alloc::vec![1024, 2048, 4096],
            proj_dim: alloc::vec![256, 1024],
            max_epochs: alloc::vec![DEFAULT_MAX_EPOCHS],
            patience: alloc::vec![DEFAULT_PATIENCE],
            seed: 0,
        }
    }

    /// A grid holding exactly `cfg` (its seed becomes the base seed).
    pub fn single(cfg: &TrainConfig) -> Self {
        Self {
            dropout: alloc::vec![cfg.dropout],
            learning_rate: alloc::vec![cfg.learning_rate],
            batch_size: alloc::vec![cfg.batch_size],
            shared_dim: alloc::vec![cfg.shared_dim],
            proj_dim: alloc::vec![cfg.proj_dim],
            max_epochs: alloc::vec![cfg.max_epochs],
            patience: alloc::vec![cfg.patience],
            seed: cfg.seed,
        }
    }

    pub fn len(&self) -> usize {
        self.dropout.len()
            * self.learning_rate.len()
            * self.batch_size.len()
            * self.shared_dim.len()
            * self.proj_dim.len()
            * self.max_epochs.len()
            * self.patience.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn configs(&self) -> Result<Vec<TrainConfig>> {
        let axes = [
            ("dropout", self.dropout.len()),
            ("learning_rate", self.learning_rate.len()),
            ("batch_size", self.batch_size.len()),
            ("shared_dim", self.shared_dim.len()),
            ("proj_dim", self.proj_dim.len()),
            ("max_epochs", self.max_epochs.len()),
            ("patience", self.patience.len()),
        ];
        if let Some((name, _)) = axes.iter().find(|(_, n)| *n == 0) {
            return Err(Error::EmptyGridAxis(name));
        }
        let mut out = Vec::with_capacity(self.len());
        for &dropout in &self.dropout {
            for &learning_rate in &self.learning_rate {
                for &batch_size in &self.batch_size {
                    for &shared_dim in &self.shared_dim {
                        for &proj_dim in &self.proj_dim {
                            for &max_epochs in &self.max_epochs {
                                for &patience in &self.patience {
                                    let seed = self.seed ^ out.len() as u64;
                                    out.push(TrainConfig {
                                        dropout,
                                        learning_rate,
                                        batch_size,
                                        shared_dim,
                                        proj_dim,
                                        max_epochs,
                                        patience,
                                        seed,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Adam moment accumulators, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: FusionParams,
    pub second: FusionParams,
    pub step: u64,
}

impl AdamState {
    pub fn new(p: &FusionParams) -> Self {
        Self { first: p.zeros_like(), second: p.zeros_like(), step: 0 }
    }
}

/// One bias-corrected Adam update. Gradients are checked for finiteness
/// before anything is modified.
pub fn adam_step(p: &mut FusionParams, g: &FusionParams, s: &mut AdamState, lr: f64) -> Result<()> {
    if !p.same_shape(g) || !p.same_shape(&s.first) || !p.same_shape(&s.second) {
        return Err(Error::ShapeMismatch { block: "optimizer state".into() });
    }
    for b in g.blocks() {
        if b.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { block: b.name });
        }
    }
    s.step += 1;
    let t = s.step as f64;
    let c1 = 1.0 - libm::pow(ADAM_BETA1, t);
    let c2 = 1.0 - libm::pow(ADAM_BETA2, t);
    let grads = g.blocks();
    let params = p.blocks_mut();
    let firsts = s.first.blocks_mut();
    let seconds = s.second.blocks_mut();
    for (((pb, gb), mb), vb) in params.into_iter().zip(grads).zip(firsts).zip(seconds) {
        for (((w, grad), m), v) in
            pb.values.iter_mut().zip(gb.values).zip(mb.values.iter_mut()).zip(vb.values.iter_mut())
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * grad;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * grad * grad;
            *w -= lr * (*m / c1) / (libm::sqrt(*v / c2) + ADAM_EPSILON);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StopReason {
    /// `patience` consecutive epochs without a validation improvement.
    Patience,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub val_f1: Vec<f64>,
    /// Validation weighted F1 of the initial parameters.
    pub initial_val_f1: f64,
    /// 1-based epoch whose parameters were kept; 0 means the initialization.
    pub best_epoch: usize,
    pub best_val_f1: f64,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    pub fn epochs_run(&self) -> usize {
        self.val_f1.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: FusionParams,
    pub history: TrainHistory,
}

fn prepare_split(manifest: &Manifest, split: Split, p: &FusionParams) -> Result<Vec<PreparedSample>> {
    manifest.split(split).map(|r| model::prepare(r, p)).collect()
}

fn predict_prepared(samples: &[PreparedSample], p: &FusionParams) -> Result<Vec<(crate::data::Label, f64)>> {
    // Eval mode never draws from the generator.
    let mut unused = rng::stream(0, rng::STREAM_DROPOUT);
    samples
        .iter()
        .map(|s| model::forward_prepared(s, p, Mode::Eval, &mut unused).map(|c| (c.prediction(), c.probs[1])))
        .collect()
}

fn weighted_f1(samples: &[PreparedSample], p: &FusionParams) -> Result<f64> {
    let preds: Vec<_> = predict_prepared(samples, p)?.into_iter().map(|(l, _)| l).collect();
    let labels: Vec<_> = samples.iter().map(|s| s.label).collect();
    Ok(metrics::evaluate_labels(&labels, &preds)?.f1)
}

/// Eval-mode predictions for every record of `split`, in manifest order.
/// The score is the probability of class 1.
pub fn predict_split(manifest: &Manifest, split: Split, p: &FusionParams) -> Result<Vec<Prediction>> {
    let samples = prepare_split(manifest, split, p)?;
    Ok(predict_prepared(&samples, p)?
        .into_iter()
        .zip(&samples)
        .map(|((pred, score), s)| Prediction { id: s.id.clone(), pred, score: Some(score) })
        .collect())
}

pub fn evaluate_split(manifest: &Manifest, split: Split, p: &FusionParams) -> Result<MetricsReport> {
    let samples = prepare_split(manifest, split, p)?;
    if samples.is_empty() {
        return Err(Error::MissingSplit(split));
    }
    let preds: Vec<_> = predict_prepared(&samples, p)?.into_iter().map(|(l, _)| l).collect();
    let labels: Vec<_> = samples.iter().map(|s| s.label).collect();
    metrics::evaluate_labels(&labels, &preds)
}

/// Raw dims for the requested modalities, checked against the manifest schema.
pub fn raw_dims(manifest: &Manifest, modalities: ModalitySet) -> Result<Vec<(crate::modality::Modality, usize)>> {
    if modalities.is_empty() {
        return Err(Error::NoModalities);
    }
    modalities.iter().map(|m| manifest.schema().dim(m).map(|d| (m, d)).ok_or(Error::ModalityNotInManifest(m))).collect()
}

/// Mean loss and number of correct predictions over one mini-batch, with
/// the averaged gradient accumulated into `grads` (which is zeroed first).
fn batch_gradients<R: RngCore + ?Sized>(
    batch: &[&PreparedSample],
    p: &FusionParams,
    dropout: f64,
    rng: &mut R,
    grads: &mut FusionParams,
) -> Result<(f64, usize)> {
    for b in grads.blocks_mut() {
        b.values.fill(0.0);
    }
    let scale = 1.0 / batch.len() as f64;
    let mut loss_sum = 0.0;
    let mut correct = 0;
    for sample in batch {
        let cache = model::forward_prepared(sample, p, Mode::Train { dropout }, rng)?;
        loss_sum += model::loss(&cache.probs, sample.label);
        if cache.prediction() == sample.label {
            correct += 1;
        }
        model::backward_into(&cache, sample.label, p, grads, scale)?;
    }
    Ok((loss_sum, correct))
}

/// Mini-batch Adam training with early stopping.
///
/// Parameters are initialized from `(seed, init stream)`, the training order
/// is reshuffled every epoch from `(seed, shuffle stream)` and dropout masks
/// come from `(seed, dropout stream)`. After every epoch the validation
/// weighted F1 is measured; the best parameters (the initialization counts as
/// epoch 0) are returned. Training stops after `patience` epochs in a row
/// without a strict improvement, or at `max_epochs`.
pub fn train(manifest: &Manifest, modalities: ModalitySet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let dims = raw_dims(manifest, modalities)?;
    for split in [Split::Train, Split::Val] {
        if manifest.split(split).next().is_none() {
            return Err(Error::MissingSplit(split));
        }
    }

    let mut params =
        FusionParams::init(&dims, cfg.shared_dim, cfg.proj_dim, &mut rng::stream(cfg.seed, rng::STREAM_INIT))?;
    let train_set = prepare_split(manifest, Split::Train, &params)?;
    let val_set = prepare_split(manifest, Split::Val, &params)?;

    let mut shuffle_rng = rng::stream(cfg.seed, rng::STREAM_SHUFFLE);
    let mut dropout_rng = rng::stream(cfg.seed, rng::STREAM_DROPOUT);
    let mut adam = AdamState::new(&params);
    let mut grads = params.zeros_like();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let initial_val_f1 = weighted_f1(&val_set, &params)?;
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        train_accuracy: Vec::new(),
        val_f1: Vec::new(),
        initial_val_f1,
        best_epoch: 0,
        best_val_f1: initial_val_f1,
        stop_reason: StopReason::MaxEpochs,
    };
    let mut best_params = params.clone();
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&PreparedSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (l, c) = batch_gradients(&batch, &params, cfg.dropout, &mut dropout_rng, &mut grads)?;
            loss_sum += l;
            correct += c;
            adam_step(&mut params, &grads, &mut adam, cfg.learning_rate)?;
        }
        let n = train_set.len() as f64;
        history.train_loss.push(loss_sum / n);
        history.train_accuracy.push(correct as f64 / n);

        let f1 = weighted_f1(&val_set, &params)?;
        history.val_f1.push(f1);
        if f1 > history.best_val_f1 {
            history.best_val_f1 = f1;
            history.best_epoch = epoch;
            best_params.clone_from(&params);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                history.stop_reason = StopReason::Patience;
                break;
            }
        }
    }
    log::debug!(
        "trained {} epochs, best epoch {} (val F1 {:.4})",
        history.epochs_run(),
        history.best_epoch,
        history.best_val_f1
    );
    Ok(TrainOutcome { params: best_params, history })
}

/// Outcome of one grid configuration. Failures are kept, not propagated.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRun {
    pub index: usize,
    pub config: TrainConfig,
    pub outcome: Result<TrainHistory>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best_index: usize,
    pub best_config: TrainConfig,
    pub best_params: FusionParams,
    pub runs: Vec<GridRun>,
}

/// Index of the run with the highest best validation F1; ties go to the
/// earliest index. `None` when every run failed.
pub fn select_best(runs: &[GridRun]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    let mut sorted: Vec<&GridRun> = runs.iter().collect();
    sorted.sort_by_key(|r| r.index);
    for run in sorted {
        if let Ok(h) = &run.outcome {
            if best.is_none_or(|(_, f1)| h.best_val_f1 > f1) {
                best = Some((run.index, h.best_val_f1));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Sequential grid search. `observe` sees every run as it finishes, with its
/// parameters when training succeeded.
pub fn grid_search_with<F>(
    manifest: &Manifest,
    modalities: ModalitySet,
    grid: &HyperGrid,
    mut observe: F,
) -> Result<GridResult>
where
    F: FnMut(&GridRun, Option<&FusionParams>),
{
    let configs = grid.configs()?;
    let mut runs = Vec::with_capacity(configs.len());
    let mut best: Option<(usize, f64, FusionParams)> = None;
    for (index, config) in configs.into_iter().enumerate() {
        let result = train(manifest, modalities, &config);
        let (outcome, params) = match result {
            Ok(o) => (Ok(o.history), Some(o.params)),
            Err(e) => {
                log::warn!("grid config {index} failed: {e}");
                (Err(e), None)
            }
        };
        let run = GridRun { index, config, outcome };
        observe(&run, params.as_ref());
        if let (Ok(h), Some(p)) = (&run.outcome, params) {
            if best.as_ref().is_none_or(|(_, f1, _)| h.best_val_f1 > *f1) {
                best = Some((index, h.best_val_f1, p));
            }
        }
        runs.push(run);
    }
    let (best_index, _, best_params) = best.ok_or(Error::AllConfigsFailed)?;
    Ok(GridResult { best_index, best_config: runs[best_index].config, best_params, runs })
}

pub fn grid_search(manifest: &Manifest, modalities: ModalitySet, grid: &HyperGrid) -> Result<GridResult> {
    grid_search_with(manifest, modalities, grid, |_, _| {})
}
