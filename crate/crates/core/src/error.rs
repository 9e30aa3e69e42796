use alloc::string::String;
use alloc::vec::Vec;

use crate::data::Split;
use crate::modality::Modality;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty sequence")]
    EmptySequence,

    #[error("frame {frame} has dim {actual}, expected {expected}")]
    RaggedSequence { frame: usize, expected: usize, actual: usize },

    #[error("non-finite function value at coordinate {coordinate}")]
    NonFiniteEvaluation { coordinate: usize },

    #[error("{context}: expected dim {expected}, got {actual}")]
    DimensionMismatch { context: String, expected: usize, actual: usize },

    #[error("sample {id}: missing modality {modality}")]
    MissingModality { id: String, modality: Modality },

    #[error("modality {0} is not active in this model")]
    InactiveModality(Modality),

    #[error("modality {0} was not provided")]
    ModalityAbsent(Modality),

    #[error("manifest does not provide modality {0}")]
    ModalityNotInManifest(Modality),

    #[error("modality set must not be empty")]
    NoModalities,

    #[error("nothing to fuse")]
    EmptyFusion,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("non-finite gradient in parameter block {block}")]
    NonFiniteGradient { block: String },

    #[error("parameter shapes disagree in block {block}")]
    ShapeMismatch { block: String },

    #[error("labels and predictions differ in length ({labels} vs {preds})")]
    LengthMismatch { labels: usize, preds: usize },

    #[error("cannot evaluate an empty sample set")]
    EmptyEvaluation,

    #[error("label must be 0 or 1, got {0}")]
    InvalidLabel(i64),

    #[error("unknown split tag {0:?}")]
    UnknownSplit(String),

    #[error("unknown modality {0}")]
    UnknownModality(String),

    #[error("record {id}: {field}: {reason}")]
    Schema { id: String, field: String, reason: String },

    #[error("duplicate id {0}")]
    DuplicateId(String),

    #[error("split counts in header ({declared}) disagree with records ({actual}) for split {split}")]
    SplitCountMismatch { split: Split, declared: usize, actual: usize },

    #[error("dataset has no {0} samples")]
    MissingSplit(Split),

    #[error("hyperparameter grid axis {0} is empty")]
    EmptyGridAxis(&'static str),

    #[error("no grid configuration trained successfully")]
    AllConfigsFailed,

    #[error("{count} ids in split have no prediction, e.g. {sample:?}")]
    MissingPredictions { count: usize, sample: Vec<String> },

    #[error("prediction for unknown id {0}")]
    UnknownPredictionId(String),

    #[error("duplicate prediction for id {0}")]
    DuplicatePredictionId(String),
}
