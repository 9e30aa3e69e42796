//! In-memory dataset: records of pooled per-modality embeddings with labels
//! and split tags, plus schema validation.

mod synth;

pub use synth::synth_incongruity;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::modality::{Modality, ModalitySet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::UnknownSplit(other.to_string())),
        }
    }
}

/// Binary sarcasm label. Class 1 (sarcastic) is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    NonSarcastic = 0,
    Sarcastic = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Label::NonSarcastic
        } else {
            Label::Sarcastic
        }
    }
}

impl TryFrom<i64> for Label {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        match v {
            0 => Ok(Label::NonSarcastic),
            1 => Ok(Label::Sarcastic),
            other => Err(Error::InvalidLabel(other)),
        }
    }
}

/// One modality's pooled embedding. Values are float32 by contract.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityEmbedding {
    pub backbone: String,
    pub values: Vec<f32>,
}

impl ModalityEmbedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub split: Split,
    pub label: Label,
    pub embeddings: BTreeMap<Modality, ModalityEmbedding>,
}

/// Per-modality schema entry shared by all records of a manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModalitySchema {
    pub modality: Modality,
    pub dim: usize,
    pub backbone: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Val => self.val,
            Split::Test => self.test,
        }
    }

    fn bump(&mut self, split: Split) {
        match split {
            Split::Train => self.train += 1,
            Split::Val => self.val += 1,
            Split::Test => self.test += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

impl fmt::Display for SplitCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.train, self.val, self.test)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub dataset: String,
    /// Sorted in canonical modality order, no duplicates.
    pub modalities: Vec<ModalitySchema>,
    pub split_counts: SplitCounts,
}

impl Schema {
    pub fn new(
        dataset: impl Into<String>,
        mut modalities: Vec<ModalitySchema>,
        split_counts: SplitCounts,
    ) -> Result<Self> {
        modalities.sort_by_key(|m| m.modality);
        for pair in modalities.windows(2) {
            if pair[0].modality == pair[1].modality {
                return Err(Error::InvalidConfig(format!("schema lists modality {} twice", pair[0].modality)));
            }
        }
        if let Some(bad) = modalities.iter().find(|m| m.dim == 0) {
            return Err(Error::InvalidConfig(format!("schema dim for modality {} must be positive", bad.modality)));
        }
        Ok(Self { dataset: dataset.into(), modalities, split_counts })
    }

    pub fn modality_set(&self) -> ModalitySet {
        self.modalities.iter().map(|m| m.modality).collect()
    }

    pub fn get(&self, m: Modality) -> Option<&ModalitySchema> {
        self.modalities.iter().find(|s| s.modality == m)
    }

    pub fn dim(&self, m: Modality) -> Option<usize> {
        self.get(m).map(|s| s.dim)
    }

    /// Checks a single record against the schema: exactly the schema's
    /// modalities, matching dims and backbones, finite values.
    pub fn check_record(&self, record: &EmbeddingRecord) -> Result<()> {
        let fail = |field: String, reason: String| Error::Schema { id: record.id.clone(), field, reason };
        if record.id.is_empty() {
            return Err(fail("id".into(), "must not be empty".into()));
        }
        for spec in &self.modalities {
            let m = spec.modality;
            let Some(emb) = record.embeddings.get(&m) else {
                return Err(fail(format!("embeddings.{m}"), "missing modality required by schema".into()));
            };
            if emb.dim() != spec.dim {
                return Err(fail(format!("embeddings.{m}.dim"), format!("expected {}, got {}", spec.dim, emb.dim())));
            }
            if emb.backbone != spec.backbone {
                return Err(fail(
                    format!("embeddings.{m}.backbone"),
                    format!("expected {:?}, got {:?}", spec.backbone, emb.backbone),
                ));
            }
            if let Some(j) = emb.values.iter().position(|x| !x.is_finite()) {
                return Err(fail(format!("embeddings.{m}.values[{j}]"), "non-finite value".into()));
            }
        }
        if let Some(extra) = record.embeddings.keys().find(|m| self.get(**m).is_none()) {
            return Err(fail(format!("embeddings.{extra}"), "modality not declared in schema".into()));
        }
        Ok(())
    }
}

/// Incremental validator used by both [`Manifest::new`] and file loaders.
#[derive(Debug)]
pub struct ManifestBuilder {
    schema: Schema,
    records: Vec<EmbeddingRecord>,
    ids: BTreeSet<String>,
    counts: SplitCounts,
}

impl ManifestBuilder {
    pub fn new(schema: Schema) -> Self {
        Self { schema, records: Vec::new(), ids: BTreeSet::new(), counts: SplitCounts::default() }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn push(&mut self, record: EmbeddingRecord) -> Result<()> {
        self.schema.check_record(&record)?;
        if !self.ids.insert(record.id.clone()) {
            return Err(Error::DuplicateId(record.id));
        }
        self.counts.bump(record.split);
        self.records.push(record);
        Ok(())
    }

    /// Verifies the declared split counts against the records pushed.
    pub fn finish(self) -> Result<Manifest> {
        for split in Split::ALL {
            let (declared, actual) = (self.schema.split_counts.get(split), self.counts.get(split));
            if declared != actual {
                return Err(Error::SplitCountMismatch { split, declared, actual });
            }
        }
        Ok(Manifest { schema: self.schema, records: self.records })
    }
}

/// A validated dataset. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    schema: Schema,
    records: Vec<EmbeddingRecord>,
}

impl Manifest {
    pub fn new(schema: Schema, records: Vec<EmbeddingRecord>) -> Result<Self> {
        let mut builder = ManifestBuilder::new(schema);
        for r in records {
            builder.push(r)?;
        }
        builder.finish()
    }

    /// Builds a manifest whose header split counts are taken from the records.
    pub fn from_records(
        dataset: impl Into<String>,
        modalities: Vec<ModalitySchema>,
        records: Vec<EmbeddingRecord>,
    ) -> Result<Self> {
        let mut counts = SplitCounts::default();
        records.iter().for_each(|r| counts.bump(r.split));
        Manifest::new(Schema::new(dataset, modalities, counts)?, records)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn split_counts(&self) -> SplitCounts {
        self.schema.split_counts
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &EmbeddingRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn schema() -> Vec<ModalitySchema> {
        vec![
            ModalitySchema { modality: Modality::Audio, dim: 2, backbone: "wav2vec2-base".into() },
            ModalitySchema { modality: Modality::Text, dim: 3, backbone: "bert-base".into() },
        ]
    }

    fn record(id: &str, split: Split, t: Vec<f32>, a: Vec<f32>) -> EmbeddingRecord {
        let mut embeddings = BTreeMap::new();
        embeddings.insert(Modality::Text, ModalityEmbedding { backbone: "bert-base".into(), values: t });
        embeddings.insert(Modality::Audio, ModalityEmbedding { backbone: "wav2vec2-base".into(), values: a });
        EmbeddingRecord { id: id.into(), split, label: Label::Sarcastic, embeddings }
    }

    #[test]
    fn schema_is_sorted_canonically() {
        let s = Schema::new("d", schema(), SplitCounts::default()).unwrap();
        assert_eq!(s.modalities[0].modality, Modality::Text);
        assert_eq!(s.dim(Modality::Audio), Some(2));
        assert_eq!(s.dim(Modality::Vision), None);
    }

    #[test]
    fn counts_come_from_records() {
        let m = Manifest::from_records(
            "d",
            schema(),
            vec![
                record("a", Split::Train, vec![1.0; 3], vec![0.0; 2]),
                record("b", Split::Val, vec![1.0; 3], vec![0.0; 2]),
                record("c", Split::Train, vec![1.0; 3], vec![0.0; 2]),
            ],
        )
        .unwrap();
        assert_eq!(m.split_counts(), SplitCounts { train: 2, val: 1, test: 0 });
        assert_eq!(m.split(Split::Train).count(), 2);
    }

    #[test]
    fn rejects_bad_records() {
        let mut missing = record("x1", Split::Train, vec![1.0; 3], vec![0.0; 2]);
        missing.embeddings.remove(&Modality::Audio);
        let err = Manifest::from_records("d", schema(), vec![missing]).unwrap_err();
        assert!(matches!(err, Error::Schema { ref id, .. } if id == "x1"), "{err}");

        let wrong_dim = record("x2", Split::Train, vec![1.0; 4], vec![0.0; 2]);
        assert!(matches!(
            Manifest::from_records("d", schema(), vec![wrong_dim]),
            Err(Error::Schema { field, .. }) if field == "embeddings.t.dim"
        ));

        let nan = record("x3", Split::Train, vec![1.0, f32::NAN, 0.0], vec![0.0; 2]);
        assert!(matches!(
            Manifest::from_records("d", schema(), vec![nan]),
            Err(Error::Schema { field, .. }) if field == "embeddings.t.values[1]"
        ));

        let dup = vec![
            record("same", Split::Train, vec![1.0; 3], vec![0.0; 2]),
            record("same", Split::Test, vec![1.0; 3], vec![0.0; 2]),
        ];
        assert_eq!(Manifest::from_records("d", schema(), dup), Err(Error::DuplicateId("same".into())));
    }

    #[test]
    fn declared_counts_must_match() {
        let s = Schema::new("d", schema(), SplitCounts { train: 2, val: 0, test: 0 }).unwrap();
        let err = Manifest::new(s, vec![record("a", Split::Train, vec![1.0; 3], vec![0.0; 2])]).unwrap_err();
        assert_eq!(err, Error::SplitCountMismatch { split: Split::Train, declared: 2, actual: 1 });
    }

    #[test]
    fn label_and_split_parsing() {
        assert_eq!(Label::try_from(1), Ok(Label::Sarcastic));
        assert_eq!(Label::try_from(2), Err(Error::InvalidLabel(2)));
        assert_eq!("val".parse::<Split>(), Ok(Split::Val));
        assert!("dev".parse::<Split>().is_err());
    }
}
