//! Line-delimited JSON manifest.
//!
//! Line 1 is the schema header:
//!
//! ```text
//! {"dataset":"mustard++","modalities":[{"modality":"t","dim":768,"backbone":"bert-base"}],
//!  "split_counts":{"train":841,"val":180,"test":181}}
//! ```
//!
//! Every following line is one record:
//!
//! ```text
//! {"id":"1_60","split":"train","label":1,"embeddings":{"t":{"backbone":"bert-base","dim":768,"values":[...]}}}
//! ```
//!
//! UTF-8, LF line endings. Values are float32 and written in the shortest
//! decimal form that parses back to the same float32, so saving is canonical.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use gatefuse_core::data::ManifestBuilder;
use gatefuse_core::{
    EmbeddingRecord, Label, Manifest, Modality, ModalityEmbedding, ModalitySchema, Schema, Split, SplitCounts,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderWire {
    dataset: String,
    modalities: Vec<ModalityWire>,
    split_counts: SplitCounts,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModalityWire {
    modality: Modality,
    dim: usize,
    backbone: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingWire {
    backbone: String,
    dim: usize,
    values: Vec<f32>,
}

/// Keys in canonical order t, a, v.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingsWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<EmbeddingWire>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<EmbeddingWire>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v: Option<EmbeddingWire>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordWire {
    id: String,
    split: String,
    label: i64,
    embeddings: EmbeddingsWire,
}

impl RecordWire {
    fn from_record(r: &EmbeddingRecord) -> Self {
        let mut embeddings = EmbeddingsWire::default();
        for (m, e) in &r.embeddings {
            let wire = Some(EmbeddingWire { backbone: e.backbone.clone(), dim: e.dim(), values: e.values.clone() });
            match m {
                Modality::Text => embeddings.t = wire,
                Modality::Audio => embeddings.a = wire,
                Modality::Vision => embeddings.v = wire,
            }
        }
        RecordWire { id: r.id.clone(), split: r.split.to_string(), label: r.label.index() as i64, embeddings }
    }

    fn into_record(self) -> gatefuse_core::Result<EmbeddingRecord> {
        let split: Split = self.split.parse()?;
        let label = Label::try_from(self.label)?;
        let mut embeddings = BTreeMap::new();
        let slots = [
            (Modality::Text, self.embeddings.t),
            (Modality::Audio, self.embeddings.a),
            (Modality::Vision, self.embeddings.v),
        ];
        for (m, wire) in slots {
            let Some(w) = wire else { continue };
            if w.dim != w.values.len() {
                return Err(gatefuse_core::Error::Schema {
                    id: self.id.clone(),
                    field: format!("embeddings.{m}.dim"),
                    reason: format!("declares {} but has {} values", w.dim, w.values.len()),
                });
            }
            embeddings.insert(m, ModalityEmbedding { backbone: w.backbone, values: w.values });
        }
        Ok(EmbeddingRecord { id: self.id, split, label, embeddings })
    }
}

/// Writes the canonical serialization.
pub fn write_manifest<W: Write>(m: &Manifest, mut w: W) -> std::io::Result<()> {
    let schema = m.schema();
    let header = HeaderWire {
        dataset: schema.dataset.clone(),
        modalities: schema
            .modalities
            .iter()
            .map(|s| ModalityWire { modality: s.modality, dim: s.dim, backbone: s.backbone.clone() })
            .collect(),
        split_counts: schema.split_counts,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for r in m.records() {
        serde_json::to_writer(&mut w, &RecordWire::from_record(r))?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_manifest(m: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(Error::io(path))?;
    write_manifest(m, BufWriter::new(file)).map_err(Error::io(path))
}

/// Parses and validates a manifest. `path` only labels diagnostics.
pub fn read_manifest<R: Read>(reader: R, path: &Path) -> Result<Manifest> {
    let parse_err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut lines = BufReader::new(reader).lines();
    let header_line = match lines.next() {
        Some(l) => l.map_err(Error::io(path))?,
        None => return Err(parse_err(1, "empty file: missing schema header".into())),
    };
    let header: HeaderWire =
        serde_json::from_str(&header_line).map_err(|e| parse_err(1, format!("schema header: {e}")))?;
    let modalities = header
        .modalities
        .into_iter()
        .map(|w| ModalitySchema { modality: w.modality, dim: w.dim, backbone: w.backbone })
        .collect();
    let schema = Schema::new(header.dataset, modalities, header.split_counts).map_err(|source| Error::Invalid {
        path: path.to_path_buf(),
        line: 1,
        source,
    })?;

    let mut builder = ManifestBuilder::new(schema);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(Error::io(path))?;
        let wire: RecordWire = serde_json::from_str(&line).map_err(|e| parse_err(line_no, e.to_string()))?;
        let invalid = |source| Error::Invalid { path: path.to_path_buf(), line: line_no, source };
        let record = wire.into_record().map_err(invalid)?;
        builder.push(record).map_err(invalid)?;
    }
    builder.finish().map_err(|source| Error::Invalid { path: path.to_path_buf(), line: 1, source })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let file = File::open(path).map_err(Error::io(path))?;
    read_manifest(file, path)
}
