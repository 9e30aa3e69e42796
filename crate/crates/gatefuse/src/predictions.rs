//! Prediction files: one JSON object per line, `{"id": ..., "pred": 0|1}`
//! with an optional `"score"`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use gatefuse_core::metrics::Prediction;
use gatefuse_core::Label;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionWire {
    id: String,
    pred: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

pub fn read_predictions<R: Read>(reader: R, path: &Path) -> Result<Vec<Prediction>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(Error::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: PredictionWire = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let pred = Label::try_from(wire.pred).map_err(|source| Error::Invalid {
            path: path.to_path_buf(),
            line: line_no,
            source,
        })?;
        out.push(Prediction { id: wire.id, pred, score: wire.score });
    }
    Ok(out)
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let path = path.as_ref();
    read_predictions(File::open(path).map_err(Error::io(path))?, path)
}

pub fn write_predictions<W: Write>(preds: &[Prediction], mut w: W) -> std::io::Result<()> {
    for p in preds {
        let wire = PredictionWire { id: p.id.clone(), pred: p.pred.index() as i64, score: p.score };
        serde_json::to_writer(&mut w, &wire)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_predictions(preds: &[Prediction], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(Error::io(path))?;
    write_predictions(preds, BufWriter::new(file)).map_err(Error::io(path))
}
