#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use gatefuse_core::{EmbeddingRecord, Label, Manifest, Modality, ModalityEmbedding, ModalitySchema, Split};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gatefuse"))
}

pub fn run_bin(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn gatefuse")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Deterministic pseudo-random values without pulling an RNG into every test.
pub fn lcg_values(seed: u64, n: usize) -> Vec<f32> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 40) as f32 / (1u64 << 24) as f32) * 4.0 - 2.0
        })
        .collect()
}

pub fn record(id: &str, split: Split, label: Label, dims: &[(Modality, usize)], seed: u64) -> EmbeddingRecord {
    let mut embeddings = BTreeMap::new();
    for (k, &(m, d)) in dims.iter().enumerate() {
        embeddings
            .insert(m, ModalityEmbedding { backbone: format!("bb-{m}"), values: lcg_values(seed * 7 + k as u64, d) });
    }
    EmbeddingRecord { id: id.into(), split, label, embeddings }
}

pub fn schema(dims: &[(Modality, usize)]) -> Vec<ModalitySchema> {
    dims.iter().map(|&(modality, dim)| ModalitySchema { modality, dim, backbone: format!("bb-{modality}") }).collect()
}

/// `counts` records per split with alternating labels.
pub fn manifest(dims: &[(Modality, usize)], counts: [usize; 3]) -> Manifest {
    let mut records = Vec::new();
    for (split, n) in [Split::Train, Split::Val, Split::Test].into_iter().zip(counts) {
        for i in 0..n {
            let k = records.len();
            records.push(record(&format!("{split}-{i:05}"), split, Label::from_index(k % 2), dims, k as u64));
        }
    }
    Manifest::from_records("fixture", schema(dims), records).unwrap()
}
