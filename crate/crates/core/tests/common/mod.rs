#![allow(dead_code)]

use std::collections::BTreeMap;

use gatefuse_core::model::FusionParams;
use gatefuse_core::rng;
use gatefuse_core::{EmbeddingRecord, Label, Modality, ModalityEmbedding, Split};
use rand::RngCore;

pub const TINY_DIMS: [(Modality, usize); 3] = [(Modality::Text, 5), (Modality::Audio, 7), (Modality::Vision, 3)];

pub fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng::unit_f64(rng)
}

/// Random parameters, biases included, so every code path is exercised.
pub fn random_params(dims: &[(Modality, usize)], shared: usize, proj: usize, seed: u64) -> FusionParams {
    let mut r = rng::stream(seed, 17);
    let mut p = FusionParams::zeros(dims, shared, proj).unwrap();
    let flat: Vec<f64> = (0..p.parameter_count()).map(|_| uniform(&mut r, -0.8, 0.8)).collect();
    p.set_flat(&flat).unwrap();
    p
}

pub fn random_record(id: &str, dims: &[(Modality, usize)], label: Label, rng: &mut impl RngCore) -> EmbeddingRecord {
    let mut embeddings = BTreeMap::new();
    for &(m, d) in dims {
        let values = (0..d).map(|_| uniform(rng, -2.0, 2.0) as f32).collect();
        embeddings.insert(m, ModalityEmbedding { backbone: "test".into(), values });
    }
    EmbeddingRecord { id: id.into(), split: Split::Train, label, embeddings }
}

/// Text (dim 4) and audio (dim 3) features; the label is the sign of the
/// first text coordinate, so the task is linearly separable from text.
pub fn separable_manifest(n_train: usize, n_val: usize, seed: u64) -> gatefuse_core::Manifest {
    use gatefuse_core::ModalitySchema;
    let mut r = rng::stream(seed, 30);
    let dims = [(Modality::Text, 4), (Modality::Audio, 3)];
    let mut records = Vec::new();
    for i in 0..n_train + n_val {
        let mut rec = random_record(&format!("s{i:04}"), &dims, Label::NonSarcastic, &mut r);
        let t = &mut rec.embeddings.get_mut(&Modality::Text).unwrap().values;
        if t[0].abs() < 0.2 {
            t[0] = if t[0] < 0.0 { -0.2 } else { 0.2 };
        }
        rec.label = if t[0] > 0.0 { Label::Sarcastic } else { Label::NonSarcastic };
        rec.split = if i < n_train { Split::Train } else { Split::Val };
        records.push(rec);
    }
    let schema =
        dims.iter().map(|&(modality, dim)| ModalitySchema { modality, dim, backbone: "test".into() }).collect();
    gatefuse_core::Manifest::from_records("separable", schema, records).unwrap()
}
