//! Synthetic cross-modal incongruity task.
//!
//! Every sample draws a cue bit per modality (text, audio). Coordinate 0 of
//! each modality carries `cue * snr` plus unit Gaussian noise; all other
//! coordinates are pure noise. The label is 1 exactly when the two cues
//! disagree, so neither modality alone says anything about the label.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::{EmbeddingRecord, Label, Manifest, ModalityEmbedding, ModalitySchema, Split};
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::rng::{self, PolarGaussian};

pub const SYNTH_BACKBONE: &str = "synthetic";
pub const SYNTH_DATASET: &str = "synth-incongruity";

const CUE_MODALITIES: [Modality; 2] = [Modality::Text, Modality::Audio];

/// Generates `n_train + n_val + n_test` samples with modalities `t` and `a`.
///
/// Draw order per sample: text cue, audio cue, then `dim` text coordinates and
/// `dim` audio coordinates. Samples are emitted train, val, test.
pub fn synth_incongruity(
    n_train: usize,
    n_val: usize,
    n_test: usize,
    dim: usize,
    snr: f64,
    seed: u64,
) -> Result<Manifest> {
    generate(n_train, n_val, n_test, dim, snr, seed).map(|(m, _)| m)
}

pub(crate) fn generate(
    n_train: usize,
    n_val: usize,
    n_test: usize,
    dim: usize,
    snr: f64,
    seed: u64,
) -> Result<(Manifest, Vec<[bool; 2]>)> {
    if dim < 2 {
        return Err(Error::InvalidConfig(format!("synthetic dim must be at least 2, got {dim}")));
    }
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::InvalidConfig("synthetic split sizes must be at least 1".into()));
    }
    if !snr.is_finite() {
        return Err(Error::InvalidConfig(format!("snr must be finite, got {snr}")));
    }
    let mut rng = rng::stream(seed, rng::STREAM_SYNTH);
    let mut gauss = PolarGaussian::new();
    let total = n_train + n_val + n_test;
    let mut records = Vec::with_capacity(total);
    let mut cues = Vec::with_capacity(total);

    let splits = [(Split::Train, n_train), (Split::Val, n_val), (Split::Test, n_test)];
    let mut index = 0usize;
    for (split, count) in splits {
        for _ in 0..count {
            let bits = [rng::unit_f64(&mut rng) < 0.5, rng::unit_f64(&mut rng) < 0.5];
            let mut embeddings = BTreeMap::new();
            for (m, bit) in CUE_MODALITIES.into_iter().zip(bits) {
                let cue = if bit { 1.0 } else { -1.0 };
                let mut values = vec![0f32; dim];
                for (j, v) in values.iter_mut().enumerate() {
                    let noise = gauss.sample(&mut rng);
                    let x = if j == 0 { cue * snr + noise } else { noise };
                    *v = x as f32;
                }
                embeddings.insert(m, ModalityEmbedding { backbone: String::from(SYNTH_BACKBONE), values });
            }
            let label = if bits[0] != bits[1] { Label::Sarcastic } else { Label::NonSarcastic };
            records.push(EmbeddingRecord { id: format!("synth-{index:05}"), split, label, embeddings });
            cues.push(bits);
            index += 1;
        }
    }
    let schema = CUE_MODALITIES
        .into_iter()
        .map(|modality| ModalitySchema { modality, dim, backbone: String::from(SYNTH_BACKBONE) })
        .collect();
    Ok((Manifest::from_records(SYNTH_DATASET, schema, records)?, cues))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::l2_normalize;

    #[test]
    fn labels_are_xor_of_cues() {
        let (m, cues) = generate(50, 10, 10, 4, 2.0, 3).unwrap();
        assert_eq!(m.len(), 70);
        for (r, bits) in m.records().iter().zip(&cues) {
            assert_eq!(r.label == Label::Sarcastic, bits[0] != bits[1]);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let a = synth_incongruity(20, 5, 5, 8, 3.0, 42).unwrap();
        let b = synth_incongruity(20, 5, 5, 8, 3.0, 42).unwrap();
        let c = synth_incongruity(20, 5, 5, 8, 3.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn class_balance_within_three_sigma() {
        // 3 sigma of a fair binomial at n = 2000 is 3 * sqrt(0.25 / 2000) = 3.35 points.
        let m = synth_incongruity(2000, 1, 1, 2, 3.0, 7).unwrap();
        let pos = m.split(Split::Train).filter(|r| r.label == Label::Sarcastic).count();
        let frac = pos as f64 / 2000.0;
        assert!((frac - 0.5).abs() <= 0.03, "positive fraction {frac}");
    }

    #[test]
    fn rejects_degenerate_arguments() {
        assert!(synth_incongruity(1, 1, 1, 1, 3.0, 0).is_err());
        assert!(synth_incongruity(0, 1, 1, 4, 3.0, 0).is_err());
    }

    /// Plain logistic regression on one modality, trained by full-batch
    /// gradient descent. Independent of the fusion model.
    fn logistic_baseline_accuracy(m: &Manifest, modality: Modality) -> f64 {
        let features = |r: &EmbeddingRecord| {
            let raw: Vec<f64> = r.embeddings[&modality].values.iter().map(|&x| x as f64).collect();
            l2_normalize(&raw)
        };
        let train: Vec<(Vec<f64>, f64)> =
            m.split(Split::Train).map(|r| (features(r), r.label.index() as f64)).collect();
        let dim = train[0].0.len();
        let mut w = vec![0.0; dim];
        let mut b = 0.0;
        for _ in 0..300 {
            let mut gw = vec![0.0; dim];
            let mut gb = 0.0;
            for (x, y) in &train {
                let z: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
                let p = 1.0 / (1.0 + (-z).exp());
                for (g, xi) in gw.iter_mut().zip(x) {
                    *g += (p - y) * xi;
                }
                gb += p - y;
            }
            let n = train.len() as f64;
            for (wi, g) in w.iter_mut().zip(&gw) {
                *wi -= 0.5 * g / n;
            }
            b -= 0.5 * gb / n;
        }
        let test: Vec<&EmbeddingRecord> = m.split(Split::Test).collect();
        let correct = test
            .iter()
            .filter(|r| {
                let x = features(r);
                let z: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
                (z > 0.0) == (r.label == Label::Sarcastic)
            })
            .count();
        correct as f64 / test.len() as f64
    }

    #[test]
    fn unimodal_linear_baseline_is_at_chance() {
        let m = synth_incongruity(2000, 500, 500, 16, 3.0, 7).unwrap();
        for modality in CUE_MODALITIES {
            let acc = logistic_baseline_accuracy(&m, modality);
            assert!(acc <= 0.60, "{modality}: {acc}");
        }
    }
}
