use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use super::params::FusionParams;
use super::Mode;
use crate::data::{EmbeddingRecord, Label};
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::numerics::{l2_normalize, relu, sigmoid, softmax, Vector};
use crate::rng;

/// Smallest probability fed to the logarithm in the loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// A record converted to `f64`, with every model modality present and
/// L2-normalized once up front.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub id: String,
    pub label: Label,
    pub raw: [Option<Vector>; 3],
    pub normalized: [Option<Vector>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    pub partner: Modality,
    pub pre_activation: Vector,
    pub activation: Vector,
    pub output: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalityState {
    pub modality: Modality,
    pub raw: Vector,
    pub normalized: Vector,
    /// `W_m x_m + b_m`, before dropout.
    pub projected: Vector,
    /// Inverted-dropout multipliers (0 or `1/(1-rate)`), training mode only.
    pub dropout_mask: Option<Vector>,
    /// The vector entering the gating stage.
    pub hidden: Vector,
    pub pairs: Vec<PairState>,
    pub alpha: Vector,
    pub gated: Vector,
}

/// Every intermediate of one forward pass, in canonical modality order.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub id: String,
    pub modalities: Vec<ModalityState>,
    pub fused: Vector,
    pub head_pre_activation: Vector,
    pub head_activation: Vector,
    pub head_dropout_mask: Option<Vector>,
    pub head_output: Vector,
    pub logits: Vector,
    pub probs: Vector,
}

impl ForwardCache {
    pub fn modality(&self, m: Modality) -> Option<&ModalityState> {
        self.modalities.iter().find(|s| s.modality == m)
    }

    /// Class 1 iff its probability is strictly larger.
    pub fn prediction(&self) -> Label {
        if self.probs[1] > self.probs[0] {
            Label::Sarcastic
        } else {
            Label::NonSarcastic
        }
    }
}

pub fn prepare(record: &EmbeddingRecord, p: &FusionParams) -> Result<PreparedSample> {
    let mut raw: [Option<Vector>; 3] = [None, None, None];
    let mut normalized: [Option<Vector>; 3] = [None, None, None];
    for m in p.modalities() {
        let emb =
            record.embeddings.get(&m).ok_or_else(|| Error::MissingModality { id: record.id.clone(), modality: m })?;
        let expected = p.raw_dim(m).unwrap_or_default();
        if emb.dim() != expected {
            return Err(Error::DimensionMismatch {
                context: format!("sample {} modality {m}", record.id),
                expected,
                actual: emb.dim(),
            });
        }
        let values: Vector = emb.values.iter().map(|&v| v as f64).collect();
        normalized[m.index()] = Some(l2_normalize(&values));
        raw[m.index()] = Some(values);
    }
    Ok(PreparedSample { id: record.id.clone(), label: record.label, raw, normalized })
}

fn check_dim(context: &str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { context: context.into(), expected, actual });
    }
    Ok(())
}

/// `W_m l2_normalize(x) + b_m`.
pub fn project(x: &[f64], m: Modality, p: &FusionParams) -> Result<Vector> {
    let layer = p.projection(m).ok_or(Error::InactiveModality(m))?;
    check_dim(&format!("projection input for modality {m}"), layer.inputs, x.len())?;
    Ok(layer.apply(&l2_normalize(x)))
}

fn pair_forward(query: &[f64], partner: &[f64], p: &FusionParams) -> (Vector, Vector, Vector) {
    let mut joined = Vec::with_capacity(query.len() + partner.len());
    joined.extend_from_slice(query);
    joined.extend_from_slice(partner);
    let pre = p.gate_hidden.apply(&joined);
    let act: Vector = pre.iter().copied().map(relu).collect();
    let out = p.gate_out.apply(&act);
    (pre, act, out)
}

/// The shared pairwise gating network applied to `(query, partner)`.
pub fn pair_gate(query: &[f64], partner: &[f64], p: &FusionParams) -> Result<Vector> {
    check_dim("gating query", p.shared_dim, query.len())?;
    check_dim("gating partner", p.shared_dim, partner.len())?;
    Ok(pair_forward(query, partner, p).2)
}

fn sum_gates(query: &[f64], outputs: impl Iterator<Item = Vector>) -> Vector {
    let mut sum: Option<Vector> = None;
    for out in outputs {
        match sum.as_mut() {
            None => sum = Some(out),
            Some(acc) => acc.iter_mut().zip(&out).for_each(|(a, o)| *a += o),
        }
    }
    match sum {
        Some(s) => sigmoid(&s),
        None => vec![1.0; query.len()],
    }
}

/// Gate for modality `m` against every other modality in `projected`:
/// `alpha = sigmoid(sum_n pair_gate(h_m, h_n))`, `gated = alpha * h_m`.
/// Without partners the gate is all ones.
pub fn gate_modality(
    m: Modality,
    projected: &BTreeMap<Modality, Vector>,
    p: &FusionParams,
) -> Result<(Vector, Vector)> {
    let query = projected.get(&m).ok_or(Error::ModalityAbsent(m))?;
    check_dim("gating query", p.shared_dim, query.len())?;
    let mut outputs = Vec::new();
    for (n, partner) in projected.iter().filter(|(n, _)| **n != m) {
        check_dim(&format!("gating partner {n}"), p.shared_dim, partner.len())?;
        outputs.push(pair_forward(query, partner, p).2);
    }
    let alpha = sum_gates(query, outputs.into_iter());
    let gated = alpha.iter().zip(query).map(|(a, h)| a * h).collect();
    Ok((alpha, gated))
}

/// Coordinatewise sum in canonical modality order.
pub fn fuse(gated: &BTreeMap<Modality, Vector>) -> Result<Vector> {
    let mut iter = gated.values();
    let mut acc = iter.next().ok_or(Error::EmptyFusion)?.clone();
    for v in iter {
        check_dim("fusion input", acc.len(), v.len())?;
        acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
    }
    Ok(acc)
}

fn dropout_mask<R: RngCore + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vector {
    let keep = 1.0 / (1.0 - rate);
    (0..len).map(|_| if rng::unit_f64(rng) < rate { 0.0 } else { keep }).collect()
}

struct HeadState {
    pre: Vector,
    act: Vector,
    mask: Option<Vector>,
    out: Vector,
    logits: Vector,
    probs: Vector,
}

fn head_forward<R: RngCore + ?Sized>(fused: &[f64], p: &FusionParams, rate: f64, rng: &mut R) -> HeadState {
    let pre = p.head_hidden.apply(fused);
    let act: Vector = pre.iter().copied().map(relu).collect();
    let mask = (rate > 0.0).then(|| dropout_mask(act.len(), rate, rng));
    let out = match &mask {
        Some(mask) => act.iter().zip(mask).map(|(a, k)| a * k).collect(),
        None => act.clone(),
    };
    let logits = p.head_out.apply(&out);
    let probs = softmax(&logits);
    HeadState { pre, act, mask, out, logits, probs }
}

/// Classifier head. `dropout` carries the rate and generator when active.
pub fn classify<R: RngCore + ?Sized>(
    fused: &[f64],
    p: &FusionParams,
    dropout: Option<(f64, &mut R)>,
) -> Result<(Vector, Vector)> {
    check_dim("classifier input", p.shared_dim, fused.len())?;
    let head = match dropout {
        Some((rate, rng)) => head_forward(fused, p, rate, rng),
        // Rate zero never draws from the generator.
        None => head_forward(fused, p, 0.0, &mut rng::stream(0, rng::STREAM_DROPOUT)),
    };
    Ok((head.logits, head.probs))
}

/// Cross-entropy `-ln probs[label]`, with the probability floored at
/// [`PROB_FLOOR`].
pub fn loss(probs: &[f64], label: Label) -> f64 {
    let p = probs[label.index()];
    if p <= 0.0 {
        log::warn!("probability of true class is {p}; clamping to {PROB_FLOOR}");
    }
    -libm::log(p.max(PROB_FLOOR))
}

/// Mean of the per-sample losses, summed in the given order.
pub fn mean_loss<'a>(items: impl IntoIterator<Item = (&'a [f64], Label)>) -> f64 {
    let (sum, n) = items.into_iter().fold((0.0, 0usize), |(s, n), (probs, label)| (s + loss(probs, label), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn forward<R: RngCore + ?Sized>(
    record: &EmbeddingRecord,
    p: &FusionParams,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardCache> {
    forward_prepared(&prepare(record, p)?, p, mode, rng)
}

/// Forward pass over a prepared sample. Dropout masks are drawn per active
/// modality in canonical order, then for the head.
pub fn forward_prepared<R: RngCore + ?Sized>(
    sample: &PreparedSample,
    p: &FusionParams,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardCache> {
    let rate = mode.dropout();
    let mut states = Vec::with_capacity(3);
    for m in p.modalities() {
        let (Some(raw), Some(x)) = (&sample.raw[m.index()], &sample.normalized[m.index()]) else {
            return Err(Error::MissingModality { id: sample.id.clone(), modality: m });
        };
        let layer = p.projection(m).ok_or(Error::InactiveModality(m))?;
        check_dim(&format!("sample {} modality {m}", sample.id), layer.inputs, x.len())?;
        let projected = layer.apply(x);
        let dropout_mask = (rate > 0.0).then(|| dropout_mask(projected.len(), rate, rng));
        let hidden = match &dropout_mask {
            Some(mask) => projected.iter().zip(mask).map(|(h, k)| h * k).collect(),
            None => projected.clone(),
        };
        states.push(ModalityState {
            modality: m,
            raw: raw.clone(),
            normalized: x.clone(),
            projected,
            dropout_mask,
            hidden,
            pairs: Vec::new(),
            alpha: Vec::new(),
            gated: Vec::new(),
        });
    }

    for i in 0..states.len() {
        let mut pairs = Vec::with_capacity(states.len().saturating_sub(1));
        for j in (0..states.len()).filter(|&j| j != i) {
            let (pre, act, out) = pair_forward(&states[i].hidden, &states[j].hidden, p);
            pairs.push(PairState { partner: states[j].modality, pre_activation: pre, activation: act, output: out });
        }
        let alpha = sum_gates(&states[i].hidden, pairs.iter().map(|pair| pair.output.clone()));
        let gated = alpha.iter().zip(&states[i].hidden).map(|(a, h)| a * h).collect();
        let s = &mut states[i];
        s.pairs = pairs;
        s.alpha = alpha;
        s.gated = gated;
    }

    let mut fused = vec![0.0; p.shared_dim];
    for s in &states {
        fused.iter_mut().zip(&s.gated).for_each(|(f, g)| *f += g);
    }

    let head = head_forward(&fused, p, rate, rng);
    Ok(ForwardCache {
        id: sample.id.clone(),
        modalities: states,
        fused,
        head_pre_activation: head.pre,
        head_activation: head.act,
        head_dropout_mask: head.mask,
        head_output: head.out,
        logits: head.logits,
        probs: head.probs,
    })
}
