//! Analytic gradients of the cross-entropy loss through the whole network.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::forward::ForwardCache;
use super::params::FusionParams;
use crate::data::Label;
use crate::error::{Error, Result};

/// Gradient of `loss(cache.probs, label)` with respect to every parameter.
pub fn backward(cache: &ForwardCache, label: Label, p: &FusionParams) -> Result<FusionParams> {
    let mut grads = p.zeros_like();
    backward_into(cache, label, p, &mut grads, 1.0)?;
    Ok(grads)
}

fn mask_in_place(v: &mut [f64], mask: Option<&Vec<f64>>) {
    if let Some(mask) = mask {
        v.iter_mut().zip(mask).for_each(|(x, k)| *x *= k);
    }
}

/// Adds `scale` times the gradient into `grads`.
pub fn backward_into(
    cache: &ForwardCache,
    label: Label,
    p: &FusionParams,
    grads: &mut FusionParams,
    scale: f64,
) -> Result<()> {
    if !p.same_shape(grads) {
        return Err(Error::ShapeMismatch { block: "gradient container".into() });
    }
    let active: Vec<_> = p.modalities().iter().collect();
    let cached: Vec<_> = cache.modalities.iter().map(|s| s.modality).collect();
    if active != cached || cache.fused.len() != p.shared_dim || cache.head_activation.len() != p.proj_dim {
        return Err(Error::ShapeMismatch { block: "forward cache".into() });
    }
    for s in &cache.modalities {
        if s.normalized.len() != p.raw_dim(s.modality).unwrap_or_default() {
            return Err(Error::ShapeMismatch { block: format!("proj.{}", s.modality) });
        }
    }

    // Softmax + cross-entropy.
    let mut d_logits = cache.probs.clone();
    d_logits[label.index()] -= 1.0;
    d_logits.iter_mut().for_each(|d| *d *= scale);

    grads.head_out.accumulate(&d_logits, &cache.head_output);
    let mut d_hidden = p.head_out.apply_transpose(&d_logits);
    mask_in_place(&mut d_hidden, cache.head_dropout_mask.as_ref());
    d_hidden.iter_mut().zip(&cache.head_pre_activation).for_each(|(d, z)| {
        if *z <= 0.0 {
            *d = 0.0;
        }
    });
    grads.head_hidden.accumulate(&d_hidden, &cache.fused);
    let d_fused = p.head_hidden.apply_transpose(&d_hidden);

    // fused = sum_m alpha_m * h_m. Each h_m also feeds every pair gate it
    // takes part in, as query or as partner.
    let shared = p.shared_dim;
    let mut d_h: Vec<Vec<f64>> = cache.modalities.iter().map(|_| vec![0.0; shared]).collect();
    for (i, s) in cache.modalities.iter().enumerate() {
        d_h[i].iter_mut().zip(&d_fused).zip(&s.alpha).for_each(|((dh, df), a)| *dh += df * a);
        if s.pairs.is_empty() {
            continue;
        }
        // d alpha, then through the sigmoid to the summed gate logits.
        let d_sum: Vec<f64> =
            d_fused.iter().zip(&s.hidden).zip(&s.alpha).map(|((df, h), a)| df * h * a * (1.0 - a)).collect();
        for pair in &s.pairs {
            let j = cache
                .modalities
                .iter()
                .position(|o| o.modality == pair.partner)
                .ok_or(Error::ShapeMismatch { block: "forward cache".into() })?;
            grads.gate_out.accumulate(&d_sum, &pair.activation);
            let mut d_pre = p.gate_out.apply_transpose(&d_sum);
            d_pre.iter_mut().zip(&pair.pre_activation).for_each(|(d, z)| {
                if *z <= 0.0 {
                    *d = 0.0;
                }
            });
            let mut joined = Vec::with_capacity(2 * shared);
            joined.extend_from_slice(&s.hidden);
            joined.extend_from_slice(&cache.modalities[j].hidden);
            grads.gate_hidden.accumulate(&d_pre, &joined);
            let d_joined = p.gate_hidden.apply_transpose(&d_pre);
            d_h[i].iter_mut().zip(&d_joined[..shared]).for_each(|(a, b)| *a += b);
            d_h[j].iter_mut().zip(&d_joined[shared..]).for_each(|(a, b)| *a += b);
        }
    }

    for (s, mut d) in cache.modalities.iter().zip(d_h) {
        mask_in_place(&mut d, s.dropout_mask.as_ref());
        let layer =
            grads.projection_mut(s.modality).ok_or(Error::ShapeMismatch { block: format!("proj.{}", s.modality) })?;
        layer.accumulate(&d, &s.normalized);
    }
    Ok(())
}
