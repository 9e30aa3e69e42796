use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::modality::{Modality, ModalitySet};
use crate::rng;

/// Affine map `y = W x + b` with `W` stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weight: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: RngCore + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = libm::sqrt(6.0 / (inputs + outputs) as f64);
        let weight = (0..inputs * outputs).map(|_| rng::symmetric(rng, limit)).collect();
        Self { inputs, outputs, weight, bias: vec![0.0; outputs] }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        self.weight
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + w * xi))
            .collect()
    }

    /// `W^T dy`.
    pub fn apply_transpose(&self, dy: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.inputs];
        for (row, d) in self.weight.chunks_exact(self.inputs).zip(dy) {
            if *d == 0.0 {
                continue;
            }
            for (o, w) in dx.iter_mut().zip(row) {
                *o += w * d;
            }
        }
        dx
    }

    /// Adds `dy x^T` to the weight block and `dy` to the bias.
    pub fn accumulate(&mut self, dy: &[f64], x: &[f64]) {
        for ((row, b), d) in self.weight.chunks_exact_mut(self.inputs).zip(&mut self.bias).zip(dy) {
            *b += d;
            if *d == 0.0 {
                continue;
            }
            for (w, xi) in row.iter_mut().zip(x) {
                *w += d * xi;
            }
        }
    }

    fn zeros_like(&self) -> Self {
        Dense::zeros(self.inputs, self.outputs)
    }
}

pub struct Block<'a> {
    pub name: String,
    pub values: &'a [f64],
}

pub struct BlockMut<'a> {
    pub name: String,
    pub values: &'a mut [f64],
}

/// All learnable parameters. Also used as the gradient container, since a
/// gradient has exactly the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub shared_dim: usize,
    pub proj_dim: usize,
    /// Indexed by [`Modality::index`]; `None` for inactive modalities.
    pub projections: [Option<Dense>; 3],
    /// `2 * shared_dim -> shared_dim`, shared by every ordered modality pair.
    pub gate_hidden: Dense,
    /// `shared_dim -> shared_dim`.
    pub gate_out: Dense,
    /// `shared_dim -> proj_dim`.
    pub head_hidden: Dense,
    /// `proj_dim -> 2`.
    pub head_out: Dense,
}

impl FusionParams {
    /// All-zero parameters for the given `(modality, raw dim)` pairs.
    pub fn zeros(raw_dims: &[(Modality, usize)], shared_dim: usize, proj_dim: usize) -> Result<Self> {
        Self::build(raw_dims, shared_dim, proj_dim, Dense::zeros)
    }

    /// Seeded initialization: projections in canonical order, then the gating
    /// layers, then the head.
    pub fn init<R: RngCore + ?Sized>(
        raw_dims: &[(Modality, usize)],
        shared_dim: usize,
        proj_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Self::build(raw_dims, shared_dim, proj_dim, |i, o| Dense::glorot(i, o, rng))
    }

    fn build(
        raw_dims: &[(Modality, usize)],
        shared_dim: usize,
        proj_dim: usize,
        mut layer: impl FnMut(usize, usize) -> Dense,
    ) -> Result<Self> {
        if shared_dim == 0 || proj_dim == 0 {
            return Err(Error::InvalidConfig(format!(
                "shared_dim and proj_dim must be positive (got {shared_dim}, {proj_dim})"
            )));
        }
        let mut dims: [Option<usize>; 3] = [None; 3];
        for &(m, d) in raw_dims {
            if dims[m.index()].replace(d).is_some() {
                return Err(Error::InvalidConfig(format!("modality {m} given twice")));
            }
            if d == 0 {
                return Err(Error::InvalidConfig(format!("raw dim for modality {m} must be positive")));
            }
        }
        if dims.iter().all(Option::is_none) {
            return Err(Error::NoModalities);
        }
        let mut projections: [Option<Dense>; 3] = [None, None, None];
        for m in Modality::ALL {
            if let Some(d) = dims[m.index()] {
                projections[m.index()] = Some(layer(d, shared_dim));
            }
        }
        let gate_hidden = layer(2 * shared_dim, shared_dim);
        let gate_out = layer(shared_dim, shared_dim);
        let head_hidden = layer(shared_dim, proj_dim);
        let head_out = layer(proj_dim, 2);
        Ok(Self { shared_dim, proj_dim, projections, gate_hidden, gate_out, head_hidden, head_out })
    }

    pub fn modalities(&self) -> ModalitySet {
        Modality::ALL.into_iter().filter(|m| self.projections[m.index()].is_some()).collect()
    }

    pub fn raw_dim(&self, m: Modality) -> Option<usize> {
        self.projection(m).map(|d| d.inputs)
    }

    pub fn raw_dims(&self) -> Vec<(Modality, usize)> {
        self.modalities().iter().map(|m| (m, self.projections[m.index()].as_ref().unwrap().inputs)).collect()
    }

    pub fn projection(&self, m: Modality) -> Option<&Dense> {
        self.projections[m.index()].as_ref()
    }

    pub fn projection_mut(&mut self, m: Modality) -> Option<&mut Dense> {
        self.projections[m.index()].as_mut()
    }

    /// Zero-valued container with the same shape.
    pub fn zeros_like(&self) -> Self {
        Self {
            shared_dim: self.shared_dim,
            proj_dim: self.proj_dim,
            projections: self.projections.clone().map(|p| p.as_ref().map(Dense::zeros_like)),
            gate_hidden: self.gate_hidden.zeros_like(),
            gate_out: self.gate_out.zeros_like(),
            head_hidden: self.head_hidden.zeros_like(),
            head_out: self.head_out.zeros_like(),
        }
    }

    fn layers(&self) -> Vec<(String, &Dense)> {
        let mut out = Vec::with_capacity(7);
        for m in Modality::ALL {
            if let Some(d) = &self.projections[m.index()] {
                out.push((format!("proj.{m}"), d));
            }
        }
        out.push(("gate.hidden".into(), &self.gate_hidden));
        out.push(("gate.out".into(), &self.gate_out));
        out.push(("head.hidden".into(), &self.head_hidden));
        out.push(("head.out".into(), &self.head_out));
        out
    }

    fn layers_mut(&mut self) -> Vec<(String, &mut Dense)> {
        let mut out = Vec::with_capacity(7);
        for (m, p) in Modality::ALL.into_iter().zip(self.projections.iter_mut()) {
            if let Some(d) = p {
                out.push((format!("proj.{m}"), d));
            }
        }
        out.push(("gate.hidden".into(), &mut self.gate_hidden));
        out.push(("gate.out".into(), &mut self.gate_out));
        out.push(("head.hidden".into(), &mut self.head_hidden));
        out.push(("head.out".into(), &mut self.head_out));
        out
    }

    /// Parameter blocks in canonical order: per active modality projection
    /// weight and bias, then gate hidden/out, then head hidden/out.
    pub fn blocks(&self) -> Vec<Block<'_>> {
        let mut out = Vec::new();
        for (name, d) in self.layers() {
            out.push(Block { name: format!("{name}.weight"), values: &d.weight });
            out.push(Block { name: format!("{name}.bias"), values: &d.bias });
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<BlockMut<'_>> {
        let mut out = Vec::new();
        for (name, d) in self.layers_mut() {
            out.push(BlockMut { name: format!("{name}.weight"), values: &mut d.weight });
            out.push(BlockMut { name: format!("{name}.bias"), values: &mut d.bias });
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|b| b.values.len()).sum()
    }

    /// Same dims and active modalities.
    pub fn same_shape(&self, other: &FusionParams) -> bool {
        self.shared_dim == other.shared_dim && self.proj_dim == other.proj_dim && self.raw_dims() == other.raw_dims()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks().iter().flat_map(|b| b.values.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.parameter_count();
        if flat.len() != n {
            return Err(Error::DimensionMismatch {
                context: "flat parameter vector".into(),
                expected: n,
                actual: flat.len(),
            });
        }
        let mut offset = 0;
        for b in self.blocks_mut() {
            let len = b.values.len();
            b.values.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    /// Multiplies every entry by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for b in self.blocks_mut() {
            b.values.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Rounds every entry through `f32`, the checkpoint precision.
    pub fn quantize_f32(&mut self) {
        for b in self.blocks_mut() {
            b.values.iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn dims() -> [(Modality, usize); 2] {
        [(Modality::Vision, 3), (Modality::Text, 5)]
    }

    #[test]
    fn shapes_and_block_order() {
        let p = FusionParams::zeros(&dims(), 4, 2).unwrap();
        assert_eq!(p.modalities().to_string(), "t,v");
        let names: Vec<String> = p.blocks().into_iter().map(|b| b.name).collect();
        assert_eq!(
            names,
            [
                "proj.t.weight",
                "proj.t.bias",
                "proj.v.weight",
                "proj.v.bias",
                "gate.hidden.weight",
                "gate.hidden.bias",
                "gate.out.weight",
                "gate.out.bias",
                "head.hidden.weight",
                "head.hidden.bias",
                "head.out.weight",
                "head.out.bias",
            ]
        );
        assert_eq!(
            p.parameter_count(),
            (5 * 4 + 4) + (3 * 4 + 4) + (8 * 4 + 4) + (4 * 4 + 4) + (4 * 2 + 2) + (2 * 2 + 2)
        );
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let mut r1 = rng::stream(1, rng::STREAM_INIT);
        let mut r2 = rng::stream(1, rng::STREAM_INIT);
        let a = FusionParams::init(&dims(), 4, 2, &mut r1).unwrap();
        let b = FusionParams::init(&dims(), 4, 2, &mut r2).unwrap();
        assert_eq!(a, b);
        let limit = libm::sqrt(6.0 / 12.0);
        assert!(a.gate_hidden.weight.iter().all(|w| w.abs() <= limit));
        assert!(a.gate_hidden.bias.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = rng::stream(2, rng::STREAM_INIT);
        let p = FusionParams::init(&dims(), 4, 2, &mut rng).unwrap();
        let mut q = p.zeros_like();
        q.set_flat(&p.to_flat()).unwrap();
        assert_eq!(p, q);
        assert!(q.set_flat(&[0.0]).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(FusionParams::zeros(&[], 4, 2).is_err());
        assert!(FusionParams::zeros(&[(Modality::Text, 3), (Modality::Text, 3)], 4, 2).is_err());
        assert!(FusionParams::zeros(&[(Modality::Text, 3)], 0, 2).is_err());
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn dense_matches_loops() {
        let mut rng = rng::stream(3, rng::STREAM_INIT);
        let d = Dense::glorot(5, 3, &mut rng);
        let x = [0.1, -0.2, 0.3, 0.4, -0.5];
        let y = d.apply(&x);
        for i in 0..3 {
            let mut acc = d.bias[i];
            for j in 0..5 {
                acc += d.weight[i * 5 + j] * x[j];
            }
            assert!((y[i] - acc).abs() < 1e-15);
        }
        let dy = [1.0, -2.0, 0.5];
        let dx = d.apply_transpose(&dy);
        for j in 0..5 {
            let expect: f64 = (0..3).map(|i| d.weight[i * 5 + j] * dy[i]).sum();
            assert!((dx[j] - expect).abs() < 1e-15);
        }
    }
}
