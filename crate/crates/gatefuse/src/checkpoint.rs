//! Binary model checkpoint.
//!
//! ```text
//! magic      8 bytes   "GFMODEL1"
//! version    u32 LE    1
//! shared_dim u32 LE
//! proj_dim   u32 LE
//! n          u32 LE    number of active modalities
//! n times:   u8 tag ('t' | 'a' | 'v'), u32 LE raw dim     (canonical order)
//! blocks     f32 LE    every parameter block in canonical order, row-major
//! ```
//!
//! Block order: for each active modality its projection weight
//! (`shared_dim x raw_dim`) and bias, then gate hidden (`shared_dim x
//! 2*shared_dim`) weight and bias, gate out, head hidden (`proj_dim x
//! shared_dim`), head out (`2 x proj_dim`). Weights are `outputs x inputs`.

use std::fs;
use std::path::Path;

use gatefuse_core::model::FusionParams;
use gatefuse_core::Modality;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GFMODEL1";
pub const VERSION: u32 = 1;

pub fn encode(p: &FusionParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 4 * p.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(p.shared_dim as u32).to_le_bytes());
    out.extend_from_slice(&(p.proj_dim as u32).to_le_bytes());
    let dims = p.raw_dims();
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for (m, d) in dims {
        out.push(m.tag() as u8);
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for block in p.blocks() {
        for v in block.values {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or_else(|| {
            format!("truncated: need {n} bytes at offset {}, file has {}", self.pos, self.bytes.len())
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn decode_inner(bytes: &[u8]) -> std::result::Result<FusionParams, String> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err("not a gatefuse checkpoint (bad magic)".into());
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let shared = c.u32()? as usize;
    let proj = c.u32()? as usize;
    let n = c.u32()? as usize;
    if n == 0 || n > 3 {
        return Err(format!("invalid modality count {n}"));
    }
    let mut dims = Vec::with_capacity(n);
    for _ in 0..n {
        let tag = c.take(1)?[0] as char;
        let m = Modality::from_tag(tag).ok_or_else(|| format!("unknown modality tag {tag:?}"))?;
        dims.push((m, c.u32()? as usize));
    }
    if dims.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err("modalities not in canonical order".into());
    }
    let mut p = FusionParams::zeros(&dims, shared, proj).map_err(|e| e.to_string())?;
    let count = p.parameter_count();
    let raw = c.take(4 * count)?;
    let flat: Vec<f64> = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect();
    if let Some(i) = flat.iter().position(|v| !v.is_finite()) {
        return Err(format!("non-finite parameter at index {i}"));
    }
    p.set_flat(&flat).map_err(|e| e.to_string())?;
    if c.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - c.pos));
    }
    Ok(p)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<FusionParams> {
    decode_inner(bytes).map_err(|message| Error::Checkpoint { path: path.to_path_buf(), message })
}

pub fn save_checkpoint(p: &FusionParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(p)).map_err(Error::io(path))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<FusionParams> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(Error::io(path))?, path)
}
