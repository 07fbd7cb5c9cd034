//! Network checkpoints.
//!
//! Layout (little endian): magic `SDCN`, u32 version, u8 player, u32
//! iteration, u32 layer count, then u32 rows and u32 cols per layer, then per
//! layer the row-major f32 weights followed by the f32 biases.

use std::io::{Read, Write};

use thiserror::Error;

use super::{Layer, Mlp};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SDCN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a network checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {found}")]
    VersionMismatch { found: u32 },
    #[error("checkpoint file is truncated")]
    TruncatedFile,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub player: u8,
    pub iteration: u32,
}

/// Size in bytes of a checkpoint of `net`.
pub fn checkpoint_len(net: &Mlp<f32>) -> usize {
    17 + 8 * net.layers().len() + 4 * net.num_params()
}

pub fn encode_checkpoint(net: &Mlp<f32>, meta: CheckpointMeta) -> Vec<u8> {
    let mut out = Vec::with_capacity(checkpoint_len(net));
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(meta.player);
    out.extend_from_slice(&meta.iteration.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for l in net.layers() {
        out.extend_from_slice(&(l.rows as u32).to_le_bytes());
        out.extend_from_slice(&(l.cols as u32).to_le_bytes());
    }
    for l in net.layers() {
        for x in l.weights.iter().chain(&l.biases) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn write_checkpoint<W: Write>(net: &Mlp<f32>, meta: CheckpointMeta, mut w: W) -> Result<(), CheckpointError> {
    w.write_all(&encode_checkpoint(net, meta))?;
    Ok(())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(CheckpointMeta, Mlp<f32>), CheckpointError> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], CheckpointError> {
        let s = bytes.get(pos..pos + n).ok_or(CheckpointError::TruncatedFile)?;
        pos += n;
        Ok(s)
    };
    let u32_of = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    if take(4)? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32_of(take(4)?);
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::VersionMismatch { found: version });
    }
    let player = take(1)?[0];
    let iteration = u32_of(take(4)?);
    let n_layers = u32_of(take(4)?) as usize;
    if n_layers == 0 || n_layers > 1024 {
        return Err(CheckpointError::Malformed(format!("{n_layers} layers")));
    }
    let mut shapes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let rows = u32_of(take(4)?) as usize;
        let cols = u32_of(take(4)?) as usize;
        shapes.push((rows, cols));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for (rows, cols) in shapes {
        let mut floats = |n: usize| -> Result<Vec<f32>, CheckpointError> {
            let len = n.checked_mul(4).ok_or(CheckpointError::TruncatedFile)?;
            Ok(take(len)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let weights = floats(rows * cols)?;
        let biases = floats(rows)?;
        layers.push(Layer { rows, cols, weights, biases });
    }
    if pos != bytes.len() {
        return Err(CheckpointError::Malformed(format!("{} trailing bytes", bytes.len() - pos)));
    }
    let net = Mlp::from_layers(layers).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    Ok((CheckpointMeta { player, iteration }, net))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(CheckpointMeta, Mlp<f32>), CheckpointError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes)
}
