//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ALIF"                       magic, 4 bytes
//! u32 version                  currently 1
//! u32 mode                     0 = liif, 1 = aliif
//! u32 K, D, B
//! u32 basis_hidden, basis_layers, expansion_hidden, expansion_layers
//! u32 flags                    bit 0 literal_relu, bit 1 share_ensemble_weights
//! u32 tensor count N
//! N × (u32 rank, rank × u32 dim)
//! f32 values of every tensor, in declared order
//! u64 FNV-1a of every preceding byte
//! ```
//!
//! The sidecar manifest (`<checkpoint>.manifest`) repeats the training
//! configuration as `key = value` text; loading never reads it.

use std::path::{Path, PathBuf};

use super::config::{format_kv, train_config_kv};
use crate::decoder::{Mode, Model, ModelConfig};
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::rng::fnv1a64;
use crate::tensor::Tensor;
use crate::training::TrainConfig;

pub const MAGIC: &[u8; 4] = b"ALIF";
pub const VERSION: u32 = 1;

const FLAG_LITERAL_RELU: u32 = 1;
const FLAG_SHARE_WEIGHTS: u32 = 2;

fn push_u32(out: &mut Vec<u8>, v: usize) {
    out.extend((v as u32).to_le_bytes());
}

/// Serializes a model. The encoding is a pure function of the
/// configuration and parameter values.
pub fn to_bytes(model: &Model) -> Vec<u8> {
    let c = model.config();
    let params = model.params();
    let mut out = Vec::with_capacity(64 + 4 * params.numel());
    out.extend(MAGIC);
    push_u32(&mut out, VERSION as usize);
    push_u32(&mut out, (c.mode == Mode::Aliif) as usize);
    for v in [
        c.k,
        c.feat_dim,
        c.blocks,
        c.basis_hidden,
        c.basis_layers,
        c.expansion_hidden,
        c.expansion_layers,
    ] {
        push_u32(&mut out, v);
    }
    let flags = if c.literal_relu { FLAG_LITERAL_RELU } else { 0 }
        | if c.share_ensemble_weights { FLAG_SHARE_WEIGHTS } else { 0 };
    push_u32(&mut out, flags as usize);
    push_u32(&mut out, params.len());
    for t in params.tensors() {
        push_u32(&mut out, t.rank());
        for &d in t.shape() {
            push_u32(&mut out, d);
        }
    }
    for t in params.tensors() {
        for v in t.data() {
            out.extend(v.to_le_bytes());
        }
    }
    let sum = fnv1a64(&out);
    out.extend(sum.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!("truncated while reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }
}

/// Parses and validates a checkpoint: checksum, header, shape table and
/// an exact byte count for the parameter section.
pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < MAGIC.len() + 8 || &bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("missing ALIF magic".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    let computed = fnv1a64(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32("version")? as u32;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let mode = match r.u32("mode")? {
        0 => Mode::Liif,
        1 => Mode::Aliif,
        m => return Err(Error::Checkpoint(format!("unknown mode tag {m}"))),
    };
    let mut fields = [0usize; 7];
    for (f, name) in fields.iter_mut().zip(["K", "D", "B", "basis_hidden", "basis_layers", "expansion_hidden", "expansion_layers"]) {
        *f = r.u32(name)?;
    }
    let flags = r.u32("flags")? as u32;
    if flags & !(FLAG_LITERAL_RELU | FLAG_SHARE_WEIGHTS) != 0 {
        return Err(Error::Checkpoint(format!("unknown flags {flags:#x}")));
    }
    let config = ModelConfig {
        mode,
        k: fields[0],
        feat_dim: fields[1],
        blocks: fields[2],
        basis_hidden: fields[3],
        basis_layers: fields[4],
        expansion_hidden: fields[5],
        expansion_layers: fields[6],
        literal_relu: flags & FLAG_LITERAL_RELU != 0,
        share_ensemble_weights: flags & FLAG_SHARE_WEIGHTS != 0,
    };
    config
        .validate()
        .map_err(|e| Error::Checkpoint(format!("header describes an invalid model: {e}")))?;
    let template: Model = Model::new(config.clone(), 0)?;

    let count = r.u32("tensor count")?;
    if count != template.params().len() {
        return Err(Error::Checkpoint(format!(
            "{count} tensors stored, architecture declares {}",
            template.params().len()
        )));
    }
    let mut shapes = Vec::with_capacity(count);
    for (id, (name, t)) in template.params().ids().zip(template.params().iter()) {
        let rank = r.u32("rank")?;
        if rank > 8 {
            return Err(Error::Checkpoint(format!("tensor `{name}` has rank {rank}")));
        }
        let shape = (0..rank).map(|_| r.u32("shape")).collect::<Result<Vec<_>>>()?;
        if shape != t.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor `{name}` stored as {shape:?}, architecture declares {:?}",
                t.shape()
            )));
        }
        shapes.push((id, shape));
    }
    let numel: usize = shapes.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    let remaining = body.len() - r.pos;
    if remaining != 4 * numel {
        return Err(Error::Checkpoint(format!(
            "parameter section has {remaining} bytes, shapes account for {}",
            4 * numel
        )));
    }
    let mut params = ParamStore::new();
    for (id, shape) in shapes {
        let n: usize = shape.iter().product();
        let data = r
            .take(4 * n, "parameters")?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        params.push(template.params().name(id), Tensor::new(shape, data)?);
    }
    Model::from_params(config, params)
}

pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

pub fn manifest_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

/// Writes the human-readable sidecar next to `checkpoint`.
pub fn write_manifest(checkpoint: &Path, config: &TrainConfig, bytes: &[u8]) -> Result<PathBuf> {
    let path = manifest_path(checkpoint);
    let mut pairs: Vec<(&str, String)> = vec![
        ("format", "ALIF".into()),
        ("version", VERSION.to_string()),
        ("checksum", format!("{:016x}", u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8 bytes")))),
    ];
    pairs.extend(train_config_kv(config));
    std::fs::write(&path, format_kv(&pairs)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
