//! Binary checkpoint: magic, version, a JSON metadata block, then one record
//! per parameter array. All integers are little-endian.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::encoder::EncoderConfig;
use super::pair::{FeatureMode, PairModel};
use crate::error::{Error, Result};
use crate::features::FeatureScaler;
use crate::nn::Params;

pub const MAGIC: &[u8; 8] = b"SAMCKPT1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub encoder: EncoderConfig,
    pub mode: FeatureMode,
    pub embed_dim: usize,
    pub scaler: FeatureScaler,
    pub embedding_fingerprint: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: PairModel,
    pub scaler: FeatureScaler,
    pub embedding_fingerprint: String,
}

impl Checkpoint {
    /// Fails unless the stored encoder configuration equals `expected`.
    pub fn ensure_config(&self, expected: &EncoderConfig) -> Result<()> {
        let found = self.model.config();
        if found.encoder_type != expected.encoder_type {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds a {} model, expected {}",
                found.encoder_type, expected.encoder_type
            )));
        }
        if found != expected {
            return Err(Error::Checkpoint(format!(
                "encoder configuration differs: stored {found:?}, expected {expected:?}"
            )));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let meta = CheckpointMeta {
            encoder: self.model.config().clone(),
            mode: self.model.mode(),
            embed_dim: self.model.embed_dim(),
            scaler: self.scaler,
            embedding_fingerprint: self.embedding_fingerprint.clone(),
        };
        let meta = serde_json::to_vec(&meta).map_err(std::io::Error::other)?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(meta.len() as u32).to_le_bytes())?;
        w.write_all(&meta)?;

        let mut records = Vec::new();
        self.model.for_each(&mut |name, a| {
            records.push((
                name.to_owned(),
                a.shape().to_vec(),
                a.iter().map(|&x| x as f32).collect::<Vec<_>>(),
            ))
        });
        w.write_all(&(records.len() as u32).to_le_bytes())?;
        for (name, shape, data) in records {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(shape.len() as u32).to_le_bytes())?;
            for d in shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for x in data {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::read_from(&mut BufReader::new(file))
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Checkpoint> {
        let mut magic = [0u8; 8];
        read_exact(r, &mut magic, "header")?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(
                "not a checkpoint file (bad magic)".into(),
            ));
        }
        let version = read_u32(r, "version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let meta_len = read_u32(r, "metadata length")? as usize;
        if meta_len > 1 << 20 {
            return Err(Error::Checkpoint(format!(
                "implausible metadata length {meta_len}"
            )));
        }
        let mut meta = vec![0u8; meta_len];
        read_exact(r, &mut meta, "metadata")?;
        let meta: CheckpointMeta = serde_json::from_slice(&meta)
            .map_err(|e| Error::Checkpoint(format!("bad metadata: {e}")))?;
        let mut model = PairModel::new(&meta.encoder, meta.mode, meta.embed_dim, 0)?;

        let count = read_u32(r, "record count")? as usize;
        let mut records = BTreeMap::new();
        for _ in 0..count {
            let name_len = read_u32(r, "record name")? as usize;
            if name_len > 4096 {
                return Err(Error::Checkpoint(format!(
                    "implausible name length {name_len}"
                )));
            }
            let mut name = vec![0u8; name_len];
            read_exact(r, &mut name, "record name")?;
            let name = String::from_utf8(name)
                .map_err(|_| Error::Checkpoint("record name is not UTF-8".into()))?;
            let rank = read_u32(r, "record rank")? as usize;
            if rank > 3 {
                return Err(Error::Checkpoint(format!("{name}: rank {rank} exceeds 3")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_u64(r, "record shape")? as usize);
            }
            let len: usize = shape.iter().product();
            if len > 1 << 28 {
                return Err(Error::Checkpoint(format!("{name}: implausible size {len}")));
            }
            let mut bytes = vec![0u8; 4 * len];
            read_exact(r, &mut bytes, "record data")?;
            let data: Vec<f64> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            if records.insert(name.clone(), (shape, data)).is_some() {
                return Err(Error::Checkpoint(format!("duplicate record {name}")));
            }
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)
            .map_err(|e| Error::Checkpoint(e.to_string()))?
            != 0
        {
            return Err(Error::Checkpoint(
                "trailing bytes after the last record".into(),
            ));
        }

        let mut problem = None;
        model.for_each_mut(&mut |name, mut a| {
            if problem.is_some() {
                return;
            }
            match records.remove(name) {
                None => problem = Some(format!("missing parameter {name}")),
                Some((shape, _)) if shape != a.shape() => {
                    problem = Some(format!(
                        "{name}: stored shape {shape:?}, expected {:?}",
                        a.shape()
                    ))
                }
                Some((_, data)) => {
                    for (x, v) in a.iter_mut().zip(data) {
                        *x = v;
                    }
                }
            }
        });
        if let Some(p) = problem {
            return Err(Error::Checkpoint(p));
        }
        if let Some(extra) = records.keys().next() {
            return Err(Error::Checkpoint(format!("unexpected parameter {extra}")));
        }
        Ok(Checkpoint {
            model,
            scaler: meta.scaler,
            embedding_fingerprint: meta.embedding_fingerprint,
        })
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Checkpoint(format!("truncated file while reading {what}: {e}")))
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}
