//! Checkpoint persistence.
//!
//! Layout: magic `GRCN`, format version u32, length-prefixed canonical
//! JSON header (config + training metadata), then length-prefixed named
//! blobs of little-endian f32 values, each followed by a CRC32 of its
//! payload bytes.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ModelError};

const MAGIC: &[u8; 4] = b"GRCN";
const FORMAT_VERSION: u32 = 1;

/// Training provenance stored alongside the weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epoch: usize,
    pub optimizer_step: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    meta: TrainMeta,
}

fn write_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_blob(w: &mut impl Write, name: &str, data: &[f32]) -> std::io::Result<()> {
    write_u32(w, name.len() as u32)?;
    w.write_all(name.as_bytes())?;
    write_u32(w, data.len() as u32)?;
    let mut hasher = crc32fast::Hasher::new();
    for v in data {
        let bytes = v.to_le_bytes();
        hasher.update(&bytes);
        w.write_all(&bytes)?;
    }
    write_u32(w, hasher.finalize())
}

pub fn save_checkpoint(
    model: &Model<f32>,
    meta: &TrainMeta,
    path: impl AsRef<Path>,
) -> Result<(), ModelError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    write_u32(&mut w, FORMAT_VERSION)?;
    let header = serde_json::to_vec(&Header {
        config: model.config().clone(),
        meta: meta.clone(),
    })
    .expect("header serializes");
    write_u32(&mut w, header.len() as u32)?;
    w.write_all(&header)?;

    let params = model.parameters();
    let stats = model.running_stats();
    write_u32(&mut w, (params.len() + 2 * stats.len()) as u32)?;
    for p in params {
        write_blob(&mut w, p.name(), &p.tensor().to_vec())?;
    }
    for (name, rs) in stats {
        write_blob(&mut w, &format!("{name}.running_mean"), &rs.mean.borrow())?;
        write_blob(&mut w, &format!("{name}.running_var"), &rs.var.borrow())?;
    }
    w.flush()?;
    Ok(())
}

struct Cursor<R> {
    r: R,
}

impl<R: Read> Cursor<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>, ModelError> {
        let mut buf = vec![0u8; n];
        self.r
            .read_exact(&mut buf)
            .map_err(|_| ModelError::CorruptCheckpoint("unexpected end of file".into()))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        let b = self.bytes(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Model<f32>, TrainMeta), ModelError> {
    let mut c = Cursor {
        r: BufReader::new(File::open(path)?),
    };
    if c.bytes(4)? != MAGIC {
        return Err(ModelError::CorruptCheckpoint("bad magic bytes".into()));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let header_len = c.u32()? as usize;
    let header: Header = serde_json::from_slice(&c.bytes(header_len)?)
        .map_err(|e| ModelError::CorruptCheckpoint(format!("bad header: {e}")))?;

    let blob_count = c.u32()? as usize;
    let mut blobs: HashMap<String, Vec<f32>> = HashMap::with_capacity(blob_count);
    for _ in 0..blob_count {
        let name_len = c.u32()? as usize;
        let name = String::from_utf8(c.bytes(name_len)?)
            .map_err(|_| ModelError::CorruptCheckpoint("blob name is not UTF-8".into()))?;
        let n = c.u32()? as usize;
        let raw = c.bytes(4 * n)?;
        let mut hasher = crc32fast::Hasher::new();
        hasher.update(&raw);
        let stored_crc = c.u32()?;
        if hasher.finalize() != stored_crc {
            return Err(ModelError::CorruptCheckpoint(format!(
                "checksum mismatch in blob {name}"
            )));
        }
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        blobs.insert(name, data);
    }

    let model = Model::build(&header.config, 0)?;
    let mut take = |name: &str, len: usize| -> Result<Vec<f32>, ModelError> {
        let data = blobs
            .remove(name)
            .ok_or_else(|| ModelError::CorruptCheckpoint(format!("missing blob {name}")))?;
        if data.len() != len {
            return Err(ModelError::CorruptCheckpoint(format!(
                "blob {name} has {} elements, expected {len}",
                data.len()
            )));
        }
        Ok(data)
    };
    for p in model.parameters() {
        let data = take(p.name(), p.len())?;
        p.tensor().set_data(&data);
        p.set_optimizer_step(header.meta.optimizer_step);
    }
    for (name, rs) in model.running_stats() {
        let mean = take(&format!("{name}.running_mean"), rs.channels())?;
        let var = take(&format!("{name}.running_var"), rs.channels())?;
        *rs.mean.borrow_mut() = mean;
        *rs.var.borrow_mut() = var;
    }
    Ok((model, header.meta))
}
