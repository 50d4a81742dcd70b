//! Preprocessed-tensor cache in the checkpoint blob format: magic,
//! version, JSON header with the shared shape, then length-prefixed
//! named f32 blobs with trailing CRC32 each.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;

const MAGIC: &[u8; 4] = b"GRTC";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    channels: usize,
    size: usize,
}

pub fn write_tensor_cache(
    path: &Path,
    channels: usize,
    size: usize,
    entries: &[(String, Vec<f32>)],
) -> Result<(), DatasetError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let header = serde_json::to_vec(&CacheHeader { channels, size })
        .map_err(|e| DatasetError::Format(e.to_string()))?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, data) in entries {
        if data.len() != channels * size * size {
            return Err(DatasetError::Format(format!(
                "cache entry {name} has {} values, expected {}",
                data.len(),
                channels * size * size
            )));
        }
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(data.len() as u32).to_le_bytes())?;
        let mut hasher = crc32fast::Hasher::new();
        for v in data {
            let b = v.to_le_bytes();
            hasher.update(&b);
            w.write_all(&b)?;
        }
        w.write_all(&hasher.finalize().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor_cache(
    path: &Path,
) -> Result<(usize, usize, Vec<(String, Vec<f32>)>), DatasetError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut exact = |n: usize| -> Result<Vec<u8>, DatasetError> {
        let mut buf = vec![0u8; n];
        r.read_exact(&mut buf)
            .map_err(|_| DatasetError::Format("tensor cache truncated".into()))?;
        Ok(buf)
    };
    let u32_of = |b: &[u8]| u32::from_le_bytes([b[0], b[1], b[2], b[3]]);
    if exact(4)? != MAGIC {
        return Err(DatasetError::Format("bad tensor cache magic".into()));
    }
    let version = u32_of(&exact(4)?);
    if version != VERSION {
        return Err(DatasetError::Format(format!(
            "tensor cache version {version} unsupported"
        )));
    }
    let header_len = u32_of(&exact(4)?) as usize;
    let header: CacheHeader = serde_json::from_slice(&exact(header_len)?)
        .map_err(|e| DatasetError::Format(e.to_string()))?;
    let count = u32_of(&exact(4)?) as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = u32_of(&exact(4)?) as usize;
        let name = String::from_utf8(exact(name_len)?)
            .map_err(|_| DatasetError::Format("cache entry name is not UTF-8".into()))?;
        let n = u32_of(&exact(4)?) as usize;
        let raw = exact(4 * n)?;
        let mut hasher = crc32fast::Hasher::new();
        hasher.update(&raw);
        if u32_of(&exact(4)?) != hasher.finalize() {
            return Err(DatasetError::Format(format!(
                "checksum mismatch in cache entry {name}"
            )));
        }
        entries.push((
            name,
            raw.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
        ));
    }
    Ok((header.channels, header.size, entries))
}
