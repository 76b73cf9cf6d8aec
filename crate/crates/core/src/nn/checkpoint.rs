//! Checkpoint container: a JSON header followed by named `VMFT` parameter
//! tensors.
//!
//! Layout, little-endian: `u32` header length, UTF-8 JSON header, `u32`
//! tensor count, then per tensor a `u16` name length, the name, and the
//! `VMFT` blob. Tensors are stored in name order so files are reproducible.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::NnError;
use crate::vmft;

pub fn write_checkpoint(
    w: &mut impl Write,
    header: &serde_json::Value,
    tensors: &BTreeMap<String, vmft::Tensor>,
) -> Result<(), NnError> {
    let header_bytes = serde_json::to_vec(header)?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, tensor) in tensors {
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        vmft::write_tensor(w, tensor)?;
    }
    Ok(())
}

pub fn read_checkpoint(
    r: &mut impl Read,
) -> Result<(serde_json::Value, BTreeMap<String, vmft::Tensor>), NnError> {
    let mut four = [0u8; 4];
    r.read_exact(&mut four)?;
    let header_len = u32::from_le_bytes(four) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: serde_json::Value = serde_json::from_slice(&header_bytes)?;
    r.read_exact(&mut four)?;
    let count = u32::from_le_bytes(four);
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let mut two = [0u8; 2];
        r.read_exact(&mut two)?;
        let name_len = u16::from_le_bytes(two) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| NnError::Checkpoint("tensor name is not UTF-8".into()))?;
        tensors.insert(name, vmft::read_tensor(r)?);
    }
    Ok((header, tensors))
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    header: &serde_json::Value,
    tensors: &BTreeMap<String, vmft::Tensor>,
) -> Result<(), NnError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, header, tensors)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(
    path: impl AsRef<Path>,
) -> Result<(serde_json::Value, BTreeMap<String, vmft::Tensor>), NnError> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

/// SHA-256 of a file, used for provenance records.
pub fn file_hash(path: impl AsRef<Path>) -> Result<String, NnError> {
    let mut hasher = Sha256::new();
    let mut reader = BufReader::new(File::open(path)?);
    let mut buf = [0u8; 8192];
    loop {
        let n = reader.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
