//! `VMTK` token cache: tokenized pieces stored as fixed-width id rows.
//!
//! Layout, little-endian: magic `VMTK`, version `u16`, token count `u32`,
//! then one `u16` per attribute per token in vocabulary order. A JSON
//! sidecar describes the vocabulary tables so the binary stays auditable.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CompoundToken, StageVocab, TokenizeError};

pub const MAGIC: &[u8; 4] = b"VMTK";
pub const VERSION: u16 = 1;

/// JSON description of one attribute table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SidecarAttr {
    pub name: String,
    pub size: usize,
    pub values: Vec<String>,
}

/// JSON sidecar listing the vocabulary tables of a token cache.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Sidecar {
    pub stage: String,
    pub attributes: Vec<SidecarAttr>,
}

impl Sidecar {
    pub fn for_vocab(vocab: &StageVocab) -> Self {
        Sidecar {
            stage: vocab.stage.name().to_string(),
            attributes: vocab
                .attrs
                .iter()
                .map(|attr| SidecarAttr {
                    name: attr.name().to_string(),
                    size: attr.size(),
                    values: (0..attr.size() as u16).map(|id| attr.value_name(id)).collect(),
                })
                .collect(),
        }
    }
}

pub fn write_tokens(
    w: &mut impl Write,
    vocab: &StageVocab,
    tokens: &[CompoundToken],
) -> Result<(), TokenizeError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(tokens.len() as u32).to_le_bytes())?;
    for row in vocab.encode_ids(tokens) {
        for id in row {
            w.write_all(&id.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_tokens(
    r: &mut impl Read,
    vocab: &StageVocab,
) -> Result<Vec<CompoundToken>, TokenizeError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(TokenizeError::Cache("bad magic".into()));
    }
    let mut two = [0u8; 2];
    r.read_exact(&mut two)?;
    let version = u16::from_le_bytes(two);
    if version != VERSION {
        return Err(TokenizeError::Cache(format!("unsupported version {version}")));
    }
    let mut four = [0u8; 4];
    r.read_exact(&mut four)?;
    let count = u32::from_le_bytes(four) as usize;

    let mut rows = Vec::with_capacity(count);
    for _ in 0..count {
        let mut row = Vec::with_capacity(vocab.n_attrs());
        for _ in 0..vocab.n_attrs() {
            r.read_exact(&mut two)?;
            row.push(u16::from_le_bytes(two));
        }
        rows.push(row);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(TokenizeError::Cache("trailing bytes after token data".into()));
    }
    vocab.decode_ids(&rows)
}

pub fn save_tokens(
    path: impl AsRef<Path>,
    vocab: &StageVocab,
    tokens: &[CompoundToken],
) -> Result<(), TokenizeError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tokens(&mut w, vocab, tokens)?;
    w.flush()?;
    Ok(())
}

pub fn load_tokens(
    path: impl AsRef<Path>,
    vocab: &StageVocab,
) -> Result<Vec<CompoundToken>, TokenizeError> {
    read_tokens(&mut BufReader::new(File::open(path)?), vocab)
}
