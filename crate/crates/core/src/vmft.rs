//! `VMFT` tensor files: the on-disk format for feature matrices, model
//! parameters, and similarity matrices.
//!
//! Layout, all little-endian: magic `VMFT`, version `u16`, dtype code `u8`
//! (1 = f32), ndim `u8`, dims `u32[ndim]`, then the packed f32 payload.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"VMFT";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 1;

#[derive(Debug, Error)]
pub enum VmftError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a VMFT file (bad magic)")]
    BadMagic,
    #[error("unsupported VMFT version {0}")]
    BadVersion(u16),
    #[error("unsupported dtype code {0}")]
    BadDtype(u8),
    #[error("tensor shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },
    #[error("tensor contains non-finite values")]
    NotFinite,
}

/// A dense f32 tensor with explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> Self {
        assert_eq!(dims.iter().product::<u32>() as usize, data.len(), "shape/data mismatch");
        Tensor { dims, data }
    }

    /// Builds a rank-2 tensor from rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f32>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Tensor { dims: vec![rows.len() as u32, cols as u32], data }
    }

    pub fn to_rows(&self) -> Vec<Vec<f32>> {
        assert_eq!(self.dims.len(), 2, "to_rows needs a rank-2 tensor");
        let cols = self.dims[1] as usize;
        if cols == 0 {
            return vec![Vec::new(); self.dims[0] as usize];
        }
        self.data.chunks(cols).map(<[f32]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub fn write_tensor(w: &mut impl Write, tensor: &Tensor) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[DTYPE_F32, tensor.dims.len() as u8])?;
    for &d in &tensor.dims {
        w.write_all(&d.to_le_bytes())?;
    }
    for &v in &tensor.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_tensor(r: &mut impl Read) -> Result<Tensor, VmftError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(VmftError::BadMagic);
    }
    let mut two = [0u8; 2];
    r.read_exact(&mut two)?;
    let version = u16::from_le_bytes(two);
    if version != VERSION {
        return Err(VmftError::BadVersion(version));
    }
    r.read_exact(&mut two)?;
    let [dtype, ndim] = two;
    if dtype != DTYPE_F32 {
        return Err(VmftError::BadDtype(dtype));
    }
    let mut dims = Vec::with_capacity(ndim as usize);
    let mut four = [0u8; 4];
    for _ in 0..ndim {
        r.read_exact(&mut four)?;
        dims.push(u32::from_le_bytes(four));
    }
    let len = dims.iter().product::<u32>() as usize;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut four)?;
        data.push(f32::from_le_bytes(four));
    }
    Ok(Tensor { dims, data })
}

pub fn save_tensor(path: impl AsRef<Path>, tensor: &Tensor) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, tensor)?;
    w.flush()
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor, VmftError> {
    read_tensor(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_round_trip() {
        let t = Tensor::new(vec![2, 3], vec![1.0, -2.5, 3.0, 0.0, 1e-30, 4.25]);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        let back = read_tensor(&mut buf.as_slice()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn random_matrices_round_trip_through_files() {
        use rand::Rng;
        let dir = tempfile::tempdir().unwrap();
        let mut rng = crate::toy::rng(3);
        for i in 0..10 {
            let rows = rng.random_range(1..6usize);
            let cols = rng.random_range(1..9usize);
            let t = Tensor::new(
                vec![rows as u32, cols as u32],
                (0..rows * cols).map(|_| rng.random_range(-10.0..10.0)).collect(),
            );
            let path = dir.path().join(format!("{i}.vmft"));
            save_tensor(&path, &t).unwrap();
            assert_eq!(load_tensor(&path).unwrap(), t);
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let err = read_tensor(&mut &b"NOPE\x01\x00\x01\x00"[..]).unwrap_err();
        assert!(matches!(err, VmftError::BadMagic));
    }

    #[test]
    fn rows_round_trip() {
        let rows = vec![vec![1.0f32, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        assert_eq!(Tensor::from_rows(&rows).to_rows(), rows);
    }
}
