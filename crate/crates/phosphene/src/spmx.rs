//! SPMX binary sparse-matrix files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   4 bytes  53 50 4D 58 ("SPMX")
//! version u32      1
//! rows    u64
//! cols    u64
//! nnz     u64
//! indptr  (rows+1) x u64
//! indices nnz x u32
//! values  nnz x f32
//! ```
//!
//! Values are stored in 32-bit floats on disk while the in-memory matrix uses
//! f64; a write -> read -> write cycle is byte-identical.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub const MAGIC: [u8; 4] = *b"SPMX";
pub const VERSION: u32 = 1;

const HEADER_BYTES: usize = 4 + 4 + 8 + 8 + 8;

/// On-disk size of a matrix with the given shape.
pub fn encoded_size(rows: usize, nnz: usize) -> usize {
    HEADER_BYTES + 8 * (rows + 1) + (4 + 4) * nnz
}

fn format_err(reason: impl Into<String>) -> Error {
    Error::Format { format: "SPMX", reason: reason.into() }
}

/// Encodes a matrix into SPMX bytes.
pub fn encode(matrix: &CsrMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_size(matrix.rows(), matrix.nnz()));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(matrix.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(matrix.cols() as u64).to_le_bytes());
    out.extend_from_slice(&(matrix.nnz() as u64).to_le_bytes());
    for &p in matrix.indptr() {
        out.extend_from_slice(&(p as u64).to_le_bytes());
    }
    for &i in matrix.indices() {
        out.extend_from_slice(&(i as u32).to_le_bytes());
    }
    for &v in matrix.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Decodes SPMX bytes, rejecting wrong magic/version and any indptr or index
/// violation (via the CSR constructor).
pub fn decode(bytes: &[u8]) -> Result<CsrMatrix> {
    let mut cur = bytes;
    let mut take = |n: usize| -> Result<&[u8]> {
        if cur.len() < n {
            return Err(format_err("truncated file"));
        }
        let (head, tail) = cur.split_at(n);
        cur = tail;
        Ok(head)
    };

    let magic = take(4)?;
    if magic != MAGIC {
        return Err(format_err(format!("bad magic {magic:02x?}")));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(take(8)?.try_into().unwrap());
    let cols = u64::from_le_bytes(take(8)?.try_into().unwrap());
    let nnz = u64::from_le_bytes(take(8)?.try_into().unwrap());
    let (rows, cols, nnz) = (
        usize::try_from(rows).map_err(|_| format_err("rows overflow"))?,
        usize::try_from(cols).map_err(|_| format_err("cols overflow"))?,
        usize::try_from(nnz).map_err(|_| format_err("nnz overflow"))?,
    );
    let expected = encoded_size(rows, nnz);
    if bytes.len() != expected {
        return Err(format_err(format!(
            "length {} does not match header (expected {expected})",
            bytes.len()
        )));
    }

    let mut indptr = Vec::with_capacity(rows + 1);
    for _ in 0..=rows {
        indptr.push(u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize);
    }
    let mut indices = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        indices.push(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize);
    }
    let mut values = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        values.push(f32::from_le_bytes(take(4)?.try_into().unwrap()) as f64);
    }
    if *indptr.last().unwrap() != nnz {
        return Err(format_err("indptr[rows] does not equal nnz"));
    }
    CsrMatrix::from_parts(rows, cols, indptr, indices, values)
        .map_err(|e| format_err(format!("invalid CSR payload: {e}")))
}

pub fn write_file(matrix: &CsrMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(matrix)).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
