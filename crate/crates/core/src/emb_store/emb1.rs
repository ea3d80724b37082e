//! EMB1: a minimal little-endian container for float32 embedding matrices.
//!
//! Layout:
//!
//! | offset | size | field                           |
//! |--------|------|---------------------------------|
//! | 0      | 4    | magic `EMB1`                    |
//! | 4      | 4    | u32 version (= 1)               |
//! | 8      | 4    | u32 dim                         |
//! | 12     | 4    | u32 count (rows)                |
//! | 16     | 4    | u32 space tag length `L`        |
//! | 20     | L    | UTF-8 space tag                 |
//! | 20 + L | 4·count·dim | f32 payload, row-major   |

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const VERSION: u32 = 1;
/// Fixed part of the header, before the space tag.
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Error)]
pub enum EmbError {
    #[error("bad magic {found:?}, expected \"EMB1\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported EMB1 version {0}")]
    VersionUnsupported(u32),
    #[error("header truncated: {len} bytes, need at least {need}")]
    TruncatedHeader { len: usize, need: usize },
    #[error("payload truncated: declared {declared} bytes, found {found}")]
    TruncatedPayload { declared: u64, found: u64 },
    #[error("{extra} trailing bytes after payload")]
    TrailingBytes { extra: usize },
    #[error("space tag is not valid UTF-8")]
    InvalidSpaceTag,
    #[error("invalid shape {count}x{dim}: both must be positive")]
    EmptyMatrix { count: usize, dim: usize },
    #[error("payload length {len} is not a multiple of dim {dim}")]
    RaggedPayload { len: usize, dim: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("row {row} has zero norm")]
    ZeroNormRow { row: usize },
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
}

/// A validated N×dim float32 matrix of embeddings in one embedding space.
///
/// Rows are finite and have strictly positive Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    space_tag: String,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(space_tag: impl Into<String>, dim: usize, data: Vec<f32>) -> Result<Self, EmbError> {
        if dim == 0 || data.is_empty() {
            return Err(EmbError::EmptyMatrix { count: data.len().checked_div(dim).unwrap_or(0), dim });
        }
        if !data.len().is_multiple_of(dim) {
            return Err(EmbError::RaggedPayload { len: data.len(), dim });
        }
        for (row, chunk) in data.chunks_exact(dim).enumerate() {
            if let Some(col) = chunk.iter().position(|v| !v.is_finite()) {
                return Err(EmbError::NonFiniteValue { row, col });
            }
            if chunk.iter().all(|&v| v == 0.0) {
                return Err(EmbError::ZeroNormRow { row });
            }
        }
        Ok(Self { space_tag: space_tag.into(), dim, data })
    }

    /// Builds a matrix from f64 rows, rounding each entry to f32.
    pub fn from_rows_f64(space_tag: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self, EmbError> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(EmbError::RaggedPayload { len: rows.iter().map(Vec::len).sum(), dim });
        }
        let data = rows.iter().flatten().map(|&v| v as f32).collect();
        Self::new(space_tag, dim, data)
    }

    pub fn space_tag(&self) -> &str {
        &self.space_tag
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Rows widened to f64.
    pub fn rows_f64(&self) -> Vec<Vec<f64>> {
        self.rows().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect()
    }

    /// Arithmetic mean of the rows, accumulated in f64 in row order.
    pub fn mean_row(&self) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.dim];
        for row in self.rows() {
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += f64::from(v);
            }
        }
        let n = self.n_rows() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    pub fn encode(&self) -> Vec<u8> {
        let tag = self.space_tag.as_bytes();
        let mut out = Vec::with_capacity(HEADER_LEN + tag.len() + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_rows() as u32).to_le_bytes());
        out.extend_from_slice(&(tag.len() as u32).to_le_bytes());
        out.extend_from_slice(tag);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, EmbError> {
        if bytes.len() < 4 {
            return Err(EmbError::TruncatedHeader { len: bytes.len(), need: HEADER_LEN });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
        if &magic != MAGIC {
            return Err(EmbError::BadMagic { found: magic });
        }
        if bytes.len() < HEADER_LEN {
            return Err(EmbError::TruncatedHeader { len: bytes.len(), need: HEADER_LEN });
        }
        let version = read_u32(bytes, 4);
        if version != VERSION {
            return Err(EmbError::VersionUnsupported(version));
        }
        let dim = read_u32(bytes, 8) as usize;
        let count = read_u32(bytes, 12) as usize;
        let tag_len = read_u32(bytes, 16) as usize;
        let payload_start = HEADER_LEN + tag_len;
        if bytes.len() < payload_start {
            return Err(EmbError::TruncatedHeader { len: bytes.len(), need: payload_start });
        }
        let tag = std::str::from_utf8(&bytes[HEADER_LEN..payload_start]).map_err(|_| EmbError::InvalidSpaceTag)?;
        if dim == 0 || count == 0 {
            return Err(EmbError::EmptyMatrix { count, dim });
        }
        let declared = (count as u64).checked_mul(dim as u64).and_then(|v| v.checked_mul(4)).unwrap_or(u64::MAX);
        let found = (bytes.len() - payload_start) as u64;
        if found < declared {
            return Err(EmbError::TruncatedPayload { declared, found });
        }
        if found > declared {
            return Err(EmbError::TrailingBytes { extra: (found - declared) as usize });
        }
        let data = bytes[payload_start..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Self::new(tag, dim, data)
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn read_emb1(path: impl AsRef<Path>) -> Result<EmbeddingMatrix, EmbError> {
    let bytes = fs::read(path)?;
    EmbeddingMatrix::decode(&bytes)
}

/// Writes `matrix` as EMB1. The matrix type only admits valid contents,
/// so invalid data is rejected when the matrix is constructed.
pub fn write_emb1(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<(), EmbError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&matrix.encode())?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(dim: u32, count: u32, tag: &str, payload: &[f32]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(b"EMB1");
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&dim.to_le_bytes());
        b.extend_from_slice(&count.to_le_bytes());
        b.extend_from_slice(&(tag.len() as u32).to_le_bytes());
        b.extend_from_slice(tag.as_bytes());
        for v in payload {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn decodes_single_row() {
        let m = EmbeddingMatrix::decode(&raw(2, 1, "", &[1.0, 0.0])).unwrap();
        assert_eq!(m.n_rows(), 1);
        assert_eq!(m.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn short_payload_is_truncated() {
        let mut b = raw(2, 2, "clap", &[1.0, 0.0, 0.0, 1.0]);
        b.truncate(b.len() - 4);
        assert!(matches!(EmbeddingMatrix::decode(&b), Err(EmbError::TruncatedPayload { declared: 16, found: 12 })));
    }

    #[test]
    fn header_errors() {
        let mut b = raw(1, 1, "", &[1.0]);
        b[0] = b'X';
        assert!(matches!(EmbeddingMatrix::decode(&b), Err(EmbError::BadMagic { .. })));

        let mut b = raw(1, 1, "", &[1.0]);
        b[4] = 2;
        assert!(matches!(EmbeddingMatrix::decode(&b), Err(EmbError::VersionUnsupported(2))));

        assert!(matches!(EmbeddingMatrix::decode(b"EMB1\x01\0"), Err(EmbError::TruncatedHeader { .. })));
        assert!(matches!(EmbeddingMatrix::decode(&raw(0, 1, "", &[])), Err(EmbError::EmptyMatrix { .. })));

        let mut b = raw(1, 1, "", &[1.0]);
        b.push(0);
        assert!(matches!(EmbeddingMatrix::decode(&b), Err(EmbError::TrailingBytes { extra: 1 })));
    }

    #[test]
    fn huge_declared_shape_does_not_allocate() {
        let b = raw(u32::MAX, u32::MAX, "", &[1.0]);
        assert!(matches!(EmbeddingMatrix::decode(&b), Err(EmbError::TruncatedPayload { .. })));
    }

    #[test]
    fn value_errors() {
        assert!(matches!(
            EmbeddingMatrix::decode(&raw(2, 1, "", &[f32::NAN, 1.0])),
            Err(EmbError::NonFiniteValue { row: 0, col: 0 })
        ));
        assert!(matches!(
            EmbeddingMatrix::decode(&raw(2, 2, "", &[1.0, 1.0, 0.0, -0.0])),
            Err(EmbError::ZeroNormRow { row: 1 })
        ));
        assert!(EmbeddingMatrix::new("x", 1, vec![f32::INFINITY]).is_err());
    }

    #[test]
    fn encoded_sizes() {
        let m = EmbeddingMatrix::new("", 1, vec![2.5]).unwrap();
        assert_eq!(m.encode().len(), 24);

        let m = EmbeddingMatrix::new("vggish", 128, vec![0.5; 15 * 128]).unwrap();
        assert_eq!(m.encode().len() - HEADER_LEN - "vggish".len(), 7680);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.emb1");
        let m = EmbeddingMatrix::new("clap", 3, vec![1.0, -2.0, 3.5, 0.0, 0.0, 1e-30]).unwrap();
        write_emb1(&m, &path).unwrap();
        assert_eq!(read_emb1(&path).unwrap(), m);
        assert!(matches!(read_emb1(dir.path().join("missing")), Err(EmbError::Io(_))));
    }

    #[test]
    fn mean_row_of_frames() {
        let m = EmbeddingMatrix::new("", 2, vec![1.0, 0.0, 3.0, 2.0]).unwrap();
        assert_eq!(m.mean_row(), vec![2.0, 1.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn round_trip_is_bit_exact(
            dim in 1usize..64,
            rows in 1usize..12,
            seed in proptest::collection::vec(-1.0e6f32..1.0e6, 1..4096),
            tag in "[a-z]{0,8}",
        ) {
            let mut data: Vec<f32> = seed.iter().copied().cycle().take(dim * rows).collect();
            for r in 0..rows {
                data[r * dim] = data[r * dim].abs() + 1.0;
            }
            let m = EmbeddingMatrix::new(tag, dim, data).unwrap();
            let back = EmbeddingMatrix::decode(&m.encode()).unwrap();
            let a: Vec<u32> = m.as_slice().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.as_slice().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(back.space_tag(), m.space_tag());
        }

        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..96)) {
            let _ = EmbeddingMatrix::decode(&bytes);
        }
    }
}
