//! The PHDE embedding file format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic  b"PHDE"
//! 4       2     version (u16 LE) = 1
//! 6       2     flags   (u16 LE) = 0
//! 8       4     n       (u32 LE) number of tokens
//! 12      4     d       (u32 LE) embedding dimension
//! 16      4·n·d payload: f32 LE, row-major
//! ```

use crate::cloud::TokenEmbeddingMatrix;

use super::EmbeddingError;

pub const MAGIC: [u8; 4] = *b"PHDE";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

/// Header fields of a PHDE file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhdeHeader {
    pub version: u16,
    pub flags: u16,
    pub n: u32,
    pub d: u32,
}

impl PhdeHeader {
    pub fn payload_len(&self) -> usize {
        4 * self.n as usize * self.d as usize
    }
}

pub fn read_header(bytes: &[u8]) -> Result<PhdeHeader, EmbeddingError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(EmbeddingError::BadMagic);
        }
        return Err(EmbeddingError::TruncatedPayload { expected: HEADER_LEN, got: bytes.len() });
    }
    if bytes[..4] != MAGIC {
        return Err(EmbeddingError::BadMagic);
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let header = PhdeHeader { version: u16_at(4), flags: u16_at(6), n: u32_at(8), d: u32_at(12) };
    if header.version != VERSION {
        return Err(EmbeddingError::UnsupportedVersion(header.version));
    }
    if header.flags != 0 {
        return Err(EmbeddingError::UnsupportedFlags(header.flags));
    }
    Ok(header)
}

pub fn read_embedding_file(bytes: &[u8]) -> Result<TokenEmbeddingMatrix, EmbeddingError> {
    let header = read_header(bytes)?;
    let expected = HEADER_LEN + header.payload_len();
    if bytes.len() < expected {
        return Err(EmbeddingError::TruncatedPayload { expected, got: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(EmbeddingError::TrailingBytes { expected, got: bytes.len() });
    }
    decode_payload(header.n as usize, header.d as usize, &bytes[HEADER_LEN..])
}

/// Decodes a bare little-endian f32 payload of exactly `n·d` values.
pub fn decode_payload(n: usize, d: usize, payload: &[u8]) -> Result<TokenEmbeddingMatrix, EmbeddingError> {
    if n == 0 || d == 0 {
        return Err(EmbeddingError::EmptyMatrix { n, d });
    }
    let expected = 4 * n * d;
    if payload.len() != expected {
        return Err(EmbeddingError::PayloadSize { expected, got: payload.len() });
    }
    let mut data = Vec::with_capacity(n * d);
    for (index, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(EmbeddingError::NonFiniteValue { index });
        }
        data.push(f64::from(v));
    }
    Ok(TokenEmbeddingMatrix::new(n, d, data).expect("shape and finiteness checked"))
}

/// Encodes a matrix as PHDE. Coordinates are narrowed to `f32`; values that
/// overflow single precision are rejected.
pub fn write_embedding_file(matrix: &TokenEmbeddingMatrix) -> Result<Vec<u8>, EmbeddingError> {
    let (n, d) = (matrix.n(), matrix.d());
    let dims = u32::try_from(n).ok().zip(u32::try_from(d).ok());
    let Some((n32, d32)) = dims else {
        return Err(EmbeddingError::EmptyMatrix { n, d });
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n * d);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&n32.to_le_bytes());
    out.extend_from_slice(&d32.to_le_bytes());
    encode_payload_into(matrix, &mut out)?;
    Ok(out)
}

/// Appends the bare f32 payload of `matrix` to `out`.
pub fn encode_payload_into(matrix: &TokenEmbeddingMatrix, out: &mut Vec<u8>) -> Result<(), EmbeddingError> {
    for (index, &v) in matrix.data().iter().enumerate() {
        let narrowed = v as f32;
        if !narrowed.is_finite() {
            return Err(EmbeddingError::NonFiniteValue { index });
        }
        out.extend_from_slice(&narrowed.to_le_bytes());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(n: u32, d: u32, values: &[f32]) -> Vec<u8> {
        let mut b = b"PHDE".to_vec();
        b.extend_from_slice(&1u16.to_le_bytes());
        b.extend_from_slice(&0u16.to_le_bytes());
        b.extend_from_slice(&n.to_le_bytes());
        b.extend_from_slice(&d.to_le_bytes());
        for v in values {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn reads_two_by_three() {
        let m = read_embedding_file(&file(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])).unwrap();
        assert_eq!((m.n(), m.d()), (2, 3));
        assert_eq!(m.row(0), &[1.0, 2.0, 3.0]);
        assert_eq!(m.row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn header_errors() {
        let mut b = file(1, 1, &[0.0]);
        b[..4].copy_from_slice(b"XXXX");
        assert!(matches!(read_embedding_file(&b), Err(EmbeddingError::BadMagic)));

        let mut b = file(1, 1, &[0.0]);
        b[4] = 2;
        assert!(matches!(read_embedding_file(&b), Err(EmbeddingError::UnsupportedVersion(2))));

        let mut b = file(1, 1, &[0.0]);
        b[6] = 1;
        assert!(matches!(read_embedding_file(&b), Err(EmbeddingError::UnsupportedFlags(1))));

        assert!(matches!(
            read_embedding_file(&file(2, 2, &[0.0; 3])),
            Err(EmbeddingError::TruncatedPayload { expected: 32, got: 28 })
        ));
        assert!(matches!(
            read_embedding_file(&file(1, 1, &[0.0; 2])),
            Err(EmbeddingError::TrailingBytes { .. })
        ));
        assert!(matches!(
            read_embedding_file(&b"PHD"[..]),
            Err(EmbeddingError::TruncatedPayload { .. })
        ));
        assert!(matches!(
            read_embedding_file(&file(0, 4, &[])),
            Err(EmbeddingError::EmptyMatrix { .. })
        ));
        assert!(matches!(
            read_embedding_file(&file(1, 2, &[1.0, f32::NAN])),
            Err(EmbeddingError::NonFiniteValue { index: 1 })
        ));
    }

    #[test]
    fn one_by_one_is_twenty_bytes() {
        let m = TokenEmbeddingMatrix::new(1, 1, vec![0.0]).unwrap();
        let b = write_embedding_file(&m).unwrap();
        assert_eq!(b.len(), 20);
        assert_eq!(b, file(1, 1, &[0.0]));
    }

    #[test]
    fn overflowing_values_rejected_on_write() {
        let m = TokenEmbeddingMatrix::new(1, 2, vec![0.0, 1e300]).unwrap();
        assert!(matches!(write_embedding_file(&m), Err(EmbeddingError::NonFiniteValue { index: 1 })));
    }
}
