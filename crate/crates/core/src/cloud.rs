//! Point clouds of token embeddings.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("point cloud must have at least one point and one dimension (got n={n}, d={d})")]
    Empty { n: usize, d: usize },
    #[error("data length {len} does not match n*d = {n}*{d}")]
    ShapeMismatch { n: usize, d: usize, len: usize },
    #[error("non-finite coordinate at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
}

/// `n` token embeddings of dimension `d`, stored row-major.
///
/// Coordinates are held as `f64` so that distance sums and their logarithms
/// stay well inside the tolerances the estimator promises, even for clouds
/// read from single-precision embedding files.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl TokenEmbeddingMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self, CloudError> {
        if n == 0 || d == 0 {
            return Err(CloudError::Empty { n, d });
        }
        if data.len() != n * d {
            return Err(CloudError::ShapeMismatch { n, d, len: data.len() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(CloudError::NonFinite { row: pos / d, col: pos % d });
        }
        Ok(Self { n, d, data })
    }

    /// Builds a cloud from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, CloudError> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(CloudError::ShapeMismatch { n, d, len: data.len() + row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::new(n, d, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// Copies the given rows, in the given order, into a new cloud.
    ///
    /// Panics if `indices` is empty or holds an out-of-range index.
    pub fn select_rows(&self, indices: &[usize]) -> TokenEmbeddingMatrix {
        assert!(!indices.is_empty(), "cannot select zero rows");
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        TokenEmbeddingMatrix { n: indices.len(), d: self.d, data }
    }

    /// Returns a copy with every coordinate transformed by `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<TokenEmbeddingMatrix, CloudError> {
        Self::new(self.n, self.d, self.data.iter().map(|&v| f(v)).collect())
    }
}

/// Four independent accumulators so the loop vectorizes; the summation order
/// is fixed, so results are still reproducible bit for bit.
#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let (a4, a_rest) = a.split_at(a.len() / 4 * 4);
    let (b4, b_rest) = b.split_at(a4.len());
    for (x, y) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        for k in 0..4 {
            let t = x[k] - y[k];
            acc[k] += t * t;
        }
    }
    let mut tail = 0.0;
    for (x, y) in a_rest.iter().zip(b_rest) {
        tail += (x - y) * (x - y);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
