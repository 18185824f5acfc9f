//! Vector primitives and dual-encoder scoring.
//!
//! Vectors are stored as `f32` and every reduction accumulates in `f64` in
//! index-ascending order, so results are reproducible across runs and thread
//! counts.

use crate::error::{Error, Result};

/// Dot product without a length check. Callers guarantee `u.len() == v.len()`.
#[inline]
pub fn dot(u: &[f32], v: &[f32]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let mut acc = 0.0f64;
    for (a, b) in u.iter().zip(v) {
        acc += f64::from(*a) * f64::from(*b);
    }
    acc
}

/// Dot product of an `f32` vector against an `f64` vector (centroids during training).
#[inline]
pub(crate) fn dot_mixed(u: &[f32], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let mut acc = 0.0f64;
    for (a, b) in u.iter().zip(v) {
        acc += f64::from(*a) * *b;
    }
    acc
}

/// Inner product `Σ u_d · v_d`.
pub fn inner_product(u: &[f32], v: &[f32]) -> Result<f64> {
    check_dims(u.len(), v.len())?;
    Ok(dot(u, v))
}

/// Logistic function, evaluated in the branch that cannot overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Dual-encoder matching score `sigmoid(cᵀr)`.
pub fn score_dual(c: &[f32], r: &[f32]) -> Result<f64> {
    Ok(sigmoid(inner_product(c, r)?))
}

/// Euclidean norm, accumulated in `f64`.
pub fn l2_norm(v: &[f32]) -> f64 {
    dot(v, v).sqrt()
}

/// Returns `v / ‖v‖₂`. Zero vectors are rejected.
pub fn l2_normalize(v: &[f32]) -> Result<Vec<f32>> {
    let norm = l2_norm(v);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroNorm);
    }
    Ok(v.iter().map(|&x| (f64::from(x) / norm) as f32).collect())
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Dense row-major matrix of `count` vectors of length `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Vec<f32>,
    dim: usize,
}

impl EmbeddingMatrix {
    /// Empty matrix with the given row length.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        Ok(Self { data: Vec::new(), dim })
    }

    /// Wraps a flat row-major buffer. Its length must be a multiple of `dim`
    /// and every entry must be finite.
    pub fn from_flat(data: Vec<f32>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::ShapeMismatch(format!(
                "buffer of {} values is not a whole number of rows of length {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { data, dim })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::InvalidArgument("no rows given".into()))?;
        let mut m = Self::new(dim)?;
        for r in rows {
            m.push(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn push(&mut self, row: &[f32]) -> Result<()> {
        check_dims(self.dim, row.len())?;
        if let Some(pos) = row.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(self.data.len() + pos));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Copies the listed rows into a new matrix.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange { index: i, len: self.len() });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self { data, dim: self.dim })
    }

    pub(crate) fn ensure_searchable(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        Ok(())
    }
}
