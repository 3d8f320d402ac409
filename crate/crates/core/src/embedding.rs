//! Embedding vectors, embedding sets and the similarity kernels shared by
//! every other module.
//!
//! Values are stored as `f32` (the precision used on disk and by model
//! exporters); every reduction accumulates in `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms at or below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

/// A finite real vector of fixed dimension.
///
/// Embeddings produced by [`normalize`] have unit L2 norm; loaded embeddings
/// carry whatever was on disk until normalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f32>);

impl Embedding {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    /// Returns a unit-norm copy.
    pub fn normalized(&self) -> Result<Self> {
        normalize(&self.0, self.dim())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| f64::from(v)).collect()
    }
}

impl AsRef<[f32]> for Embedding {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

/// Scales `raw` to unit L2 norm.
pub fn normalize(raw: &[f32], dim: usize) -> Result<Embedding> {
    if raw.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: raw.len(),
        });
    }
    if let Some(index) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { index });
    }
    let norm = dot(raw, raw).sqrt();
    if norm <= ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    Embedding::new(raw.iter().map(|&v| (f64::from(v) / norm) as f32).collect())
}

/// Inner product with `f64` accumulation. Callers guarantee equal lengths.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    lane_sum(a, b, |x, y| f64::from(x) * f64::from(y))
}

/// Inner product between an `f32` embedding and an `f64` vector.
#[inline]
pub fn dot_f64(a: &[f32], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    lane_sum(a, b, |x, y| f64::from(x) * y)
}

const LANES: usize = 8;

/// Sum of `mul(a[i], b[i])` over independent accumulators, combined in a
/// fixed order so results are reproducible.
#[inline(always)]
fn lane_sum<A: Copy, B: Copy>(a: &[A], b: &[B], mul: impl Fn(A, B) -> f64) -> f64 {
    let mut acc = [0.0f64; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(&x, &y)| mul(x, y))
        .sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += mul(x[l], y[l]);
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Cosine similarity of two unit embeddings, clamped to `[-1, 1]`.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(clamp_similarity(dot(a.as_slice(), b.as_slice())))
}

#[inline]
pub fn clamp_similarity(s: f64) -> f64 {
    s.clamp(-1.0, 1.0)
}

/// Arithmetic mean of a non-empty list of embeddings, in `f64`.
pub fn mean<'a>(items: impl IntoIterator<Item = &'a Embedding>, dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0f64; dim];
    let mut n = 0usize;
    for item in items {
        for (a, &v) in acc.iter_mut().zip(item.as_slice()) {
            *a += f64::from(v);
        }
        n += 1;
    }
    if n > 0 {
        let inv = 1.0 / n as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
    }
    acc
}

/// An ordered collection of equal-dimension embeddings with optional labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    dim: usize,
    items: Vec<Embedding>,
    labels: Option<Vec<String>>,
}

impl EmbeddingSet {
    pub fn new(dim: usize, items: Vec<Embedding>, labels: Option<Vec<String>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if let Some(bad) = items.iter().find(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.dim(),
            });
        }
        if let Some(labels) = &labels {
            if labels.len() != items.len() {
                return Err(Error::MalformedLabels(format!(
                    "{} labels for {} embeddings",
                    labels.len(),
                    items.len()
                )));
            }
        }
        Ok(Self { dim, items, labels })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new(), None)
    }

    /// Builds a set from raw rows, checking dimensions and finiteness.
    pub fn from_rows(dim: usize, rows: Vec<Vec<f32>>, labels: Option<Vec<String>>) -> Result<Self> {
        let items = rows
            .into_iter()
            .map(Embedding::new)
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, items, labels)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Embedding] {
        &self.items
    }

    pub fn get(&self, index: usize) -> Option<&Embedding> {
        self.items.get(index)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels
            .as_ref()
            .and_then(|l| l.get(index))
            .map(String::as_str)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Embedding> {
        self.items.iter()
    }

    /// Unit-normalizes every item.
    pub fn normalized(&self) -> Result<Self> {
        let items = self
            .items
            .iter()
            .map(Embedding::normalized)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim: self.dim,
            items,
            labels: self.labels.clone(),
        })
    }

    /// Copies the members at `indices` (in that order).
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            dim: self.dim,
            items: indices.iter().map(|&i| self.items[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i].clone()).collect()),
        }
    }

    pub fn into_parts(self) -> (usize, Vec<Embedding>, Option<Vec<String>>) {
        (self.dim, self.items, self.labels)
    }
}

impl<'a> IntoIterator for &'a EmbeddingSet {
    type Item = &'a Embedding;
    type IntoIter = std::slice::Iter<'a, Embedding>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}
