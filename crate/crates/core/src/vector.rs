//! Dense embedding vectors and the cosine arithmetic everything else builds on.
//!
//! Entries are stored as `f32` (the on-disk width) and every reduction is
//! accumulated in `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite, non-empty dense vector.
///
/// Zero vectors are representable; operations that need a direction
/// ([`cosine_similarity`], [`l2_normalize`]) reject them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct Embedding(Vec<f32>);

impl Embedding {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some(position) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { position });
        }
        Ok(Embedding(values))
    }

    /// Builds a vector that passes [`validate_vector`] for `expected_dim`.
    pub fn validated(values: Vec<f32>, expected_dim: usize) -> Result<Self> {
        validate_vector(&values, expected_dim)?;
        Ok(Embedding(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// Multiplies every entry by `factor`, rejecting non-finite results.
    pub fn scaled(&self, factor: f32) -> Result<Self> {
        Embedding::new(self.0.iter().map(|v| v * factor).collect())
    }
}

impl TryFrom<Vec<f32>> for Embedding {
    type Error = Error;

    fn try_from(values: Vec<f32>) -> Result<Self> {
        Embedding::new(values)
    }
}

impl From<Embedding> for Vec<f32> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

impl AsRef<[f32]> for Embedding {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

/// Dot product accumulated in `f64`.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

pub fn norm(a: &[f32]) -> f64 {
    a.iter()
        .map(|&x| {
            let x = f64::from(x);
            x * x
        })
        .sum::<f64>()
        .sqrt()
}

/// Cosine of the angle between `a` and `b`, clamped to `[-1, 1]`.
///
/// The expression is symmetric in its operands, so swapping them gives a
/// bit-identical result.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(clamp_unit(dot(&a.0, &b.0) / (na * nb)))
}

pub fn l2_normalize(a: &Embedding) -> Result<Embedding> {
    Ok(Embedding(unit_f32(&a.0)?))
}

/// Unit-length copy in `f32`; the row representation stored by indices.
pub(crate) fn unit_f32(a: &[f32]) -> Result<Vec<f32>> {
    let n = norm(a);
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(a.iter().map(|&x| (f64::from(x) / n) as f32).collect())
}

/// Unit-length copy kept in `f64`; used for queries so that only the stored
/// rows carry `f32` rounding.
pub(crate) fn unit_f64(a: &[f32]) -> Result<Vec<f64>> {
    let n = norm(a);
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(a.iter().map(|&x| f64::from(x) / n).collect())
}

/// Clamps to `[-1, 1]` and maps `-0.0` to `0.0`, so that scores compare
/// equal under `total_cmp` whenever they are numerically equal.
pub(crate) fn clamp_unit(x: f64) -> f64 {
    x.clamp(-1.0, 1.0) + 0.0
}

/// Checks dimension, finiteness and non-zero norm, in that order.
pub fn validate_vector(values: &[f32], expected_dim: usize) -> Result<()> {
    if values.len() != expected_dim {
        return Err(Error::DimensionMismatch {
            expected: expected_dim,
            actual: values.len(),
        });
    }
    if let Some(position) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEntry { position });
    }
    if norm(values) == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(())
}
