//! Grid-indexed vectors.

use std::ops::Index;

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on `sum == 1` for probability vectors.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// What a [`FieldVec`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// Scheme unknown `rho_j`, approximating a density.
    Density,
    /// Normalized `p_j = h rho_j / ||rho||`, summing to one.
    Probability,
    /// Density ratio `q_j = p_j / pi_j`.
    Ratio,
    /// Test function for the backward equation.
    Observable,
    /// Stationary distribution of the chain.
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldVec {
    kind: FieldKind,
    values: Vec<f64>,
}

impl FieldVec {
    /// Wraps `values` without checks beyond finiteness.
    pub fn new(kind: FieldKind, values: Vec<f64>) -> Result<Self> {
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite value at node {j}")));
        }
        if matches!(kind, FieldKind::Probability | FieldKind::Stationary) {
            check_probability(&values)?;
        }
        Ok(FieldVec { kind, values })
    }

    pub fn probability(values: Vec<f64>) -> Result<Self> {
        Self::new(FieldKind::Probability, values)
    }

    pub fn density(values: Vec<f64>) -> Result<Self> {
        Self::new(FieldKind::Density, values)
    }

    pub fn observable(values: Vec<f64>) -> Result<Self> {
        Self::new(FieldKind::Observable, values)
    }

    /// Point mass at node `i`.
    pub fn delta(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::Precondition(format!("node {i} outside grid of {n}")));
        }
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self::probability(v)
    }

    pub fn uniform_probability(n: usize) -> Self {
        FieldVec {
            kind: FieldKind::Probability,
            values: vec![1.0 / n as f64; n],
        }
    }

    /// Unchecked constructor for values produced by mass-preserving maps.
    pub(crate) fn from_parts(kind: FieldKind, values: Vec<f64>) -> Self {
        FieldVec { kind, values }
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Relabels the vector, re-running the invariant checks of the new kind.
    pub fn with_kind(self, kind: FieldKind) -> Result<Self> {
        Self::new(kind, self.values)
    }

    /// `q = p / pi` elementwise.
    pub fn ratio_to(&self, pi: &FieldVec) -> Result<FieldVec> {
        crate::error::check_len(self.len(), pi.len())?;
        let q = self
            .values
            .iter()
            .zip(&pi.values)
            .map(|(p, s)| p / s)
            .collect();
        Self::new(FieldKind::Ratio, q)
    }
}

impl Index<usize> for FieldVec {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl AsRef<[f64]> for FieldVec {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

fn check_probability(values: &[f64]) -> Result<()> {
    if let Some(j) = values.iter().position(|&v| v < 0.0) {
        return Err(Error::Precondition(format!(
            "probability vector negative at node {j}: {}",
            values[j]
        )));
    }
    let s: f64 = values.iter().sum();
    if (s - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::Precondition(format!(
            "probability vector sums to {s}, not 1"
        )));
    }
    Ok(())
}
