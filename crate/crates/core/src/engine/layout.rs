//! Labeled tensor-product layouts.
//!
//! Index convention: the first label is the most significant digit of the
//! flattened index. For labels `[A, B]` with dims `[dA, dB]` the basis state
//! `|a⟩_A|b⟩_B` sits at `a * dB + b`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubsystemLayout {
    labels: Vec<String>,
    dims: Vec<usize>,
}

impl SubsystemLayout {
    pub fn new<S: Into<String>>(systems: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut labels: Vec<String> = Vec::new();
        let mut dims = Vec::new();
        for (label, dim) in systems {
            let label = label.into();
            if dim < 2 {
                return Err(SimError::InvalidDimension(dim));
            }
            if labels.contains(&label) {
                return Err(SimError::LabelClash(label));
            }
            labels.push(label);
            dims.push(dim);
        }
        Ok(Self { labels, dims })
    }

    /// A layout with no subsystems; its total dimension is 1.
    pub fn empty() -> Self {
        Self {
            labels: Vec::new(),
            dims: Vec::new(),
        }
    }

    pub fn single(label: &str, dim: usize) -> Result<Self> {
        Self::new([(label, dim)])
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| SimError::LabelNotFound(label.to_string()))
    }

    pub fn positions<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self.position(l.as_ref())?;
            if out.contains(&p) {
                return Err(SimError::LabelClash(l.as_ref().to_string()));
            }
            out.push(p);
        }
        Ok(out)
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.position(label)?])
    }

    /// Stride of each subsystem in the flattened index.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    pub fn index_of(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.dims.len() {
            return Err(SimError::InvalidArgument(format!(
                "expected {} digits, got {}",
                self.dims.len(),
                digits.len()
            )));
        }
        let mut idx = 0;
        for (k, (&digit, &dim)) in digits.iter().zip(&self.dims).enumerate() {
            if digit >= dim {
                return Err(SimError::InvalidIndex {
                    label: self.labels[k].clone(),
                    digit,
                    dim,
                });
            }
            idx = idx * dim + digit;
        }
        Ok(idx)
    }

    pub fn digits_of(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            digits[k] = index % self.dims[k];
            index /= self.dims[k];
        }
        digits
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        for l in &other.labels {
            if self.contains(l) {
                return Err(SimError::LabelClash(l.clone()));
            }
        }
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        let mut dims = self.dims.clone();
        dims.extend(other.dims.iter().copied());
        Ok(Self { labels, dims })
    }

    /// Sub-layout over the given positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> Self {
        Self {
            labels: positions.iter().map(|&p| self.labels[p].clone()).collect(),
            dims: positions.iter().map(|&p| self.dims[p]).collect(),
        }
    }

    /// Positions not in `positions`, in layout order.
    pub fn complement(&self, positions: &[usize]) -> Vec<usize> {
        (0..self.len()).filter(|p| !positions.contains(p)).collect()
    }

    pub fn rename(&self, from: &str, to: &str) -> Result<Self> {
        let p = self.position(from)?;
        if from != to && self.contains(to) {
            return Err(SimError::LabelClash(to.to_string()));
        }
        let mut out = self.clone();
        out.labels[p] = to.to_string();
        Ok(out)
    }

    /// Flattened offsets of every multi-index over `positions` (first position
    /// most significant), measured in this layout's strides.
    pub(crate) fn offsets(&self, positions: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut offsets = vec![0usize];
        for &p in positions {
            let mut next = Vec::with_capacity(offsets.len() * self.dims[p]);
            for &base in &offsets {
                for digit in 0..self.dims[p] {
                    next.push(base + digit * strides[p]);
                }
            }
            offsets = next;
        }
        offsets
    }
}
