//! Local operators and the kernel that applies them to chosen subsystems.

use std::sync::Arc;

use super::layout::SubsystemLayout;
use super::linalg::{self, CMatrix, C64, ZERO};
use crate::error::{Result, SimError};

/// `scalar·𝟙 + Q·core·Q†` with `Q` an isometry (orthonormal columns).
///
/// Port-based measurements live on spaces far larger than their rank; this
/// form keeps both the elements and their square roots cheap to apply.
#[derive(Debug, Clone)]
pub struct StructuredOp {
    scalar: C64,
    basis: Arc<CMatrix>,
    core: CMatrix,
}

impl StructuredOp {
    pub fn new(scalar: C64, basis: Arc<CMatrix>, core: CMatrix) -> Result<Self> {
        if core.nrows() != basis.ncols() || core.ncols() != basis.ncols() {
            return Err(SimError::ShapeMismatch {
                expected: basis.ncols(),
                got: core.nrows(),
            });
        }
        Ok(Self {
            scalar,
            basis,
            core,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank_bound(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn core(&self) -> &CMatrix {
        &self.core
    }

    pub fn scalar(&self) -> C64 {
        self.scalar
    }

    fn apply_matrix(&self, cols: &CMatrix) -> CMatrix {
        let projected = self.basis.adjoint() * cols;
        let mut out = cols * self.scalar;
        out.gemm(
            linalg::ONE,
            &self.basis,
            &(&self.core * projected),
            linalg::ONE,
        );
        out
    }

    /// Square root, assuming the operator is Hermitian positive semidefinite.
    pub fn sqrt_psd(&self) -> Self {
        let s = self.scalar.re.max(0.0);
        let r = self.core.nrows();
        let inner = &self.core + linalg::identity(r) * C64::new(s, 0.0);
        let root = linalg::sqrt_psd(&inner) - linalg::identity(r) * C64::new(s.sqrt(), 0.0);
        Self {
            scalar: C64::new(s.sqrt(), 0.0),
            basis: Arc::clone(&self.basis),
            core: root,
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.dim();
        let mut m = &*self.basis * &self.core * self.basis.adjoint();
        for k in 0..n {
            m[(k, k)] += self.scalar;
        }
        m
    }

    /// Smallest eigenvalue, computed in the compressed picture.
    pub fn min_eigenvalue(&self) -> f64 {
        let r = self.core.nrows();
        let inner = &self.core + linalg::identity(r) * self.scalar;
        let mut m = linalg::min_eigenvalue(&inner);
        if r < self.dim() {
            m = m.min(self.scalar.re);
        }
        m
    }
}

#[derive(Debug, Clone)]
pub enum Operator {
    Dense(CMatrix),
    Structured(StructuredOp),
}

impl Operator {
    pub fn dense(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(SimError::ShapeMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        Ok(Operator::Dense(m))
    }

    pub fn identity(n: usize) -> Self {
        Operator::Dense(linalg::identity(n))
    }

    pub fn dim(&self) -> usize {
        match self {
            Operator::Dense(m) => m.nrows(),
            Operator::Structured(s) => s.dim(),
        }
    }

    /// Applies the operator to each column of `cols`.
    pub fn apply_matrix(&self, cols: &CMatrix) -> CMatrix {
        match self {
            Operator::Dense(m) => m * cols,
            Operator::Structured(s) => s.apply_matrix(cols),
        }
    }

    pub fn adjoint(&self) -> Self {
        match self {
            Operator::Dense(m) => Operator::Dense(m.adjoint()),
            Operator::Structured(s) => Operator::Structured(StructuredOp {
                scalar: s.scalar.conj(),
                basis: Arc::clone(&s.basis),
                core: s.core.adjoint(),
            }),
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            Operator::Dense(m) => m.clone(),
            Operator::Structured(s) => s.to_dense(),
        }
    }

    pub fn sqrt_psd(&self) -> Self {
        match self {
            Operator::Dense(m) => Operator::Dense(linalg::sqrt_psd(m)),
            Operator::Structured(s) => Operator::Structured(s.sqrt_psd()),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            Operator::Dense(m) => linalg::min_eigenvalue(m),
            Operator::Structured(s) => s.min_eigenvalue(),
        }
    }

    /// Number of complex entries held in memory.
    pub fn stored_entries(&self) -> usize {
        match self {
            Operator::Dense(m) => m.len(),
            Operator::Structured(s) => s.basis.len() + s.core.len(),
        }
    }
}

impl From<CMatrix> for Operator {
    fn from(m: CMatrix) -> Self {
        Operator::Dense(m)
    }
}

/// Applies `op` to the subsystems at `positions` of a flat amplitude array.
pub(crate) fn apply_local(
    amps: &[C64],
    layout: &SubsystemLayout,
    positions: &[usize],
    op: &Operator,
) -> Result<Vec<C64>> {
    let target_dim: usize = positions.iter().map(|&p| layout.dims()[p]).product();
    if target_dim != op.dim() {
        return Err(SimError::ShapeMismatch {
            expected: target_dim,
            got: op.dim(),
        });
    }
    let target = layout.offsets(positions);
    let rest = layout.offsets(&layout.complement(positions));
    let mut cols = CMatrix::from_element(target_dim, rest.len(), ZERO);
    for (b, &base) in rest.iter().enumerate() {
        let mut col = cols.column_mut(b);
        for (k, &off) in target.iter().enumerate() {
            col[k] = amps[base + off];
        }
    }
    let out = op.apply_matrix(&cols);
    let mut result = vec![ZERO; amps.len()];
    for (b, &base) in rest.iter().enumerate() {
        let col = out.column(b);
        for (k, &off) in target.iter().enumerate() {
            result[base + off] = col[k];
        }
    }
    Ok(result)
}

/// Reorders amplitudes so that `order` (a permutation of positions) becomes the
/// new subsystem order.
pub(crate) fn permute_amplitudes(
    amps: &[C64],
    layout: &SubsystemLayout,
    order: &[usize],
) -> (SubsystemLayout, Vec<C64>) {
    let new_layout = layout.select(order);
    let offsets = layout.offsets(order);
    let out = offsets.iter().map(|&o| amps[o]).collect();
    (new_layout, out)
}
