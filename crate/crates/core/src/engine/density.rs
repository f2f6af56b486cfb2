use super::layout::SubsystemLayout;
use super::linalg::{self, CMatrix, C64};
use super::operator::{apply_local, Operator};
use super::state::{StateVector, UnitaryOp};
use crate::error::{Result, SimError};
use crate::EPS_NORM;

const COL: &str = "\u{0}col";

/// Complex matrix over a labeled layout. The trace is not forced to one, so
/// conditioned (sub-normalised) operators keep their branch weight.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    layout: SubsystemLayout,
    matrix: CMatrix,
}

impl DensityOperator {
    pub fn from_matrix(layout: SubsystemLayout, matrix: CMatrix) -> Result<Self> {
        let n = layout.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(SimError::ShapeMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        Ok(Self { layout, matrix })
    }

    pub fn maximally_mixed(layout: SubsystemLayout) -> Self {
        let n = layout.total_dim();
        let matrix = linalg::identity(n) * C64::new(1.0 / n as f64, 0.0);
        Self { layout, matrix }
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            layout: self.layout.clone(),
            matrix: &self.matrix * C64::new(factor, 0.0),
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if t <= crate::EPS_ZERO {
            return Err(SimError::InvalidArgument("cannot normalise a zero operator".into()));
        }
        Ok(self.scaled(1.0 / t))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.layout != other.layout {
            return Err(SimError::LabelClash(format!(
                "{:?} vs {:?}",
                self.layout.labels(),
                other.layout.labels()
            )));
        }
        Ok(Self {
            layout: self.layout.clone(),
            matrix: &self.matrix + &other.matrix,
        })
    }

    /// Hermitian within ε, eigenvalues ≥ −ε.
    pub fn is_valid(&self, eps: f64) -> bool {
        linalg::hermiticity_defect(&self.matrix) <= eps
            && linalg::min_eigenvalue(&self.matrix) >= -eps
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            layout: self.layout.concat(&other.layout)?,
            matrix: linalg::kron(&self.matrix, &other.matrix),
        })
    }

    fn column_layout(&self) -> SubsystemLayout {
        let n = self.layout.total_dim();
        if n < 2 {
            return self.layout.clone();
        }
        SubsystemLayout::single(COL, n)
            .and_then(|c| c.concat(&self.layout))
            .expect("reserved label")
    }

    /// L·ρ for a local operator L.
    fn left_multiply(&self, op: &Operator, positions: &[usize]) -> Result<CMatrix> {
        let n = self.layout.total_dim();
        if n < 2 {
            return Ok(op.to_dense() * &self.matrix);
        }
        // nalgebra storage is column-major, so the flat data is indexed by
        // (column, row) with the column most significant.
        let shifted: Vec<usize> = positions.iter().map(|p| p + 1).collect();
        let data = apply_local(
            self.matrix.as_slice(),
            &self.column_layout(),
            &shifted,
            op,
        )?;
        Ok(CMatrix::from_vec(n, n, data))
    }

    /// L·ρ·L† for a local operator L.
    pub fn apply_operator(&self, op: &Operator, labels: &[impl AsRef<str>]) -> Result<Self> {
        let positions = self.layout.positions(labels)?;
        let half = self.left_multiply(op, &positions)?;
        let tmp = Self {
            layout: self.layout.clone(),
            matrix: half.adjoint(),
        };
        let full = tmp.left_multiply(op, &positions)?;
        Ok(Self {
            layout: self.layout.clone(),
            matrix: full.adjoint(),
        })
    }

    pub fn apply(&self, op: &UnitaryOp, labels: &[impl AsRef<str>]) -> Result<Self> {
        self.apply_operator(op.operator(), labels)
    }

    /// tr(E·ρ) for a local operator E.
    pub fn expectation(&self, op: &Operator, labels: &[impl AsRef<str>]) -> Result<C64> {
        let positions = self.layout.positions(labels)?;
        Ok(self.left_multiply(op, &positions)?.trace())
    }

    pub fn partial_trace(&self, keep: &[impl AsRef<str>]) -> Result<Self> {
        if keep.is_empty() {
            return Err(SimError::InvalidArgument("keep set must be nonempty".into()));
        }
        let positions = self.layout.positions(keep)?;
        let rest = self.layout.complement(&positions);
        let k_off = self.layout.offsets(&positions);
        let r_off = self.layout.offsets(&rest);
        let m = CMatrix::from_fn(k_off.len(), k_off.len(), |r, c| {
            r_off
                .iter()
                .map(|&o| self.matrix[(k_off[r] + o, k_off[c] + o)])
                .sum()
        });
        Ok(Self {
            layout: self.layout.select(&positions),
            matrix: m,
        })
    }

    pub fn permute(&self, order: &[impl AsRef<str>]) -> Result<Self> {
        let positions = self.layout.positions(order)?;
        if positions.len() != self.layout.len() {
            return Err(SimError::InvalidArgument(
                "permutation must name every subsystem".into(),
            ));
        }
        let off = self.layout.offsets(&positions);
        let m = CMatrix::from_fn(off.len(), off.len(), |r, c| self.matrix[(off[r], off[c])]);
        Ok(Self {
            layout: self.layout.select(&positions),
            matrix: m,
        })
    }

    pub fn relabel_all(&self, labels: &[impl AsRef<str>]) -> Result<Self> {
        if labels.len() != self.layout.len() {
            return Err(SimError::InvalidArgument("relabel arity mismatch".into()));
        }
        let layout = SubsystemLayout::new(
            labels
                .iter()
                .zip(self.layout.dims())
                .map(|(l, &d)| (l.as_ref().to_string(), d)),
        )?;
        Ok(Self {
            layout,
            matrix: self.matrix.clone(),
        })
    }

    /// ⟨φ|_labels ρ |φ⟩_labels on the remaining subsystems.
    pub fn contract_bra(&self, bra: &StateVector, labels: &[impl AsRef<str>]) -> Result<Self> {
        let positions = self.layout.positions(labels)?;
        let target: Vec<usize> = positions.iter().map(|&p| self.layout.dims()[p]).collect();
        if target != bra.layout().dims() {
            return Err(SimError::ShapeMismatch {
                expected: target.iter().product(),
                got: bra.dim(),
            });
        }
        let rest = self.layout.complement(&positions);
        let t_off = self.layout.offsets(&positions);
        let r_off = self.layout.offsets(&rest);
        let b = bra.amplitudes();
        let m = CMatrix::from_fn(r_off.len(), r_off.len(), |r, c| {
            let mut acc = C64::new(0.0, 0.0);
            for (k, &tk) in t_off.iter().enumerate() {
                for (l, &tl) in t_off.iter().enumerate() {
                    acc += b[k].conj() * self.matrix[(r_off[r] + tk, r_off[c] + tl)] * b[l];
                }
            }
            acc
        });
        Ok(Self {
            layout: self.layout.select(&rest),
            matrix: m,
        })
    }

    /// Eigen-ensemble: unnormalised pure states whose projectors sum to ρ.
    pub fn ensemble(&self, cutoff: f64) -> Vec<StateVector> {
        let (values, vectors) = linalg::eigh(&self.matrix);
        values
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, &v)| v > cutoff)
            .map(|(k, &v)| {
                let amps = vectors.column(k).iter().map(|a| a * v.sqrt()).collect();
                StateVector::new(self.layout.clone(), amps).expect("layout matches")
            })
            .collect()
    }

    /// Uhlmann fidelity (tr√(√ρ σ √ρ))² of the normalised operators.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        if self.layout != other.layout {
            return Err(SimError::LabelClash(format!(
                "{:?} vs {:?}",
                self.layout.labels(),
                other.layout.labels()
            )));
        }
        let a = self.normalized()?;
        let b = other.normalized()?;
        let root = linalg::sqrt_psd(&a.matrix);
        let inner = &root * &b.matrix * &root;
        let (values, _) = linalg::eigh(&inner);
        let s: f64 = values.iter().map(|v| v.max(0.0).sqrt()).sum();
        Ok((s * s).clamp(0.0, 1.0))
    }

    /// ⟨ψ|ρ|ψ⟩ / (tr ρ ⟨ψ|ψ⟩).
    pub fn fidelity_with_pure(&self, psi: &StateVector) -> Result<f64> {
        if &self.layout != psi.layout() {
            return Err(SimError::LabelClash(format!(
                "{:?} vs {:?}",
                self.layout.labels(),
                psi.layout().labels()
            )));
        }
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let num = (v.adjoint() * &self.matrix * &v)[(0, 0)].re;
        let den = self.trace() * psi.norm_sqr();
        if den <= crate::EPS_ZERO {
            return Err(SimError::InvalidArgument("fidelity of a zero state".into()));
        }
        Ok((num / den).clamp(0.0, 1.0))
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.layout == other.layout && linalg::max_abs_diff(&self.matrix, &other.matrix) <= tol
    }

    pub fn trace_is_one(&self) -> bool {
        (self.trace() - 1.0).abs() <= EPS_NORM
    }
}

impl From<&StateVector> for DensityOperator {
    fn from(s: &StateVector) -> Self {
        s.to_density()
    }
}
