use serde::{Deserialize, Serialize};

use super::density::DensityOperator;
use super::layout::SubsystemLayout;
use super::linalg::{self, CMatrix, C64, ONE, ZERO};
use super::operator::{apply_local, permute_amplitudes, Operator};
use crate::error::{Result, SimError};
use crate::{EPS_NORM, EPS_UNITARY};

/// A unitary acting on whichever subsystems it is applied to.
#[derive(Debug, Clone)]
pub struct UnitaryOp {
    op: Operator,
}

impl UnitaryOp {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let defect = linalg::unitarity_defect(&matrix);
        if defect > EPS_UNITARY {
            return Err(SimError::NotUnitary(defect));
        }
        Ok(Self {
            op: Operator::Dense(matrix),
        })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            op: Operator::identity(d),
        }
    }

    /// Exchanges two subsystems of equal dimension `d`.
    pub fn swap(d: usize) -> Self {
        let n = d * d;
        let mut m = CMatrix::zeros(n, n);
        for a in 0..d {
            for b in 0..d {
                m[(b * d + a, a * d + b)] = ONE;
            }
        }
        Self {
            op: Operator::Dense(m),
        }
    }

    pub fn matrix(&self) -> CMatrix {
        self.op.to_dense()
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            op: self.op.adjoint(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            op: Operator::Dense(self.op.to_dense().transpose()),
        }
    }

    pub fn conjugate(&self) -> Self {
        Self {
            op: Operator::Dense(self.op.to_dense().map(|z| z.conj())),
        }
    }

    pub fn compose(&self, then: &Self) -> Self {
        Self {
            op: Operator::Dense(then.op.to_dense() * self.op.to_dense()),
        }
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self {
            op: Operator::Dense(linalg::kron(&self.op.to_dense(), &other.op.to_dense())),
        }
    }
}

/// Complex amplitudes over a labeled layout. Never renormalised implicitly:
/// the squared norm of an unnormalised vector is part of its meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    layout: SubsystemLayout,
    amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(layout: SubsystemLayout, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(SimError::ShapeMismatch {
                expected: layout.total_dim(),
                got: amplitudes.len(),
            });
        }
        Ok(Self { layout, amplitudes })
    }

    /// Single-subsystem state from amplitudes.
    pub fn ket(label: &str, amplitudes: Vec<C64>) -> Result<Self> {
        let layout = SubsystemLayout::single(label, amplitudes.len())?;
        Self::new(layout, amplitudes)
    }

    /// The scalar 1 (empty layout).
    pub fn scalar(value: C64) -> Self {
        Self {
            layout: SubsystemLayout::empty(),
            amplitudes: vec![value],
        }
    }

    pub fn basis_state(layout: &SubsystemLayout, digits: &[usize]) -> Result<Self> {
        let idx = layout.index_of(digits)?;
        let mut amps = vec![ZERO; layout.total_dim()];
        amps[idx] = ONE;
        Ok(Self {
            layout: layout.clone(),
            amplitudes: amps,
        })
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        linalg::norm_sqr(&self.amplitudes)
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= EPS_NORM
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n <= crate::EPS_ZERO {
            return Err(SimError::InvalidArgument("cannot normalise a zero vector".into()));
        }
        Ok(self.scaled(C64::new(1.0 / n.sqrt(), 0.0)))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            layout: self.layout.clone(),
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            amplitudes: self.amplitudes.iter().map(|a| a.conj()).collect(),
        }
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
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// ⟨self|other⟩ over identical layouts.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.layout != other.layout {
            return Err(SimError::LabelClash(format!(
                "{:?} vs {:?}",
                self.layout.labels(),
                other.layout.labels()
            )));
        }
        Ok(linalg::inner(&self.amplitudes, &other.amplitudes))
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amps.push(a * b);
            }
        }
        Ok(Self {
            layout,
            amplitudes: amps,
        })
    }

    pub fn apply(&self, op: &UnitaryOp, labels: &[impl AsRef<str>]) -> Result<Self> {
        self.apply_operator(op.operator(), labels)
    }

    /// Applies an arbitrary (not necessarily unitary) local operator.
    pub fn apply_operator(&self, op: &Operator, labels: &[impl AsRef<str>]) -> Result<Self> {
        let positions = self.layout.positions(labels)?;
        let amps = apply_local(&self.amplitudes, &self.layout, &positions, op)?;
        Ok(Self {
            layout: self.layout.clone(),
            amplitudes: amps,
        })
    }

    /// ⟨v|E|v⟩ for a local operator.
    pub fn expectation(&self, op: &Operator, labels: &[impl AsRef<str>]) -> Result<C64> {
        let w = self.apply_operator(op, labels)?;
        Ok(linalg::inner(&self.amplitudes, &w.amplitudes))
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<Self> {
        Ok(Self {
            layout: self.layout.rename(from, to)?,
            amplitudes: self.amplitudes.clone(),
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
            amplitudes: self.amplitudes.clone(),
        })
    }

    /// Reorders subsystems; `order` must list every label exactly once.
    pub fn permute(&self, order: &[impl AsRef<str>]) -> Result<Self> {
        let positions = self.layout.positions(order)?;
        if positions.len() != self.layout.len() {
            return Err(SimError::InvalidArgument(
                "permutation must name every subsystem".into(),
            ));
        }
        let (layout, amplitudes) = permute_amplitudes(&self.amplitudes, &self.layout, &positions);
        Ok(Self { layout, amplitudes })
    }

    /// Contracts the bra ⟨bra| on `labels`, leaving an unnormalised state on
    /// the remaining subsystems. The bra's own labels are ignored; only its
    /// dimension order matters.
    pub fn contract_bra(&self, bra: &StateVector, labels: &[impl AsRef<str>]) -> Result<Self> {
        let positions = self.layout.positions(labels)?;
        let target: Vec<usize> = positions.iter().map(|&p| self.layout.dims()[p]).collect();
        if target != bra.layout.dims() {
            return Err(SimError::ShapeMismatch {
                expected: target.iter().product(),
                got: bra.dim(),
            });
        }
        let rest = self.layout.complement(&positions);
        let t_off = self.layout.offsets(&positions);
        let r_off = self.layout.offsets(&rest);
        let amps = r_off
            .iter()
            .map(|&base| {
                t_off
                    .iter()
                    .zip(&bra.amplitudes)
                    .map(|(&o, b)| b.conj() * self.amplitudes[base + o])
                    .sum()
            })
            .collect();
        Ok(Self {
            layout: self.layout.select(&rest),
            amplitudes: amps,
        })
    }

    /// Matrix whose rows index `positions` and whose columns index the rest.
    pub(crate) fn split_matrix(&self, positions: &[usize]) -> CMatrix {
        let rest = self.layout.complement(positions);
        let k_off = self.layout.offsets(positions);
        let r_off = self.layout.offsets(&rest);
        CMatrix::from_fn(k_off.len(), r_off.len(), |r, c| {
            self.amplitudes[k_off[r] + r_off[c]]
        })
    }

    /// tr_rest |v⟩⟨v| on the kept labels (in the given order).
    pub fn reduced_density(&self, keep: &[impl AsRef<str>]) -> Result<DensityOperator> {
        let positions = self.layout.positions(keep)?;
        let m = self.split_matrix(&positions);
        DensityOperator::from_matrix(self.layout.select(&positions), &m * m.adjoint())
    }

    pub fn to_density(&self) -> DensityOperator {
        let m = linalg::projector(&self.amplitudes);
        DensityOperator::from_matrix(self.layout.clone(), m).expect("layout matches")
    }

    /// Removes subsystems that are in a product pure state with the rest,
    /// returning the remaining state and the removed factor.
    pub fn take_factor(&self, labels: &[impl AsRef<str>]) -> Result<(Self, Self)> {
        let positions = self.layout.positions(labels)?;
        let m = self.split_matrix(&positions);
        let total = self.norm_sqr();
        let rho = &m * m.adjoint();
        let (values, vectors) = linalg::eigh(&rho);
        let top = *values.last().unwrap_or(&0.0);
        if total <= crate::EPS_ZERO || (top - total).abs() > EPS_NORM * total.max(1.0) {
            return Err(SimError::InvalidArgument(format!(
                "subsystems {:?} are not in a product state",
                labels.iter().map(|l| l.as_ref()).collect::<Vec<_>>()
            )));
        }
        let factor: Vec<C64> = vectors.column(values.len() - 1).iter().copied().collect();
        let factor = StateVector::new(self.layout.select(&positions), factor)?;
        let rest = self.contract_bra(&factor, labels)?;
        Ok((rest, factor))
    }

    /// Fidelity |⟨a|b⟩|² of the normalised states.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        let ov = self.inner(other)?;
        let n = self.norm_sqr() * other.norm_sqr();
        if n <= crate::EPS_ZERO {
            return Err(SimError::InvalidArgument("fidelity of a zero vector".into()));
        }
        Ok((ov.norm_sqr() / n).clamp(0.0, 1.0))
    }

    /// Equality up to a global phase, as rays.
    pub fn same_ray(&self, other: &Self, tol: f64) -> bool {
        match self.fidelity(other) {
            Ok(f) => (1.0 - f).abs() <= tol,
            Err(_) => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn basis_state_examples() {
        let a = SubsystemLayout::single("A", 2).unwrap();
        assert_eq!(
            StateVector::basis_state(&a, &[0]).unwrap().amplitudes(),
            &[c(1.0), c(0.0)]
        );
        let ab = SubsystemLayout::new([("A", 2), ("B", 2)]).unwrap();
        let s = StateVector::basis_state(&ab, &[1, 0]).unwrap();
        assert_eq!(s.amplitudes()[2], c(1.0));
        let a3 = SubsystemLayout::single("A", 3).unwrap();
        assert!(matches!(
            StateVector::basis_state(&a3, &[3]),
            Err(SimError::InvalidIndex { .. })
        ));
    }

    #[test]
    fn swap_exchanges_subsystems() {
        let l = SubsystemLayout::new([("A", 2), ("t", 2)]).unwrap();
        let s = StateVector::basis_state(&l, &[0, 1]).unwrap();
        let out = s.apply(&UnitaryOp::swap(2), &["A", "t"]).unwrap();
        assert_eq!(out, StateVector::basis_state(&l, &[1, 0]).unwrap());
    }

    #[test]
    fn tensor_label_clash() {
        let a = StateVector::ket("A", vec![c(1.0), c(0.0)]).unwrap();
        assert_eq!(a.tensor(&a), Err(SimError::LabelClash("A".into())));
    }

    #[test]
    fn permute_round_trip() {
        let l = SubsystemLayout::new([("A", 2), ("B", 3), ("C", 2)]).unwrap();
        let amps: Vec<C64> = (0..12).map(|k| C64::new(k as f64, -(k as f64))).collect();
        let s = StateVector::new(l, amps).unwrap();
        let p = s.permute(&["C", "A", "B"]).unwrap();
        assert_eq!(p.layout().labels(), &["C", "A", "B"]);
        // |c,a,b⟩ in the permuted state equals |a,b,c⟩ in the original
        let orig = s.layout().index_of(&[1, 2, 0]).unwrap();
        let perm = p.layout().index_of(&[0, 1, 2]).unwrap();
        assert_eq!(s.amplitudes()[orig], p.amplitudes()[perm]);
        assert_eq!(p.permute(&["A", "B", "C"]).unwrap(), s);
    }

    #[test]
    fn unknown_label_is_reported() {
        let a = StateVector::ket("A", vec![c(1.0), c(0.0)]).unwrap();
        assert_eq!(
            a.apply(&UnitaryOp::identity(2), &["Z"]),
            Err(SimError::LabelNotFound("Z".into()))
        );
    }

    #[test]
    fn take_factor_removes_product_part() {
        let a = StateVector::ket("A", vec![c(0.6), c(0.8)]).unwrap();
        let b = StateVector::ket("B", vec![c(0.0), c(1.0)]).unwrap();
        let ab = a.tensor(&b).unwrap();
        let (rest, factor) = ab.take_factor(&["B"]).unwrap();
        assert!(rest.same_ray(&a, 1e-12));
        assert!(factor.same_ray(&b, 1e-12));
        assert!((rest.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
