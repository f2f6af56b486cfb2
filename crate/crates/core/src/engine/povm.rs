use super::linalg::{self, CMatrix, C64};
use super::operator::Operator;
use crate::error::{Result, SimError};
use crate::EPS_POVM;

/// Largest dimension at which completeness and positivity are checked densely
/// on construction. Larger structured sets are checked by their builders.
const DENSE_CHECK_LIMIT: usize = 512;

/// Finite set of positive operators summing to the identity, together with
/// the square roots used for the post-measurement (Lüders) update.
#[derive(Debug, Clone)]
pub struct PovmSet {
    elements: Vec<Operator>,
    roots: Vec<Operator>,
    labels: Vec<String>,
}

impl PovmSet {
    pub fn new(elements: Vec<Operator>) -> Result<Self> {
        let dim = Self::common_dim(&elements)?;
        if dim <= DENSE_CHECK_LIMIT {
            let (completeness, min_eig) = Self::defects(&elements);
            if completeness > EPS_POVM {
                return Err(SimError::InvalidPovm(format!(
                    "elements sum to identity only within {completeness:e}"
                )));
            }
            if min_eig < -EPS_POVM {
                return Err(SimError::InvalidPovm(format!(
                    "element has eigenvalue {min_eig:e}"
                )));
            }
        }
        Ok(Self::new_unchecked(elements))
    }

    /// Builds the set without the dense validity check; callers guarantee
    /// positivity and completeness by construction.
    pub(crate) fn new_unchecked(elements: Vec<Operator>) -> Self {
        let roots = elements.iter().map(Operator::sqrt_psd).collect();
        let labels = (0..elements.len()).map(|k| k.to_string()).collect();
        Self {
            elements,
            roots,
            labels,
        }
    }

    fn common_dim(elements: &[Operator]) -> Result<usize> {
        let first = elements
            .first()
            .ok_or_else(|| SimError::InvalidPovm("no elements".into()))?;
        let dim = first.dim();
        for e in elements {
            if e.dim() != dim {
                return Err(SimError::ShapeMismatch {
                    expected: dim,
                    got: e.dim(),
                });
            }
        }
        Ok(dim)
    }

    /// (max |Σ E − 𝟙|, min eigenvalue over elements), computed densely.
    pub fn defects(elements: &[Operator]) -> (f64, f64) {
        let dim = elements[0].dim();
        let mut sum = CMatrix::zeros(dim, dim);
        let mut min_eig = f64::INFINITY;
        for e in elements {
            let m = e.to_dense();
            min_eig = min_eig.min(linalg::min_eigenvalue(&m));
            sum += m;
        }
        (linalg::max_abs_diff(&sum, &linalg::identity(dim)), min_eig)
    }

    pub fn validity_defects(&self) -> (f64, f64) {
        Self::defects(&self.elements)
    }

    /// Rank-one projectors onto `kets`. A projector is its own square root,
    /// so the Lüders roots are exact.
    pub fn projective(kets: &[Vec<C64>]) -> Result<Self> {
        let elements: Vec<Operator> = kets
            .iter()
            .map(|k| Operator::Dense(linalg::projector(k)))
            .collect();
        let mut set = Self::new(elements)?;
        set.roots = set.elements.clone();
        Ok(set)
    }

    /// Projective measurement in the computational basis of a d-level system.
    pub fn computational(d: usize) -> Result<Self> {
        let kets: Vec<Vec<C64>> = (0..d)
            .map(|k| {
                let mut v = vec![C64::new(0.0, 0.0); d];
                v[k] = C64::new(1.0, 0.0);
                v
            })
            .collect();
        Self::projective(&kets)
    }

    /// Projective measurement in the Fourier basis (|+⟩, |−⟩ for qubits).
    pub fn fourier(d: usize) -> Result<Self> {
        let a = 1.0 / (d as f64).sqrt();
        let kets: Vec<Vec<C64>> = (0..d)
            .map(|j| {
                (0..d)
                    .map(|k| {
                        C64::from_polar(a, 2.0 * std::f64::consts::PI * (j * k) as f64 / d as f64)
                    })
                    .collect()
            })
            .collect();
        Self::projective(&kets)
    }

    /// {E, 𝟙 − E} for an effect 0 ≤ E ≤ 𝟙.
    pub fn binary(effect: CMatrix) -> Result<Self> {
        let n = effect.nrows();
        let rest = linalg::identity(n) - &effect;
        let mut p = Self::new(vec![Operator::Dense(effect), Operator::Dense(rest)])?;
        p.labels = vec!["accept".into(), "reject".into()];
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn element(&self, k: usize) -> &Operator {
        &self.elements[k]
    }

    pub fn root(&self, k: usize) -> &Operator {
        &self.roots[k]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn set_labels(&mut self, labels: Vec<String>) -> Result<()> {
        if labels.len() != self.elements.len() {
            return Err(SimError::InvalidArgument("label count mismatch".into()));
        }
        self.labels = labels;
        Ok(())
    }

    pub fn stored_entries(&self) -> usize {
        self.elements
            .iter()
            .chain(&self.roots)
            .map(Operator::stored_entries)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_incomplete_sets() {
        let half = linalg::identity(2) * C64::new(0.5, 0.0);
        assert!(matches!(
            PovmSet::new(vec![Operator::Dense(half)]),
            Err(SimError::InvalidPovm(_))
        ));
    }

    #[test]
    fn rejects_non_positive_elements() {
        let mut a = linalg::identity(2) * C64::new(1.5, 0.0);
        a[(1, 1)] = C64::new(-0.5, 0.0);
        let b = linalg::identity(2) - &a;
        assert!(matches!(
            PovmSet::new(vec![Operator::Dense(a), Operator::Dense(b)]),
            Err(SimError::InvalidPovm(_))
        ));
    }

    #[test]
    fn fourier_basis_is_complete() {
        for d in 2..=5 {
            let p = PovmSet::fourier(d).unwrap();
            let (c, m) = p.validity_defects();
            assert!(c < 1e-12 && m > -1e-12);
        }
    }
}
