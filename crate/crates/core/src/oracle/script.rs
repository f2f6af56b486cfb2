//! Experiment scripts: the intermediate operations a party performs between
//! preparation and post-selection.

use rand::Rng;

use crate::engine::measure::{measurement_branch, sample_outcome, QuantumState};
use crate::engine::random::{haar_unitary, random_basis_measurement, random_povm};
use crate::engine::{bell_povm, PovmSet, UnitaryOp};
use crate::error::{Result, SimError};

/// Hard cap on exact branch enumeration.
pub const MAX_BRANCHES: usize = 1_000_000;

#[derive(Debug, Clone)]
pub enum ScriptStep {
    Unitary { op: UnitaryOp, slots: Vec<usize> },
    Measure { povm: PovmSet, slots: Vec<usize> },
}

/// A finite sequence of unitaries and recorded measurements acting on
/// abstract slots; protocols bind slots to concrete subsystem labels.
#[derive(Debug, Clone)]
pub struct ExperimentScript {
    name: String,
    slot_dims: Vec<usize>,
    steps: Vec<ScriptStep>,
}

impl ExperimentScript {
    pub fn new(name: impl Into<String>, slot_dims: Vec<usize>) -> Result<Self> {
        if slot_dims.is_empty() {
            return Err(SimError::InvalidArgument("script needs at least one slot".into()));
        }
        if let Some(&d) = slot_dims.iter().find(|&&d| d < 2) {
            return Err(SimError::InvalidDimension(d));
        }
        Ok(Self {
            name: name.into(),
            slot_dims,
            steps: Vec::new(),
        })
    }

    fn target_dim(&self, slots: &[usize]) -> Result<usize> {
        let mut seen = Vec::new();
        let mut dim = 1;
        for &s in slots {
            let d = *self.slot_dims.get(s).ok_or_else(|| {
                SimError::InvalidArgument(format!("slot {s} out of range"))
            })?;
            if seen.contains(&s) {
                return Err(SimError::InvalidArgument(format!("slot {s} repeated")));
            }
            seen.push(s);
            dim *= d;
        }
        Ok(dim)
    }

    pub fn push_unitary(mut self, op: UnitaryOp, slots: Vec<usize>) -> Result<Self> {
        let dim = self.target_dim(&slots)?;
        if op.dim() != dim {
            return Err(SimError::ShapeMismatch {
                expected: dim,
                got: op.dim(),
            });
        }
        self.steps.push(ScriptStep::Unitary { op, slots });
        Ok(self)
    }

    pub fn push_measure(mut self, povm: PovmSet, slots: Vec<usize>) -> Result<Self> {
        let dim = self.target_dim(&slots)?;
        if povm.dim() != dim {
            return Err(SimError::ShapeMismatch {
                expected: dim,
                got: povm.dim(),
            });
        }
        self.steps.push(ScriptStep::Measure { povm, slots });
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn slot_dims(&self) -> &[usize] {
        &self.slot_dims
    }

    pub fn steps(&self) -> &[ScriptStep] {
        &self.steps
    }

    /// Number of outcomes of each recorded measurement, in order.
    pub fn outcome_shape(&self) -> Vec<usize> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                ScriptStep::Measure { povm, .. } => Some(povm.len()),
                ScriptStep::Unitary { .. } => None,
            })
            .collect()
    }

    /// Every possible outcome record, lexicographically ordered.
    pub fn records(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for n in self.outcome_shape() {
            out = out
                .into_iter()
                .flat_map(|r| {
                    (0..n).map(move |k| {
                        let mut r = r.clone();
                        r.push(k);
                        r
                    })
                })
                .collect();
        }
        out
    }

    pub fn record_count(&self) -> usize {
        self.outcome_shape().iter().product()
    }

    fn check_bindings(&self, bindings: &[impl AsRef<str>]) -> Result<()> {
        if bindings.len() != self.slot_dims.len() {
            return Err(SimError::InvalidArgument(format!(
                "script `{}` has {} slots but {} bindings",
                self.name,
                self.slot_dims.len(),
                bindings.len()
            )));
        }
        Ok(())
    }

    fn bound<'a, S: AsRef<str>>(bindings: &'a [S], slots: &[usize]) -> Vec<&'a str> {
        slots.iter().map(|&s| bindings[s].as_ref()).collect()
    }

    /// Enumerates every outcome record with its unnormalised Lüders branch.
    pub fn branches<S: QuantumState>(
        &self,
        state: &S,
        bindings: &[impl AsRef<str>],
    ) -> Result<Vec<(Vec<usize>, S)>> {
        self.check_bindings(bindings)?;
        let count = self.record_count();
        if count > MAX_BRANCHES {
            return Err(SimError::ResourceLimit {
                needed: count as u128,
                cap: MAX_BRANCHES as u128,
            });
        }
        let mut branches = vec![(Vec::new(), state.clone())];
        for step in &self.steps {
            match step {
                ScriptStep::Unitary { op, slots } => {
                    let labels = Self::bound(bindings, slots);
                    for (_, s) in branches.iter_mut() {
                        *s = s.unitary(op, &labels)?;
                    }
                }
                ScriptStep::Measure { povm, slots } => {
                    let labels = Self::bound(bindings, slots);
                    let mut next = Vec::with_capacity(branches.len() * povm.len());
                    for (rec, s) in &branches {
                        for k in 0..povm.len() {
                            let mut r = rec.clone();
                            r.push(k);
                            next.push((r, measurement_branch(s, povm, k, &labels)?));
                        }
                    }
                    branches = next;
                }
            }
        }
        Ok(branches)
    }

    /// Runs the script once, sampling each measurement.
    pub fn sample<S: QuantumState, R: Rng + ?Sized>(
        &self,
        state: &S,
        bindings: &[impl AsRef<str>],
        rng: &mut R,
    ) -> Result<(Vec<usize>, S)> {
        self.check_bindings(bindings)?;
        let mut s = state.rescale(1.0 / state.weight());
        let mut record = Vec::new();
        for step in &self.steps {
            match step {
                ScriptStep::Unitary { op, slots } => {
                    s = s.unitary(op, &Self::bound(bindings, slots))?;
                }
                ScriptStep::Measure { povm, slots } => {
                    let o = sample_outcome(&s, povm, &Self::bound(bindings, slots), rng)?;
                    record.push(o.outcome);
                    s = o.state;
                }
            }
        }
        Ok((record, s))
    }

    /// Script that does nothing.
    pub fn empty(d: usize) -> Result<Self> {
        Self::new("none", vec![d])
    }

    /// Computational-basis measurement.
    pub fn z_measure(d: usize) -> Result<Self> {
        Self::new("z-measure", vec![d])?.push_measure(PovmSet::computational(d)?, vec![0])
    }

    /// Fourier-basis measurement (|±⟩ for qubits).
    pub fn x_measure(d: usize) -> Result<Self> {
        Self::new("x-measure", vec![d])?.push_measure(PovmSet::fourier(d)?, vec![0])
    }

    pub fn z_then_x(d: usize) -> Result<Self> {
        Self::new("z-then-x", vec![d])?
            .push_measure(PovmSet::computational(d)?, vec![0])?
            .push_measure(PovmSet::fourier(d)?, vec![0])
    }

    /// Bell-basis verification measurement on two slots.
    pub fn bell_measure(d: usize) -> Result<Self> {
        Self::new("bell-measure", vec![d, d])?.push_measure(bell_povm(d)?, vec![0, 1])
    }

    /// Random script of one to three steps, at least one of them a measurement.
    pub fn random<R: Rng + ?Sized>(slot_dims: Vec<usize>, rng: &mut R) -> Result<Self> {
        let mut script = Self::new("random", slot_dims.clone())?;
        let steps = rng.random_range(1..=3);
        let forced = rng.random_range(0..steps);
        for k in 0..steps {
            let slots = if slot_dims.len() > 1 && rng.random_bool(0.5) {
                (0..slot_dims.len()).collect::<Vec<_>>()
            } else {
                vec![rng.random_range(0..slot_dims.len())]
            };
            let dim: usize = slots.iter().map(|&s| slot_dims[s]).product();
            let measure = k == forced || rng.random_bool(0.5);
            script = if measure {
                let povm = if rng.random_bool(0.5) {
                    random_basis_measurement(dim, rng)?
                } else {
                    random_povm(dim, rng.random_range(2..=3), rng)?
                };
                script.push_measure(povm, slots)?
            } else {
                script.push_unitary(haar_unitary(dim, rng)?, slots)?
            };
        }
        Ok(script)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{DensityOperator, SubsystemLayout};

    #[test]
    fn records_are_lexicographic() {
        let s = ExperimentScript::z_then_x(2).unwrap();
        assert_eq!(
            s.records(),
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
        assert_eq!(ExperimentScript::empty(3).unwrap().records(), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn branches_sum_to_input_weight() {
        let rho = DensityOperator::maximally_mixed(SubsystemLayout::single("B", 3).unwrap());
        let s = ExperimentScript::z_then_x(3).unwrap();
        let total: f64 = s.branches(&rho, &["B"]).unwrap().iter().map(|(_, b)| b.trace()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let r = ExperimentScript::new("x", vec![2]).unwrap().push_measure(
            PovmSet::computational(3).unwrap(),
            vec![0],
        );
        assert!(matches!(r, Err(SimError::ShapeMismatch { .. })));
    }
}
