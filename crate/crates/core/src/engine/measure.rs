//! Born statistics, sampling and post-selection for pure and mixed states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::density::DensityOperator;
use super::layout::SubsystemLayout;
use super::operator::Operator;
use super::povm::PovmSet;
use super::state::{StateVector, UnitaryOp};
use crate::error::{Result, SimError};
use crate::EPS_ZERO;

/// Operations shared by state vectors and density operators.
pub trait QuantumState: Clone + Sized {
    fn layout(&self) -> &SubsystemLayout;
    /// Squared norm or trace.
    fn weight(&self) -> f64;
    /// `L|v⟩` or `LρL†`.
    fn transform(&self, op: &Operator, labels: &[impl AsRef<str>]) -> Result<Self>;
    /// `⟨v|E|v⟩` or `tr(Eρ)`, unnormalised.
    fn expect(&self, op: &Operator, labels: &[impl AsRef<str>]) -> Result<f64>;
    fn rescale(&self, weight_factor: f64) -> Self;

    fn unitary(&self, op: &UnitaryOp, labels: &[impl AsRef<str>]) -> Result<Self> {
        self.transform(op.operator(), labels)
    }
}

impl QuantumState for StateVector {
    fn layout(&self) -> &SubsystemLayout {
        StateVector::layout(self)
    }
    fn weight(&self) -> f64 {
        self.norm_sqr()
    }
    fn transform(&self, op: &Operator, labels: &[impl AsRef<str>]) -> Result<Self> {
        self.apply_operator(op, labels)
    }
    fn expect(&self, op: &Operator, labels: &[impl AsRef<str>]) -> Result<f64> {
        Ok(self.expectation(op, labels)?.re)
    }
    fn rescale(&self, weight_factor: f64) -> Self {
        self.scaled(num_complex::Complex64::new(weight_factor.sqrt(), 0.0))
    }
}

impl QuantumState for DensityOperator {
    fn layout(&self) -> &SubsystemLayout {
        DensityOperator::layout(self)
    }
    fn weight(&self) -> f64 {
        self.trace()
    }
    fn transform(&self, op: &Operator, labels: &[impl AsRef<str>]) -> Result<Self> {
        self.apply_operator(op, labels)
    }
    fn expect(&self, op: &Operator, labels: &[impl AsRef<str>]) -> Result<f64> {
        Ok(self.expectation(op, labels)?.re)
    }
    fn rescale(&self, weight_factor: f64) -> Self {
        self.scaled(weight_factor)
    }
}

/// Exact outcome probabilities, normalised by the state's weight.
pub fn born_probabilities<S: QuantumState>(
    state: &S,
    povm: &PovmSet,
    labels: &[impl AsRef<str>],
) -> Result<Vec<f64>> {
    let w = state.weight();
    if w <= EPS_ZERO {
        return Err(SimError::InvalidArgument("state has zero weight".into()));
    }
    povm.elements()
        .iter()
        .map(|e| Ok(state.expect(e, labels)? / w))
        .collect()
}

/// Unnormalised Lüders branch `√E_k · state`.
pub fn measurement_branch<S: QuantumState>(
    state: &S,
    povm: &PovmSet,
    outcome: usize,
    labels: &[impl AsRef<str>],
) -> Result<S> {
    state.transform(povm.root(outcome), labels)
}

#[derive(Debug, Clone)]
pub struct SampledOutcome<S> {
    pub outcome: usize,
    /// Post-measurement state renormalised to unit weight.
    pub state: S,
    pub probability: f64,
}

/// Draws one outcome from the Born distribution and collapses the state.
pub fn sample_outcome<S: QuantumState, R: Rng + ?Sized>(
    state: &S,
    povm: &PovmSet,
    labels: &[impl AsRef<str>],
    rng: &mut R,
) -> Result<SampledOutcome<S>> {
    let w = state.weight();
    if w <= EPS_ZERO {
        return Err(SimError::InvalidArgument("state has zero weight".into()));
    }
    let branches: Vec<S> = (0..povm.len())
        .map(|k| measurement_branch(state, povm, k, labels))
        .collect::<Result<_>>()?;
    let probs: Vec<f64> = branches.iter().map(|b| b.weight() / w).collect();
    let outcome = draw_index(&probs, rng);
    let p = probs[outcome];
    let collapsed = branches[outcome].rescale(1.0 / (p * w));
    Ok(SampledOutcome {
        outcome,
        state: collapsed,
        probability: p,
    })
}

/// Seeded convenience wrapper over [`sample_outcome`].
pub fn sample_outcome_seeded<S: QuantumState>(
    state: &S,
    povm: &PovmSet,
    labels: &[impl AsRef<str>],
    seed: u64,
) -> Result<SampledOutcome<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_outcome(state, povm, labels, &mut rng)
}

/// Categorical draw that never returns a zero-probability index.
pub fn draw_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last = k;
        acc += p;
        if u < acc {
            return k;
        }
    }
    last
}

/// What a post-selection keeps.
#[derive(Debug, Clone)]
pub enum Effect {
    /// Projection onto ⟨φ|; the measured subsystems are consumed.
    Bra(StateVector),
    /// Positive effect 0 ≤ E ≤ 𝟙; subsystems stay, updated by √E.
    Operator(Operator),
}

#[derive(Debug, Clone)]
pub struct PostSelection<S> {
    pub probability: f64,
    /// Conditioned state renormalised to unit weight.
    pub state: S,
    /// Unnormalised conditioned state (for pure inputs: the amplitude).
    pub unnormalized: S,
}

pub trait PostSelect: QuantumState {
    fn contract_effect(&self, bra: &StateVector, labels: &[impl AsRef<str>]) -> Result<Self>;
}

impl PostSelect for StateVector {
    fn contract_effect(&self, bra: &StateVector, labels: &[impl AsRef<str>]) -> Result<Self> {
        self.contract_bra(bra, labels)
    }
}

impl PostSelect for DensityOperator {
    fn contract_effect(&self, bra: &StateVector, labels: &[impl AsRef<str>]) -> Result<Self> {
        self.contract_bra(bra, labels)
    }
}

/// Keeps only the branch selected by `effect`; fails when that branch has
/// probability below ε_zero.
pub fn post_select<S: PostSelect>(
    state: &S,
    effect: &Effect,
    labels: &[impl AsRef<str>],
) -> Result<PostSelection<S>> {
    let w = state.weight();
    if w <= EPS_ZERO {
        return Err(SimError::InvalidArgument("state has zero weight".into()));
    }
    let unnormalized = match effect {
        Effect::Bra(bra) => state.contract_effect(bra, labels)?,
        Effect::Operator(op) => state.transform(&op.sqrt_psd(), labels)?,
    };
    let p = unnormalized.weight() / w;
    if p < EPS_ZERO {
        return Err(SimError::PostSelectionImpossible(p));
    }
    let normalized = unnormalized.rescale(1.0 / unnormalized.weight());
    Ok(PostSelection {
        probability: p,
        state: normalized,
        unnormalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::weyl::{bell_povm, maximally_entangled};
    use num_complex::Complex64 as C64;

    fn ket(a: &[f64]) -> StateVector {
        StateVector::ket("A", a.iter().map(|&x| C64::new(x, 0.0)).collect()).unwrap()
    }

    #[test]
    fn projector_on_zero() {
        let p = born_probabilities(&ket(&[1.0, 0.0]), &PovmSet::computational(2).unwrap(), &["A"])
            .unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
        for seed in 0..20 {
            let s = sample_outcome_seeded(
                &ket(&[1.0, 0.0]),
                &PovmSet::computational(2).unwrap(),
                &["A"],
                seed,
            )
            .unwrap();
            assert_eq!(s.outcome, 0);
        }
    }

    #[test]
    fn post_select_on_entangled_pair() {
        let phi = maximally_entangled(2, ["A", "B"]).unwrap();
        let r = post_select(&phi, &Effect::Bra(ket(&[1.0, 0.0])), &["A"]).unwrap();
        assert!((r.probability - 0.5).abs() < 1e-15);
        let zero_b =
            StateVector::ket("B", vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        assert!(r.state.same_ray(&zero_b, 1e-15));
    }

    #[test]
    fn impossible_post_selection() {
        let r = post_select(&ket(&[1.0, 0.0]), &Effect::Bra(ket(&[0.0, 1.0])), &["A"]);
        assert!(matches!(r, Err(SimError::PostSelectionImpossible(_))));
    }

    #[test]
    fn post_selection_probability_matches_born() {
        let phi = maximally_entangled(2, ["A", "B"]).unwrap();
        let povm = bell_povm(2).unwrap();
        let born = born_probabilities(&phi, &povm, &["A", "B"]).unwrap();
        for k in 0..4 {
            let ps = post_select(&phi, &Effect::Operator(povm.element(k).clone()), &["A", "B"]);
            match ps {
                Ok(ps) => assert!((ps.probability - born[k]).abs() < 1e-12),
                Err(SimError::PostSelectionImpossible(_)) => assert!(born[k] < 1e-12),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn draw_never_returns_zero_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_ne!(draw_index(&[0.5, 0.0, 0.5], &mut rng), 1);
        }
    }
}
