//! Two-state vectors, the ABL rule and direct rejection-sampled experiments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::script::ExperimentScript;
use crate::engine::linalg::{self, CMatrix};
use crate::engine::measure::{draw_index, measurement_branch, QuantumState};
use crate::engine::{DensityOperator, Operator, PovmSet, StateVector, SubsystemLayout};
use crate::error::{Result, SimError};
use crate::stats::{OutcomeDistribution, RunMode};
use crate::EPS_ZERO;

/// A pre-selected state paired with a post-selection effect on the same systems.
#[derive(Debug, Clone)]
pub struct TwoStateVector {
    pre: DensityOperator,
    post: CMatrix,
    post_bra: Option<StateVector>,
}

impl TwoStateVector {
    /// Mixed or pure pre-selection, effect `0 ≤ E ≤ 𝟙` as post-selection.
    pub fn new(pre: DensityOperator, post: CMatrix) -> Result<Self> {
        let n = pre.layout().total_dim();
        if post.nrows() != n || post.ncols() != n {
            return Err(SimError::ShapeMismatch {
                expected: n,
                got: post.nrows(),
            });
        }
        if linalg::max_abs_diff(&post, &CMatrix::zeros(n, n)) < EPS_ZERO {
            return Err(SimError::InvalidArgument("post-selection effect is zero".into()));
        }
        let pre = pre.normalized()?;
        Ok(Self {
            pre,
            post,
            post_bra: None,
        })
    }

    /// ⟨φ| ... |ψ⟩ with both given as kets; `φ` is normalised.
    pub fn pure(pre: &StateVector, post: &StateVector) -> Result<Self> {
        Self::with_bra(DensityOperator::from(&pre.normalized()?), post)
    }

    /// Pre-selection `ρ`, post-selection onto the normalised ket `φ`.
    pub fn with_bra(pre: DensityOperator, post: &StateVector) -> Result<Self> {
        if post.layout().dims() != pre.layout().dims() {
            return Err(SimError::ShapeMismatch {
                expected: pre.layout().total_dim(),
                got: post.dim(),
            });
        }
        if post.norm_sqr() < EPS_ZERO {
            return Err(SimError::InvalidArgument("post-selection effect is zero".into()));
        }
        let phi = post.normalized()?;
        let mut tsv = Self::new(pre, linalg::projector(phi.amplitudes()))?;
        tsv.post_bra = Some(phi);
        Ok(tsv)
    }

    /// Totally uncertain pre-selection `𝟙/d` and post-selection onto `φ`.
    pub fn mixed_pre(post: &StateVector) -> Result<Self> {
        Self::with_bra(DensityOperator::maximally_mixed(post.layout().clone()), post)
    }

    /// Trivial post-selection `𝟙`: ordinary Born statistics.
    pub fn unconditioned(pre: DensityOperator) -> Result<Self> {
        let n = pre.layout().total_dim();
        Self::new(pre, linalg::identity(n))
    }

    pub fn layout(&self) -> &SubsystemLayout {
        self.pre.layout()
    }

    pub fn pre(&self) -> &DensityOperator {
        &self.pre
    }

    pub fn post(&self) -> &CMatrix {
        &self.post
    }

    pub fn post_bra(&self) -> Option<&StateVector> {
        self.post_bra.as_ref()
    }

    /// `tr(E ρ)` of an unnormalised branch state.
    fn post_weight(&self, branch: &DensityOperator) -> Result<f64> {
        let labels = branch.layout().labels().to_vec();
        Ok(branch
            .expectation(&Operator::Dense(self.post.clone()), &labels)?
            .re
            .max(0.0))
    }

    /// Pairing probability `tr(E ρ)` with no intermediate experiment.
    pub fn pairing_probability(&self) -> Result<f64> {
        self.post_weight(&self.pre)
    }
}

/// ABL rule for a single intermediate measurement with the Lüders instrument:
/// `P(a) ∝ tr(E √M_a ρ √M_a)`.
pub fn abl_probabilities(
    tsv: &TwoStateVector,
    povm: &PovmSet,
    labels: &[impl AsRef<str>],
) -> Result<Vec<f64>> {
    let weights = (0..povm.len())
        .map(|a| tsv.post_weight(&measurement_branch(&tsv.pre, povm, a, labels)?))
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = weights.iter().sum();
    if total < EPS_ZERO {
        return Err(SimError::PostSelectionImpossible(total));
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Conditional statistics of a pre/post-selected experiment.
#[derive(Debug, Clone)]
pub struct DirectResult {
    /// Script records conditioned on acceptance.
    pub conditional: OutcomeDistribution,
    pub acceptance: f64,
    /// Number of accepted runs (sampled mode only).
    pub accepted: Option<u64>,
}

/// Joint weights `tr(E K_r ρ K_r†)` for every script record `r`.
pub fn branch_weights(
    tsv: &TwoStateVector,
    script: &ExperimentScript,
    bindings: &[impl AsRef<str>],
) -> Result<Vec<(Vec<usize>, f64)>> {
    script
        .branches(&tsv.pre, bindings)?
        .into_iter()
        .map(|(r, b)| Ok((r, tsv.post_weight(&b)?)))
        .collect()
}

/// Pre-selection → script → post-selection, keeping accepted runs only.
pub fn run_direct(
    tsv: &TwoStateVector,
    script: &ExperimentScript,
    bindings: &[impl AsRef<str>],
    mode: RunMode,
) -> Result<DirectResult> {
    match mode {
        RunMode::Exact => {
            let weights = branch_weights(tsv, script, bindings)?;
            let acceptance: f64 = weights.iter().map(|(_, w)| w).sum();
            if acceptance < EPS_ZERO {
                return Err(SimError::PostSelectionImpossible(acceptance));
            }
            let (records, w): (Vec<_>, Vec<_>) = weights.into_iter().unzip();
            let conditional = OutcomeDistribution::from_weights(records, &w)
                .ok_or(SimError::PostSelectionImpossible(acceptance))?;
            Ok(DirectResult {
                conditional,
                acceptance,
                accepted: None,
            })
        }
        RunMode::Sampled { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let records = script.records();
            let mut counts = vec![0u64; records.len()];
            let post = PovmSet::binary(tsv.post.clone())?;
            let labels = tsv.layout().labels().to_vec();
            let mut accepted = 0u64;
            for _ in 0..trials {
                let (record, state) = script.sample(&tsv.pre, bindings, &mut rng)?;
                let w = state.weight();
                let p_accept = (state.expect(post.element(0), &labels)? / w).clamp(0.0, 1.0);
                if draw_index(&[p_accept, 1.0 - p_accept], &mut rng) == 0 {
                    accepted += 1;
                    let k = records.iter().position(|r| *r == record).expect("known record");
                    counts[k] += 1;
                }
            }
            if accepted == 0 {
                return Err(SimError::PostSelectionImpossible(0.0));
            }
            Ok(DirectResult {
                conditional: OutcomeDistribution::from_counts(records, counts),
                acceptance: accepted as f64 / trials as f64,
                accepted: Some(accepted),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::linalg::C64;

    fn ket(a: &[f64]) -> StateVector {
        StateVector::ket("S", a.iter().map(|&x| C64::new(x, 0.0)).collect()).unwrap()
    }

    fn plus() -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        ket(&[h, h])
    }

    #[test]
    fn abl_with_mixed_pre_and_zero_post() {
        let tsv = TwoStateVector::mixed_pre(&ket(&[1.0, 0.0])).unwrap();
        let p = abl_probabilities(&tsv, &PovmSet::computational(2).unwrap(), &["S"]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);
    }

    #[test]
    fn orthogonal_pre_and_post_is_impossible() {
        let tsv = TwoStateVector::pure(&ket(&[1.0, 0.0]), &ket(&[0.0, 1.0])).unwrap();
        let r = abl_probabilities(&tsv, &PovmSet::computational(2).unwrap(), &["S"]);
        assert!(matches!(r, Err(SimError::PostSelectionImpossible(_))));
    }

    #[test]
    fn direct_run_with_z_script() {
        let tsv = TwoStateVector::mixed_pre(&ket(&[1.0, 0.0])).unwrap();
        let s = ExperimentScript::z_measure(2).unwrap();
        let r = run_direct(&tsv, &s, &["S"], RunMode::Exact).unwrap();
        assert!((r.conditional.get(&[0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((r.acceptance - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_script_acceptance_is_one_over_d() {
        let phi = StateVector::ket("S", vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)]).unwrap();
        let tsv = TwoStateVector::mixed_pre(&phi).unwrap();
        let r = run_direct(&tsv, &ExperimentScript::empty(3).unwrap(), &["S"], RunMode::Exact).unwrap();
        assert!((r.acceptance - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn z_then_x_chains_abl_weights() {
        let tsv = TwoStateVector::pure(&ket(&[1.0, 0.0]), &plus()).unwrap();
        let r = run_direct(&tsv, &ExperimentScript::z_then_x(2).unwrap(), &["S"], RunMode::Exact).unwrap();
        // Z yields 0 with certainty; X then yields + or − evenly, and only + survives.
        assert!((r.conditional.get(&[0, 0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((r.acceptance - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_measurement_run_matches_abl() {
        let tsv = TwoStateVector::pure(&plus(), &ket(&[0.6, 0.8])).unwrap();
        let povm = PovmSet::fourier(2).unwrap();
        let abl = abl_probabilities(&tsv, &povm, &["S"]).unwrap();
        let r = run_direct(&tsv, &ExperimentScript::x_measure(2).unwrap(), &["S"], RunMode::Exact).unwrap();
        for (k, p) in abl.iter().enumerate() {
            assert!((r.conditional.probabilities[k] - p).abs() < 1e-10);
        }
    }

    #[test]
    fn trivial_post_selection_gives_born_statistics() {
        let pre = DensityOperator::from(&ket(&[0.6, 0.8]));
        let tsv = TwoStateVector::unconditioned(pre).unwrap();
        let r = run_direct(&tsv, &ExperimentScript::z_measure(2).unwrap(), &["S"], RunMode::Exact).unwrap();
        assert!((r.conditional.probabilities[0] - 0.36).abs() < 1e-12);
        assert!((r.acceptance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_matches_exact() {
        let tsv = TwoStateVector::pure(&ket(&[0.6, 0.8]), &plus()).unwrap();
        let s = ExperimentScript::z_measure(2).unwrap();
        let exact = run_direct(&tsv, &s, &["S"], RunMode::Exact).unwrap();
        let sampled = run_direct(&tsv, &s, &["S"], RunMode::Sampled { trials: 20_000, seed: 7 }).unwrap();
        assert!(sampled.conditional.max_sigma_deviation(&exact.conditional) < 5.0);
        assert!(crate::stats::within_binomial_sigma(
            sampled.accepted.unwrap(),
            20_000,
            exact.acceptance,
            5.0
        ));
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let pre = DensityOperator::maximally_mixed(SubsystemLayout::single("S", 3).unwrap());
        assert!(TwoStateVector::with_bra(pre, &ket(&[1.0, 0.0])).is_err());
    }
}
