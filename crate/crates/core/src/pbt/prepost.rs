//! Port-based teleportation of a pre-and-post-selected system.
//!
//! Alice swaps the system into `A2` and prepares |Φ⁺⟩_{A A1}; her later
//! post-selection ⟨φ|_A turns `A1` into |φ*⟩, so the pair `A1 A2` is an
//! ordinary pre-selected state of dimension d² that she port-teleports. Each
//! of Bob's inner ports is a pair `(B, b)` in |Φ⁺⟩; his measurement on the
//! received port and the inner ports leaves `B_j` pre-selected in |ψ⟩ and
//! post-selected in ⟨φ|. The script acts on `B`.

use crate::engine::weyl::maximally_entangled;
use crate::engine::StateVector;
use crate::error::{Result, SimError};
use crate::oracle::{run_direct, ExperimentScript, TwoStateVector};
use crate::record::{rows, EventKind, Params, Party, RunRecord, Transcript};
use crate::stats::{OutcomeDistribution, RunMode};
use crate::teleport::{check_script, rejects_zero};

use super::carrier::{Arrival, Carrier, CarrierBranch, HeraldedJoint, PostEvent};
use super::pgm::{build_pgm, pbt_probabilistic, PbtChannel, Variant};

fn check_single(state: &StateVector, d: usize) -> Result<()> {
    if state.layout().dims() != [d] {
        return Err(SimError::ShapeMismatch { expected: d, got: state.dim() });
    }
    Ok(())
}

/// The physical step-1 state on `[A, A1, A2]` and the closed form
/// `|φ*⟩_{A1}|ψ⟩_{A2}/√d` it reduces to under ⟨φ|_A.
pub fn prepost_step1(pre: &StateVector, post: &StateVector, d: usize) -> Result<CarrierBranch> {
    check_single(pre, d)?;
    check_single(post, d)?;
    rejects_zero(post)?;
    let psi = pre.normalized()?.relabel_all(&["A2"])?;
    let phi = post.normalized()?;
    let physical = maximally_entangled(d, ["A", "A1"])?.tensor(&psi)?;
    let formula = phi
        .conj()
        .relabel_all(&["A1"])?
        .tensor(&psi)?
        .scaled((1.0 / (d as f64).sqrt()).into());
    Ok(CarrierBranch { k: 0, physical, correction: None, formula })
}

pub(crate) fn channel(variant: Variant, n: usize, dim: usize) -> Result<PbtChannel> {
    match variant {
        Variant::Deterministic => build_pgm(n, dim),
        Variant::Probabilistic => pbt_probabilistic(n, dim),
    }
}

fn carrier<'a>(n_a: usize, n_b: usize, d: usize, script: &'a ExperimentScript, variant: Variant) -> Result<Carrier<'a>> {
    check_script(script, &[d])?;
    Ok(Carrier {
        d,
        m: 2,
        alice: channel(variant, n_a, d * d)?,
        bob: channel(variant, n_b, d * d)?,
        pairs: vec![(0, 1)],
        script_components: vec![0],
        script,
    })
}

/// Joint weights from the physical pipeline. With the probabilistic
/// variant only success outcomes of both measurements are kept.
pub fn prepost_joint(
    pre: &StateVector,
    post: &StateVector,
    n_a: usize,
    n_b: usize,
    d: usize,
    script: &ExperimentScript,
    variant: Variant,
) -> Result<HeraldedJoint> {
    let branch = prepost_step1(pre, post, d)?;
    let bra = post.normalized()?.relabel_all(&["A"])?;
    carrier(n_a, n_b, d, script, variant)?.pipeline(&[branch], &bra, &["A".to_string()])
}

/// Joint weights from the composed-channel oracle.
pub fn prepost_oracle(
    pre: &StateVector,
    post: &StateVector,
    n_a: usize,
    n_b: usize,
    d: usize,
    script: &ExperimentScript,
    variant: Variant,
) -> Result<HeraldedJoint> {
    let branch = prepost_step1(pre, post, d)?;
    carrier(n_a, n_b, d, script, variant)?.oracle(&[branch])
}

/// Ideal statistics: the script on a system pre-selected in `pre` and
/// post-selected in `post`.
pub fn prepost_abl(pre: &StateVector, post: &StateVector, script: &ExperimentScript) -> Result<OutcomeDistribution> {
    let tsv = TwoStateVector::pure(&pre.relabel_all(&["S"])?, &post.relabel_all(&["S"])?)?;
    Ok(run_direct(&tsv, script, &["S"], RunMode::Exact)?.conditional)
}

fn transcript(c: &Carrier, arrival: Arrival) -> Transcript {
    let mut t = Transcript::new();
    t.local(Party::Alice, EventKind::Unitary, "swap", &["A", "A2"]);
    t.entangle(Party::Alice, ["A", "A1"], c.d, false);
    let post = PostEvent { party: Party::Alice, name: "post_select", systems: vec!["A"] };
    c.port_stage(&mut t, &[post], None, arrival);
    t
}

/// Pre-and-post-selected port-based teleportation with `n_a` ports for
/// Alice's d²-dimensional carrier and `n_b` inner ports per received port.
/// `outcomes` are `(i, j)` given acceptance.
pub fn pbt_prepost(
    pre: &StateVector,
    post: &StateVector,
    n_a: usize,
    n_b: usize,
    d: usize,
    script: &ExperimentScript,
    mode: RunMode,
) -> Result<RunRecord> {
    let joint = prepost_joint(pre, post, n_a, n_b, d, script, Variant::Deterministic)?;
    let c = carrier(n_a, n_b, d, script, Variant::Deterministic)?;
    let mut record = RunRecord::new(
        "pbt-prepost",
        Params::new(d, mode).with_ports(n_a).with_ports_b(n_b),
        transcript(&c, Arrival::Early),
    );
    fill(&mut record, &joint, mode)?;
    record.ledger.ports = (n_a + n_a * n_b) as u64;
    let ideal = prepost_abl(pre, post, script)?;
    record.set_metric("abl_tv_distance", record.conditional().tv_distance(&ideal));
    Ok(record)
}

/// Writes outcome tables and acceptance from a joint distribution.
pub(crate) fn fill(record: &mut RunRecord, joint: &HeraldedJoint, mode: RunMode) -> Result<()> {
    match mode {
        RunMode::Exact => {
            record.outcomes = rows(&joint.port_distribution()?);
            record.conditional_statistics = rows(&joint.conditional()?);
            record.acceptance_probability = joint.acceptance();
        }
        RunMode::Sampled { trials, seed } => {
            let s = joint.sample(trials, seed);
            if s.accepted == 0 {
                return Err(SimError::PostSelectionImpossible(0.0));
            }
            record.outcomes = rows(&s.ports.sampled());
            record.conditional_statistics = rows(&s.records.sampled());
            record.acceptance_probability = s.accepted as f64 / trials as f64;
        }
    }
    record.post_selection_succeeded = Some(record.acceptance_probability > 0.0);
    Ok(())
}
