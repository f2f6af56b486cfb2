//! Teleportation of pre-selected, post-selected and pre-and-post-selected states.
//!
//! Inputs name the teleported system first; any further subsystems are
//! spectators that stay in place and are relabelled `C1, C2, …`. Scripts bind
//! their slots to `[B, C1, C2, …]`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::measure::sample_outcome;
use crate::engine::weyl::{bell_basis, bell_povm, maximally_entangled, post_correction, pre_correction};
use crate::engine::{PovmSet, StateVector};
use crate::engine::linalg;
use crate::error::{Result, SimError};
use crate::oracle::ExperimentScript;
use crate::record::{rows, EventKind, Params, Party, RunRecord, Transcript};
use crate::stats::{OutcomeDistribution, RunMode};
use crate::EPS_ZERO;

/// Relabels `psi` to `[first, C1, C2, …]` and checks the teleported dimension.
pub(crate) fn bind_input(psi: &StateVector, d: usize, first: &str) -> Result<(StateVector, Vec<String>)> {
    let dims = psi.layout().dims();
    if dims.is_empty() || dims[0] != d {
        return Err(SimError::ShapeMismatch {
            expected: d,
            got: dims.first().copied().unwrap_or(1),
        });
    }
    let spectators: Vec<String> = (1..dims.len()).map(|k| format!("C{k}")).collect();
    let mut labels = vec![first.to_string()];
    labels.extend(spectators.iter().cloned());
    Ok((psi.relabel_all(&labels)?, spectators))
}

pub(crate) fn check_script(script: &ExperimentScript, dims: &[usize]) -> Result<()> {
    if script.slot_dims() != dims {
        return Err(SimError::InvalidArgument(format!(
            "script `{}` expects slots {:?}, protocol provides {:?}",
            script.name(),
            script.slot_dims(),
            dims
        )));
    }
    Ok(())
}

pub(crate) fn script_kind(script: &ExperimentScript) -> EventKind {
    if script.outcome_shape().is_empty() {
        EventKind::Unitary
    } else {
        EventKind::Measure
    }
}

fn labels_of<'a>(first: &'a str, spectators: &'a [String]) -> Vec<&'a str> {
    std::iter::once(first)
        .chain(spectators.iter().map(|s| s.as_str()))
        .collect()
}

pub(crate) fn rejects_zero(post: &StateVector) -> Result<()> {
    if post.norm_sqr() < EPS_ZERO {
        return Err(SimError::PostSelectionImpossible(0.0));
    }
    Ok(())
}

/// Accumulates weights over a fixed record list.
pub(crate) struct Tally {
    records: Vec<Vec<usize>>,
    weights: Vec<f64>,
    counts: Vec<u64>,
}

impl Tally {
    pub(crate) fn new(records: Vec<Vec<usize>>) -> Self {
        let n = records.len();
        Self {
            records,
            weights: vec![0.0; n],
            counts: vec![0; n],
        }
    }

    pub(crate) fn index(&self, record: &[usize]) -> usize {
        self.records
            .iter()
            .position(|r| r == record)
            .expect("record belongs to the tally")
    }

    pub(crate) fn add(&mut self, record: &[usize], w: f64) {
        let k = self.index(record);
        self.weights[k] += w;
    }

    pub(crate) fn count(&mut self, record: &[usize]) {
        let k = self.index(record);
        self.counts[k] += 1;
    }

    pub(crate) fn exact(self) -> Result<OutcomeDistribution> {
        let total: f64 = self.weights.iter().sum();
        OutcomeDistribution::from_weights(self.records, &self.weights)
            .ok_or(SimError::PostSelectionImpossible(total))
    }

    pub(crate) fn sampled(self) -> OutcomeDistribution {
        OutcomeDistribution::from_counts(self.records, self.counts)
    }
}

pub(crate) fn product_records(a: usize, b: usize) -> Vec<Vec<usize>> {
    (0..a).flat_map(|i| (0..b).map(move |k| vec![i, k])).collect()
}

pub(crate) fn single_records(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|i| vec![i]).collect()
}

/// Bob's corrected state for every Bell outcome of ordinary teleportation,
/// with the outcome probability. Output labels are `[C…, B]`.
pub fn pre_branches(psi: &StateVector, d: usize) -> Result<Vec<(f64, StateVector)>> {
    let (input, _) = bind_input(psi, d, "A")?;
    let joint = input.tensor(&maximally_entangled(d, ["a", "B"])?)?;
    let bell = bell_basis(d, ["A", "a"])?;
    (0..d * d)
        .map(|i| {
            let rest = joint.contract_bra(&bell[i], &["A", "a"])?;
            let p = rest.norm_sqr();
            let bob = rest.apply(&pre_correction(d, i)?, &["B"])?.scaled((1.0 / p.sqrt()).into());
            Ok((p, bob))
        })
        .collect()
}

fn pre_transcript(d: usize, script: &ExperimentScript, bindings: &[&str]) -> Transcript {
    let mut t = Transcript::new();
    t.entangle(Party::Alice, ["a", "B"], d, true);
    t.local(Party::Alice, EventKind::Measure, "bell_measure", &["A", "a"]);
    let m = t.send(Party::Alice, "bell_outcome", d * d);
    t.receive(m);
    t.after(Party::Bob, EventKind::Unitary, "correct", &["B"], m);
    t.after(Party::Bob, script_kind(script), "script", bindings, m);
    t
}

/// Ordinary teleportation of `psi` from Alice's `A` to Bob's `B`, followed
/// by Bob's script on `[B, C…]`.
pub fn teleport_pre(
    psi: &StateVector,
    d: usize,
    script: &ExperimentScript,
    mode: RunMode,
) -> Result<RunRecord> {
    let (input, spectators) = bind_input(psi, d, "A")?;
    let input = input.normalized()?;
    let bindings = labels_of("B", &spectators);
    check_script(script, &input.layout().dims().to_vec())?;
    let target = input.relabel("A", "B")?;
    let joint = input.tensor(&maximally_entangled(d, ["a", "B"])?)?;
    let bell = bell_basis(d, ["A", "a"])?;
    let corrections = (0..d * d)
        .map(|i| pre_correction(d, i))
        .collect::<Result<Vec<_>>>()?;
    let mut outcomes = Tally::new(single_records(d * d));
    let mut stats = Tally::new(script.records());
    let mut min_fidelity = 1.0f64;
    let mut transcript = pre_transcript(d, script, &bindings);

    match mode {
        RunMode::Exact => {
            for i in 0..d * d {
                let rest = joint.contract_bra(&bell[i], &["A", "a"])?;
                let p = rest.norm_sqr();
                outcomes.add(&[i], p);
                let bob = rest.apply(&corrections[i], &["B"])?;
                min_fidelity = min_fidelity.min(bob.permute(target.layout().labels())?.fidelity(&target)?);
                for (r, b) in script.branches(&bob, &bindings)? {
                    stats.add(&r, b.norm_sqr());
                }
            }
        }
        RunMode::Sampled { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let povm = bell_povm(d)?;
            for _ in 0..trials {
                let o = sample_outcome(&joint, &povm, &["A", "a"], &mut rng)?;
                outcomes.count(&[o.outcome]);
                let bob = o
                    .state
                    .contract_bra(&bell[o.outcome], &["A", "a"])?
                    .apply(&corrections[o.outcome], &["B"])?;
                min_fidelity = min_fidelity.min(bob.permute(target.layout().labels())?.fidelity(&target)?);
                let (r, _) = script.sample(&bob, &bindings, &mut rng)?;
                stats.count(&r);
                transcript.set_payload(0, o.outcome);
            }
        }
    }

    let exact = matches!(mode, RunMode::Exact);
    let mut record = RunRecord::new("teleport-pre", Params::new(d, mode), transcript);
    record.outcomes = rows(&if exact { outcomes.exact()? } else { outcomes.sampled() });
    record.conditional_statistics = rows(&if exact { stats.exact()? } else { stats.sampled() });
    record.fidelity = Some(min_fidelity);
    Ok(record)
}

/// The pure chain ⟨φ|_A σ_i^A ⟨Bell_i|_{bB} |Φ⁺⟩_{Ab} evaluated on |φ⟩_B, for
/// each Bell outcome `i`. Each value is the amplitude factor in front of
/// ⟨φ|_B, and its modulus is 1/d.
pub fn post_amplitude_factors(post: &StateVector, d: usize) -> Result<Vec<linalg::C64>> {
    rejects_zero(post)?;
    if post.layout().dims() != [d] {
        return Err(SimError::ShapeMismatch {
            expected: d,
            got: post.dim(),
        });
    }
    let phi = post.normalized()?;
    let bell = bell_basis(d, ["b", "B"])?;
    let pair = maximally_entangled(d, ["A", "b"])?;
    let phi_a = phi.relabel_all(&["A"])?;
    let phi_b = phi.relabel_all(&["B"])?;
    (0..d * d)
        .map(|i| {
            let chain = pair
                .tensor(&phi_b)?
                .contract_bra(&bell[i], &["b", "B"])?
                .apply(&post_correction(d, i)?, &["A"])?
                .contract_bra(&phi_a, &["A"])?;
            Ok(chain.amplitudes()[0])
        })
        .collect()
}

fn post_transcript(d: usize, script: &ExperimentScript, bindings: &[&str], post_systems: &[&str]) -> Transcript {
    let mut t = Transcript::new();
    t.entangle(Party::Alice, ["A", "b"], d, true);
    t.local(Party::Bob, EventKind::Prepare, "mixed_pre", &["B"]);
    t.local(Party::Bob, script_kind(script), "script", bindings);
    t.local(Party::Bob, EventKind::Measure, "bell_measure", &["b", "B"]);
    let m = t.send(Party::Bob, "bell_outcome", d * d);
    t.receive(m);
    t.after(Party::Alice, EventKind::Unitary, "correct", &["A"], m);
    t.after(Party::Alice, EventKind::PostSelect, "post_select", post_systems, m);
    t
}

/// Teleportation of the post-selection ⟨φ| from Alice's `A` to Bob's `B`.
/// `B` and spectators start totally mixed; references `R…` purify them.
pub fn teleport_post(
    post: &StateVector,
    d: usize,
    script: &ExperimentScript,
    mode: RunMode,
) -> Result<RunRecord> {
    rejects_zero(post)?;
    let (phi, spectators) = bind_input(post, d, "A")?;
    let phi = phi.normalized()?;
    let bindings = labels_of("B", &spectators);
    let post_systems = labels_of("A", &spectators);
    check_script(script, &phi.layout().dims().to_vec())?;

    // |Φ⁺⟩_{R B} ⊗ |Φ⁺⟩_{R_k C_k} ⊗ |Φ⁺⟩_{A b}
    let mut joint = maximally_entangled(d, ["R", "B"])?;
    for (k, c) in spectators.iter().enumerate() {
        let dc = phi.layout().dim_of(c)?;
        joint = joint.tensor(&maximally_entangled(dc, [&format!("R{}", k + 1), c.as_str()])?)?;
    }
    joint = joint.tensor(&maximally_entangled(d, ["A", "b"])?)?;

    let bell = bell_basis(d, ["b", "B"])?;
    let corrections = (0..d * d)
        .map(|i| post_correction(d, i))
        .collect::<Result<Vec<_>>>()?;
    let mut outcomes = Tally::new(single_records(d * d));
    let mut stats = Tally::new(script.records());
    let mut transcript = post_transcript(d, script, &bindings, &post_systems);
    let mut last_accept = None;

    let acceptance = match mode {
        RunMode::Exact => {
            let mut total = 0.0;
            for (r, branch) in script.branches(&joint, &bindings)? {
                for i in 0..d * d {
                    let w = branch
                        .contract_bra(&bell[i], &["b", "B"])?
                        .apply(&corrections[i], &["A"])?
                        .contract_bra(&phi, &post_systems)?
                        .norm_sqr();
                    outcomes.add(&[i], w);
                    stats.add(&r, w);
                    total += w;
                }
            }
            if total < EPS_ZERO {
                return Err(SimError::PostSelectionImpossible(total));
            }
            total
        }
        RunMode::Sampled { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let povm = bell_povm(d)?;
            let check = PovmSet::binary(linalg::projector(phi.amplitudes()))?;
            let mut accepted = 0u64;
            for _ in 0..trials {
                let (r, s) = script.sample(&joint, &bindings, &mut rng)?;
                let o = sample_outcome(&s, &povm, &["b", "B"], &mut rng)?;
                let s = o
                    .state
                    .contract_bra(&bell[o.outcome], &["b", "B"])?
                    .apply(&corrections[o.outcome], &["A"])?;
                let verdict = sample_outcome(&s, &check, &post_systems, &mut rng)?;
                transcript.set_payload(0, o.outcome);
                let ok = verdict.outcome == 0;
                last_accept = Some(ok);
                if ok {
                    accepted += 1;
                    outcomes.count(&[o.outcome]);
                    stats.count(&r);
                }
            }
            if accepted == 0 {
                return Err(SimError::PostSelectionImpossible(0.0));
            }
            accepted as f64 / trials as f64
        }
    };

    let exact = matches!(mode, RunMode::Exact);
    let mut record = RunRecord::new("teleport-post", Params::new(d, mode), transcript);
    record.outcomes = rows(&if exact { outcomes.exact()? } else { outcomes.sampled() });
    record.conditional_statistics = rows(&if exact { stats.exact()? } else { stats.sampled() });
    record.acceptance_probability = acceptance;
    record.post_selection_succeeded = last_accept;
    if spectators.is_empty() {
        let factors = post_amplitude_factors(post, d)?;
        let worst = factors
            .iter()
            .map(|f| (f - linalg::C64::new(1.0 / d as f64, 0.0)).norm())
            .fold(0.0, f64::max);
        record.set_metric("amplitude_factor", factors[0].re);
        record.set_metric("amplitude_factor_max_deviation", worst);
    }
    Ok(record)
}

fn prepost_transcript(d: usize, script: &ExperimentScript, bindings: &[&str], post_systems: &[&str]) -> Transcript {
    let mut t = Transcript::new();
    t.entangle(Party::Alice, ["a", "B"], d, true);
    t.entangle(Party::Alice, ["ã", "b"], d, true);
    t.local(Party::Alice, EventKind::Measure, "bell_measure_pre", &["A", "a"]);
    let i = t.send(Party::Alice, "pre_outcome", d * d);
    t.local(Party::Alice, EventKind::Unitary, "swap", &["A", "ã"]);
    t.receive(i);
    t.after(Party::Bob, EventKind::Unitary, "correct_pre", &["B"], i);
    t.after(Party::Bob, script_kind(script), "script", bindings, i);
    t.after(Party::Bob, EventKind::Measure, "bell_measure", &["b", "B"], i);
    let k = t.send(Party::Bob, "post_outcome", d * d);
    t.receive(k);
    t.after(Party::Alice, EventKind::Unitary, "correct_post", &["A"], k);
    t.after(Party::Alice, EventKind::PostSelect, "post_select", post_systems, k);
    t
}

/// Teleportation of ⟨φ| … |ψ⟩ from `A` to `B`: ordinary teleportation of
/// |ψ⟩, Swap(A, ã), then post-selected teleportation of ⟨φ|.
pub fn teleport_prepost(
    pre: &StateVector,
    post: &StateVector,
    d: usize,
    script: &ExperimentScript,
    mode: RunMode,
) -> Result<RunRecord> {
    rejects_zero(post)?;
    if pre.layout().dims() != post.layout().dims() {
        return Err(SimError::ShapeMismatch {
            expected: pre.dim(),
            got: post.dim(),
        });
    }
    let (psi, spectators) = bind_input(pre, d, "A")?;
    let psi = psi.normalized()?;
    let (phi, _) = bind_input(post, d, "A")?;
    let phi = phi.normalized()?;
    let bindings = labels_of("B", &spectators);
    let post_systems = labels_of("A", &spectators);
    check_script(script, &psi.layout().dims().to_vec())?;

    let joint = psi
        .tensor(&maximally_entangled(d, ["a", "B"])?)?
        .tensor(&maximally_entangled(d, ["ã", "b"])?)?;
    let bell_pre = bell_basis(d, ["A", "a"])?;
    let bell_post = bell_basis(d, ["b", "B"])?;
    let pre_fix = (0..d * d).map(|i| pre_correction(d, i)).collect::<Result<Vec<_>>>()?;
    let post_fix = (0..d * d).map(|i| post_correction(d, i)).collect::<Result<Vec<_>>>()?;
    let mut outcomes = Tally::new(product_records(d * d, d * d));
    let mut stats = Tally::new(script.records());
    let mut transcript = prepost_transcript(d, script, &bindings, &post_systems);
    let mut last_accept = None;

    // Alice's swap moves ã into the emptied A.
    let after_pre = |s: &StateVector, i: usize| -> Result<StateVector> {
        s.contract_bra(&bell_pre[i], &["A", "a"])?
            .apply(&pre_fix[i], &["B"])?
            .relabel("ã", "A")
    };

    let acceptance = match mode {
        RunMode::Exact => {
            let mut total = 0.0;
            for i in 0..d * d {
                let s = after_pre(&joint, i)?;
                for (r, branch) in script.branches(&s, &bindings)? {
                    for k in 0..d * d {
                        let w = branch
                            .contract_bra(&bell_post[k], &["b", "B"])?
                            .apply(&post_fix[k], &["A"])?
                            .contract_bra(&phi, &post_systems)?
                            .norm_sqr();
                        outcomes.add(&[i, k], w);
                        stats.add(&r, w);
                        total += w;
                    }
                }
            }
            if total < EPS_ZERO {
                return Err(SimError::PostSelectionImpossible(total));
            }
            total
        }
        RunMode::Sampled { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let povm = bell_povm(d)?;
            let check = PovmSet::binary(linalg::projector(phi.amplitudes()))?;
            let mut accepted = 0u64;
            for _ in 0..trials {
                let o1 = sample_outcome(&joint, &povm, &["A", "a"], &mut rng)?;
                let s = after_pre(&o1.state, o1.outcome)?;
                let (r, s) = script.sample(&s, &bindings, &mut rng)?;
                let o2 = sample_outcome(&s, &povm, &["b", "B"], &mut rng)?;
                let s = o2
                    .state
                    .contract_bra(&bell_post[o2.outcome], &["b", "B"])?
                    .apply(&post_fix[o2.outcome], &["A"])?;
                let verdict = sample_outcome(&s, &check, &post_systems, &mut rng)?;
                transcript.set_payload(0, o1.outcome);
                transcript.set_payload(1, o2.outcome);
                let ok = verdict.outcome == 0;
                last_accept = Some(ok);
                if ok {
                    accepted += 1;
                    outcomes.count(&[o1.outcome, o2.outcome]);
                    stats.count(&r);
                }
            }
            if accepted == 0 {
                return Err(SimError::PostSelectionImpossible(0.0));
            }
            accepted as f64 / trials as f64
        }
    };

    let exact = matches!(mode, RunMode::Exact);
    let mut record = RunRecord::new("teleport-prepost", Params::new(d, mode), transcript);
    record.outcomes = rows(&if exact { outcomes.exact()? } else { outcomes.sampled() });
    record.conditional_statistics = rows(&if exact { stats.exact()? } else { stats.sampled() });
    record.acceptance_probability = acceptance;
    record.post_selection_succeeded = last_accept;
    Ok(record)
}
