//! Port-based teleportation of a post-selected state.
//!
//! Alice's `A` and Bob's `b` share |Φ⁺⟩. Bob holds ports `B1..Bn`, each
//! maximally mixed, runs the script on every port and then measures
//! `[b, B1..Bn]`; the outcome `j` names the port that carries Alice's later
//! post-selection ⟨φ|_A. Alice only reports whether her post-selection
//! succeeded.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::measure::sample_outcome;
use crate::engine::weyl::maximally_entangled;
use crate::engine::{DensityOperator, StateVector, SubsystemLayout};
use crate::error::{Result, SimError};
use crate::limits::{ensure_within, saturating_pow};
use crate::oracle::{run_direct, ExperimentScript, TwoStateVector};
use crate::record::{rows, EventKind, Params, Party, RunRecord, Transcript};
use crate::stats::{OutcomeDistribution, RunMode};
use crate::teleport::{check_script, rejects_zero, script_kind, single_records, Tally};

use super::channel::bob_ports;
use super::pgm::build_pgm;

/// Σ_r K_r ρ K_r† of the script on `bindings`.
pub(crate) fn script_channel(
    rho: &DensityOperator,
    script: &ExperimentScript,
    bindings: &[impl AsRef<str>],
) -> Result<DensityOperator> {
    let mut branches = script.branches(rho, bindings)?.into_iter().map(|(_, b)| b);
    let first = branches.next().expect("a script has at least one branch");
    branches.try_fold(first, |acc, b| acc.add(&b))
}

fn transcript(n: usize, d: usize, script: &ExperimentScript) -> Transcript {
    let ports = bob_ports(n);
    let mut t = Transcript::new();
    t.entangle(Party::Alice, ["A", "b"], d, true);
    let refs: Vec<&str> = ports.iter().map(|s| s.as_str()).collect();
    t.local(Party::Bob, EventKind::Prepare, "prepare_ports", &refs);
    for p in &ports {
        t.local(Party::Bob, script_kind(script), &format!("script_{p}"), &[p]);
    }
    let mut measured = vec!["b"];
    measured.extend(refs.iter());
    t.local(Party::Bob, EventKind::Measure, "pgm", &measured);
    t.local(Party::Alice, EventKind::PostSelect, "post_select", &["A"]);
    let m = t.send(Party::Alice, "success", 2);
    t.receive(m);
    t
}

/// Exact joint weights `P(j, r, accepted)` indexed by heralded port and record.
pub fn post_selected_weights(
    post: &StateVector,
    n: usize,
    d: usize,
    script: &ExperimentScript,
) -> Result<Vec<(usize, Vec<usize>, f64)>> {
    let (rho, bra, ports) = setup(post, n, d, script)?;
    let pgm = build_pgm(n, d)?;
    let mut measured = vec!["b".to_string()];
    measured.extend(ports.iter().cloned());
    let mut out = Vec::new();
    for j in 0..n {
        let mut rest = rho.clone();
        for (k, p) in ports.iter().enumerate() {
            if k != j {
                rest = script_channel(&rest, script, &[p])?;
            }
        }
        for (r, branch) in script.branches(&rest, &[&ports[j]])? {
            let selected = branch.contract_bra(&bra, &["A"])?;
            let w = selected.expectation(pgm.povm().element(j), &measured)?.re;
            out.push((j, r, w));
        }
    }
    Ok(out)
}

fn setup(
    post: &StateVector,
    n: usize,
    d: usize,
    script: &ExperimentScript,
) -> Result<(DensityOperator, StateVector, Vec<String>)> {
    rejects_zero(post)?;
    if post.layout().dims() != [d] {
        return Err(SimError::ShapeMismatch { expected: d, got: post.dim() });
    }
    check_script(script, &[d])?;
    ensure_within(saturating_pow(d, 2 * (n + 2)))?;
    let bra = post.normalized()?.relabel_all(&["A"])?;
    let ports = bob_ports(n);
    let mixed = DensityOperator::maximally_mixed(SubsystemLayout::new(ports.iter().map(|p| (p.as_str(), d)))?);
    let rho = maximally_entangled(d, ["A", "b"])?.to_density().tensor(&mixed)?;
    Ok((rho, bra, ports))
}

/// ABL prediction for the script on a maximally mixed system post-selected
/// in `post`.
pub fn post_selected_abl(post: &StateVector, d: usize, script: &ExperimentScript) -> Result<OutcomeDistribution> {
    check_script(script, &[d])?;
    let bra = post.relabel_all(&["S"])?;
    let tsv = TwoStateVector::mixed_pre(&bra)?;
    Ok(run_direct(&tsv, script, &["S"], RunMode::Exact)?.conditional)
}

/// Post-selected port-based teleportation with `n` ports of dimension `d`.
/// `outcomes` is the heralded port given acceptance; `conditional_statistics`
/// is the script record read at the heralded port.
pub fn pbt_post_selected(
    post: &StateVector,
    n: usize,
    d: usize,
    script: &ExperimentScript,
    mode: RunMode,
) -> Result<RunRecord> {
    let mut ports_tally = Tally::new(single_records(n));
    let mut stats = Tally::new(script.records());
    let acceptance;
    match mode {
        RunMode::Exact => {
            let weights = post_selected_weights(post, n, d, script)?;
            for (j, r, w) in &weights {
                ports_tally.add(&[*j], *w);
                stats.add(r, *w);
            }
            acceptance = weights.iter().map(|(_, _, w)| w).sum::<f64>();
        }
        RunMode::Sampled { trials, seed } => {
            let (rho, bra, ports) = setup(post, n, d, script)?;
            let pgm = build_pgm(n, d)?;
            let mut measured = vec!["b".to_string()];
            measured.extend(ports.iter().cloned());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut accepted = 0u64;
            for _ in 0..trials {
                let mut s = rho.clone();
                let mut records = Vec::with_capacity(n);
                for p in &ports {
                    let (r, next) = script.sample(&s, &[p], &mut rng)?;
                    records.push(r);
                    s = next;
                }
                let o = sample_outcome(&s, pgm.povm(), &measured, &mut rng)?;
                let alice = o.state.partial_trace(&["A"])?;
                let p_accept = alice.fidelity_with_pure(&bra)?;
                if rng.random::<f64>() < p_accept {
                    accepted += 1;
                    ports_tally.count(&[o.outcome]);
                    stats.count(&records[o.outcome]);
                }
            }
            if accepted == 0 {
                return Err(SimError::PostSelectionImpossible(0.0));
            }
            acceptance = accepted as f64 / trials as f64;
        }
    }
    let exact = matches!(mode, RunMode::Exact);
    let mut record = RunRecord::new("pbt-post", Params::new(d, mode).with_ports(n), transcript(n, d, script));
    record.outcomes = rows(&if exact { ports_tally.exact()? } else { ports_tally.sampled() });
    record.conditional_statistics = rows(&if exact { stats.exact()? } else { stats.sampled() });
    record.acceptance_probability = acceptance;
    record.post_selection_succeeded = Some(acceptance > 0.0);
    record.ledger.ports = n as u64;
    let ideal = post_selected_abl(post, d, script)?;
    record.set_metric("abl_tv_distance", record.conditional().tv_distance(&ideal));
    Ok(record)
}
