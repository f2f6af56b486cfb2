//! Port-based teleportation of a single system.
//!
//! Alice holds the input `in` and ports `a1..an`; Bob holds `B1..Bn`, each
//! `a_k B_k` in |Φ⁺⟩. Alice measures `[in, a1..an]` and announces the outcome;
//! Bob keeps the heralded port and discards the rest. No correction follows.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::measure::sample_outcome;
use crate::engine::weyl::maximally_entangled;
use crate::engine::{DensityOperator, StateVector};
use crate::error::Result;
use crate::limits::{ensure_within, saturating_pow};
use crate::record::{bits_for, rows, EventKind, Params, Party, RunRecord, Transcript};
use crate::stats::RunMode;
use crate::teleport::{bind_input, single_records, Tally};
use crate::EPS_ZERO;

use super::pgm::{PbtChannel, Variant};

pub(crate) fn alice_ports(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("a{k}")).collect()
}

pub(crate) fn bob_ports(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("B{k}")).collect()
}

/// `|Φ⁺⟩_{a1B1} ⊗ … ⊗ |Φ⁺⟩_{anBn}`.
pub(crate) fn port_resource(n: usize, dim: usize) -> Result<StateVector> {
    let (a, b) = (alice_ports(n), bob_ports(n));
    let mut state = maximally_entangled(dim, [a[0].as_str(), b[0].as_str()])?;
    for k in 1..n {
        state = state.tensor(&maximally_entangled(dim, [a[k].as_str(), b[k].as_str()])?)?;
    }
    Ok(state)
}

/// One branch of the heralded ensemble. `port` is `None` for failure.
#[derive(Debug, Clone)]
pub struct HeraldedOutput {
    pub port: Option<usize>,
    pub probability: f64,
    /// Bob's normalised output on `[B, C…]`; absent on failure or zero weight.
    pub state: Option<DensityOperator>,
}

#[derive(Debug, Clone)]
pub struct PbtRun {
    pub record: RunRecord,
    /// Exact mode: every outcome. Sampled mode: the first trial.
    pub ensemble: Vec<HeraldedOutput>,
}

impl PbtRun {
    /// Port and output of the first heralded branch with positive weight.
    pub fn heralded(&self) -> Option<(usize, &DensityOperator)> {
        self.ensemble
            .iter()
            .find_map(|h| Some((h.port?, h.state.as_ref()?)))
    }
}

fn transcript(channel: &PbtChannel) -> Transcript {
    let n = channel.ports();
    let mut t = Transcript::new();
    for (a, b) in alice_ports(n).iter().zip(bob_ports(n)) {
        t.entangle(Party::Alice, [a, &b], channel.dim(), true);
    }
    let mut systems = vec!["in".to_string()];
    systems.extend(alice_ports(n));
    let systems: Vec<&str> = systems.iter().map(|s| s.as_str()).collect();
    t.local(Party::Alice, EventKind::Measure, "pgm", &systems);
    let m = t.send(Party::Alice, "port", channel.povm().len());
    t.receive(m);
    t
}

fn output_of(branch: &StateVector, port: usize, spectators: &[String]) -> Result<DensityOperator> {
    let mut keep = vec![format!("B{}", port + 1)];
    keep.extend(spectators.iter().cloned());
    let mut out_labels = vec!["B".to_string()];
    out_labels.extend(spectators.iter().cloned());
    branch.reduced_density(&keep)?.relabel_all(&out_labels)
}

/// Input `[in, C…] ⊗ ports`, size-checked against the memory cap.
fn joint_input(channel: &PbtChannel, psi: &StateVector) -> Result<(StateVector, StateVector, Vec<String>)> {
    let (input, spectators) = bind_input(psi, channel.dim(), "in")?;
    let input = input.normalized()?;
    let needed = (input.dim() as u128).saturating_mul(saturating_pow(channel.dim(), 2 * channel.ports()));
    ensure_within(needed)?;
    let joint = input.tensor(&port_resource(channel.ports(), channel.dim())?)?;
    Ok((joint, input.relabel("in", "B")?, spectators))
}

fn measured_labels(n: usize) -> Vec<String> {
    let mut labels = vec!["in".to_string()];
    labels.extend(alice_ports(n));
    labels
}

/// Unnormalised heralded branches of `psi`, one per outcome.
pub(crate) fn heralded_branches(channel: &PbtChannel, psi: &StateVector) -> Result<Vec<(Option<usize>, DensityOperator)>> {
    let (joint, _, spectators) = joint_input(channel, psi)?;
    let labels = measured_labels(channel.ports());
    (0..channel.povm().len())
        .filter(|&k| Some(k) != channel.failure_outcome())
        .map(|k| {
            let branch = joint.apply_operator(channel.povm().root(k), &labels)?;
            Ok((Some(k), output_of(&branch, k, &spectators)?))
        })
        .collect()
}

/// Teleports `psi` (first subsystem of dimension `D`, the rest spectators)
/// through `channel`. `record.fidelity` is the success-conditioned average
/// fidelity of Bob's output with `psi`.
pub fn pbt_teleport(channel: &PbtChannel, psi: &StateVector, mode: RunMode) -> Result<PbtRun> {
    let (joint, target, spectators) = joint_input(channel, psi)?;
    let labels = measured_labels(channel.ports());
    let outcomes = channel.povm().len();
    let fail = channel.failure_outcome();
    let mut tally = Tally::new(single_records(outcomes));
    let mut ensemble = Vec::new();
    let (mut fid_sum, mut success) = (0.0, 0.0);
    let mut t = transcript(channel);

    match mode {
        RunMode::Exact => {
            for k in 0..outcomes {
                let branch = joint.apply_operator(channel.povm().root(k), &labels)?;
                let p = branch.norm_sqr();
                tally.add(&[k], p);
                let state = if Some(k) == fail || p < EPS_ZERO {
                    None
                } else {
                    let out = output_of(&branch, k, &spectators)?.scaled(1.0 / p);
                    fid_sum += p * out.fidelity_with_pure(&target)?;
                    success += p;
                    Some(out)
                };
                let port = if Some(k) == fail { None } else { Some(k) };
                ensemble.push(HeraldedOutput { port, probability: p, state });
            }
        }
        RunMode::Sampled { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for trial in 0..trials {
                let o = sample_outcome(&joint, channel.povm(), &labels, &mut rng)?;
                tally.count(&[o.outcome]);
                let port = if Some(o.outcome) == fail { None } else { Some(o.outcome) };
                let state = match port {
                    Some(k) => {
                        let out = output_of(&o.state, k, &spectators)?;
                        fid_sum += out.fidelity_with_pure(&target)?;
                        success += 1.0;
                        Some(out)
                    }
                    None => None,
                };
                if trial == 0 {
                    t.set_payload(0, o.outcome);
                    ensemble.push(HeraldedOutput { port, probability: o.probability, state });
                }
            }
            success /= trials as f64;
            fid_sum /= trials as f64;
        }
    }

    let exact = matches!(mode, RunMode::Exact);
    let mut record = RunRecord::new(protocol_name(channel), Params::new(channel.dim(), mode).with_ports(channel.ports()), t);
    record.outcomes = rows(&if exact { tally.exact()? } else { tally.sampled() });
    record.ledger.ports = channel.ports() as u64;
    record.fidelity = (success > 0.0).then(|| fid_sum / success);
    record.set_metric("p_success", success);
    let report = channel_report(channel)?;
    record.set_metric("entanglement_fidelity", report.entanglement_fidelity);
    record.set_metric("average_fidelity", report.average_fidelity);
    Ok(PbtRun { record, ensemble })
}

fn protocol_name(channel: &PbtChannel) -> &'static str {
    match channel.variant() {
        Variant::Deterministic => "pbt",
        Variant::Probabilistic => "pbt-probabilistic",
    }
}

/// Normalised Choi state `(id ⊗ N_i)(Φ⁺)` of each heralded channel on
/// `[B, C1]`, with its herald probability.
pub fn heralded_choi(channel: &PbtChannel) -> Result<Vec<(usize, f64, DensityOperator)>> {
    let phi = maximally_entangled(channel.dim(), ["S", "R"])?;
    heralded_branches(channel, &phi)?
        .into_iter()
        .map(|(port, rho)| {
            let p = rho.trace();
            Ok((port.expect("port outcome"), p, rho.scaled(1.0 / p)))
        })
        .collect()
}

/// Success-conditioned entanglement fidelity from the simulated Choi states.
pub fn entanglement_fidelity_simulated(channel: &PbtChannel) -> Result<f64> {
    let target = maximally_entangled(channel.dim(), ["B", "C1"])?;
    let phi = maximally_entangled(channel.dim(), ["S", "R"])?;
    let (mut overlap, mut success) = (0.0, 0.0);
    for (_, rho) in heralded_branches(channel, &phi)? {
        success += rho.trace();
        overlap += rho.trace() * rho.fidelity_with_pure(&target)?;
    }
    Ok(overlap / success)
}

/// `F_avg = (D·F_ent + 1)/(D + 1)`.
pub fn average_fidelity(entanglement_fidelity: f64, dim: usize) -> f64 {
    let d = dim as f64;
    (d * entanglement_fidelity + 1.0) / (d + 1.0)
}

/// Figures of merit of a port-based channel, computed from the measurement
/// alone: `F_ent = Σ_i tr(Π_i σ_i)/(D²·p_success)` and
/// `p_success = Σ_i tr Π_i / D^{n+1}` over port outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub ports: usize,
    pub dim: usize,
    pub variant: Variant,
    pub entanglement_fidelity: f64,
    pub average_fidelity: f64,
    pub p_success: f64,
    pub ebits: u64,
    pub cbits: u64,
    pub completeness_defect: f64,
    pub min_eigenvalue: f64,
}

pub fn channel_report(channel: &PbtChannel) -> Result<ChannelReport> {
    let d = channel.dim() as f64;
    let n = channel.ports();
    let traces = channel.element_traces();
    let p_success = traces[..n].iter().sum::<f64>() / channel.total_dim() as f64;
    let f_ent = channel.overlap_traces().iter().sum::<f64>() / (d * d * p_success);
    let (completeness_defect, min_eigenvalue) = channel.defects();
    Ok(ChannelReport {
        ports: n,
        dim: channel.dim(),
        variant: channel.variant(),
        entanglement_fidelity: f_ent,
        average_fidelity: average_fidelity(f_ent, channel.dim()),
        p_success,
        ebits: channel.ebits() as u64,
        cbits: bits_for(channel.povm().len()),
        completeness_defect,
        min_eigenvalue,
    })
}
