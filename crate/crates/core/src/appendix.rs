//! Resource optimality of post-selected teleportation, run as protocols.
//!
//! Entanglement: teleporting half of the post-selection ⟨Φ⁺|_{a1a2} into
//! Bob's `b` of |Φ⁺⟩_{bB} leaves |Φ⁺⟩_{AB} with Alice's `A`, so the protocol
//! creates one shared ebit and must consume one.
//!
//! Classical bits: with |Φ⁺⟩_{a1a2} on Alice's side and |Φ⁺⟩_{AB} shared, Bob
//! encodes `i` as σ_i on `B`; teleporting `a3` of ⟨Φ⁺|_{a2a3} into `B` leaves
//! σ_i on `a1`, which Alice reads with a Bell measurement on `A a1`. Two bits
//! reach Alice, so the protocol carries at least two bits from Bob.
//!
//! Post-selections are realised by Bell measurements: outcome `j` in place
//! of |Φ⁺⟩ only relabels the result, by a Weyl rotation or a permutation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::linalg::C64;
use crate::engine::measure::draw_index;
use crate::engine::weyl::{bell_basis, maximally_entangled, post_correction, weyl, weyl_matrix};
use crate::engine::StateVector;
use crate::error::{Result, SimError};
use crate::record::{rows, EventKind, Params, Party, RunRecord, Transcript};
use crate::stats::RunMode;
use crate::teleport::{product_records, single_records, Tally};
use crate::{EPS_NORM, EPS_ZERO};

/// `c` and the residual in `state = c·target + residual`.
fn proportionality(state: &StateVector, target: &StateVector) -> Result<(C64, f64)> {
    let target = target.permute(state.layout().labels())?;
    let t = target.amplitudes();
    let c = t.iter().zip(state.amplitudes()).map(|(a, b)| a.conj() * b).sum::<C64>() / target.norm_sqr();
    let residual = state
        .amplitudes()
        .iter()
        .zip(t)
        .map(|(s, a)| (s - c * a).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok((c, residual))
}

fn checked(state: &StateVector, target: &StateVector) -> Result<C64> {
    let (c, residual) = proportionality(state, target)?;
    if residual > EPS_NORM {
        return Err(SimError::InvalidArgument(format!("not proportional to the target: residual {residual:e}")));
    }
    Ok(c)
}

/// `⟨Φ⁺|_{a1b} |Φ⁺⟩_{Aa1} |Φ⁺⟩_{bB} = c·|Φ⁺⟩_{AB}`; returns `c` (1/d).
pub fn swap_factor(d: usize) -> Result<C64> {
    let state = maximally_entangled(d, ["A", "a1"])?
        .tensor(&maximally_entangled(d, ["b", "B"])?)?
        .contract_bra(&maximally_entangled(d, ["a1", "b"])?, &["a1", "b"])?;
    checked(&state, &maximally_entangled(d, ["A", "B"])?)
}

/// `⟨Φ⁺|_{a2B} |Φ⁺⟩_{a1a2} σ_i^B |Φ⁺⟩_{AB} = c·σ_i^{a1}|Φ⁺⟩_{Aa1}`; returns `c` (1/d).
pub fn coding_factor(d: usize, i: usize) -> Result<C64> {
    let sigma = weyl(d, i)?;
    let state = maximally_entangled(d, ["a1", "a2"])?
        .tensor(&maximally_entangled(d, ["A", "B"])?.apply(&sigma, &["B"])?)?
        .contract_bra(&maximally_entangled(d, ["a2", "B"])?, &["a2", "B"])?;
    checked(&state, &maximally_entangled(d, ["A", "a1"])?.apply(&sigma, &["a1"])?)
}

/// One branch of entanglement extraction: Bob's Bell outcome `i` on
/// `(b', b)` and Alice's Bell outcome `j` on `(a1, a2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionBranch {
    pub i: usize,
    pub j: usize,
    pub probability: f64,
    /// Fidelity of the normalised `AB` state with |Φ⁺⟩.
    pub fidelity: f64,
}

/// Every `(i, j)` branch, with or without Alice's final rotation σ_j on `A`.
pub fn extraction_branches(d: usize, rotate: bool) -> Result<Vec<ExtractionBranch>> {
    let joint = maximally_entangled(d, ["A", "a1"])?
        .tensor(&maximally_entangled(d, ["a2", "bp"])?)?
        .tensor(&maximally_entangled(d, ["b", "B"])?)?;
    let bob = bell_basis(d, ["bp", "b"])?;
    let alice = bell_basis(d, ["a1", "a2"])?;
    let target = maximally_entangled(d, ["A", "B"])?;
    let mut out = Vec::with_capacity(d.pow(4));
    for i in 0..d * d {
        let sent = joint
            .contract_bra(&bob[i], &["bp", "b"])?
            .apply(&post_correction(d, i)?, &["a2"])?;
        for j in 0..d * d {
            let mut ab = sent.contract_bra(&alice[j], &["a1", "a2"])?;
            if rotate {
                ab = ab.apply(&weyl(d, j)?, &["A"])?;
            }
            let probability = ab.norm_sqr();
            let fidelity = ab.fidelity(&target)?;
            out.push(ExtractionBranch { i, j, probability, fidelity });
        }
    }
    Ok(out)
}

fn extraction_transcript(d: usize) -> Transcript {
    let mut t = Transcript::new();
    t.entangle(Party::Alice, ["A", "a1"], d, false);
    t.entangle(Party::Alice, ["a2", "bp"], d, true);
    t.entangle(Party::Bob, ["b", "B"], d, false);
    t.local(Party::Bob, EventKind::Measure, "bell_measure", &["bp", "b"]);
    let m = t.send(Party::Bob, "bell_outcome", d * d);
    t.receive(m);
    t.after(Party::Alice, EventKind::Unitary, "correct", &["a2"], m);
    t.local(Party::Alice, EventKind::Measure, "bell_measure_a", &["a1", "a2"]);
    t.local(Party::Alice, EventKind::Unitary, "rotate", &["A"]);
    t
}

/// Entanglement extraction with corrections. `outcomes` are `(i, j)`;
/// `fidelity` is the smallest branch fidelity with |Φ⁺⟩_{AB}.
pub fn extract_entanglement(d: usize, mode: RunMode) -> Result<RunRecord> {
    let branches = extraction_branches(d, true)?;
    let mut tally = Tally::new(product_records(d * d, d * d));
    let mut min_fidelity = 1.0f64;
    let mut t = extraction_transcript(d);
    match mode {
        RunMode::Exact => {
            for b in &branches {
                tally.add(&[b.i, b.j], b.probability);
                min_fidelity = min_fidelity.min(b.fidelity);
            }
        }
        RunMode::Sampled { trials, seed } => {
            let probs: Vec<f64> = branches.iter().map(|b| b.probability).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..trials {
                let b = &branches[draw_index(&probs, &mut rng)];
                tally.count(&[b.i, b.j]);
                min_fidelity = min_fidelity.min(b.fidelity);
                t.set_payload(0, b.i);
            }
        }
    }
    let exact = matches!(mode, RunMode::Exact);
    let mut record = RunRecord::new("extract-entanglement", Params::new(d, mode), t);
    record.outcomes = rows(&if exact { tally.exact()? } else { tally.sampled() });
    record.fidelity = Some(min_fidelity);
    record.set_metric("swap_factor", swap_factor(d)?.norm());
    Ok(record)
}

/// Index `m` with `σ_a σ_b ∝ σ_m`, found by comparing matrices.
fn weyl_compose(d: usize, a: usize, b: usize) -> usize {
    let prod = weyl_matrix(d, a / d, a % d) * weyl_matrix(d, b / d, b % d);
    (0..d * d)
        .find(|&m| {
            let w = weyl_matrix(d, m / d, m % d);
            let overlap = (w.adjoint() * &prod).trace().norm();
            (overlap - d as f64).abs() < EPS_NORM
        })
        .expect("Weyl operators are closed under products up to phase")
}

/// `table[j][o]`: message decoded from Alice's Bell outcome `o` on `A a1`
/// when her outcome on `a2 a3` is `j`. Each row is a permutation.
pub fn decoding_table(d: usize) -> Vec<Vec<usize>> {
    (0..d * d)
        .map(|j| (0..d * d).map(|o| weyl_compose(d, o, j)).collect())
        .collect()
}

/// One branch of dense coding: Bob's teleport outcome `k`, Alice's
/// outcomes `j` on `a2 a3` and `o` on `A a1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodingBranch {
    pub k: usize,
    pub j: usize,
    pub o: usize,
    pub probability: f64,
    pub decoded: usize,
}

/// Every branch with positive weight for message `i`.
pub fn coding_branches(d: usize, i: usize) -> Result<Vec<CodingBranch>> {
    if i >= d * d {
        return Err(SimError::InvalidArgument(format!("message {i} out of range 0..{}", d * d)));
    }
    let table = decoding_table(d);
    let joint = maximally_entangled(d, ["a1", "a2"])?
        .tensor(&maximally_entangled(d, ["A", "B"])?.apply(&weyl(d, i)?, &["B"])?)?
        .tensor(&maximally_entangled(d, ["a3", "bp"])?)?;
    let bob = bell_basis(d, ["bp", "B"])?;
    let middle = bell_basis(d, ["a2", "a3"])?;
    let read = bell_basis(d, ["A", "a1"])?;
    let mut out = Vec::new();
    for k in 0..d * d {
        let sent = joint
            .contract_bra(&bob[k], &["bp", "B"])?
            .apply(&post_correction(d, k)?, &["a3"])?;
        for j in 0..d * d {
            let rest = sent.contract_bra(&middle[j], &["a2", "a3"])?;
            for o in 0..d * d {
                let probability = rest.contract_bra(&read[o], &["A", "a1"])?.norm_sqr();
                if probability > EPS_ZERO {
                    out.push(CodingBranch { k, j, o, probability, decoded: table[j][o] });
                }
            }
        }
    }
    Ok(out)
}

fn coding_transcript(d: usize) -> Transcript {
    let mut t = Transcript::new();
    t.entangle(Party::Alice, ["a1", "a2"], d, false);
    t.entangle(Party::Alice, ["A", "B"], d, true);
    t.entangle(Party::Alice, ["a3", "bp"], d, true);
    t.local(Party::Bob, EventKind::Unitary, "encode", &["B"]);
    t.local(Party::Bob, EventKind::Measure, "bell_measure", &["bp", "B"]);
    let m = t.send(Party::Bob, "bell_outcome", d * d);
    t.receive(m);
    t.after(Party::Alice, EventKind::Unitary, "correct", &["a3"], m);
    t.local(Party::Alice, EventKind::Measure, "bell_measure_middle", &["a2", "a3"]);
    t.local(Party::Alice, EventKind::Measure, "bell_measure_read", &["A", "a1"]);
    t
}

#[derive(Debug, Clone)]
pub struct CodingRun {
    pub record: RunRecord,
    /// Most likely decoded message (the only one when decoding is exact).
    pub decoded: usize,
    /// Probability (exact) or count (sampled) of decoding something else.
    pub errors: f64,
}

/// Dense coding of message `i` through post-selected teleportation.
/// `outcomes` is the distribution of the decoded message.
pub fn dense_coding_via_postteleport(d: usize, i: usize, mode: RunMode) -> Result<CodingRun> {
    let branches = coding_branches(d, i)?;
    let mut tally = Tally::new(single_records(d * d));
    let mut errors = 0.0;
    let mut t = coding_transcript(d);
    match mode {
        RunMode::Exact => {
            for b in &branches {
                tally.add(&[b.decoded], b.probability);
                if b.decoded != i {
                    errors += b.probability;
                }
            }
        }
        RunMode::Sampled { trials, seed } => {
            let probs: Vec<f64> = branches.iter().map(|b| b.probability).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..trials {
                let b = &branches[draw_index(&probs, &mut rng)];
                tally.count(&[b.decoded]);
                if b.decoded != i {
                    errors += 1.0;
                }
                t.set_payload(0, b.k);
            }
        }
    }
    let exact = matches!(mode, RunMode::Exact);
    let mut record = RunRecord::new("dense-coding", Params::new(d, mode), t);
    record.outcomes = rows(&if exact { tally.exact()? } else { tally.sampled() });
    record.set_metric("message", i as f64);
    record.set_metric("decoding_errors", errors);
    let decoded = (0..d * d)
        .max_by(|&a, &b| record.outcomes[a].probability.total_cmp(&record.outcomes[b].probability))
        .unwrap_or(0);
    record.set_metric("decoded", decoded as f64);
    Ok(CodingRun { record, decoded, errors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_matches_index_arithmetic() {
        for d in 2..=3 {
            for a in 0..d * d {
                for b in 0..d * d {
                    assert_eq!(weyl_compose(d, a, b), crate::engine::weyl::weyl_product_index(d, a, b));
                }
            }
        }
    }

    #[test]
    fn proportionality_detects_mismatch() {
        let phi = maximally_entangled(2, ["A", "B"]).unwrap();
        let other = phi.apply(&weyl(2, 1).unwrap(), &["B"]).unwrap();
        let (c, r) = proportionality(&other, &phi).unwrap();
        assert!(c.norm() < 1e-12 && (r - 1.0).abs() < 1e-12);
    }
}
