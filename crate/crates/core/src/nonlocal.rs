//! Instantaneous non-local measurement of two pre-and-post-selected systems.
//!
//! Alice holds `A`, Bob holds `B`. Step 1 moves both onto Alice's side
//! without waiting for anyone: Alice keeps her pre-state in `A2` and prepares
//! |Φ⁺⟩_{A A1}; Bob teleports his pre-state into `A3` through |Φ⁺⟩_{bp A3}
//! (Bell outcome `k` known only to him) and prepares |Φ⁺⟩_{B A4} for his own
//! post-selection. Given both post-selections, `A1..A4` carries
//! `|Φ_post*⟩_{A1A4} ⊗ σ̄_k|Ψ⟩_{A2A3}`. Alice port-teleports the four
//! components as one d⁴-dimensional system; Bob unscrambles `A3` on every
//! received port, runs the joint operation on the post side of every inner
//! port pair and measures. The result sits at inner port `(i, j)`, named by
//! Alice's `i` and Bob's `j`.

use serde::{Deserialize, Serialize};

use crate::engine::weyl::{bell_basis, maximally_entangled, pre_correction};
use crate::engine::{PovmSet, StateVector, UnitaryOp};
use crate::error::{Result, SimError};
use crate::oracle::{run_direct, ExperimentScript, TwoStateVector};
use crate::pbt::carrier::{Arrival, Carrier, CarrierBranch, HeraldedJoint, PostEvent};
use crate::pbt::prepost::{channel, fill};
use crate::pbt::Variant;
use crate::record::{EventKind, Params, Party, RunRecord, Transcript};
use crate::stats::{OutcomeDistribution, RunMode};
use crate::teleport::rejects_zero;

/// Pre- and post-selection of the pair `(A, B)`.
#[derive(Debug, Clone)]
pub enum BipartiteTsv {
    /// ⟨Φ|_A|Ψ⟩_A for Alice and ⟨Ω|_B|Υ⟩_B for Bob.
    Product {
        alice_pre: StateVector,
        alice_post: StateVector,
        bob_pre: StateVector,
        bob_post: StateVector,
    },
    /// A single pre-state and post-selection on `[A, B]`.
    Joint { pre: StateVector, post: StateVector },
}

impl BipartiteTsv {
    /// Pre- and post-state on `[A, B]`.
    pub fn states(&self) -> Result<(StateVector, StateVector)> {
        let (pre, post) = match self {
            BipartiteTsv::Product { alice_pre, alice_post, bob_pre, bob_post } => {
                for s in [alice_pre, alice_post, bob_pre, bob_post] {
                    if s.layout().dims().len() != 1 {
                        return Err(SimError::InvalidArgument("each party holds one system".into()));
                    }
                }
                let pre = alice_pre.normalized()?.relabel_all(&["A"])?.tensor(&bob_pre.normalized()?.relabel_all(&["B"])?)?;
                let post = alice_post.normalized()?.relabel_all(&["A"])?.tensor(&bob_post.normalized()?.relabel_all(&["B"])?)?;
                (pre, post)
            }
            BipartiteTsv::Joint { pre, post } => (pre.normalized()?.relabel_all(&["A", "B"])?, post.relabel_all(&["A", "B"])?),
        };
        rejects_zero(&post)?;
        let dims = pre.layout().dims().to_vec();
        if dims.len() != 2 || dims[0] != dims[1] || post.layout().dims() != dims.as_slice() {
            return Err(SimError::InvalidArgument("pre and post must live on two systems of equal dimension".into()));
        }
        Ok((pre, post.normalized()?))
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(self.states()?.0.layout().dims()[0])
    }
}

/// The operation Bob performs on every inner port pair.
#[derive(Debug, Clone)]
pub enum JointOp {
    Unitary(UnitaryOp),
    /// A verification measurement: only its outcome statistics are reported.
    Measure(PovmSet),
}

impl JointOp {
    /// Two-slot script on `(A-side, B-side)`.
    pub fn script(&self, d: usize) -> Result<ExperimentScript> {
        let script = ExperimentScript::new("joint-op", vec![d, d])?;
        match self {
            JointOp::Unitary(u) => script.push_unitary(u.clone(), vec![0, 1]),
            JointOp::Measure(p) => script.push_measure(p.clone(), vec![0, 1]),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonlocalOptions {
    pub arrival: Arrival,
    /// Also send the systems back to Alice by pre-and-post-selected
    /// port-based teleportation; only the resource ledger changes.
    pub return_to_alice: bool,
}

/// Step-1 branches, one per Bob's Bell outcome `k`. Physical states live on
/// `[A, B, A1, A2, A3, A4]`; the post bra acts on `[A, B]`.
pub fn nonlocal_branches(bi: &BipartiteTsv) -> Result<Vec<CarrierBranch>> {
    let (pre, post) = bi.states()?;
    let d = pre.layout().dims()[0];
    let joint = pre
        .relabel_all(&["A2", "Bp"])?
        .tensor(&maximally_entangled(d, ["A", "A1"])?)?
        .tensor(&maximally_entangled(d, ["bp", "A3"])?)?
        .tensor(&maximally_entangled(d, ["B", "A4"])?)?;
    let bell = bell_basis(d, ["Bp", "bp"])?;
    let half = (1.0 / d as f64).into();
    let conj_post = post.conj().relabel_all(&["A1", "A4"])?.scaled(half);
    (0..d * d)
        .map(|k| {
            let correction = pre_correction(d, k)?;
            let physical = joint
                .contract_bra(&bell[k], &["Bp", "bp"])?
                .permute(&["A", "B", "A1", "A2", "A3", "A4"])?;
            let formula = pre
                .relabel_all(&["A2", "A3"])?
                .apply(&correction.adjoint(), &["A3"])?
                .scaled(half)
                .tensor(&conj_post)?
                .permute(&["A1", "A2", "A3", "A4"])?;
            Ok(CarrierBranch { k, physical, correction: Some((2, correction)), formula })
        })
        .collect()
}

fn carrier<'a>(d: usize, n: usize, script: &'a ExperimentScript, variant: Variant) -> Result<Carrier<'a>> {
    let dim = d.pow(4);
    Ok(Carrier {
        d,
        m: 4,
        alice: channel(variant, n, dim)?,
        bob: channel(variant, n, dim)?,
        pairs: vec![(0, 1), (3, 2)],
        script_components: vec![0, 3],
        script,
    })
}

/// Joint weights from the physical pipeline with `n` ports on both sides.
pub fn nonlocal_joint(bi: &BipartiteTsv, joint_op: &JointOp, n: usize, variant: Variant) -> Result<HeraldedJoint> {
    let d = bi.dim()?;
    let script = joint_op.script(d)?;
    let (_, post) = bi.states()?;
    let branches = nonlocal_branches(bi)?;
    carrier(d, n, &script, variant)?.pipeline(&branches, &post, &["A".to_string(), "B".to_string()])
}

/// Joint weights from the composed-channel oracle.
pub fn nonlocal_oracle(bi: &BipartiteTsv, joint_op: &JointOp, n: usize, variant: Variant) -> Result<HeraldedJoint> {
    let d = bi.dim()?;
    let script = joint_op.script(d)?;
    carrier(d, n, &script, variant)?.oracle(&nonlocal_branches(bi)?)
}

/// Ideal statistics of the joint operation between the two selections.
pub fn nonlocal_abl(bi: &BipartiteTsv, joint_op: &JointOp) -> Result<OutcomeDistribution> {
    let (pre, post) = bi.states()?;
    let script = joint_op.script(pre.layout().dims()[0])?;
    let labels = ["S1", "S2"];
    let tsv = TwoStateVector::pure(&pre.relabel_all(&labels)?, &post.relabel_all(&labels)?)?;
    Ok(run_direct(&tsv, &script, &labels, RunMode::Exact)?.conditional)
}

fn transcript(c: &Carrier, options: NonlocalOptions) -> Transcript {
    let d = c.d;
    let mut t = Transcript::new();
    t.local(Party::Alice, EventKind::Unitary, "swap_alice", &["A", "A2"]);
    t.entangle(Party::Alice, ["A", "A1"], d, false);
    t.local(Party::Bob, EventKind::Unitary, "swap_bob", &["B", "Bp"]);
    t.entangle(Party::Bob, ["bp", "A3"], d, true);
    t.entangle(Party::Bob, ["B", "A4"], d, true);
    t.local(Party::Bob, EventKind::Measure, "bell_measure", &["Bp", "bp"]);
    let posts = [
        PostEvent { party: Party::Alice, name: "post_select_alice", systems: vec!["A"] },
        PostEvent { party: Party::Bob, name: "post_select_bob", systems: vec!["B"] },
    ];
    c.port_stage(&mut t, &posts, Some(2), options.arrival);
    if options.return_to_alice {
        return_stage(&mut t, c);
    }
    t
}

/// Both systems of every inner port pair go back to Alice by
/// pre-and-post-selected port-based teleportation, one port pair at a time.
/// Each return carries a d⁴-dimensional carrier through `n` ports with `n`
/// inner ports per received port.
fn return_stage(t: &mut Transcript, c: &Carrier) {
    let (d, n) = (c.d, c.alice.ports());
    for i in 1..=n {
        for j in 1..=n {
            let tag = format!("R{i}.{j}");
            for s in 1..=2 {
                t.entangle(Party::Bob, [&format!("{tag}.s{s}"), &format!("{tag}.c{s}")], d, false);
            }
            for p in 1..=n {
                for comp in 1..=4 {
                    t.entangle(Party::Bob, [&format!("{tag}.a{p}_{comp}"), &format!("{tag}.b{p}_{comp}")], d, true);
                }
                for q in 1..=n {
                    for pair in 1..=2 {
                        t.entangle(Party::Alice, [&format!("{tag}.P{p}.{q}_l{pair}"), &format!("{tag}.P{p}.{q}_r{pair}")], d, false);
                    }
                }
            }
            t.local(Party::Bob, EventKind::Measure, &format!("return_pgm_{i}.{j}"), &[&tag]);
            t.local(Party::Alice, EventKind::Measure, &format!("return_inner_{i}.{j}"), &[&tag]);
            let m = t.send(Party::Bob, &format!("return_port_{i}.{j}"), n);
            t.receive(m);
            let m = t.send(Party::Alice, &format!("return_inner_port_{i}.{j}"), n.saturating_pow(n as u32));
            t.receive(m);
        }
    }
}

/// Instantaneous non-local measurement with `n` ports for Alice and `n`
/// inner ports per received port for Bob. `outcomes` are `(i, j)` given
/// both post-selections.
pub fn instantaneous_nonlocal(
    bi: &BipartiteTsv,
    joint_op: &JointOp,
    n: usize,
    mode: RunMode,
    options: NonlocalOptions,
) -> Result<RunRecord> {
    let d = bi.dim()?;
    let script = joint_op.script(d)?;
    let joint = nonlocal_joint(bi, joint_op, n, Variant::Deterministic)?;
    let c = carrier(d, n, &script, Variant::Deterministic)?;
    let mut record = RunRecord::new(
        "nonlocal",
        Params::new(d, mode).with_ports(n).with_ports_b(n),
        transcript(&c, options),
    );
    fill(&mut record, &joint, mode)?;
    record.ledger.ports = (n + n * n) as u64;
    let ideal = nonlocal_abl(bi, joint_op)?;
    record.set_metric("abl_tv_distance", record.conditional().tv_distance(&ideal));
    Ok(record)
}
