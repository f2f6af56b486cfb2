//! Pre-and-post-selected port-based teleportation of a carrier made of `m`
//! components of dimension `d` (one system of dimension `D = d^m`).
//!
//! Alice teleports the carrier `A1..Am` into port `i` (`b{i}_1..b{i}_m` on
//! Bob's side). For every `i` Bob holds inner ports `P1..Pn`, each made of
//! `m` components with |Φ⁺⟩ on the listed component pairs, runs the script on
//! every inner port and measures `[b_i, P1..Pn]` with the port-based
//! measurement; outcome `j` names the inner port carrying the result. Only
//! port `i` matters for the heralded statistics: Bob's operations on the
//! other received ports are trace preserving and act on other systems.
//!
//! Two independent routes produce the joint weights `P(k, i, j, r, accept)`:
//! the physical pipeline, and a composed-channel oracle built from the
//! transpose trick `N_i(X) = (tr_{in,a≠i}[Π_i(X ⊗ 𝟙)])ᵀ / Dⁿ` for Alice and
//! Heisenberg-picture effects for Bob.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::linalg::{self, CMatrix, C64};
use crate::engine::measure::draw_index;
use crate::engine::weyl::maximally_entangled;
use crate::engine::{StateVector, UnitaryOp};
use crate::error::{Result, SimError};
use crate::limits::{ensure_within, saturating_pow};
use crate::oracle::ExperimentScript;
use crate::record::{EventKind, Party, Transcript};
use crate::stats::OutcomeDistribution;
use crate::teleport::{script_kind, Tally};
use crate::EPS_ZERO;

use super::pgm::PbtChannel;

/// Carrier pipeline parameters.
pub(crate) struct Carrier<'a> {
    pub d: usize,
    pub m: usize,
    pub alice: PbtChannel,
    pub bob: PbtChannel,
    /// Component pairs of each inner port prepared in |Φ⁺⟩.
    pub pairs: Vec<(usize, usize)>,
    /// Inner-port components the script slots bind to.
    pub script_components: Vec<usize>,
    pub script: &'a ExperimentScript,
}

/// One branch of the step that loads the carrier.
#[derive(Debug, Clone)]
pub struct CarrierBranch {
    pub k: usize,
    /// Unnormalised state on `[post systems…, A1..Am]`.
    pub physical: StateVector,
    /// Bob's fix-up on one component of every received port.
    pub correction: Option<(usize, UnitaryOp)>,
    /// Closed-form post-selected carrier on `[A1..Am]`.
    pub formula: StateVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointEntry {
    pub k: usize,
    pub i: usize,
    pub j: usize,
    pub record: Vec<usize>,
    pub weight: f64,
}

/// Joint weights over `(k, i, j, record)` including the rejected mass.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedJoint {
    pub entries: Vec<JointEntry>,
    pub records: Vec<Vec<usize>>,
    pub alice_ports: usize,
    pub bob_ports: usize,
}

impl HeraldedJoint {
    /// Total accepted weight.
    pub fn acceptance(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    /// Script statistics at the heralded inner port, given acceptance.
    pub fn conditional(&self) -> Result<OutcomeDistribution> {
        let weights: Vec<f64> = self
            .records
            .iter()
            .map(|r| self.entries.iter().filter(|e| &e.record == r).map(|e| e.weight).sum())
            .collect();
        OutcomeDistribution::from_weights(self.records.clone(), &weights)
            .ok_or(SimError::PostSelectionImpossible(self.acceptance()))
    }

    /// Distribution of `(i, j)` given acceptance.
    pub fn port_distribution(&self) -> Result<OutcomeDistribution> {
        let records: Vec<Vec<usize>> = (0..self.alice_ports)
            .flat_map(|i| (0..self.bob_ports).map(move |j| vec![i, j]))
            .collect();
        let weights: Vec<f64> = records
            .iter()
            .map(|r| {
                self.entries
                    .iter()
                    .filter(|e| e.i == r[0] && e.j == r[1])
                    .map(|e| e.weight)
                    .sum()
            })
            .collect();
        OutcomeDistribution::from_weights(records, &weights)
            .ok_or(SimError::PostSelectionImpossible(self.acceptance()))
    }

    /// Largest entry-wise difference; both joints must enumerate the same keys.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.entries.len(), other.entries.len(), "joint shapes differ");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| {
                assert!(a.k == b.k && a.i == b.i && a.j == b.j && a.record == b.record);
                (a.weight - b.weight).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// When Bob's copy of Alice's announcements is logged relative to his own
/// quantum operations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arrival {
    /// Right after Alice sends.
    #[default]
    Early,
    /// After all of Bob's quantum operations.
    Late,
}

/// A post-selection performed by `party` on `systems`.
pub(crate) struct PostEvent<'a> {
    pub party: Party,
    pub name: &'a str,
    pub systems: Vec<&'a str>,
}

/// Sampled run drawn from the exact joint distribution.
pub(crate) struct JointSample {
    pub records: Tally,
    pub ports: Tally,
    pub accepted: u64,
}

impl HeraldedJoint {
    pub(crate) fn sample(&self, trials: u64, seed: u64) -> JointSample {
        let mut weights: Vec<f64> = self.entries.iter().map(|e| e.weight.max(0.0)).collect();
        weights.push((1.0 - self.acceptance()).max(0.0));
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut records = Tally::new(self.records.clone());
        let mut ports = Tally::new(
            (0..self.alice_ports)
                .flat_map(|i| (0..self.bob_ports).map(move |j| vec![i, j]))
                .collect(),
        );
        let mut accepted = 0;
        for _ in 0..trials {
            let k = draw_index(&probs, &mut rng);
            if let Some(e) = self.entries.get(k) {
                accepted += 1;
                records.count(&e.record);
                ports.count(&[e.i, e.j]);
            }
        }
        JointSample { records, ports, accepted }
    }
}

pub(crate) fn carrier_labels(m: usize) -> Vec<String> {
    (1..=m).map(|c| format!("A{c}")).collect()
}

fn group(prefix: &str, m: usize) -> Vec<String> {
    (1..=m).map(|c| format!("{prefix}_{c}")).collect()
}

/// Kronecker embedding of `u` at component `c` of `m`.
fn embed(d: usize, m: usize, c: usize, u: &UnitaryOp) -> CMatrix {
    let left = linalg::identity(saturating_pow(d, c) as usize);
    let right = linalg::identity(saturating_pow(d, m - c - 1) as usize);
    linalg::kron(&linalg::kron(&left, &u.matrix()), &right)
}

impl Carrier<'_> {
    fn dim(&self) -> usize {
        self.alice.dim()
    }

    /// Component labels of received port `i` (0-based).
    fn received(&self, i: usize) -> Vec<String> {
        group(&format!("b{}", i + 1), self.m)
    }

    fn inner(&self, j: usize) -> Vec<String> {
        group(&format!("P{}", j + 1), self.m)
    }

    fn bob_carrier(&self) -> Vec<String> {
        group("x", self.m)
    }

    fn alice_measured(&self) -> Vec<String> {
        let mut labels = carrier_labels(self.m);
        for i in 0..self.alice.ports() {
            labels.extend(group(&format!("a{}", i + 1), self.m));
        }
        labels
    }

    fn bob_measured(&self) -> Vec<String> {
        let mut labels = self.bob_carrier();
        for j in 0..self.bob.ports() {
            labels.extend(self.inner(j));
        }
        labels
    }

    /// Alice's ports: |Φ⁺⟩ between `a{i}_c` and `b{i}_c` for every component.
    fn alice_resource(&self) -> Result<StateVector> {
        let mut state = StateVector::scalar(C64::new(1.0, 0.0));
        for i in 0..self.alice.ports() {
            let a = group(&format!("a{}", i + 1), self.m);
            let b = self.received(i);
            for c in 0..self.m {
                state = state.tensor(&maximally_entangled(self.d, [a[c].as_str(), b[c].as_str()])?)?;
            }
        }
        Ok(state)
    }

    /// Bob's inner ports in measurement order `[P1_1..P1_m, P2_1..]`.
    fn inner_resource(&self) -> Result<StateVector> {
        let mut state = StateVector::scalar(C64::new(1.0, 0.0));
        let mut order = Vec::new();
        for j in 0..self.bob.ports() {
            let p = self.inner(j);
            for &(l, r) in &self.pairs {
                state = state.tensor(&maximally_entangled(self.d, [p[l].as_str(), p[r].as_str()])?)?;
            }
            order.extend(p);
        }
        state.permute(&order)
    }

    /// Port vectors after the script, grouped by the record at inner port `j`;
    /// records at the other inner ports are enumerated and kept separate.
    fn port_vectors(&self, j: usize) -> Result<Vec<(Vec<usize>, Vec<StateVector>)>> {
        let ports = self.inner_resource()?;
        let bind = |jj: usize| -> Vec<String> {
            let p = self.inner(jj);
            self.script_components.iter().map(|&c| p[c].clone()).collect()
        };
        let mut out = Vec::new();
        for (r, v) in self.script.branches(&ports, &bind(j))? {
            let mut list = vec![v];
            for other in (0..self.bob.ports()).filter(|&o| o != j) {
                let mut next = Vec::new();
                for w in &list {
                    next.extend(self.script.branches(w, &bind(other))?.into_iter().map(|(_, b)| b));
                }
                list = next;
            }
            out.push((r, list));
        }
        Ok(out)
    }

    /// Logs the shared ports, Bob's inner ports, scripts and measurements,
    /// Alice's measurement, every post-selection with its success report,
    /// and Alice's port announcement.
    pub fn port_stage(&self, t: &mut Transcript, posts: &[PostEvent], fix: Option<usize>, arrival: Arrival) {
        let (n_a, n_b) = (self.alice.ports(), self.bob.ports());
        for i in 0..n_a {
            let a = group(&format!("a{}", i + 1), self.m);
            let b = self.received(i);
            for c in 0..self.m {
                t.entangle(Party::Alice, [&a[c], &b[c]], self.d, true);
            }
        }
        let inner = |i: usize, j: usize| group(&format!("P{}.{}", i + 1, j + 1), self.m);
        for i in 0..n_a {
            for j in 0..n_b {
                let p = inner(i, j);
                for &(l, r) in &self.pairs {
                    t.entangle(Party::Bob, [&p[l], &p[r]], self.d, false);
                }
            }
        }
        let alice_systems = self.alice_measured();
        let alice_systems: Vec<&str> = alice_systems.iter().map(|s| s.as_str()).collect();
        t.local(Party::Alice, EventKind::Measure, "pgm", &alice_systems);
        let mut to_bob = vec![t.send(Party::Alice, "port", n_a)];
        let mut to_alice = Vec::new();
        for post in posts {
            t.local(post.party, EventKind::PostSelect, post.name, &post.systems);
            let m = t.send(post.party, &format!("{}_success", post.name), 2);
            match post.party {
                Party::Alice => to_bob.push(m),
                Party::Bob => to_alice.push(m),
            }
        }
        if arrival == Arrival::Early {
            to_bob.iter().for_each(|&m| t.receive(m));
        }
        for i in 0..n_a {
            let b = self.received(i);
            if let Some(c) = fix {
                t.local(Party::Bob, EventKind::Unitary, &format!("unscramble_{}", i + 1), &[&b[c]]);
            }
            let mut measured: Vec<String> = b.clone();
            for j in 0..n_b {
                let p = inner(i, j);
                let bound: Vec<&str> = self.script_components.iter().map(|&c| p[c].as_str()).collect();
                t.local(Party::Bob, script_kind(self.script), &format!("script_{}.{}", i + 1, j + 1), &bound);
                measured.extend(p);
            }
            let measured: Vec<&str> = measured.iter().map(|s| s.as_str()).collect();
            t.local(Party::Bob, EventKind::Measure, &format!("pgm_{}", i + 1), &measured);
        }
        to_alice.push(t.send(Party::Bob, "inner_ports", n_b.saturating_pow(n_a as u32)));
        if arrival == Arrival::Late {
            to_bob.iter().for_each(|&m| t.receive(m));
        }
        to_alice.iter().for_each(|&m| t.receive(m));
    }

    /// Physical route: full state, Alice's Lüders measurement, partial
    /// trace to the received port, eigen-ensemble, Bob's stage.
    pub fn pipeline(
        &self,
        branches: &[CarrierBranch],
        post: &StateVector,
        post_labels: &[String],
    ) -> Result<HeraldedJoint> {
        let resource = self.alice_resource()?;
        let alice_labels = self.alice_measured();
        let bob_labels = self.bob_measured();
        let vectors: Vec<_> = (0..self.bob.ports())
            .map(|j| self.port_vectors(j))
            .collect::<Result<_>>()?;
        let mut entries = Vec::new();
        for b in branches {
            // ⟨post| commutes with Alice's measurement: disjoint systems.
            let selected = b.physical.contract_bra(post, post_labels)?.permute(&carrier_labels(self.m))?;
            ensure_within((selected.dim() as u128).saturating_mul(resource.dim() as u128))?;
            let joint = selected.tensor(&resource)?;
            for i in 0..self.alice.ports() {
                let branch = joint.apply_operator(self.alice.povm().root(i), &alice_labels)?;
                let mut rho = branch.reduced_density(&self.received(i))?.relabel_all(&self.bob_carrier())?;
                if let Some((c, u)) = &b.correction {
                    rho = rho.apply(u, &[&self.bob_carrier()[*c]])?;
                }
                let ensemble = rho.ensemble(EPS_ZERO * EPS_ZERO);
                for (j, per_record) in vectors.iter().enumerate() {
                    let effect = self.bob.povm().element(j);
                    for (r, ws) in per_record {
                        let mut weight = 0.0;
                        for u in &ensemble {
                            for w in ws {
                                weight += u.tensor(w)?.expectation(effect, &bob_labels)?.re;
                            }
                        }
                        entries.push(JointEntry { k: b.k, i, j, record: r.clone(), weight });
                    }
                }
            }
        }
        Ok(self.joint(entries))
    }

    fn joint(&self, entries: Vec<JointEntry>) -> HeraldedJoint {
        HeraldedJoint {
            entries,
            records: self.script.records(),
            alice_ports: self.alice.ports(),
            bob_ports: self.bob.ports(),
        }
    }

    /// `N_i(|c⟩⟨c|)` from the transpose trick, as a `D × D` matrix.
    fn alice_channel(&self, carrier: &StateVector, i: usize) -> CMatrix {
        let d = self.dim();
        let n = self.alice.ports();
        let ports = saturating_pow(d, n) as usize;
        let c = carrier.amplitudes();
        let mut cols = CMatrix::zeros(d * ports, ports);
        for q in 0..ports {
            for (x, &a) in c.iter().enumerate() {
                cols[(x * ports + q, q)] = a;
            }
        }
        let g = cols.adjoint() * self.alice.povm().element(i).apply_matrix(&cols);
        let stride = saturating_pow(d, n - 1 - i) as usize;
        let mut out = CMatrix::zeros(d, d);
        for q in 0..ports {
            let v = (q / stride) % d;
            let base = q - v * stride;
            for u in 0..d {
                out[(u, v)] += g[(q, base + u * stride)];
            }
        }
        out / C64::new(ports as f64, 0.0)
    }

    /// `F = Σ_w V_w† E_j V_w` with `V_w = 𝟙_D ⊗ |w⟩`.
    fn bob_effect(&self, j: usize, ws: &[StateVector]) -> CMatrix {
        let d = self.dim();
        let mut f = CMatrix::zeros(d, d);
        for w in ws {
            let amps = w.amplitudes();
            let mut v = CMatrix::zeros(d * amps.len(), d);
            for y in 0..d {
                for (t, &a) in amps.iter().enumerate() {
                    v[(y * amps.len() + t, y)] = a;
                }
            }
            f += v.adjoint() * self.bob.povm().element(j).apply_matrix(&v);
        }
        f
    }

    /// Composed-channel route from the closed-form carriers.
    pub fn oracle(&self, branches: &[CarrierBranch]) -> Result<HeraldedJoint> {
        let effects: Vec<Vec<(Vec<usize>, CMatrix)>> = (0..self.bob.ports())
            .map(|j| {
                Ok(self
                    .port_vectors(j)?
                    .into_iter()
                    .map(|(r, ws)| (r, self.bob_effect(j, &ws)))
                    .collect())
            })
            .collect::<Result<_>>()?;
        let mut entries = Vec::new();
        for b in branches {
            let fix = b.correction.as_ref().map(|(c, u)| embed(self.d, self.m, *c, u));
            for i in 0..self.alice.ports() {
                let mut rho = self.alice_channel(&b.formula, i);
                if let Some(cm) = &fix {
                    rho = cm * rho * cm.adjoint();
                }
                for (j, per_record) in effects.iter().enumerate() {
                    for (r, f) in per_record {
                        let weight = (f * &rho).trace().re;
                        entries.push(JointEntry { k: b.k, i, j, record: r.clone(), weight });
                    }
                }
            }
        }
        Ok(self.joint(entries))
    }
}
