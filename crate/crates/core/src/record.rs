//! Run transcripts: event log, classical messages and resource ledger.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::stats::{record_label, Mode, OutcomeDistribution, RunMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn other(self) -> Self {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "A->B")]
    AliceToBob,
    #[serde(rename = "B->A")]
    BobToAlice,
}

impl Direction {
    pub fn from_sender(p: Party) -> Self {
        match p {
            Party::Alice => Direction::AliceToBob,
            Party::Bob => Direction::BobToAlice,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Preparation of a |Φ⁺⟩ pair; counted as one ebit.
    Entangle,
    /// Any other local preparation or reset.
    Prepare,
    Unitary,
    Measure,
    PostSelect,
    Send,
    Receive,
}

impl EventKind {
    pub fn is_quantum(self) -> bool {
        !matches!(self, EventKind::Send | EventKind::Receive)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: usize,
    pub party: Party,
    pub kind: EventKind,
    pub name: String,
    pub systems: Vec<String>,
    /// Message this event has to wait for, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depends_on: Option<usize>,
    /// Message sent or received by this event.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<usize>,
    /// Pair dimension of an entangling preparation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_dim: Option<usize>,
    /// Whether an entangled pair is split between the parties.
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub shared: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalMessage {
    pub id: usize,
    pub name: String,
    pub direction: Direction,
    pub bits: u64,
    /// Payload of the last sampled run; absent in exact mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceLedger {
    pub ebits: u64,
    /// Σ log₂(pair dimension) over pairs shared between the parties.
    pub entanglement_qubits: f64,
    pub cbits_a_to_b: u64,
    pub cbits_b_to_a: u64,
    pub ports: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_ebits: Option<f64>,
}

/// Bits needed to name one of `outcomes` alternatives.
pub fn bits_for(outcomes: usize) -> u64 {
    if outcomes <= 1 {
        0
    } else {
        (usize::BITS - (outcomes - 1).leading_zeros()) as u64
    }
}

/// Ordered event log and message list of one protocol.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub events: Vec<Event>,
    pub messages: Vec<ClassicalMessage>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, mut e: Event) -> usize {
        e.seq = self.events.len();
        self.events.push(e);
        self.events.len() - 1
    }

    fn event(party: Party, kind: EventKind, name: &str, systems: &[&str]) -> Event {
        Event {
            seq: 0,
            party,
            kind,
            name: name.into(),
            systems: systems.iter().map(|s| s.to_string()).collect(),
            depends_on: None,
            message: None,
            pair_dim: None,
            shared: false,
        }
    }

    /// A |Φ⁺⟩ pair prepared by `party`; `shared` when one half goes to the other party.
    pub fn entangle(&mut self, party: Party, systems: [&str; 2], dim: usize, shared: bool) -> usize {
        let mut e = Self::event(party, EventKind::Entangle, "phi+", &systems);
        e.pair_dim = Some(dim);
        e.shared = shared;
        self.push(e)
    }

    pub fn local(&mut self, party: Party, kind: EventKind, name: &str, systems: &[&str]) -> usize {
        self.push(Self::event(party, kind, name, systems))
    }

    /// A local quantum event that waits for message `msg`.
    pub fn after(
        &mut self,
        party: Party,
        kind: EventKind,
        name: &str,
        systems: &[&str],
        msg: usize,
    ) -> usize {
        let mut e = Self::event(party, kind, name, systems);
        e.depends_on = Some(msg);
        self.push(e)
    }

    /// Sends a message; returns its id.
    pub fn send(&mut self, from: Party, name: &str, outcomes: usize) -> usize {
        let id = self.messages.len();
        self.messages.push(ClassicalMessage {
            id,
            name: name.into(),
            direction: Direction::from_sender(from),
            bits: bits_for(outcomes),
            payload: None,
        });
        let mut e = Self::event(from, EventKind::Send, name, &[]);
        e.message = Some(id);
        self.push(e);
        id
    }

    pub fn receive(&mut self, msg: usize) {
        let m = &self.messages[msg];
        let to = match m.direction {
            Direction::AliceToBob => Party::Bob,
            Direction::BobToAlice => Party::Alice,
        };
        let mut e = Self::event(to, EventKind::Receive, &m.name.clone(), &[]);
        e.message = Some(msg);
        self.push(e);
    }

    pub fn set_payload(&mut self, msg: usize, value: usize) {
        self.messages[msg].payload = Some(value);
    }

    /// Ledger computed from the log: ebits count |Φ⁺⟩ preparations.
    pub fn ledger(&self) -> ResourceLedger {
        let mut l = ResourceLedger::default();
        for e in &self.events {
            if e.kind == EventKind::Entangle {
                l.ebits += 1;
                if e.shared {
                    l.entanglement_qubits += (e.pair_dim.unwrap_or(2) as f64).log2();
                }
            }
        }
        for m in &self.messages {
            match m.direction {
                Direction::AliceToBob => l.cbits_a_to_b += m.bits,
                Direction::BobToAlice => l.cbits_b_to_a += m.bits,
            }
        }
        l
    }

    pub fn find(&self, name: &str) -> Option<&Event> {
        self.events.iter().find(|e| e.name == name)
    }

    /// Positions of the first `first` event and the first `then` event.
    pub fn precedes(&self, first: &str, then: &str) -> bool {
        match (
            self.events.iter().position(|e| e.name == first),
            self.events.iter().position(|e| e.name == then),
        ) {
            (Some(a), Some(b)) => a < b,
            _ => false,
        }
    }

    /// Every message is received after it is sent, and every dependent event
    /// comes after the receipt, on the receiving side.
    pub fn is_causally_consistent(&self) -> bool {
        let sent = |id: usize| {
            self.events
                .iter()
                .position(|e| e.kind == EventKind::Send && e.message == Some(id))
        };
        let received = |id: usize| {
            self.events
                .iter()
                .position(|e| e.kind == EventKind::Receive && e.message == Some(id))
        };
        self.events.iter().enumerate().all(|(k, e)| match e.kind {
            EventKind::Receive => e.message.and_then(sent).is_some_and(|s| s < k),
            _ => match e.depends_on {
                None => true,
                Some(id) => received(id).is_some_and(|r| {
                    r < k && self.events[r].party == e.party
                }),
            },
        })
    }

    /// No quantum event of either party waits for a message from the other.
    pub fn quantum_parts_independent(&self) -> bool {
        self.events
            .iter()
            .filter(|e| e.kind.is_quantum())
            .all(|e| match e.depends_on {
                None => true,
                Some(id) => {
                    let sender = match self.messages[id].direction {
                        Direction::AliceToBob => Party::Alice,
                        Direction::BobToAlice => Party::Bob,
                    };
                    sender == e.party
                }
            })
    }

    /// Quantum events with sequence numbers stripped, for schedule comparisons.
    pub fn quantum_events(&self) -> Vec<Event> {
        self.events
            .iter()
            .filter(|e| e.kind.is_quantum())
            .map(|e| Event { seq: 0, ..e.clone() })
            .collect()
    }

    pub fn directions(&self) -> Vec<Direction> {
        self.messages.iter().map(|m| m.direction).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ports: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ports_b: Option<usize>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub mode: Mode,
}

impl Params {
    pub fn new(dim: usize, mode: RunMode) -> Self {
        Self {
            dim,
            ports: None,
            ports_b: None,
            trials: mode.trials(),
            seed: mode.seed(),
            mode: mode.mode(),
        }
    }

    pub fn with_ports(mut self, ports: usize) -> Self {
        self.ports = Some(ports);
        self
    }

    pub fn with_ports_b(mut self, ports_b: usize) -> Self {
        self.ports_b = Some(ports_b);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub label: String,
    pub probability: f64,
    pub count: Option<u64>,
}

pub fn rows(dist: &OutcomeDistribution) -> Vec<OutcomeRow> {
    dist.records
        .iter()
        .enumerate()
        .map(|(k, r)| OutcomeRow {
            label: record_label(r),
            probability: dist.probabilities[k],
            count: dist.counts.as_ref().map(|c| c[k]),
        })
        .collect()
}

/// Transcript of one protocol execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub protocol: String,
    pub params: Params,
    /// Distribution of the protocol's own measurement outcomes.
    pub outcomes: Vec<OutcomeRow>,
    /// Script statistics of the receiving party, conditioned on acceptance
    /// and read from the heralded port where applicable.
    pub conditional_statistics: Vec<OutcomeRow>,
    pub acceptance_probability: f64,
    /// Whether the last sampled run was accepted; absent in exact mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub post_selection_succeeded: Option<bool>,
    pub fidelity: Option<f64>,
    pub ledger: ResourceLedger,
    pub messages: Vec<ClassicalMessage>,
    pub events: Vec<Event>,
    /// Protocol-specific scalar observables.
    pub metrics: BTreeMap<String, f64>,
}

impl RunRecord {
    pub fn new(protocol: &str, params: Params, transcript: Transcript) -> Self {
        Self {
            protocol: protocol.into(),
            params,
            outcomes: Vec::new(),
            conditional_statistics: Vec::new(),
            acceptance_probability: 1.0,
            post_selection_succeeded: None,
            fidelity: None,
            ledger: transcript.ledger(),
            messages: transcript.messages,
            events: transcript.events,
            metrics: BTreeMap::new(),
        }
    }

    pub fn transcript(&self) -> Transcript {
        Transcript {
            events: self.events.clone(),
            messages: self.messages.clone(),
        }
    }

    pub fn conditional(&self) -> OutcomeDistribution {
        from_rows(&self.conditional_statistics)
    }

    pub fn outcome_distribution(&self) -> OutcomeDistribution {
        from_rows(&self.outcomes)
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    pub fn set_metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.into(), value);
    }
}

fn from_rows(rows: &[OutcomeRow]) -> OutcomeDistribution {
    let records = rows
        .iter()
        .map(|r| {
            if r.label == "-" {
                Vec::new()
            } else {
                r.label.split(',').map(|k| k.parse().unwrap_or(0)).collect()
            }
        })
        .collect();
    let probabilities = rows.iter().map(|r| r.probability).collect();
    let counts = rows.iter().map(|r| r.count).collect::<Option<Vec<u64>>>();
    OutcomeDistribution {
        records,
        probabilities,
        counts,
    }
}

/// Ledger of `record` with the n_q·2^{8 n_q} comparison baseline attached.
pub fn ledger_report(record: &RunRecord, qubit_count: u32) -> ResourceLedger {
    let mut l = record.transcript().ledger();
    let n = qubit_count as f64;
    l.ports = record.ledger.ports;
    l.baseline_ebits = Some(n * 2f64.powf(8.0 * n));
    l
}
