use postsel_core::engine::weyl::{bell_povm, maximally_entangled, pre_correction};
use postsel_core::engine::linalg::C64;
use postsel_core::engine::{StateVector, SubsystemLayout};
use postsel_core::nonlocal::{
    instantaneous_nonlocal, nonlocal_abl, nonlocal_branches, nonlocal_joint, nonlocal_oracle, BipartiteTsv,
    JointOp, NonlocalOptions,
};
use postsel_core::pbt::{Arrival, Variant};
use postsel_core::record::{ledger_report, EventKind};
use postsel_core::stats::RunMode;

fn ket(label: &str, amps: &[f64]) -> StateVector {
    StateVector::ket(label, amps.iter().map(|&a| C64::new(a, 0.0)).collect()).unwrap()
}

fn two_qubits(amps: [(f64, f64); 4]) -> StateVector {
    let layout = SubsystemLayout::new([("A", 2), ("B", 2)]).unwrap();
    StateVector::new(layout, amps.iter().map(|&(re, im)| C64::new(re, im)).collect()).unwrap()
}

fn max_diff(a: &StateVector, b: &StateVector) -> f64 {
    a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn product_zero() -> BipartiteTsv {
    BipartiteTsv::Product {
        alice_pre: ket("A", &[1.0, 0.0]),
        alice_post: ket("A", &[1.0, 0.0]),
        bob_pre: ket("B", &[1.0, 0.0]),
        bob_post: ket("B", &[1.0, 0.0]),
    }
}

fn entangled() -> BipartiteTsv {
    let phi = maximally_entangled(2, ["A", "B"]).unwrap();
    BipartiteTsv::Joint { pre: phi.clone(), post: phi }
}

fn tilted() -> BipartiteTsv {
    let pre = two_qubits([(0.6, 0.0), (0.0, 0.3), (0.2, -0.1), (0.5, 0.2)]);
    let post = two_qubits([(0.1, 0.4), (0.7, 0.0), (-0.3, 0.2), (0.2, 0.0)]);
    BipartiteTsv::Joint { pre, post }
}

fn bell() -> JointOp {
    JointOp::Measure(bell_povm(2).unwrap())
}

#[test]
fn step_one_carries_conjugated_post_and_scrambled_pre() {
    let bi = tilted();
    let (pre, post) = bi.states().unwrap();
    let bra = post.relabel_all(&["A", "B"]).unwrap();
    let ideal = pre
        .relabel_all(&["A2", "A3"])
        .unwrap()
        .tensor(&post.conj().relabel_all(&["A1", "A4"]).unwrap())
        .unwrap()
        .permute(&["A1", "A2", "A3", "A4"])
        .unwrap()
        .scaled(C64::new(0.25, 0.0));
    for b in nonlocal_branches(&bi).unwrap() {
        let selected = b.physical.contract_bra(&bra, &["A", "B"]).unwrap();
        let selected = selected.permute(&["A1", "A2", "A3", "A4"]).unwrap();
        let diff = max_diff(&selected, &b.formula);
        assert!(diff < 1e-12, "k={}: {diff}", b.k);
        let fixed = selected.apply(&pre_correction(2, b.k).unwrap(), &["A3"]).unwrap();
        assert!(max_diff(&fixed, &ideal) < 1e-12, "k={}", b.k);
    }
}

#[test]
fn ideal_statistics_of_the_examples() {
    let p = nonlocal_abl(&product_zero(), &bell()).unwrap();
    let expected = [0.5, 0.5, 0.0, 0.0];
    for (k, e) in expected.iter().enumerate() {
        assert!((p.get(&[k]).unwrap() - e).abs() < 1e-12, "{p:?}");
    }
    let q = nonlocal_abl(&entangled(), &bell()).unwrap();
    assert!((q.get(&[0]).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn pipeline_matches_composed_oracle_at_one_port() {
    for bi in [product_zero(), entangled(), tilted()] {
        let pipe = nonlocal_joint(&bi, &bell(), 1, Variant::Deterministic).unwrap();
        let oracle = nonlocal_oracle(&bi, &bell(), 1, Variant::Deterministic).unwrap();
        assert!(pipe.max_abs_diff(&oracle) < 1e-9);
    }
}

#[test]
fn pipeline_matches_composed_oracle_at_two_ports() {
    let bi = tilted();
    let pipe = nonlocal_joint(&bi, &bell(), 2, Variant::Deterministic).unwrap();
    let oracle = nonlocal_oracle(&bi, &bell(), 2, Variant::Deterministic).unwrap();
    assert!(pipe.max_abs_diff(&oracle) < 1e-9);
}

/// With exact-or-fail ports every success branch is a perfect teleport, so
/// the heralded statistics are the ideal ones.
#[test]
fn exact_ports_reproduce_ideal_statistics() {
    for bi in [product_zero(), entangled(), tilted()] {
        let ideal = nonlocal_abl(&bi, &bell()).unwrap();
        let got = nonlocal_oracle(&bi, &bell(), 1, Variant::Probabilistic).unwrap();
        assert!(got.conditional().unwrap().max_abs_diff(&ideal) < 1e-9);
    }
}

#[test]
fn distance_to_ideal_does_not_grow_with_ports() {
    for bi in [product_zero(), entangled()] {
        let ideal = nonlocal_abl(&bi, &bell()).unwrap();
        let tv: Vec<f64> = [1, 2]
            .iter()
            .map(|&n| nonlocal_oracle(&bi, &bell(), n, Variant::Deterministic).unwrap().conditional().unwrap().tv_distance(&ideal))
            .collect();
        assert!(tv[1] <= tv[0] + 1e-12, "{tv:?}");
    }
}

#[test]
fn arrival_order_leaves_quantum_events_unchanged() {
    let early = instantaneous_nonlocal(&entangled(), &bell(), 1, RunMode::Exact, NonlocalOptions::default()).unwrap();
    let late = instantaneous_nonlocal(
        &entangled(),
        &bell(),
        1,
        RunMode::Exact,
        NonlocalOptions { arrival: Arrival::Late, return_to_alice: false },
    )
    .unwrap();
    for r in [&early, &late] {
        let t = r.transcript();
        assert!(t.is_causally_consistent());
        assert!(t.quantum_parts_independent());
    }
    assert_eq!(early.transcript().quantum_events(), late.transcript().quantum_events());
    assert_ne!(early.events, late.events);
    assert_eq!(early.conditional_statistics, late.conditional_statistics);
}

#[test]
fn ledger_counts_prepared_pairs() {
    for (n, ebits) in [(1u64, 9u64), (2, 19)] {
        let r = instantaneous_nonlocal(&product_zero(), &bell(), n as usize, RunMode::Exact, NonlocalOptions::default())
            .unwrap();
        let l = ledger_report(&r, 1);
        let prepared = r.events.iter().filter(|e| e.kind == EventKind::Entangle).count() as u64;
        assert_eq!(l.ebits, prepared);
        assert_eq!(l.ebits, ebits);
        assert!((l.ebits as f64) < l.baseline_ebits.unwrap());
        assert_eq!(l.baseline_ebits, Some(256.0));
    }
    let back = NonlocalOptions { arrival: Arrival::Early, return_to_alice: true };
    let r = instantaneous_nonlocal(&product_zero(), &bell(), 1, RunMode::Exact, back).unwrap();
    let l = ledger_report(&r, 1);
    assert_eq!(l.ebits, 17);
    assert!(r.transcript().quantum_parts_independent());
}

#[test]
fn sampled_run_follows_exact_joint() {
    let exact = instantaneous_nonlocal(&tilted(), &bell(), 1, RunMode::Exact, NonlocalOptions::default()).unwrap();
    let mode = RunMode::Sampled { trials: 100_000, seed: 3 };
    let a = instantaneous_nonlocal(&tilted(), &bell(), 1, mode, NonlocalOptions::default()).unwrap();
    let b = instantaneous_nonlocal(&tilted(), &bell(), 1, mode, NonlocalOptions::default()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let p = exact.acceptance_probability;
    let sigma = (p * (1.0 - p) / 1e5).sqrt();
    assert!((a.acceptance_probability - p).abs() < 5.0 * sigma + 1e-9);
}
