use postsel_core::appendix::*;
use postsel_core::stats::RunMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn swap_contraction_gives_phi_plus_with_factor_one_over_d() {
    for d in 2..=4 {
        let c = swap_factor(d).unwrap();
        assert!((c.re - 1.0 / d as f64).abs() < 1e-12 && c.im.abs() < 1e-12);
    }
}

#[test]
fn coding_contraction_moves_the_rotation_to_alice() {
    for d in 2..=3 {
        for i in 0..d * d {
            let c = coding_factor(d, i).unwrap();
            assert!((c.re - 1.0 / d as f64).abs() < 1e-12 && c.im.abs() < 1e-12);
        }
    }
}

#[test]
fn every_corrected_branch_holds_phi_plus() {
    for d in 2..=3 {
        let branches = extraction_branches(d, true).unwrap();
        assert_eq!(branches.len(), d.pow(4));
        for b in &branches {
            assert!((b.fidelity - 1.0).abs() < 1e-10, "{b:?}");
            assert!((b.probability - 1.0 / d.pow(4) as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn unrotated_branches_keep_the_pair_only_for_j_zero() {
    let branches = extraction_branches(2, false).unwrap();
    for b in branches {
        let expected = if b.j == 0 { 1.0 } else { 0.0 };
        assert!((b.fidelity - expected).abs() < 1e-10, "{b:?}");
    }
}

#[test]
fn extraction_record() {
    let r = extract_entanglement(2, RunMode::Exact).unwrap();
    assert!((r.fidelity.unwrap() - 1.0).abs() < 1e-10);
    assert!(r.outcomes.iter().all(|o| (o.probability - 1.0 / 16.0).abs() < 1e-12));
    assert!((r.metric("swap_factor").unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(r.ledger.ebits, 3);
    assert_eq!(r.ledger.entanglement_qubits, 1.0);
    assert_eq!((r.ledger.cbits_a_to_b, r.ledger.cbits_b_to_a), (0, 2));
    assert!(r.transcript().is_causally_consistent());
}

#[test]
fn decoding_rows_are_permutations() {
    for d in 2..=3 {
        for row in decoding_table(d) {
            let mut sorted = row.clone();
            sorted.sort();
            assert_eq!(sorted, (0..d * d).collect::<Vec<_>>());
        }
    }
}

#[test]
fn every_branch_decodes_the_message() {
    for d in 2..=3 {
        for i in 0..d * d {
            let branches = coding_branches(d, i).unwrap();
            let total: f64 = branches.iter().map(|b| b.probability).sum();
            assert!((total - 1.0).abs() < 1e-10);
            let pairs: std::collections::BTreeSet<(usize, usize)> = branches.iter().map(|b| (b.k, b.j)).collect();
            assert_eq!(pairs.len(), d.pow(4));
            assert!(branches.iter().all(|b| b.decoded == i), "d={d} i={i}");
            let run = dense_coding_via_postteleport(d, i, RunMode::Exact).unwrap();
            assert_eq!(run.decoded, i);
            assert_eq!(run.errors, 0.0);
        }
    }
}

#[test]
fn message_zero_with_outcome_zero_reads_zero() {
    let b = coding_branches(2, 0).unwrap();
    assert!(b.iter().filter(|b| b.k == 0 && b.j == 0).all(|b| b.o == 0 && b.decoded == 0));
}

#[test]
fn sampled_messages_decode_without_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for t in 0..1000 {
        let i = rng.random_range(0..4);
        let run = dense_coding_via_postteleport(2, i, RunMode::Sampled { trials: 1, seed: t }).unwrap();
        assert_eq!(run.decoded, i);
        assert_eq!(run.errors, 0.0);
    }
}

#[test]
fn coding_ledger_and_message_direction() {
    let r = dense_coding_via_postteleport(2, 2, RunMode::Exact).unwrap().record;
    assert_eq!(r.ledger.cbits_b_to_a, 2);
    assert_eq!(r.ledger.cbits_a_to_b, 0);
    assert!(r.transcript().is_causally_consistent());
}
