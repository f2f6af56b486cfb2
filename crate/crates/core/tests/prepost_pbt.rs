use num_complex::Complex64 as C64;
use postsel_core::engine::random::{random_amplitudes, random_state};
use postsel_core::engine::weyl::maximally_entangled;
use postsel_core::engine::{CMatrix, Operator, StateVector};
use postsel_core::oracle::ExperimentScript;
use postsel_core::pbt::*;
use postsel_core::stats::RunMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ket(label: &str, a: &[f64]) -> StateVector {
    StateVector::ket(label, a.iter().map(|&x| C64::new(x, 0.0)).collect()).unwrap()
}

#[test]
fn step_one_gives_conjugated_post_and_pre() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for d in 2..=3 {
        let pre = random_state("S", d, &mut rng).unwrap();
        let post = random_state("S", d, &mut rng).unwrap();
        let b = prepost_step1(&pre, &post, d).unwrap();
        let selected = b.physical.contract_bra(&post.relabel_all(&["A"]).unwrap(), &["A"]).unwrap();
        let selected = selected.permute(&["A1", "A2"]).unwrap();
        assert!((selected.fidelity(&b.formula).unwrap() - 1.0).abs() < 1e-10);
        assert!((selected.norm_sqr() - 1.0 / d as f64).abs() < 1e-12);
        let diff: f64 = selected
            .amplitudes()
            .iter()
            .zip(b.formula.amplitudes())
            .map(|(a, c)| (a - c).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }
}

#[test]
fn conjugation_and_transpose_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for d in 2..=4 {
        let phi = random_state("A", d, &mut rng).unwrap();
        let rest = maximally_entangled(d, ["A", "A1"]).unwrap().contract_bra(&phi, &["A"]).unwrap();
        let expected = phi.conj().relabel_all(&["A1"]).unwrap().scaled((1.0 / (d as f64).sqrt()).into());
        assert!(rest.amplitudes().iter().zip(expected.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-12));

        let m = CMatrix::from_vec(d, d, random_amplitudes(d * d, &mut rng));
        let pair = maximally_entangled(d, ["L", "R"]).unwrap();
        let right = pair.apply_operator(&Operator::dense(m.clone()).unwrap(), &["R"]).unwrap();
        let left = pair.apply_operator(&Operator::dense(m.transpose()).unwrap(), &["L"]).unwrap();
        assert!(right.amplitudes().iter().zip(left.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-10));
    }
}

#[test]
fn pipeline_matches_composed_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (n_a, n_b) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        let pre = random_state("S", 2, &mut rng).unwrap();
        let post = random_state("S", 2, &mut rng).unwrap();
        let script = ExperimentScript::random(vec![2], &mut rng).unwrap();
        let pipe = prepost_joint(&pre, &post, n_a, n_b, 2, &script, Variant::Deterministic).unwrap();
        let oracle = prepost_oracle(&pre, &post, n_a, n_b, 2, &script, Variant::Deterministic).unwrap();
        let diff = pipe.max_abs_diff(&oracle);
        assert!(diff < 1e-9, "n_a={n_a} n_b={n_b}: {diff}");
        assert!(pipe.conditional().unwrap().max_abs_diff(&oracle.conditional().unwrap()) < 1e-9);
    }
}

#[test]
fn zero_zero_example_is_close_to_ideal() {
    let zero = ket("S", &[1.0, 0.0]);
    let script = ExperimentScript::z_measure(2).unwrap();
    let r = pbt_prepost(&zero, &zero, 2, 2, 2, &script, RunMode::Exact).unwrap();
    let ideal = prepost_abl(&zero, &zero, &script).unwrap();
    assert!((ideal.get(&[0]).unwrap() - 1.0).abs() < 1e-12);
    let p0 = r.conditional().get(&[0]).unwrap();
    println!("P(0) = {p0}, acceptance = {}", r.acceptance_probability);
    assert!(p0 > 0.5);
    assert!(r.transcript().quantum_parts_independent());
    assert!(r.transcript().is_causally_consistent());
}

#[test]
fn sampled_run_follows_exact_joint() {
    let zero = ket("S", &[1.0, 0.0]);
    let script = ExperimentScript::z_measure(2).unwrap();
    let exact = pbt_prepost(&zero, &zero, 2, 1, 2, &script, RunMode::Exact).unwrap();
    let mode = RunMode::Sampled { trials: 20_000, seed: 3 };
    let sampled = pbt_prepost(&zero, &zero, 2, 1, 2, &script, mode).unwrap();
    assert!(sampled.conditional().max_sigma_deviation(&exact.conditional()) < 5.0);
    assert_eq!(sampled, pbt_prepost(&zero, &zero, 2, 1, 2, &script, mode).unwrap());
}

/// Exact-or-fail ports teleport perfectly on success, so the heralded
/// statistics reproduce the ideal two-state prediction exactly.
#[test]
fn exact_ports_reproduce_abl_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (n_a, n_b) in [(1, 1), (2, 2), (2, 1)] {
        for _ in 0..3 {
            let pre = random_state("S", 2, &mut rng).unwrap();
            let post = random_state("S", 2, &mut rng).unwrap();
            let script = ExperimentScript::random(vec![2], &mut rng).unwrap();
            let ideal = prepost_abl(&pre, &post, &script).unwrap();
            let pipe = prepost_joint(&pre, &post, n_a, n_b, 2, &script, Variant::Probabilistic).unwrap();
            let oracle = prepost_oracle(&pre, &post, n_a, n_b, 2, &script, Variant::Probabilistic).unwrap();
            assert!(pipe.max_abs_diff(&oracle) < 1e-9);
            let diff = pipe.conditional().unwrap().max_abs_diff(&ideal);
            assert!(diff < 1e-9, "n_a={n_a} n_b={n_b}: {diff}");
        }
    }
}

#[test]
fn heralded_statistics_improve_with_ports() {
    let zero = ket("S", &[1.0, 0.0]);
    let script = ExperimentScript::z_measure(2).unwrap();
    let p0: Vec<f64> = (1..=3)
        .map(|n| {
            prepost_oracle(&zero, &zero, n, n, 2, &script, Variant::Deterministic)
                .unwrap()
                .conditional()
                .unwrap()
                .get(&[0])
                .unwrap()
        })
        .collect();
    assert!(p0.windows(2).all(|w| w[1] > w[0]), "{p0:?}");
}
