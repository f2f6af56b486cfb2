use num_complex::Complex64 as C64;
use postsel_core::engine::random::random_state;
use postsel_core::engine::{linalg, DensityOperator, StateVector, SubsystemLayout};
use postsel_core::pbt::*;
use postsel_core::stats::RunMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Exact entanglement fidelities of the square-root measurement with evenly
/// split residual, qubit ports, n = 1..4 (independent dense pseudo-inverse).
const F_ENT: [f64; 4] = [0.25, 0.4665063509461096, 0.625, 0.7328388943630822];

fn ket(label: &str, a: &[f64]) -> StateVector {
    StateVector::ket(label, a.iter().map(|&x| C64::new(x, 0.0)).collect()).unwrap()
}

#[test]
fn single_port_output_is_maximally_mixed() {
    let ch = build_pgm(1, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let psi = random_state("S", 2, &mut rng).unwrap();
    let run = pbt_teleport(&ch, &psi, RunMode::Exact).unwrap();
    let (port, out) = run.heralded().unwrap();
    assert_eq!(port, 0);
    let mixed = DensityOperator::maximally_mixed(SubsystemLayout::single("B", 2).unwrap());
    assert!(out.approx_eq(&mixed, 1e-12));
    assert!((run.record.fidelity.unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn fidelities_match_independent_values() {
    for (k, expected) in F_ENT.iter().enumerate() {
        let ch = build_pgm(k + 1, 2).unwrap();
        let report = channel_report(&ch).unwrap();
        assert!((report.entanglement_fidelity - expected).abs() < 1e-10);
        let simulated = entanglement_fidelity_simulated(&ch).unwrap();
        assert!((simulated - expected).abs() < 1e-10);
    }
}

#[test]
fn pure_state_fidelity_equals_average_channel_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 2..=4 {
        let ch = build_pgm(n, 2).unwrap();
        let f_avg = channel_report(&ch).unwrap().average_fidelity;
        for _ in 0..3 {
            let psi = random_state("S", 2, &mut rng).unwrap();
            let run = pbt_teleport(&ch, &psi, RunMode::Exact).unwrap();
            assert!((run.record.fidelity.unwrap() - f_avg).abs() < 1e-10);
        }
    }
}

#[test]
fn fidelity_increases_and_more_ports_win() {
    let f: Vec<f64> = (1..=6)
        .map(|n| channel_report(&build_pgm(n, 2).unwrap()).unwrap().entanglement_fidelity)
        .collect();
    assert!(f.windows(2).all(|w| w[1] > w[0]), "{f:?}");
    assert!(f[3] > f[1]);
}

#[test]
fn heralded_channels_coincide_across_ports() {
    for (n, d) in [(3, 2), (2, 3)] {
        let chs = heralded_choi(&build_pgm(n, d).unwrap()).unwrap();
        let (_, p0, j0) = &chs[0];
        for (_, p, j) in &chs[1..] {
            assert!((p - p0).abs() < 1e-9);
            assert!(linalg::max_abs_diff(j.matrix(), j0.matrix()) < 1e-9);
        }
    }
}

#[test]
fn probabilistic_success_branch_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut last = 0.0;
    for n in 1..=5 {
        let ch = pbt_probabilistic(n, 2).unwrap();
        assert_eq!(ch.povm().len(), n + 1);
        let psi = random_state("S", 2, &mut rng).unwrap();
        let run = pbt_teleport(&ch, &psi, RunMode::Exact).unwrap();
        assert!((run.record.fidelity.unwrap() - 1.0).abs() < 1e-9);
        for h in run.ensemble.iter().filter(|h| h.port.is_some()) {
            let out = h.state.as_ref().unwrap();
            assert!(out.fidelity_with_pure(&psi.relabel("S", "B").unwrap()).unwrap() > 1.0 - 1e-9);
        }
        let p = run.record.metric("p_success").unwrap();
        assert!((p - n as f64 / (2.0 * (n as f64 + 1.0))).abs() < 1e-10);
        assert!(p > last);
        last = p;
        assert!((entanglement_fidelity_simulated(&ch).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(run.record.ledger.cbits_a_to_b, postsel_core::record::bits_for(n + 1));
    }
}

#[test]
fn ledger_counts_ports_and_herald_bits() {
    let ch = build_pgm(4, 2).unwrap();
    let run = pbt_teleport(&ch, &ket("S", &[1.0, 0.0]), RunMode::Exact).unwrap();
    assert_eq!(run.record.ledger.ebits, 4);
    assert_eq!(run.record.ledger.cbits_a_to_b, 2);
    assert_eq!(run.record.ledger.cbits_b_to_a, 0);
    let total: f64 = run.record.outcomes.iter().map(|o| o.probability).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(run.record.outcomes.iter().all(|o| (o.probability - 0.25).abs() < 1e-12));
}

#[test]
fn sampled_ports_follow_exact_probabilities() {
    let ch = pbt_probabilistic(3, 2).unwrap();
    let psi = ket("S", &[0.6, 0.8]);
    let exact = pbt_teleport(&ch, &psi, RunMode::Exact).unwrap();
    let mode = RunMode::Sampled { trials: 4000, seed: 5 };
    let sampled = pbt_teleport(&ch, &psi, mode).unwrap();
    let dev = sampled
        .record
        .outcome_distribution()
        .max_sigma_deviation(&exact.record.outcome_distribution());
    assert!(dev < 5.0, "{dev}");
    assert!((sampled.record.fidelity.unwrap() - 1.0).abs() < 1e-9);
    let again = pbt_teleport(&ch, &psi, mode).unwrap();
    assert_eq!(sampled.record, again.record);
}

#[test]
fn qutrit_ports_are_valid() {
    let ch = build_pgm(3, 3).unwrap();
    let (c, m) = ch.defects();
    assert!(c < 1e-8 && m > -1e-8);
    let r = channel_report(&ch).unwrap();
    assert!(r.entanglement_fidelity > 1.0 / 9.0);
}

fn plus_state() -> StateVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    ket("S", &[h, h])
}

#[test]
fn post_selected_acceptance_is_one_over_d() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for d in [2usize, 3] {
        let post = random_state("S", d, &mut rng).unwrap();
        let script = postsel_core::oracle::ExperimentScript::random(vec![d], &mut rng).unwrap();
        for n in 1..=3 {
            let r = pbt_post_selected(&post, n, d, &script, RunMode::Exact).unwrap();
            assert!((r.acceptance_probability - 1.0 / d as f64).abs() < 1e-10, "d={d} n={n}");
            assert_eq!((r.ledger.ebits, r.ledger.cbits_a_to_b, r.ledger.cbits_b_to_a), (1, 1, 0));
            assert!(r.transcript().quantum_parts_independent());
        }
    }
}

#[test]
fn post_selected_single_port_is_unconditioned() {
    use postsel_core::oracle::{run_direct, ExperimentScript, TwoStateVector};
    let script = ExperimentScript::z_measure(2).unwrap();
    let r = pbt_post_selected(&plus_state(), 1, 2, &script, RunMode::Exact).unwrap();
    let mixed = DensityOperator::maximally_mixed(SubsystemLayout::single("S", 2).unwrap());
    let direct = run_direct(&TwoStateVector::unconditioned(mixed).unwrap(), &script, &["S"], RunMode::Exact).unwrap();
    assert!(r.conditional().max_abs_diff(&direct.conditional) < 1e-12);
}

#[test]
fn post_selected_statistics_approach_abl() {
    use postsel_core::oracle::ExperimentScript;
    let cases = [
        (ket("S", &[1.0, 0.0]), ExperimentScript::z_measure(2).unwrap()),
        (plus_state(), ExperimentScript::x_measure(2).unwrap()),
        (ket("S", &[0.6, 0.8]), ExperimentScript::z_measure(2).unwrap()),
    ];
    for (post, script) in cases {
        let ideal = post_selected_abl(&post, 2, &script).unwrap();
        let tv: Vec<f64> = (1..=3)
            .map(|n| {
                pbt_post_selected(&post, n, 2, &script, RunMode::Exact)
                    .unwrap()
                    .conditional()
                    .tv_distance(&ideal)
            })
            .collect();
        println!("{tv:?}");
        assert!(tv.windows(2).all(|w| w[1] < w[0]), "{tv:?}");
    }
}

#[test]
fn post_selected_sampling_matches_exact() {
    use postsel_core::oracle::ExperimentScript;
    let script = ExperimentScript::z_measure(2).unwrap();
    let post = ket("S", &[1.0, 0.0]);
    let exact = pbt_post_selected(&post, 2, 2, &script, RunMode::Exact).unwrap();
    let mode = RunMode::Sampled { trials: 4000, seed: 17 };
    let sampled = pbt_post_selected(&post, 2, 2, &script, mode).unwrap();
    assert!(sampled.conditional().max_sigma_deviation(&exact.conditional()) < 5.0);
    let k = (sampled.acceptance_probability * 4000.0).round() as u64;
    assert!(postsel_core::stats::within_binomial_sigma(k, 4000, 0.5, 5.0));
}

/// Heralded P(0) for post-selection ⟨0| and a Z script equals the average
/// fidelity of the n-port channel (independent dense computation).
#[test]
fn post_selected_z_statistics_track_channel_fidelity() {
    use postsel_core::oracle::ExperimentScript;
    const P0: [f64; 6] = [0.5, 0.6443375672974064, 0.75, 0.8218925962420554, 0.869240308456314, 0.900148274518115];
    let script = ExperimentScript::z_measure(2).unwrap();
    for (k, expected) in P0.iter().enumerate() {
        let n = k + 1;
        let r = pbt_post_selected(&ket("S", &[1.0, 0.0]), n, 2, &script, RunMode::Exact).unwrap();
        let p0 = r.conditional().get(&[0]).unwrap();
        assert!((p0 - expected).abs() < 1e-10, "n={n}: {p0}");
        let f_avg = channel_report(&build_pgm(n, 2).unwrap()).unwrap().average_fidelity;
        assert!((p0 - f_avg).abs() < 1e-10);
    }
}

#[test]
fn infidelity_is_bounded_by_fitted_c_over_n() {
    let infid: Vec<f64> = (2..=6)
        .map(|n| 1.0 - channel_report(&build_pgm(n, 2).unwrap()).unwrap().entanglement_fidelity)
        .collect();
    let c = (2..=3).map(|n| n as f64 * infid[n - 2]).fold(0.0, f64::max);
    for n in 2..=6 {
        assert!(infid[n - 2] <= c / n as f64 + 1e-12, "n={n}");
    }
}
