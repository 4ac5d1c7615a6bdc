use causal_unravel::algorithms::{
    lemma_false_lower_bound, lemma_true_upper_bound, sampled_thresholds, unravel_general_c, unravel_recursive, Mode,
    UnravelParams, UnravelReport,
};
use causal_unravel::channel::{comb_membership, last_tooth_residual, Comb, ProcessMatrix, FACTOR_TOL};
use causal_unravel::rng::Rng;
use causal_unravel::sampling::{default_povm, sample_outcome_matrix, OutcomeMatrix};
use causal_unravel::synth::{random_comb, shuffle_wires, Family, SynthSpec};
use causal_unravel::tensor::max_abs;
use proptest::prelude::*;

fn chain(n: usize, seed: u64) -> SynthSpec {
    SynthSpec { family: Family::IsometricChain, n, seed, ..Default::default() }
}

#[test]
fn exact_recovery_up_to_four_teeth() {
    for n in 1..=4 {
        for seed in 0..3 {
            let s = random_comb(&chain(n, seed)).unwrap();
            let r = unravel_recursive(&s.process, &UnravelParams::default()).unwrap();
            assert_eq!(r.steps.len(), n);
            assert!(comb_membership(&s.process, &r.unravelling(), FACTOR_TOL).unwrap(), "n={n} seed={seed}");
            let g = unravel_general_c(&s.process, &UnravelParams { c: 2, ..Default::default() }).unwrap();
            assert_eq!(g.steps, r.steps);
        }
    }
}

#[test]
fn recovery_survives_relabelling() {
    let s = random_comb(&chain(3, 21)).unwrap();
    let (shuffled, _) = shuffle_wires(&s.process, &mut Rng::new(8)).unwrap();
    let r = unravel_recursive(&shuffled, &UnravelParams::default()).unwrap();
    assert!(comb_membership(&shuffled, &r.unravelling(), FACTOR_TOL).unwrap());
}

#[test]
fn files_round_trip() {
    let s = random_comb(&chain(2, 2)).unwrap();
    let comb = Comb::from_json(&s.comb.to_json().unwrap()).unwrap();
    assert_eq!(comb, s.comb);
    let from_comb = ProcessMatrix::from_json(&s.comb.to_json().unwrap()).unwrap();
    assert!(max_abs(&(from_comb.choi.data - &s.process.choi.data)) < 1e-14);
    let p = ProcessMatrix::from_json(&s.process.to_json().unwrap()).unwrap();
    assert_eq!(p, s.process);

    let report = unravel_recursive(&s.process, &UnravelParams::default()).unwrap();
    assert_eq!(UnravelReport::from_json(&report.to_json().unwrap()).unwrap(), report);

    let root = Rng::new(1);
    let mut rng = root.substream(0);
    let ins: Vec<_> = s.process.inputs.iter().map(|w| default_povm(w.dim, &mut rng).unwrap()).collect();
    let outs: Vec<_> = s.process.outputs.iter().map(|w| default_povm(w.dim, &mut rng).unwrap()).collect();
    let m = sample_outcome_matrix(&s.process, &ins, &outs, 100, &root.substream(1)).unwrap();
    let mut buf = Vec::new();
    m.write_csv(&mut buf).unwrap();
    assert_eq!(OutcomeMatrix::read_csv(buf.as_slice(), 2).unwrap(), m);
}

#[test]
fn sampled_runs_are_reproducible() {
    let s = random_comb(&chain(2, 5)).unwrap();
    let params = UnravelParams { mode: Mode::Sampled, chi_min: 0.1, rank_bound: Some(2), seed: 3, ..Default::default() };
    let a = unravel_recursive(&s.process, &params).unwrap();
    let b = unravel_recursive(&s.process, &params).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The rejection bound of the sampled check never exceeds the
    /// acceptance bound for the derived thresholds.
    #[test]
    fn check_bounds_are_separated(chi in 0.01f64..1.0, r in 1usize..8, d in 2usize..5) {
        let params = UnravelParams { chi_min: chi, mode: Mode::Sampled, rank_bound: Some(r), ..Default::default() };
        let t = sampled_thresholds(&params, 3, d).unwrap();
        prop_assert!(lemma_false_lower_bound(t.delta, t.eps) <= lemma_true_upper_bound(d, r, t.delta, t.eps));
        prop_assert!(lemma_true_upper_bound(d, r, t.delta, t.eps) < chi);
    }

    /// Every step of a recovered unravelling is an exact last tooth of the
    /// process reduced by the later steps.
    #[test]
    fn recovered_steps_are_last_teeth(seed in 0u64..1000) {
        let s = random_comb(&chain(3, seed)).unwrap();
        let r = unravel_recursive(&s.process, &UnravelParams::default()).unwrap();
        let mut cur = s.process.clone();
        for step in r.steps.iter().rev() {
            prop_assert!(last_tooth_residual(&cur, &step.inputs, &step.outputs).unwrap() <= FACTOR_TOL);
            cur = causal_unravel::channel::reduce_channel(&cur, &step.inputs, &step.outputs).unwrap();
        }
    }
}
