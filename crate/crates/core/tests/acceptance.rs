//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! with status 1 if any criterion fails.

use std::time::Instant;

use causal_unravel::algorithms::{
    chi1_from_frequencies, choi_distance, independence_matrix, memoryless_surrogate, sampled_thresholds,
    unravel_general_c, unravel_memoryless, unravel_recursive, unravel_total_order, Mode, Statistics, UnravelParams,
};
use causal_unravel::channel::{
    chi1, choi_from_kraus, comb_membership, fixtures, kraus_rank, membership_residuals, reduce_channel, ProcessMatrix,
    FACTOR_TOL,
};
use causal_unravel::random::{random_channel_kraus, random_density, random_hermitian};
use causal_unravel::rng::Rng;
use causal_unravel::sampling::{
    build_ic_povm, build_sic_povm_qubit, frame_diagnostics, pair_probabilities, swaptest_estimate, swap_test_shots,
    Povm,
};
use causal_unravel::synth::{random_comb, random_memoryless, total_order_chain, Family, SynthSpec};
use causal_unravel::tensor::{matrix_rank, trace_norm, trace_norm_matrix, LabelledMatrix, Wire, C64};
use causal_unravel::Result;
use rand::Rng as _;

type Outcome = Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Outcome);

/// Upper edge of the one-sided 99% normal band around a rate `p` over `t` trials.
fn band(p: f64, t: usize) -> f64 {
    p + 2.326 * (p * (1.0 - p) / t as f64).sqrt()
}

fn chain(n: usize, seed: u64, chi: f64) -> SynthSpec {
    SynthSpec { family: Family::IsometricChain, n, d: 2, d_mem: 2, d_env: 1, chi_min_target: chi, seed, n_constant: 0 }
}

fn exact_recovery() -> Outcome {
    let specs: Vec<_> = (0..100).map(|s| random_comb(&chain(3, s, 0.1))).collect::<Result<_>>()?;
    let start = Instant::now();
    let mut ok = 0;
    for s in &specs {
        let report = unravel_recursive(&s.process, &UnravelParams::default())?;
        if comb_membership(&s.process, &report.unravelling(), 1e-8)? {
            ok += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((ok == 100 && secs < 10.0, format!("{ok}/100 recovered in {secs:.2} s")))
}

fn sampled_recovery() -> Outcome {
    let trials = 200;
    let mut failures = 0;
    let mut worst_ratio = 0.0f64;
    let mut queries_ok = true;
    let mut bound = 0;
    for t in 0..trials {
        let s = random_comb(&chain(2, 10_000 + t, 0.3))?;
        let params = UnravelParams {
            chi_min: 0.3,
            kappa0: 0.1,
            mode: Mode::Sampled,
            rank_bound: Some(1),
            seed: t,
            ..Default::default()
        };
        let th = sampled_thresholds(&params, 2, 2)?;
        bound = 3 * 8 * th.shots;
        let report = unravel_recursive(&s.process, &params)?;
        if !comb_membership(&s.process, &report.unravelling(), 1e-8)? {
            failures += 1;
        }
        queries_ok &= report.queries <= bound;
        worst_ratio = worst_ratio.max(report.queries as f64 / bound as f64);
    }
    let rate = failures as f64 / trials as f64;
    let limit = band(0.1, trials as usize);
    Ok((
        rate <= limit && queries_ok,
        format!("failure rate {rate:.3} (limit {limit:.3}); queries <= {bound} in every trial: {queries_ok} (max ratio {worst_ratio:.3})"),
    ))
}

fn swap_calibration() -> Outcome {
    let (eps, kappa) = (0.1, 0.05);
    let shots = swap_test_shots(eps, kappa)?;
    let runs = 1000;
    let root = Rng::new(3);
    let mut bad = 0;
    for i in 0..runs {
        let mut rng = root.substream(i);
        let rank_r = rng.random_range(1..=2);
        let rank_s = rng.random_range(1..=2);
        let rho = random_density(2, rank_r, &mut rng);
        let sigma = random_density(2, rank_s, &mut rng);
        let truth = (&rho * &sigma).trace().re;
        let est = swaptest_estimate(&rho, &sigma, eps, kappa, &mut rng)?;
        if (est.estimate - truth).abs() > eps {
            bad += 1;
        }
    }
    let rate = bad as f64 / runs as f64;
    let limit = band(kappa, runs as usize);
    Ok((shots == 738 && rate <= limit, format!("N = {shots}; miss rate {rate:.3} (limit {limit:.3})")))
}

fn norm_inequalities() -> Outcome {
    let root = Rng::new(4);
    let mut worst = f64::INFINITY;
    let mut worst_identity = 0.0f64;
    for i in 0..1000 {
        let mut rng = root.substream(i);
        let d = rng.random_range(2..=16);
        let rho = random_density(d, rng.random_range(1..=d), &mut rng);
        let sigma = random_density(d, rng.random_range(1..=d), &mut rng);
        let (rr, rs) = (
            matrix_rank(&LabelledMatrix::square(vec![Wire::input("X", d)], rho.clone())?, 1e-9)? as f64,
            matrix_rank(&LabelledMatrix::square(vec![Wire::input("X", d)], sigma.clone())?, 1e-9)? as f64,
        );
        let diff = &rho - &sigma;
        let t1 = trace_norm_matrix(&diff);
        let t2sq = diff.norm_squared();
        worst = worst.min(t1 * t1 - 2.0 * t2sq);
        worst = worst.min(4.0 * rr * rs / (rr + rs) * t2sq - t1 * t1);
        let tr = |a: &causal_unravel::tensor::CMatrix, b: &causal_unravel::tensor::CMatrix| (a * b).trace().re;
        let identity = tr(&rho, &rho) + tr(&sigma, &sigma) - 2.0 * tr(&rho, &sigma);
        worst_identity = worst_identity.max((identity - t2sq).abs());
    }
    Ok((
        worst >= -1e-9 && worst_identity <= 1e-10,
        format!("min slack {worst:.2e}; HS identity error {worst_identity:.2e}"),
    ))
}

fn frame_suite() -> Outcome {
    let sic = build_sic_povm_qubit();
    let diag = frame_diagnostics(&sic);
    let sic_ok = (diag.lambda_min - 1.0 / 6.0).abs() <= 1e-12;
    let root = Rng::new(5);
    let ic3 = build_ic_povm(3, &mut root.substream(u64::MAX))?;
    let mut worst = f64::INFINITY;
    for i in 0..1000u64 {
        let mut rng = root.substream(i);
        let povm: &Povm = if i % 2 == 0 { &sic } else { &ic3 };
        let f = frame_diagnostics(povm);
        let x = random_hermitian(povm.dim, &mut rng);
        let y = random_hermitian(povm.dim, &mut rng);
        let (px, py) = (povm.probabilities(&x), povm.probabilities(&y));
        let s: f64 = px.iter().zip(&py).map(|(a, b)| (a - b).powi(2)).sum();
        let hs = (&x - &y).norm_squared();
        let scale = hs.max(1.0);
        worst = worst.min((hs - s / f.lambda_max) / scale).min((s / f.lambda_min - hs) / scale);
    }
    Ok((
        sic_ok && worst >= -1e-9,
        format!("SIC lambda_min = {:.15}; min relative sandwich slack {worst:.2e}", diag.lambda_min),
    ))
}

fn qubit_channel(rng: &mut Rng) -> Result<ProcessMatrix> {
    let rank = rng.random_range(1..=4);
    let kraus = random_channel_kraus(2, 2, rank, rng);
    choi_from_kraus(&kraus, vec![Wire::input("A1", 2)], vec![Wire::output("B1", 2)])
}

fn chi1_oracle() -> Outcome {
    let root = Rng::new(6);
    let sic = build_sic_povm_qubit();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let mut rng = root.substream(i);
        let p = qubit_channel(&mut rng)?;
        let probs = pair_probabilities(&p, "A1", "B1", &sic, &sic)?;
        let est = chi1_from_frequencies(&probs, &sic, &sic)?;
        worst = worst.max((est - chi1(&p, &["A1"], &["B1"])?).abs());
    }
    Ok((worst <= 1e-9, format!("max deviation {worst:.2e} over 100 channels")))
}

fn chi1_sandwich() -> Outcome {
    use causal_unravel::algorithms::ind_sample_size;
    let (eps0, kappa0) = (0.3, 0.05);
    let n_rows = ind_sample_size(2, 2, 1.0 / 6.0, 1.0 / 6.0, eps0, kappa0, 1)? as usize;
    let root = Rng::new(7);
    let runs = 50;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for i in 0..runs {
        let p = qubit_channel(&mut root.substream(i))?;
        let truth = chi1(&p, &["A1"], &["B1"])?;
        let ind = independence_matrix(&p, Statistics::Sampled(n_rows), 0.1, &root.substream(1000 + i))?;
        let err = (ind.chi_hat[0][0] - truth).abs();
        worst = worst.max(err);
        if err > eps0 {
            violations += 1;
        }
    }
    let rate = violations as f64 / runs as f64;
    let limit = band(kappa0, runs as usize);

    // Smoke variant: error shrinks with the sample size.
    let mean_err = |n: usize| -> Result<f64> {
        let mut total = 0.0;
        for i in 0..20 {
            let p = qubit_channel(&mut root.substream(5000 + i))?;
            let truth = chi1(&p, &["A1"], &["B1"])?;
            let ind = independence_matrix(&p, Statistics::Sampled(n), 0.1, &root.substream(6000 + i))?;
            total += (ind.chi_hat[0][0] - truth).abs();
        }
        Ok(total / 20.0)
    };
    let (e4, e5) = (mean_err(10_000)?, mean_err(100_000)?);
    Ok((
        rate <= limit && e5 < e4,
        format!(
            "[slow] N = {n_rows}; violation rate {rate:.3} (limit {limit:.3}, max error {worst:.4}); mean error {e4:.4} at 1e4 vs {e5:.4} at 1e5"
        ),
    ))
}

fn total_order() -> Outcome {
    let mut ok = 0;
    for seed in 0..100 {
        let s = total_order_chain(3, 2, 0.1, seed)?;
        let report = unravel_total_order(&s.process, Statistics::Exact, 0.1, &Rng::new(seed))?;
        if report.steps == s.truth.ordering {
            ok += 1;
        }
    }
    Ok((ok == 100, format!("{ok}/100 orderings recovered")))
}

fn memoryless() -> Outcome {
    let chi_minus = 0.05;
    let n = 3;
    let mut members = 0;
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..100u64 {
        let s = random_memoryless(n, 2, (seed % 3) as usize, 0.1, seed)?;
        let res = unravel_memoryless(&s.process, Statistics::Exact, chi_minus, &Rng::new(seed))?;
        if comb_membership(&s.process, &res.report.unravelling(), FACTOR_TOL)? {
            members += 1;
        }
        let d = memoryless_surrogate(&s.process, &res.pairing, &res.matched)?;
        let d_a = 2.0;
        let lhs = d_a * choi_distance(&s.process.canonical()?, &d)?;
        worst = worst.max(lhs - 2.0 * n as f64 * d_a * chi_minus);
    }
    Ok((
        members == 100 && worst <= 1e-9,
        format!("{members}/100 pass membership; max(d_A |C-D|_1 - 2 n d_A chi) = {worst:.2e}"),
    ))
}

fn larger_c() -> Outcome {
    let cnot = fixtures::cnot();
    let c1 = unravel_general_c(&cnot, &UnravelParams::default())?;
    let c2 = unravel_general_c(&cnot, &UnravelParams { c: 2, ..Default::default() })?;
    let trivial = c1.steps.len() == 1 && c1.steps[0].inputs.len() == 2 && !c1.warnings.is_empty();
    let single = c2.steps.len() == 1 && c2.steps[0].inputs.len() == 2 && c2.steps[0].outputs.len() == 2;
    let mut ok = 0;
    for seed in 0..10 {
        let spec = SynthSpec { family: Family::EntanglingC2, n: 3, seed, ..Default::default() };
        let s = random_comb(&spec)?;
        let r = unravel_general_c(&s.process, &UnravelParams { c: 2, ..Default::default() })?;
        if r.steps == s.truth.ordering && comb_membership(&s.process, &r.unravelling(), FACTOR_TOL)? {
            ok += 1;
        }
    }
    Ok((
        trivial && single && ok == 10,
        format!("CNOT c=1 trivial: {trivial}; c=2 single step: {single}; entangling combs {ok}/10"),
    ))
}

fn approximate_bound() -> Outcome {
    let mut exact_ok = true;
    for seed in 0..20 {
        let s = random_comb(&chain(3, seed, 0.1))?;
        let r = unravel_recursive(&s.process, &UnravelParams::default())?;
        exact_ok &= r.error_bound == Some(0.0) && r.certificate.iter().all(|e| e.eta == 0.0);
    }

    let s = random_comb(&chain(3, 77, 0.1))?;
    let c = &s.process;
    let noise = LabelledMatrix::maximally_mixed(c.choi.rows.clone())?;
    let gap = trace_norm(&c.choi.sub(&noise)?);
    let p = 0.01 / gap;
    let mixed = &c.choi.data * C64::new(1.0 - p, 0.0) + &noise.data * C64::new(p, 0.0);
    let perturbed = ProcessMatrix::from_choi(c.inputs.clone(), c.outputs.clone(), mixed)?;
    let distance = choi_distance(&perturbed, c)?;
    let params = UnravelParams { mode: Mode::Sampled, eta_max: Some(0.02), seed: 1, ..Default::default() };
    let r = unravel_recursive(&perturbed, &params)?;
    let residuals = membership_residuals(&perturbed, &r.unravelling())?;
    let truth_residuals = membership_residuals(&perturbed, &s.truth.unravelling())?;
    // Per-step correlation the perturbation can induce on top of the truth.
    let allowed: Vec<f64> = truth_residuals.iter().map(|t| t + 2.0 * distance).collect();
    let steps_ok = residuals.iter().zip(&allowed).all(|(r, a)| r <= a);
    let bound = r.error_bound.unwrap_or(0.0);
    Ok((
        exact_ok && steps_ok && bound >= distance,
        format!(
            "exact certificates zero: {exact_ok}; perturbed |C'-C|_1 = {distance:.4}, residuals {residuals:?}, bound {bound:.3}"
        ),
    ))
}

fn rank_lemma() -> Outcome {
    let root = Rng::new(12);
    let mut ok = 0;
    let mut detail = String::new();
    for i in 0..100u64 {
        let mut rng = root.substream(i);
        let spec = SynthSpec {
            family: Family::IsometricChain,
            n: 2,
            d: 2,
            d_mem: rng.random_range(1..=3),
            d_env: rng.random_range(1..=4),
            chi_min_target: 0.0,
            seed: i,
            n_constant: 0,
        };
        let s = if i % 2 == 0 { random_comb(&spec)? } else { random_memoryless(2, 2, (i % 3) as usize, 0.0, i)? };
        let last = &s.truth.ordering[1];
        let reduced = reduce_channel(&s.process, &last.inputs, &last.outputs)?;
        let d_b2: usize = last.outputs.iter().map(|l| s.process.wire(l).map(|w| w.dim)).product::<Result<_>>()?;
        let d_a2: usize = last.inputs.iter().map(|l| s.process.wire(l).map(|w| w.dim)).product::<Result<_>>()?;
        let (rr, rf) = (kraus_rank(&reduced)?, kraus_rank(&s.process)?);
        if rr as f64 <= rf as f64 * d_b2 as f64 / d_a2 as f64 {
            ok += 1;
        } else if detail.is_empty() {
            detail = format!("; first violation at {i}: {rr} > {rf}*{d_b2}/{d_a2}");
        }
    }
    Ok((ok == 100, format!("{ok}/100 combs satisfy the bound{detail}")))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("exact recovery", exact_recovery),
        ("sampled recovery", sampled_recovery),
        ("SWAP-test calibration", swap_calibration),
        ("norm inequalities", norm_inequalities),
        ("frame bounds", frame_suite),
        ("chi1 estimator oracle", chi1_oracle),
        ("chi1 estimator sandwich", chi1_sandwich),
        ("total order", total_order),
        ("memoryless", memoryless),
        ("larger c", larger_c),
        ("approximate bound", approximate_bound),
        ("rank lemma", rank_lemma),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {name}: {detail} [{:.1} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}
