//! WebAssembly bindings behind the static demo page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs no generated type glue. The same functions are callable natively.

use causal_unravel::algorithms::{independence_matrix, unravel_memoryless, unravel_recursive, Statistics, UnravelParams};
use causal_unravel::channel::{chi1, membership_residuals};
use causal_unravel::random::random_density;
use causal_unravel::rng::Rng;
use causal_unravel::sampling::{swap_test_shots, swaptest_with_shots};
use causal_unravel::synth::{random_comb, random_memoryless, Family, SynthSpec};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest process the page may request.
const MAX_TEETH: usize = 4;
const MAX_ROWS: usize = 200_000;
const MAX_RUNS: usize = 5_000;

fn to_js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

/// Generate an isometric chain, unravel it exactly and return the recovered
/// ordering, the hidden truth, single-wire correlations and per-step residuals.
pub fn comb_demo(n: usize, dim: usize, mem_dim: usize, chi_min_target: f64, seed: u64) -> Result<String, String> {
    if n == 0 || n > MAX_TEETH || !(2..=3).contains(&dim) || !(1..=3).contains(&mem_dim) {
        return Err(format!("need 1 <= n <= {MAX_TEETH}, dim in 2..=3 and mem_dim in 1..=3"));
    }
    let spec =
        SynthSpec { family: Family::IsometricChain, n, d: dim, d_mem: mem_dim, d_env: 1, chi_min_target, seed, n_constant: 0 };
    let s = random_comb(&spec).map_err(|e| e.to_string())?;
    let report = unravel_recursive(&s.process, &UnravelParams::default()).map_err(|e| e.to_string())?;
    let residuals = membership_residuals(&s.process, &report.unravelling()).map_err(|e| e.to_string())?;
    let ins = s.process.input_labels();
    let outs = s.process.output_labels();
    let chi: Vec<Vec<f64>> = ins
        .iter()
        .map(|a| outs.iter().map(|b| chi1(&s.process, &[a.as_str()], &[b.as_str()]).unwrap_or(f64::NAN)).collect())
        .collect();
    Ok(json!({
        "inputs": ins,
        "outputs": outs,
        "chi": chi,
        "steps": report.steps,
        "truth": s.truth.ordering,
        "residuals": residuals,
        "kraus_rank": s.truth.kraus_rank,
        "chi_min_achieved": s.truth.chi_min_achieved,
        "warnings": report.warnings,
    })
    .to_string())
}

/// Repeat the SWAP-test overlap estimator on one random qubit pair.
pub fn swap_demo(eps: f64, kappa: f64, runs: usize, seed: u64) -> Result<String, String> {
    if runs == 0 || runs > MAX_RUNS {
        return Err(format!("runs must lie in 1..={MAX_RUNS}"));
    }
    let shots = swap_test_shots(eps, kappa).map_err(|e| e.to_string())?;
    let root = Rng::new(seed);
    let mut rng = root.substream(0);
    let rho = random_density(2, 2, &mut rng);
    let sigma = random_density(2, 2, &mut rng);
    let overlap = (&rho * &sigma).trace().re;
    let estimates: Vec<f64> = (0..runs)
        .map(|i| swaptest_with_shots(&rho, &sigma, shots, &mut root.substream(1 + i as u64)).map(|e| e.estimate))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let misses = estimates.iter().filter(|e| (*e - overlap).abs() > eps).count();
    Ok(json!({ "shots": shots, "overlap": overlap, "estimates": estimates, "miss_rate": misses as f64 / runs as f64 })
        .to_string())
}

/// Sample local IC measurements on a hidden memoryless process and return
/// the estimated correlation table and the recovered pairing.
pub fn independence_demo(n: usize, n_constant: usize, rows: usize, chi_minus: f64, seed: u64) -> Result<String, String> {
    if n == 0 || n > MAX_TEETH || rows == 0 || rows > MAX_ROWS {
        return Err(format!("need 1 <= n <= {MAX_TEETH} and 1 <= rows <= {MAX_ROWS}"));
    }
    let s = random_memoryless(n, 2, n_constant.min(n), 0.2, seed).map_err(|e| e.to_string())?;
    let rng = Rng::new(seed);
    let ind = independence_matrix(&s.process, Statistics::Sampled(rows), chi_minus, &rng).map_err(|e| e.to_string())?;
    let res = unravel_memoryless(&s.process, Statistics::Sampled(rows), chi_minus, &rng).map_err(|e| e.to_string())?;
    let exact: Vec<Vec<f64>> = ind
        .inputs
        .iter()
        .map(|a| ind.outputs.iter().map(|b| chi1(&s.process, &[a.as_str()], &[b.as_str()]).unwrap_or(f64::NAN)).collect())
        .collect();
    Ok(json!({
        "inputs": ind.inputs,
        "outputs": ind.outputs,
        "chi_hat": ind.chi_hat,
        "chi_exact": exact,
        "dependent": ind.ind.iter().map(|r| r.iter().map(|x| !x).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "steps": res.report.steps,
        "truth": s.truth.ordering,
    })
    .to_string())
}

#[wasm_bindgen(js_name = combDemo)]
pub fn comb_demo_js(n: usize, dim: usize, mem_dim: usize, chi_min_target: f64, seed: u32) -> Result<String, JsValue> {
    to_js(comb_demo(n, dim, mem_dim, chi_min_target, seed as u64))
}

#[wasm_bindgen(js_name = swapDemo)]
pub fn swap_demo_js(eps: f64, kappa: f64, runs: usize, seed: u32) -> Result<String, JsValue> {
    to_js(swap_demo(eps, kappa, runs, seed as u64))
}

#[wasm_bindgen(js_name = independenceDemo)]
pub fn independence_demo_js(n: usize, n_constant: usize, rows: usize, chi_minus: f64, seed: u32) -> Result<String, JsValue> {
    to_js(independence_demo(n, n_constant, rows, chi_minus, seed as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn comb_demo_recovers_a_valid_order() {
        let v: Value = serde_json::from_str(&comb_demo(3, 2, 2, 0.1, 1).unwrap()).unwrap();
        assert_eq!(v["steps"].as_array().unwrap().len(), 3);
        assert!(v["residuals"].as_array().unwrap().iter().all(|r| r.as_f64().unwrap() < 1e-8));
        assert!(comb_demo(9, 2, 2, 0.1, 1).is_err());
    }

    #[test]
    fn swap_demo_is_calibrated() {
        let v: Value = serde_json::from_str(&swap_demo(0.1, 0.05, 200, 3).unwrap()).unwrap();
        assert_eq!(v["shots"], 738);
        assert!(v["miss_rate"].as_f64().unwrap() <= 0.1);
    }

    #[test]
    fn independence_demo_finds_the_pairing() {
        let v: Value = serde_json::from_str(&independence_demo(3, 0, 50_000, 0.1, 2).unwrap()).unwrap();
        let mut steps: Vec<String> = v["steps"].as_array().unwrap().iter().map(|s| s.to_string()).collect();
        let mut truth: Vec<String> = v["truth"].as_array().unwrap().iter().map(|s| s.to_string()).collect();
        steps.sort();
        truth.sort();
        assert_eq!(steps, truth);
    }
}
