use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use causal_unravel::channel::{compose_comb, fixtures, ProcessMatrix};
use causal_unravel::sampling::povms_from_sidecar_json;
use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unravel")).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn generate_chain(dir: &Path, out: &str) {
    let o = run(
        dir,
        &[
            "generate", "--family", "isometric-chain", "--n", "3", "--dim", "2", "--mem-dim", "2", "--d-env", "1",
            "--chi-min-target", "0.1", "--seed", "42", "--out", out,
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    generate_chain(dir.path(), "a.json");
    generate_chain(dir.path(), "b.json");
    assert_eq!(fs::read(dir.path().join("a.json")).unwrap(), fs::read(dir.path().join("b.json")).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a.truth.json")).unwrap(),
        fs::read(dir.path().join("b.truth.json")).unwrap()
    );
    let truth = json(&dir.path().join("a.truth.json"));
    assert_eq!(truth["ordering"].as_array().unwrap().len(), 3);
    assert!(truth["chi_min_achieved"].as_f64().unwrap() >= 0.1);
    assert!(truth["kraus_rank"].as_u64().is_some());
}

#[test]
fn memoryless_generation_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["generate", "--family", "memoryless", "--n", "3", "--dim", "2", "--seed", "7"]);
    assert_eq!(code(&o), 0);
    let comb = json(&dir.path().join("comb.json"));
    assert_eq!(comb["teeth"].as_array().unwrap().len(), 3);
    assert_eq!(comb["d_env"], 1);
}

#[test]
fn invalid_generation_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["generate", "--dim", "0"])), 2);
    assert_eq!(code(&run(dir.path(), &["generate", "--family", "nope"])), 2);
}

#[test]
fn unravel_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    generate_chain(dir.path(), "comb.json");
    let o = run(dir.path(), &["unravel", "--process", "comb.json", "--algorithm", "recursive", "--mode", "exact", "--out", "r.json"]);
    assert_eq!(code(&o), 0);
    let r = json(&dir.path().join("r.json"));
    assert_eq!(r["queries"], 0);
    assert_eq!(r["error_bound"], 0.0);
    let o = run(dir.path(), &["verify", "--process", "comb.json", "--unravelling", "r.json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).matches("residual").count(), 3);
    let o = run(dir.path(), &["verify", "--process", "comb.json", "--unravelling", "comb.truth.json"]);
    assert_eq!(code(&o), 0);

    let o = run(dir.path(), &["report", "--result", "r.json"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("queries: 0 (exact mode)"));
    assert!(text.contains("error bound: 8 sqrt(2) m r^(1/4) eta^(1/2) = 0.000000"));
}

#[test]
fn general_c_on_cnot() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cnot.json"), fixtures::cnot().to_json().unwrap()).unwrap();
    let o = run(dir.path(), &["unravel", "--process", "cnot.json", "--algorithm", "general-c", "--c", "2"]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let steps = r["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 1);
    assert_eq!(steps[0]["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(steps[0]["outputs"].as_array().unwrap().len(), 2);
    assert!(r["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn sampled_unravel_counts_queries() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["generate", "--n", "2", "--chi-min-target", "0.3", "--seed", "3", "--out", "c.json"],
    );
    assert_eq!(code(&o), 0);
    let args = [
        "unravel", "--process", "c.json", "--mode", "sampled", "--chi-min", "0.2", "--kappa", "0.05", "--rank-bound", "1",
        "--seed", "9", "--out", "s.json",
    ];
    assert_eq!(code(&run(dir.path(), &args)), 0);
    let r = json(&dir.path().join("s.json"));
    let q = r["queries"].as_u64().unwrap();
    let n = r["budget"]["shots_per_estimate"].as_u64().unwrap();
    assert!(q > 0 && q.is_multiple_of(6 * n));
    assert!(q <= r["budget"]["max_queries"].as_u64().unwrap());
    let first = fs::read(dir.path().join("s.json")).unwrap();
    assert_eq!(code(&run(dir.path(), &args)), 0);
    assert_eq!(fs::read(dir.path().join("s.json")).unwrap(), first);
    let text = String::from_utf8_lossy(&run(dir.path(), &["report", "--result", "s.json"]).stdout).into_owned();
    assert!(text.contains("N = ceil(2 ln(2/kappa) / eps^2)"));

    let missing_seed = run(dir.path(), &["unravel", "--process", "c.json", "--mode", "sampled"]);
    assert_eq!(code(&missing_seed), 2);
}

#[test]
fn verify_rejects_invalid_orderings() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("swap.json"), fixtures::delayed_swap_comb().to_json().unwrap()).unwrap();
    let p = compose_comb(&fixtures::delayed_swap_comb()).unwrap();
    let ins = p.input_labels();
    let outs = p.output_labels();
    let order = |pairs: &[(usize, usize)]| {
        let steps: Vec<Value> = pairs
            .iter()
            .map(|&(a, b)| serde_json::json!({"inputs": [ins[a]], "outputs": [outs[b]]}))
            .collect();
        serde_json::json!({ "ordering": steps }).to_string()
    };
    fs::write(dir.path().join("good.json"), order(&[(0, 0), (1, 1)])).unwrap();
    fs::write(dir.path().join("bad.json"), order(&[(1, 1), (0, 0)])).unwrap();
    let trivial = serde_json::json!({"steps": [{"inputs": ins, "outputs": outs}]}).to_string();
    fs::write(dir.path().join("trivial.json"), trivial).unwrap();
    assert_eq!(code(&run(dir.path(), &["verify", "--process", "swap.json", "--unravelling", "good.json"])), 0);
    let o = run(dir.path(), &["verify", "--process", "swap.json", "--unravelling", "bad.json"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("step"));
    assert_eq!(code(&run(dir.path(), &["verify", "--process", "swap.json", "--unravelling", "trivial.json"])), 0);
    assert_eq!(code(&run(dir.path(), &["verify", "--process", "missing.json", "--unravelling", "good.json"])), 2);
}

#[test]
fn sample_writes_reproducible_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let p = ProcessMatrix::product(&[
        fixtures::identity_channel("A1", "B1", 2),
        fixtures::identity_channel("A2", "B2", 2),
    ])
    .unwrap();
    fs::write(dir.path().join("p.json"), p.to_json().unwrap()).unwrap();
    let o = run(dir.path(), &["sample", "--process", "p.json", "--queries", "1000", "--seed", "5", "--out", "a.csv"]);
    assert_eq!(code(&o), 0);
    let o = run(
        dir.path(),
        &["--threads", "1", "sample", "--process", "p.json", "--queries", "1000", "--seed", "5", "--out", "b.csv"],
    );
    assert_eq!(code(&o), 0);
    let a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b.csv")).unwrap());
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), 1001);
    assert!(lines.iter().all(|l| l.split(',').count() == 5));

    // Input outcome a appears with probability Tr[P_a] / d.
    let povms = povms_from_sidecar_json(&fs::read_to_string(dir.path().join("a.povm.json")).unwrap()).unwrap();
    let (label, povm) = &povms[0];
    assert_eq!(label, "A1");
    for (k, e) in povm.effects.iter().enumerate() {
        let p = e.trace().re / povm.dim as f64;
        let hits = lines[1..].iter().filter(|l| l.split(',').nth(1) == Some(&(k + 1).to_string())).count() as f64;
        let sigma = (1000.0 * p * (1.0 - p)).sqrt();
        assert!((hits - 1000.0 * p).abs() <= 5.0 * sigma, "effect {k}: {hits} vs {}", 1000.0 * p);
    }

    assert_eq!(code(&run(dir.path(), &["sample", "--process", "p.json", "--queries", "0", "--seed", "1"])), 2);
}
