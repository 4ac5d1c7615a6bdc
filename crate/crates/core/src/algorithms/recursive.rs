use crate::channel::{is_last_tooth_exact, last_tooth_states, reduce_channel, ProcessMatrix, Step};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::sampling::swaptest_with_shots;
use crate::tensor::{rank_eta, trace_norm, LabelledMatrix};

use super::{
    error_bound_approximate, sampled_thresholds, Budget, CertEntry, Mode, RankCertificate, Thresholds,
    UnravelParams, UnravelReport,
};

/// Result of one last-tooth check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub passed: bool,
    /// Exact mode: trace-norm residual. Sampled mode: the SWAP estimate of
    /// the squared Hilbert-Schmidt distance.
    pub statistic: f64,
    /// The three SWAP estimates `Tr C1^2`, `Tr C2^2`, `Tr C1 C2`.
    pub swaps: Option<[f64; 3]>,
    pub queries: u64,
}

/// Decide whether `(P, Q)` can be the last step of `p`.
///
/// Exact mode compares `Tr_Q C` with `I_P/d_P (x) Tr_{PQ} C` in trace norm
/// against `params.tol`. Sampled mode estimates `Tr C1^2 + Tr C2^2 - 2 Tr C1 C2`
/// with three SWAP tests and compares it with `delta`. Every SWAP run
/// consumes one copy of each of its two input states, i.e. two queries.
pub fn check_last<S: AsRef<str>>(
    p: &ProcessMatrix,
    pset: &[S],
    qset: &[S],
    params: &UnravelParams,
    thresholds: Option<&Thresholds>,
    rng: &mut Rng,
) -> Result<CheckOutcome> {
    let (c1, c2) = last_tooth_states(p, pset, qset)?;
    match params.mode {
        Mode::Exact => {
            let r = trace_norm(&c1.sub(&c2)?);
            Ok(CheckOutcome { passed: r <= params.tol, statistic: r, swaps: None, queries: 0 })
        }
        Mode::Sampled => {
            let t = thresholds.ok_or_else(|| Error::InvalidParameter("sampled check needs thresholds".into()))?;
            let p1 = swaptest_with_shots(&c1.data, &c1.data, t.shots, rng)?.estimate;
            let p2 = swaptest_with_shots(&c2.data, &c2.data, t.shots, rng)?.estimate;
            let p3 = swaptest_with_shots(&c1.data, &c2.data, t.shots, rng)?.estimate;
            let stat = p1 + p2 - 2.0 * p3;
            Ok(CheckOutcome { passed: stat <= t.delta, statistic: stat, swaps: Some([p1, p2, p3]), queries: 6 * t.shots })
        }
    }
}

/// `true` when the soft rank of `marginal` at tolerance `eta_max` is at most
/// `r_max`.
pub fn check_rank_certificate(marginal: &LabelledMatrix, eta_max: f64, r_max: usize) -> Result<bool> {
    Ok(rank_eta(marginal, eta_max)? <= r_max)
}

/// Index subsets of size `k` out of `n`, in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Candidate step sizes in scan order: smaller total size first, then fewer
/// inputs.
fn size_order(c: usize, n_in: usize, n_out: usize) -> Vec<(usize, usize)> {
    let mut sizes: Vec<(usize, usize)> = (1..=c.min(n_in))
        .flat_map(|a| (1..=c.min(n_out)).map(move |b| (a, b)))
        .collect();
    sizes.sort_by_key(|&(a, b)| (a + b, a));
    sizes
}

struct Search<'a> {
    params: &'a UnravelParams,
    thresholds: Option<Thresholds>,
    rng: Rng,
    tests: u64,
    queries: u64,
}

impl Search<'_> {
    /// First accepted `(P, Q)` in scan order, with the soft rank of its
    /// tested marginal. A candidate that removes every remaining output
    /// while leaving inputs behind is skipped: it passes for every channel
    /// and carries no causal information.
    fn find_last(&mut self, cur: &ProcessMatrix) -> Result<Option<(Step, usize)>> {
        let ins = cur.input_labels();
        let outs = cur.output_labels();
        let eta = self.params.certificate_eta();
        for (a, b) in size_order(self.params.c, ins.len(), outs.len()) {
            for pi in combinations(ins.len(), a) {
                for qi in combinations(outs.len(), b) {
                    if b == outs.len() && a < ins.len() {
                        continue;
                    }
                    let pset: Vec<&str> = pi.iter().map(|&i| ins[i].as_str()).collect();
                    let qset: Vec<&str> = qi.iter().map(|&i| outs[i].as_str()).collect();
                    let mut r = self.rng.substream(self.tests);
                    self.tests += 1;
                    let out = check_last(cur, &pset, &qset, self.params, self.thresholds.as_ref(), &mut r)?;
                    self.queries += out.queries;
                    if !out.passed {
                        continue;
                    }
                    let marginal = crate::tensor::trace_out(&cur.choi, &qset)?;
                    let rank = rank_eta(&marginal, eta)?;
                    if let Some(r_max) = self.params.r_max {
                        if rank > r_max {
                            continue;
                        }
                    }
                    return Ok(Some((Step::new(pset, qset), rank)));
                }
            }
        }
        Ok(None)
    }
}

fn largest_dim(p: &ProcessMatrix) -> usize {
    p.inputs.iter().map(|w| w.dim).max().unwrap_or(1)
}

/// Recursive unravelling with steps of at most `params.c` inputs and
/// outputs. Candidates are scanned by size, then lexicographically; the
/// first accepted one becomes the last step and the search recurses on the
/// reduced process. When nothing is accepted the remaining wires form one
/// trivial step.
pub fn unravel_general_c(p: &ProcessMatrix, params: &UnravelParams) -> Result<UnravelReport> {
    params.validate()?;
    let n = p.inputs.len().max(p.outputs.len());
    let thresholds = match params.mode {
        Mode::Exact => None,
        Mode::Sampled => Some(sampled_thresholds(params, n, largest_dim(p))?),
    };
    let mut search = Search { params, thresholds, rng: Rng::new(params.seed), tests: 0, queries: 0 };
    let mut reversed: Vec<(Step, Option<usize>)> = Vec::new();
    let mut warnings = Vec::new();
    let mut cur = p.canonical()?;
    loop {
        let (ni, no) = (cur.inputs.len(), cur.outputs.len());
        if ni == 0 && no == 0 {
            break;
        }
        if ni <= 1 && no <= 1 {
            reversed.push((Step::new(cur.input_labels(), cur.output_labels()), None));
            break;
        }
        match search.find_last(&cur)? {
            Some((step, rank)) => {
                if params.mode == Mode::Exact && !is_last_tooth_exact(&cur, &step.inputs, &step.outputs, params.tol)? {
                    return Err(Error::Numerical(format!("accepted step {step:?} fails the exact last-tooth test")));
                }
                cur = reduce_channel(&cur, &step.inputs, &step.outputs)?;
                reversed.push((step, Some(rank)));
            }
            None => {
                warnings.push(format!(
                    "no last step with at most {} inputs and outputs among {} inputs and {} outputs; emitted them as one step",
                    params.c, ni, no
                ));
                reversed.push((Step::new(cur.input_labels(), cur.output_labels()), None));
                break;
            }
        }
    }
    let m = reversed.len();
    let eta = params.certificate_eta();
    let mut cert = RankCertificate::default();
    for (level, (_, rank)) in reversed.iter().enumerate() {
        if let Some(r) = rank {
            cert.entries.push(CertEntry { k: m - level, eta, r: *r });
        }
    }
    cert.entries.reverse();
    let steps: Vec<Step> = reversed.into_iter().rev().map(|(s, _)| s).collect();
    let budget = thresholds.map(|t| Budget {
        delta: t.delta,
        eps: t.eps,
        kappa: t.kappa,
        shots_per_estimate: t.shots,
        max_queries: 3 * (n as u64).pow(3) * t.shots,
    });
    let error_bound = if cert.entries.is_empty() { None } else { Some(error_bound_approximate(&cert, m)) };
    Ok(UnravelReport {
        algorithm: if params.c == 1 { "recursive".into() } else { "general-c".into() },
        steps,
        mode: params.mode,
        queries: search.queries,
        warnings,
        certificate: cert.entries,
        error_bound,
        budget,
        independence: None,
    })
}

/// Recursive unravelling into single-input, single-output steps.
pub fn unravel_recursive(p: &ProcessMatrix, params: &UnravelParams) -> Result<UnravelReport> {
    unravel_general_c(p, &UnravelParams { c: 1, ..params.clone() })
}
