use serde::{Deserialize, Serialize};

use crate::channel::{fixtures::constant_channel, ProcessMatrix, Step};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::sampling::{default_povm, dual_frame, pair_probabilities, sample_outcome_matrix, OutcomeMatrix, Povm};
use crate::tensor::{trace_norm, trace_norm_matrix, CMatrix, C64};

use super::{Mode, UnravelReport};

/// Source of the pairwise outcome statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistics {
    /// Exact outcome probabilities (the infinite-sample limit).
    Exact,
    /// Empirical frequencies from this many sampled rows.
    Sampled(usize),
}

/// Linear-inversion estimate of the input-output correlation from a joint
/// outcome distribution indexed `a * |Q| + b`. The reconstructed operator is
/// not projected onto states.
pub fn chi1_from_frequencies(freq: &[f64], pa: &Povm, qb: &Povm) -> Result<f64> {
    if freq.len() != pa.len() * qb.len() {
        return Err(Error::DimensionMismatch("frequency table does not match the POVMs".into()));
    }
    let da = dual_frame(pa)?;
    let db = dual_frame(qb)?;
    let (na, nb) = (pa.dim, qb.dim);
    let mut rho = CMatrix::zeros(na * nb, na * nb);
    let mut rho_a = CMatrix::zeros(na, na);
    let mut rho_b = CMatrix::zeros(nb, nb);
    for (a, dual_a) in da.iter().enumerate() {
        for (b, dual_b) in db.iter().enumerate() {
            let f = freq[a * qb.len() + b];
            if f == 0.0 {
                continue;
            }
            let w = C64::new(f, 0.0);
            rho += dual_a.kronecker(dual_b) * w;
            rho_a += dual_a * (dual_b.trace() * w);
            rho_b += dual_b * (dual_a.trace() * w);
        }
    }
    Ok(trace_norm_matrix(&(rho - rho_a.kronecker(&rho_b))))
}

/// Correlation estimate between columns `a` and `b` of an outcome matrix.
pub fn estimate_chi1(outcomes: &OutcomeMatrix, a: &str, b: &str, pa: &Povm, qb: &Povm) -> Result<f64> {
    let freq = outcomes.pair_frequencies(a, b, pa.len(), qb.len())?;
    chi1_from_frequencies(&freq, pa, qb)
}

/// Estimated correlations between every input (rows) and output (columns),
/// and the independence verdicts `chi_hat <= chi_minus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndMatrix {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub chi_hat: Vec<Vec<f64>>,
    pub ind: Vec<Vec<bool>>,
    pub chi_minus: f64,
    pub queries: u64,
}

impl IndMatrix {
    /// Number of outputs correlated with input `i`.
    pub fn row_count(&self, i: usize) -> usize {
        self.ind[i].iter().filter(|&&x| !x).count()
    }

    /// Number of inputs correlated with output `j`.
    pub fn col_count(&self, j: usize) -> usize {
        self.ind.iter().filter(|row| !row[j]).count()
    }
}

/// Measure every wire with an IC-POVM (the qubit SIC, otherwise a random
/// IC-POVM drawn from `rng`) and estimate all input-output correlations from
/// one shared table of outcomes.
pub fn independence_matrix(p: &ProcessMatrix, stats: Statistics, chi_minus: f64, rng: &Rng) -> Result<IndMatrix> {
    if !(chi_minus >= 0.0) {
        return Err(Error::InvalidParameter(format!("chi_minus must be non-negative, got {chi_minus}")));
    }
    let mut povm_rng = rng.substream(0);
    let in_povms: Vec<Povm> = p.inputs.iter().map(|w| default_povm(w.dim, &mut povm_rng)).collect::<Result<_>>()?;
    let out_povms: Vec<Povm> = p.outputs.iter().map(|w| default_povm(w.dim, &mut povm_rng)).collect::<Result<_>>()?;
    let outcomes = match stats {
        Statistics::Exact => None,
        Statistics::Sampled(n) => Some(sample_outcome_matrix(p, &in_povms, &out_povms, n, &rng.substream(1))?),
    };
    let inputs = p.input_labels();
    let outputs = p.output_labels();
    let mut chi_hat = vec![vec![0.0; outputs.len()]; inputs.len()];
    for (i, a) in inputs.iter().enumerate() {
        for (j, b) in outputs.iter().enumerate() {
            let (pa, qb) = (&in_povms[i], &out_povms[j]);
            chi_hat[i][j] = match &outcomes {
                None => chi1_from_frequencies(&pair_probabilities(p, a, b, pa, qb)?, pa, qb)?,
                Some(om) => estimate_chi1(om, a, b, pa, qb)?,
            };
        }
    }
    let ind = chi_hat.iter().map(|row| row.iter().map(|&x| x <= chi_minus).collect()).collect();
    let queries = match stats {
        Statistics::Exact => 0,
        Statistics::Sampled(n) => n as u64,
    };
    Ok(IndMatrix { inputs, outputs, chi_hat, ind, chi_minus, queries })
}

fn mode_of(stats: Statistics) -> Mode {
    match stats {
        Statistics::Exact => Mode::Exact,
        Statistics::Sampled(_) => Mode::Sampled,
    }
}

fn local_report(name: &str, steps: Vec<Step>, stats: Statistics, warnings: Vec<String>, ind: IndMatrix) -> UnravelReport {
    UnravelReport {
        algorithm: name.into(),
        steps,
        mode: mode_of(stats),
        queries: ind.queries,
        warnings,
        certificate: vec![],
        error_bound: None,
        budget: None,
        independence: Some(ind),
    }
}

/// Unravelling of a process whose steps form a total order in which every
/// input influences its own and all later outputs. Inputs are ranked by the
/// number of outputs they influence (descending), outputs by the number of
/// inputs influencing them (ascending); ties are broken by wire order and
/// reported.
pub fn unravel_total_order(p: &ProcessMatrix, stats: Statistics, chi_min: f64, rng: &Rng) -> Result<UnravelReport> {
    if !(chi_min > 0.0) {
        return Err(Error::InvalidParameter(format!("chi_min must be positive, got {chi_min}")));
    }
    let p = p.canonical()?;
    if p.inputs.len() != p.outputs.len() {
        return Err(Error::InvalidParameter("total-order unravelling needs as many inputs as outputs".into()));
    }
    let n = p.inputs.len();
    let ind = independence_matrix(&p, stats, chi_min / 2.0, rng)?;
    let ca: Vec<usize> = (0..n).map(|i| ind.row_count(i)).collect();
    let cb: Vec<usize> = (0..n).map(|j| ind.col_count(j)).collect();
    let mut sigma: Vec<usize> = (0..n).collect();
    sigma.sort_by(|&x, &y| ca[y].cmp(&ca[x]).then(x.cmp(&y)));
    let mut pi: Vec<usize> = (0..n).collect();
    pi.sort_by(|&x, &y| cb[x].cmp(&cb[y]).then(x.cmp(&y)));
    let mut warnings = Vec::new();
    let tie = |counts: &[usize]| {
        let mut c = counts.to_vec();
        c.sort_unstable();
        c.windows(2).any(|w| w[0] == w[1])
    };
    if tie(&ca) {
        warnings.push(format!("input correlation counts {ca:?} contain ties; broken by wire order"));
    }
    if tie(&cb) {
        warnings.push(format!("output correlation counts {cb:?} contain ties; broken by wire order"));
    }
    let steps = (0..n).map(|k| Step::new([ind.inputs[sigma[k]].clone()], [ind.outputs[pi[k]].clone()])).collect();
    Ok(local_report("total-order", steps, stats, warnings, ind))
}

/// Result of the memoryless unravelling.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorylessResult {
    pub report: UnravelReport,
    /// Output index paired with each input.
    pub pairing: Vec<usize>,
    /// Whether the pairing of each input was backed by a detected correlation.
    pub matched: Vec<bool>,
}

/// Pair every input with the first output it is detectably correlated with;
/// leftover inputs and outputs are paired in wire order.
pub fn unravel_memoryless(p: &ProcessMatrix, stats: Statistics, chi_minus: f64, rng: &Rng) -> Result<MemorylessResult> {
    let p = p.canonical()?;
    if p.inputs.len() != p.outputs.len() {
        return Err(Error::InvalidParameter("memoryless unravelling needs as many inputs as outputs".into()));
    }
    let n = p.inputs.len();
    let ind = independence_matrix(&p, stats, chi_minus, rng)?;
    let mut pairing = vec![usize::MAX; n];
    let mut matched = vec![false; n];
    let mut taken = vec![false; n];
    let mut warnings = Vec::new();
    for i in 0..n {
        let hits: Vec<usize> = (0..n).filter(|&j| !ind.ind[i][j]).collect();
        if hits.len() > 1 {
            warnings.push(format!("input {} is correlated with {} outputs", ind.inputs[i], hits.len()));
        }
        if let Some(&j) = hits.iter().find(|&&j| !taken[j]) {
            pairing[i] = j;
            matched[i] = true;
            taken[j] = true;
        }
    }
    let mut free = (0..n).filter(|&j| !taken[j]);
    for slot in pairing.iter_mut().filter(|s| **s == usize::MAX) {
        *slot = free.next().expect("as many outputs as inputs");
    }
    let steps = (0..n).map(|i| Step::new([ind.inputs[i].clone()], [ind.outputs[pairing[i]].clone()])).collect();
    Ok(MemorylessResult { report: local_report("memoryless", steps, stats, warnings, ind), pairing, matched })
}

/// Comparison process for a memoryless unravelling: matched pairs keep the
/// marginal channel of `p`, unmatched pairs are replaced by the channel that
/// prepares the output marginal of `p`. Returned in the wire order of `p`.
pub fn memoryless_surrogate(p: &ProcessMatrix, pairing: &[usize], matched: &[bool]) -> Result<ProcessMatrix> {
    let p = p.canonical()?;
    let ins = p.input_labels();
    let outs = p.output_labels();
    if pairing.len() != ins.len() || matched.len() != ins.len() {
        return Err(Error::DimensionMismatch("pairing does not cover all inputs".into()));
    }
    let mut parts = Vec::with_capacity(ins.len());
    for (i, a) in ins.iter().enumerate() {
        let b = &outs[pairing[i]];
        let m = p.marginal(&[a.as_str()], &[b.as_str()])?;
        if matched[i] {
            parts.push(m);
        } else {
            let sigma = crate::tensor::partial_trace(&m.choi, &[b.as_str()])?.data;
            parts.push(constant_channel(a, b, p.wire(a)?.dim, &sigma)?);
        }
    }
    ProcessMatrix::product(&parts)?.canonical()
}

/// `||C - D||_1` for two processes on the same wires.
pub fn choi_distance(p: &ProcessMatrix, q: &ProcessMatrix) -> Result<f64> {
    Ok(trace_norm(&p.choi.sub(&q.choi)?))
}
