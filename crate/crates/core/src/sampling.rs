//! Finite-sample access to processes: SWAP tests and informationally
//! complete measurements.

use std::io::{Read, Write};

use nalgebra::DVector;
use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::channel::ProcessMatrix;
use crate::error::{Error, Result};
use crate::random::random_pure_state;
use crate::rng::Rng;
use crate::tensor::{hermitian_eigenvalues, max_abs, CMatrix, C64};

/// Shots needed for a SWAP-test estimate within `eps` with failure
/// probability at most `kappa`: `ceil(2 ln(2/kappa) / eps^2)`.
pub fn swap_test_shots(eps: f64, kappa: f64) -> Result<u64> {
    if !(eps > 0.0) || !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need eps > 0 and 0 < kappa < 1, got eps={eps}, kappa={kappa}"
        )));
    }
    Ok((2.0 * (2.0 / kappa).ln() / (eps * eps)).ceil() as u64)
}

fn overlap(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.shape() != sigma.shape() || rho.nrows() != rho.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "SWAP test needs equal square operators, got {:?} and {:?}",
            rho.shape(),
            sigma.shape()
        )));
    }
    Ok((rho * sigma).trace().re)
}

/// One SWAP-test run: `true` for outcome +1, which has probability
/// `(1 + Tr[rho sigma]) / 2`.
pub fn swap_test_sample(rho: &CMatrix, sigma: &CMatrix, rng: &mut Rng) -> Result<bool> {
    let p = ((1.0 + overlap(rho, sigma)?) / 2.0).clamp(0.0, 1.0);
    Ok(rng.random::<f64>() < p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapEstimate {
    pub estimate: f64,
    pub shots: u64,
    pub plus: u64,
}

/// Estimate `Tr[rho sigma]` from `shots` independent SWAP-test runs. The
/// count of +1 outcomes is drawn from its exact binomial law, which is the
/// same distribution as summing the individual runs.
pub fn swaptest_with_shots(rho: &CMatrix, sigma: &CMatrix, shots: u64, rng: &mut Rng) -> Result<SwapEstimate> {
    if shots == 0 {
        return Err(Error::InvalidParameter("SWAP test needs at least one shot".into()));
    }
    let p = ((1.0 + overlap(rho, sigma)?) / 2.0).clamp(0.0, 1.0);
    let plus = Binomial::new(shots, p)
        .map_err(|e| Error::InvalidParameter(format!("binomial law: {e}")))?
        .sample(rng);
    Ok(SwapEstimate { estimate: 2.0 * plus as f64 / shots as f64 - 1.0, shots, plus })
}

/// SWAP-test estimate of `Tr[rho sigma]` with shots set by `(eps, kappa)`.
pub fn swaptest_estimate(rho: &CMatrix, sigma: &CMatrix, eps: f64, kappa: f64, rng: &mut Rng) -> Result<SwapEstimate> {
    swaptest_with_shots(rho, sigma, swap_test_shots(eps, kappa)?, rng)
}

/// Positive operator-valued measure on a single wire.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    pub dim: usize,
    pub effects: Vec<CMatrix>,
}

impl Povm {
    pub fn new(effects: Vec<CMatrix>) -> Result<Self> {
        let dim = effects.first().map(|e| e.nrows()).ok_or_else(|| Error::InvalidParameter("empty POVM".into()))?;
        let mut sum = CMatrix::zeros(dim, dim);
        for e in &effects {
            if e.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch("POVM effects differ in shape".into()));
            }
            let min = hermitian_eigenvalues(e)[0];
            if min < -crate::tensor::PSD_FLOOR {
                return Err(Error::NotPsd(min));
            }
            sum += e;
        }
        let dev = max_abs(&(sum - CMatrix::identity(dim, dim)));
        if dev > 1e-9 {
            return Err(Error::InvalidParameter(format!("POVM effects do not sum to identity (deviation {dev:e})")));
        }
        Ok(Self { dim, effects })
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    /// Probability of each outcome on `rho`.
    pub fn probabilities(&self, rho: &CMatrix) -> Vec<f64> {
        self.effects.iter().map(|e| (e * rho).trace().re).collect()
    }
}

/// Row-major vectorisation `|P>> = sum_ij P_ij |i>|j>`.
fn vectorize(m: &CMatrix) -> DVector<C64> {
    let d = m.ncols();
    DVector::from_fn(m.nrows() * d, |k, _| m[(k / d, k % d)])
}

fn unvectorize(v: &DVector<C64>, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| v[i * d + j])
}

/// `F = sum_a |P_a>><<P_a|`.
pub fn frame_operator(povm: &Povm) -> CMatrix {
    let d2 = povm.dim * povm.dim;
    let mut f = CMatrix::zeros(d2, d2);
    for e in &povm.effects {
        let v = vectorize(e);
        f += &v * v.adjoint();
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub condition: f64,
}

pub fn frame_diagnostics(povm: &Povm) -> FrameDiagnostics {
    let ev = hermitian_eigenvalues(&frame_operator(povm));
    let (lambda_min, lambda_max) = (ev[0], ev[ev.len() - 1]);
    FrameDiagnostics { lambda_min, lambda_max, condition: lambda_max / lambda_min }
}

/// Dual operators `D_a = F^{-1} P_a`, so that `rho = sum_a Tr[P_a rho] D_a`.
pub fn dual_frame(povm: &Povm) -> Result<Vec<CMatrix>> {
    let f = frame_operator(povm);
    let diag = frame_diagnostics(povm);
    if diag.lambda_min <= 1e-12 {
        return Err(Error::SingularFrame(diag.lambda_min));
    }
    let inv = f.try_inverse().ok_or(Error::SingularFrame(diag.lambda_min))?;
    Ok(povm.effects.iter().map(|e| unvectorize(&(&inv * vectorize(e)), povm.dim)).collect())
}

/// Symmetric informationally complete qubit POVM: `(I + r_k . sigma) / 4`
/// for the four tetrahedron vertices `r_k`.
pub fn build_sic_povm_qubit() -> Povm {
    let s = 1.0 / 3f64.sqrt();
    let vertices = [[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
    let effects = vertices
        .iter()
        .map(|r| {
            CMatrix::from_row_slice(
                2,
                2,
                &[
                    C64::new(1.0 + r[2], 0.0),
                    C64::new(r[0], -r[1]),
                    C64::new(r[0], r[1]),
                    C64::new(1.0 - r[2], 0.0),
                ],
            )
            .unscale(4.0)
        })
        .collect();
    Povm::new(effects).expect("SIC effects form a POVM")
}

/// Smallest frame eigenvalue accepted for random IC-POVMs.
pub const IC_FRAME_FLOOR: f64 = 1e-4;
const IC_ATTEMPTS: usize = 100;

/// Random informationally complete POVM with `d^2` effects: random rank-one
/// projectors mixed with the identity, then congruence-normalised to sum to
/// the identity. Redrawn until the frame operator is well conditioned.
pub fn build_ic_povm(d: usize, rng: &mut Rng) -> Result<Povm> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    if d == 1 {
        return Povm::new(vec![CMatrix::identity(1, 1)]);
    }
    let mut best = 0.0;
    for _ in 0..IC_ATTEMPTS {
        let raw: Vec<CMatrix> = (0..d * d)
            .map(|_| {
                let v = random_pure_state(d, rng);
                &v * v.adjoint() + CMatrix::identity(d, d).unscale(d as f64)
            })
            .collect();
        let sum = raw.iter().fold(CMatrix::zeros(d, d), |a, b| a + b);
        let (ev, vecs) = crate::tensor::hermitian_eigen(&sum);
        let inv_sqrt = &vecs
            * CMatrix::from_diagonal(&DVector::from_iterator(d, ev.iter().map(|&x| C64::new(x.powf(-0.5), 0.0))))
            * vecs.adjoint();
        let effects: Vec<CMatrix> = raw.iter().map(|e| {
            let m = &inv_sqrt * e * &inv_sqrt;
            (&m + m.adjoint()).unscale(2.0)
        }).collect();
        let povm = Povm::new(effects)?;
        let lmin = frame_diagnostics(&povm).lambda_min;
        if lmin > IC_FRAME_FLOOR {
            return Ok(povm);
        }
        best = f64::max(best, lmin);
    }
    Err(Error::SingularFrame(best))
}

/// Default measurement for a wire: the SIC for qubits, a random IC-POVM
/// otherwise.
pub fn default_povm(d: usize, rng: &mut Rng) -> Result<Povm> {
    if d == 2 {
        Ok(build_sic_povm_qubit())
    } else {
        build_ic_povm(d, rng)
    }
}

/// Outcome record of repeated local IC measurements on a process. Row `t`
/// holds the 0-based outcome of every input column then every output column.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeMatrix {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub rows: usize,
    pub data: Vec<u16>,
}

impl OutcomeMatrix {
    pub fn width(&self) -> usize {
        self.inputs.len() + self.outputs.len()
    }

    pub fn row(&self, t: usize) -> &[u16] {
        let w = self.width();
        &self.data[t * w..(t + 1) * w]
    }

    pub fn column_index(&self, label: &str) -> Result<usize> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Empirical joint distribution of two columns, indexed `a * mb + b`.
    pub fn pair_frequencies(&self, a: &str, b: &str, ma: usize, mb: usize) -> Result<Vec<f64>> {
        let (ia, ib) = (self.column_index(a)?, self.column_index(b)?);
        let mut counts = vec![0u64; ma * mb];
        for t in 0..self.rows {
            let r = self.row(t);
            let (x, y) = (r[ia] as usize, r[ib] as usize);
            if x >= ma || y >= mb {
                return Err(Error::InvalidParameter(format!("outcome out of range in row {t}")));
            }
            counts[x * mb + y] += 1;
        }
        Ok(counts.iter().map(|&c| c as f64 / self.rows.max(1) as f64).collect())
    }

    /// CSV with header `trial,<input labels>,<output labels>` and 1-based
    /// outcome indices.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["trial".to_string()];
        header.extend(self.inputs.iter().cloned());
        header.extend(self.outputs.iter().cloned());
        wr.write_record(&header)?;
        for t in 0..self.rows {
            let mut rec = vec![(t + 1).to_string()];
            rec.extend(self.row(t).iter().map(|&x| (x as u32 + 1).to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Inverse of [`write_csv`](Self::write_csv). Columns whose label starts
    /// with `B` are outputs unless `n_inputs` says otherwise.
    pub fn read_csv<R: Read>(r: R, n_inputs: usize) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().skip(1).map(String::from).collect();
        if n_inputs > header.len() {
            return Err(Error::InvalidParameter("more inputs than columns".into()));
        }
        let mut data = Vec::new();
        let mut rows = 0;
        for rec in rd.records() {
            let rec = rec?;
            for field in rec.iter().skip(1) {
                let v: u32 = field
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad outcome `{field}`")))?;
                if v == 0 {
                    return Err(Error::InvalidParameter("outcomes are 1-based".into()));
                }
                data.push((v - 1) as u16);
            }
            rows += 1;
        }
        Ok(Self { inputs: header[..n_inputs].to_vec(), outputs: header[n_inputs..].to_vec(), rows, data })
    }
}

/// Sampling cumulative distribution; returns the index of the first entry
/// exceeding a uniform draw.
fn draw(cdf: &[f64], rng: &mut Rng) -> usize {
    let u = rng.random::<f64>() * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter().map(|&x| {
        acc += x.max(0.0);
        acc
    }).collect()
}

fn kron_all(ms: &[&CMatrix]) -> CMatrix {
    ms.iter().fold(CMatrix::identity(1, 1), |acc, m| acc.kronecker(*m))
}

/// Joint outcome effects of independent POVMs, first POVM most significant.
fn product_effects(povms: &[Povm]) -> Vec<CMatrix> {
    let mut out = vec![CMatrix::identity(1, 1)];
    for p in povms {
        out = out.iter().flat_map(|acc| p.effects.iter().map(move |e| acc.kronecker(e))).collect();
    }
    out
}

/// Rows sampled per substream.
const CHUNK: usize = 4096;

/// Sample `n` rows: each input wire gets an independent IC preparation
/// (effect `a` chosen with probability `Tr[P_a]/d`, state `P_a^T / Tr[P_a]`),
/// the process acts, and every output is measured with its POVM. Row chunks
/// use index-derived substreams, so the result does not depend on threads.
pub fn sample_outcome_matrix(
    p: &ProcessMatrix,
    in_povms: &[Povm],
    out_povms: &[Povm],
    n: usize,
    rng: &Rng,
) -> Result<OutcomeMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("query budget must be positive".into()));
    }
    if in_povms.len() != p.inputs.len() || out_povms.len() != p.outputs.len() {
        return Err(Error::DimensionMismatch("one POVM per wire is required".into()));
    }
    for (w, m) in p.inputs.iter().chain(&p.outputs).zip(in_povms.iter().chain(out_povms)) {
        if w.dim != m.dim {
            return Err(Error::DimensionMismatch(format!("POVM dimension differs on `{}`", w.label)));
        }
    }
    // Per-wire preparation laws.
    let prep: Vec<(Vec<f64>, Vec<CMatrix>)> = in_povms
        .iter()
        .map(|m| {
            let probs: Vec<f64> = m.effects.iter().map(|e| e.trace().re / m.dim as f64).collect();
            let states = m.effects.iter().map(|e| e.transpose().unscale(e.trace().re.max(1e-300))).collect();
            (cumulative(&probs), states)
        })
        .collect();
    let out_effects = product_effects(out_povms);
    let sizes: Vec<usize> = in_povms.iter().map(Povm::len).collect();
    let n_configs: usize = sizes.iter().product();
    let mut conditional = Vec::with_capacity(n_configs);
    for cfg in 0..n_configs {
        let mut rem = cfg;
        let mut idx = vec![0; sizes.len()];
        for k in (0..sizes.len()).rev() {
            idx[k] = rem % sizes[k];
            rem /= sizes[k];
        }
        let parts: Vec<&CMatrix> = idx.iter().enumerate().map(|(k, &a)| &prep[k].1[a]).collect();
        let rho_out = p.apply(&kron_all(&parts))?;
        let probs: Vec<f64> = out_effects.iter().map(|e| (e * &rho_out).trace().re).collect();
        conditional.push(cumulative(&probs));
    }
    let out_sizes: Vec<usize> = out_povms.iter().map(Povm::len).collect();
    let width = sizes.len() + out_sizes.len();

    let chunk = |c: usize| -> Vec<u16> {
        let mut r = rng.substream(c as u64);
        let rows = CHUNK.min(n - c * CHUNK);
        let mut buf = Vec::with_capacity(rows * width);
        for _ in 0..rows {
            let mut cfg = 0;
            for (k, (cdf, _)) in prep.iter().enumerate() {
                let a = draw(cdf, &mut r);
                cfg = cfg * sizes[k] + a;
                buf.push(a as u16);
            }
            let mut b = draw(&conditional[cfg], &mut r);
            let start = buf.len();
            buf.resize(start + out_sizes.len(), 0);
            for k in (0..out_sizes.len()).rev() {
                buf[start + k] = (b % out_sizes[k]) as u16;
                b /= out_sizes[k];
            }
        }
        buf
    };
    let n_chunks = n.div_ceil(CHUNK);
    #[cfg(feature = "parallel")]
    let parts: Vec<Vec<u16>> = {
        use rayon::prelude::*;
        (0..n_chunks).into_par_iter().map(chunk).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Vec<u16>> = (0..n_chunks).map(chunk).collect();
    Ok(OutcomeMatrix {
        inputs: p.input_labels(),
        outputs: p.output_labels(),
        rows: n,
        data: parts.concat(),
    })
}

/// Exact joint law of one input and one output column,
/// `Pr(a, b) = Tr[(P_a (x) Q_b) C_{A B}]`, indexed `a * |Q| + b`.
pub fn pair_probabilities(p: &ProcessMatrix, a: &str, b: &str, pa: &Povm, qb: &Povm) -> Result<Vec<f64>> {
    let m = p.marginal(&[a], &[b])?;
    let mut out = Vec::with_capacity(pa.len() * qb.len());
    for e in &pa.effects {
        for f in &qb.effects {
            out.push((e.kronecker(f) * &m.choi.data).trace().re);
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct PovmWireJson {
    label: String,
    dim: usize,
    effects: Vec<PovmEffectJson>,
}

#[derive(Serialize, Deserialize)]
struct PovmEffectJson {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PovmSidecar {
    wires: Vec<PovmWireJson>,
}

/// JSON listing the POVM used on every column of an outcome matrix.
pub fn povm_sidecar_json(labels: &[String], povms: &[Povm]) -> Result<String> {
    let wires = labels
        .iter()
        .zip(povms)
        .map(|(l, m)| PovmWireJson {
            label: l.clone(),
            dim: m.dim,
            effects: m
                .effects
                .iter()
                .map(|e| {
                    let (re, im) = crate::tensor::to_re_im(e);
                    PovmEffectJson { re, im }
                })
                .collect(),
        })
        .collect();
    Ok(serde_json::to_string_pretty(&PovmSidecar { wires })?)
}

pub fn povms_from_sidecar_json(s: &str) -> Result<Vec<(String, Povm)>> {
    let side: PovmSidecar = serde_json::from_str(s)?;
    side.wires
        .into_iter()
        .map(|w| {
            let effects = w
                .effects
                .iter()
                .map(|e| crate::tensor::from_re_im(&e.re, &e.im))
                .collect::<Result<Vec<_>>>()?;
            Ok((w.label, Povm::new(effects)?))
        })
        .collect()
}
