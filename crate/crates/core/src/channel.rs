//! Multipartite processes as normalised Choi states, sequential combs, and
//! the exact last-tooth factorisation test.
//!
//! The Choi state of a channel `E` with inputs `A` and outputs `B` is
//! `(1/d_A) sum_ij |i><j| (x) E(|i><j|)`, stored with every input wire before
//! every output wire. It has unit trace and its output marginal is `I/d_A`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{
    hermitian_eigen, max_abs, natural_key, offsets, partial_trace, permute_wires, tensor_product, total_dim,
    trace_norm, trace_out, CMatrix, Direction, LabelledMatrix, Wire, C64, PSD_FLOOR, RANK_REL_TOL,
};

/// Tolerance on unit trace and on the trace-preservation marginal.
pub const TRACE_TOL: f64 = 1e-9;
/// Default tolerance of the exact last-tooth test.
pub const FACTOR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    pub inputs: Vec<Wire>,
    pub outputs: Vec<Wire>,
    pub choi: LabelledMatrix,
}

impl ProcessMatrix {
    /// Wrap a Choi matrix whose wire order is `inputs` followed by `outputs`
    /// and check that it describes a channel.
    pub fn from_choi(inputs: Vec<Wire>, outputs: Vec<Wire>, data: CMatrix) -> Result<Self> {
        let p = Self::from_choi_unchecked(inputs, outputs, data)?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_choi_unchecked(inputs: Vec<Wire>, outputs: Vec<Wire>, data: CMatrix) -> Result<Self> {
        if inputs.iter().any(|w| w.direction != Direction::Input)
            || outputs.iter().any(|w| w.direction != Direction::Output)
        {
            return Err(Error::InvalidProcess("wire directions do not match their role".into()));
        }
        let mut wires = inputs.clone();
        wires.extend(outputs.iter().cloned());
        let choi = LabelledMatrix::square(wires, data)?;
        Ok(Self { inputs, outputs, choi })
    }

    /// Build from a square Choi operator with arbitrary wire order.
    pub fn from_labelled(choi: &LabelledMatrix) -> Result<Self> {
        let wires = choi.wires()?;
        let inputs: Vec<Wire> = wires.iter().filter(|w| w.direction == Direction::Input).cloned().collect();
        let outputs: Vec<Wire> = wires.iter().filter(|w| w.direction == Direction::Output).cloned().collect();
        let order: Vec<&str> = inputs.iter().chain(&outputs).map(|w| w.label.as_str()).collect();
        let data = permute_wires(choi, &order)?.data;
        Self::from_choi_unchecked(inputs, outputs, data)
    }

    /// The trivial process with no wires.
    pub fn empty() -> Self {
        Self { inputs: vec![], outputs: vec![], choi: LabelledMatrix::scalar(C64::new(1.0, 0.0)) }
    }

    pub fn d_in(&self) -> usize {
        total_dim(&self.inputs)
    }

    pub fn d_out(&self) -> usize {
        total_dim(&self.outputs)
    }

    pub fn input_labels(&self) -> Vec<String> {
        self.inputs.iter().map(|w| w.label.clone()).collect()
    }

    pub fn output_labels(&self) -> Vec<String> {
        self.outputs.iter().map(|w| w.label.clone()).collect()
    }

    pub fn wire(&self, label: &str) -> Result<&Wire> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .find(|w| w.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Hermiticity, positivity, unit trace and trace preservation.
    pub fn validate(&self) -> Result<()> {
        let dev = self.choi.hermitian_deviation();
        if dev > crate::tensor::HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let (ev, _) = hermitian_eigen(&self.choi.data);
        let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -PSD_FLOOR {
            return Err(Error::NotPsd(min));
        }
        let tr = self.choi.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidProcess(format!("trace is {tr}, expected 1")));
        }
        let marginal = partial_trace(&self.choi, &self.input_labels())?;
        let d = self.d_in();
        let dev = max_abs(&(marginal.data - CMatrix::identity(d, d).unscale(d as f64)));
        if dev > TRACE_TOL {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(())
    }

    /// Marginal process on the listed wires: the remaining inputs are fed the
    /// maximally mixed state and the remaining outputs are discarded.
    pub fn marginal<S: AsRef<str>>(&self, inputs: &[S], outputs: &[S]) -> Result<Self> {
        let ins: HashSet<&str> = inputs.iter().map(|s| s.as_ref()).collect();
        let outs: HashSet<&str> = outputs.iter().map(|s| s.as_ref()).collect();
        check_subset(&ins, &self.inputs, "input")?;
        check_subset(&outs, &self.outputs, "output")?;
        let keep: Vec<String> = self
            .inputs
            .iter()
            .filter(|w| ins.contains(w.label.as_str()))
            .chain(self.outputs.iter().filter(|w| outs.contains(w.label.as_str())))
            .map(|w| w.label.clone())
            .collect();
        let choi = partial_trace(&self.choi, &keep)?;
        Self::from_labelled(&choi)
    }

    /// Action of the channel on an operator over the input wires.
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        let (din, dout) = (self.d_in(), self.d_out());
        if rho.shape() != (din, din) {
            return Err(Error::DimensionMismatch(format!(
                "input operator is {}x{}, expected {din}x{din}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let mut out = CMatrix::zeros(dout, dout);
        for i in 0..din {
            for j in 0..din {
                let x = rho[(i, j)];
                if x == C64::new(0.0, 0.0) {
                    continue;
                }
                let block = self.choi.data.view((i * dout, j * dout), (dout, dout));
                out += block * x;
            }
        }
        Ok(out * C64::new(din as f64, 0.0))
    }

    /// Rename wires. Labels missing from `map` are kept.
    pub fn relabel(&self, map: &std::collections::HashMap<String, String>) -> Result<Self> {
        let rename = |w: &Wire| Wire {
            label: map.get(&w.label).cloned().unwrap_or_else(|| w.label.clone()),
            ..w.clone()
        };
        let inputs: Vec<Wire> = self.inputs.iter().map(rename).collect();
        let outputs: Vec<Wire> = self.outputs.iter().map(rename).collect();
        Self::from_choi_unchecked(inputs, outputs, self.choi.data.clone())
    }

    /// Reorder inputs and outputs by natural label order.
    pub fn canonical(&self) -> Result<Self> {
        let mut inputs = self.inputs.clone();
        let mut outputs = self.outputs.clone();
        inputs.sort_by_key(|w| natural_key(&w.label));
        outputs.sort_by_key(|w| natural_key(&w.label));
        let order: Vec<&str> = inputs.iter().chain(&outputs).map(|w| w.label.as_str()).collect();
        let data = permute_wires(&self.choi, &order)?.data;
        Self::from_choi_unchecked(inputs, outputs, data)
    }

    /// Tensor product of processes on disjoint wires.
    pub fn product(parts: &[ProcessMatrix]) -> Result<Self> {
        let mut acc = LabelledMatrix::scalar(C64::new(1.0, 0.0));
        for p in parts {
            acc = tensor_product(&acc, &p.choi)?;
        }
        Self::from_labelled(&acc)
    }
}

fn check_subset(set: &HashSet<&str>, wires: &[Wire], role: &str) -> Result<()> {
    for l in set {
        if !wires.iter().any(|w| w.label == *l) {
            return Err(Error::UnknownLabel(format!("{l} (not an {role} wire)")));
        }
    }
    Ok(())
}

fn kraus_completeness(kraus: &[CMatrix], din: usize) -> f64 {
    let mut s = CMatrix::zeros(din, din);
    for k in kraus {
        s += k.adjoint() * k;
    }
    max_abs(&(s - CMatrix::identity(din, din)))
}

/// Choi state of the channel with the given Kraus operators. Each operator
/// maps the product of `inputs` to the product of `outputs`.
pub fn choi_from_kraus(kraus: &[CMatrix], inputs: Vec<Wire>, outputs: Vec<Wire>) -> Result<ProcessMatrix> {
    let (din, dout) = (total_dim(&inputs), total_dim(&outputs));
    if kraus.is_empty() {
        return Err(Error::InvalidProcess("no Kraus operators".into()));
    }
    for k in kraus {
        if k.shape() != (dout, din) {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator is {}x{}, expected {dout}x{din}",
                k.nrows(),
                k.ncols()
            )));
        }
    }
    let dev = kraus_completeness(kraus, din);
    if dev > TRACE_TOL {
        return Err(Error::NotTracePreserving(dev));
    }
    let mut choi = CMatrix::zeros(din * dout, din * dout);
    for k in kraus {
        // |K>> = sum_i |i> (x) K|i>, input index most significant.
        let v = nalgebra::DVector::from_fn(din * dout, |idx, _| k[(idx % dout, idx / dout)]);
        choi += &v * v.adjoint();
    }
    ProcessMatrix::from_choi(inputs, outputs, choi.unscale(din as f64))
}

/// Minimal Kraus decomposition read off the Choi eigenvectors.
pub fn kraus_from_choi(p: &ProcessMatrix) -> Vec<CMatrix> {
    let (din, dout) = (p.d_in(), p.d_out());
    let (ev, vecs) = hermitian_eigen(&p.choi.data);
    let max = ev.iter().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    for (i, &lambda) in ev.iter().enumerate() {
        if lambda <= RANK_REL_TOL * max {
            continue;
        }
        let s = (lambda * din as f64).sqrt();
        let col = vecs.column(i);
        out.push(CMatrix::from_fn(dout, din, |o, a| col[a * dout + o] * s));
    }
    out
}

pub fn kraus_rank(p: &ProcessMatrix) -> Result<usize> {
    crate::tensor::matrix_rank(&p.choi, RANK_REL_TOL)
}

/// Trace distance between a joint marginal and the product of its parts.
pub fn chi1<S: AsRef<str>>(p: &ProcessMatrix, s: &[S], t: &[S]) -> Result<f64> {
    let sl: Vec<&str> = s.iter().map(|x| x.as_ref()).collect();
    let tl: Vec<&str> = t.iter().map(|x| x.as_ref()).collect();
    if let Some(l) = sl.iter().find(|l| tl.contains(l)) {
        return Err(Error::OverlappingSets(l.to_string()));
    }
    let mut st = sl.clone();
    st.extend(&tl);
    let joint = partial_trace(&p.choi, &st)?;
    let rs = partial_trace(&joint, &sl)?;
    let rt = partial_trace(&joint, &tl)?;
    let prod = tensor_product(&rs, &rt)?;
    Ok(trace_norm(&joint.sub(&prod)?))
}

fn check_step<S: AsRef<str>>(p: &ProcessMatrix, pset: &[S], qset: &[S]) -> Result<()> {
    let ins: HashSet<&str> = pset.iter().map(|s| s.as_ref()).collect();
    let outs: HashSet<&str> = qset.iter().map(|s| s.as_ref()).collect();
    check_subset(&ins, &p.inputs, "input")?;
    check_subset(&outs, &p.outputs, "output")?;
    if ins.len() != pset.len() || outs.len() != qset.len() {
        return Err(Error::MalformedPartition("repeated label in step".into()));
    }
    Ok(())
}

/// The two operators compared by the last-tooth test: `Tr_Q[C]` and
/// `I_P/d_P (x) Tr_{P,Q}[C]`, both in the wire order of the former.
pub fn last_tooth_states<S: AsRef<str>>(
    p: &ProcessMatrix,
    pset: &[S],
    qset: &[S],
) -> Result<(LabelledMatrix, LabelledMatrix)> {
    check_step(p, pset, qset)?;
    let c1 = trace_out(&p.choi, qset)?;
    let mut pq: Vec<&str> = pset.iter().map(|s| s.as_ref()).collect();
    pq.extend(qset.iter().map(|s| s.as_ref()));
    let rest = trace_out(&p.choi, &pq)?;
    let pw: Vec<Wire> = pset.iter().map(|l| p.wire(l.as_ref()).cloned()).collect::<Result<_>>()?;
    let c2 = tensor_product(&LabelledMatrix::maximally_mixed(pw)?, &rest)?.aligned_to(&c1)?;
    Ok((c1, c2))
}

/// Trace-norm residual of the last-tooth factorisation for `(P, Q)`.
pub fn last_tooth_residual<S: AsRef<str>>(p: &ProcessMatrix, pset: &[S], qset: &[S]) -> Result<f64> {
    let (c1, c2) = last_tooth_states(p, pset, qset)?;
    Ok(trace_norm(&c1.sub(&c2)?))
}

pub fn is_last_tooth_exact<S: AsRef<str>>(p: &ProcessMatrix, pset: &[S], qset: &[S], tol: f64) -> Result<bool> {
    Ok(last_tooth_residual(p, pset, qset)? <= tol)
}

/// Process left after removing a last tooth: `P` is fed `I/d_P` and `Q` is
/// discarded.
pub fn reduce_channel<S: AsRef<str>>(p: &ProcessMatrix, pset: &[S], qset: &[S]) -> Result<ProcessMatrix> {
    check_step(p, pset, qset)?;
    let mut pq: Vec<&str> = pset.iter().map(|s| s.as_ref()).collect();
    pq.extend(qset.iter().map(|s| s.as_ref()));
    let choi = trace_out(&p.choi, &pq)?;
    ProcessMatrix::from_labelled(&choi)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl Step {
    pub fn new<S: Into<String>>(inputs: impl IntoIterator<Item = S>, outputs: impl IntoIterator<Item = S>) -> Self {
        Self {
            inputs: inputs.into_iter().map(Into::into).collect(),
            outputs: outputs.into_iter().map(Into::into).collect(),
        }
    }
}

/// Ordered partition of a process's wires into steps, earliest first.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Unravelling {
    pub steps: Vec<Step>,
}

impl Unravelling {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps }
    }

    /// Check that every wire of `p` appears in exactly one step.
    pub fn validate_for(&self, p: &ProcessMatrix) -> Result<()> {
        let check = |wires: &[Wire], pick: &dyn Fn(&Step) -> &Vec<String>, role: &str| -> Result<()> {
            let mut seen = HashSet::new();
            for s in &self.steps {
                for l in pick(s) {
                    if !wires.iter().any(|w| &w.label == l) {
                        return Err(Error::MalformedPartition(format!("`{l}` is not an {role} wire")));
                    }
                    if !seen.insert(l.clone()) {
                        return Err(Error::MalformedPartition(format!("`{l}` appears twice")));
                    }
                }
            }
            if let Some(w) = wires.iter().find(|w| !seen.contains(&w.label)) {
                return Err(Error::MalformedPartition(format!("`{}` is not covered", w.label)));
            }
            Ok(())
        };
        check(&p.inputs, &|s| &s.inputs, "input")?;
        check(&p.outputs, &|s| &s.outputs, "output")
    }
}

/// Last-tooth residual of every step, peeling from the last one backwards.
/// Entry `k` belongs to step `k`; the first step has nothing to test and
/// always reports 0.
pub fn membership_residuals(p: &ProcessMatrix, u: &Unravelling) -> Result<Vec<f64>> {
    u.validate_for(p)?;
    let mut res = vec![0.0; u.steps.len()];
    let mut cur = p.clone();
    for k in (1..u.steps.len()).rev() {
        let s = &u.steps[k];
        res[k] = last_tooth_residual(&cur, &s.inputs, &s.outputs)?;
        cur = reduce_channel(&cur, &s.inputs, &s.outputs)?;
    }
    Ok(res)
}

pub fn comb_membership(p: &ProcessMatrix, u: &Unravelling, tol: f64) -> Result<bool> {
    Ok(membership_residuals(p, u)?.iter().all(|&r| r <= tol))
}

/// One comb tooth: Kraus operators from `in_wires (x) M_in` to
/// `out_wires (x) M_out`, memory last in both spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Tooth {
    pub kraus: Vec<CMatrix>,
    pub in_wires: Vec<Wire>,
    pub out_wires: Vec<Wire>,
    pub mem_in: usize,
    pub mem_out: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comb {
    pub teeth: Vec<Tooth>,
    pub d_env: usize,
}

impl Comb {
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.teeth.first() else {
            return Err(Error::InvalidProcess("comb has no teeth".into()));
        };
        if first.mem_in != 1 {
            return Err(Error::DimensionMismatch("first tooth must have trivial memory input".into()));
        }
        for w in self.teeth.windows(2) {
            if w[0].mem_out != w[1].mem_in {
                return Err(Error::DimensionMismatch(format!(
                    "memory dimension {} does not match next input {}",
                    w[0].mem_out, w[1].mem_in
                )));
            }
        }
        if self.teeth.last().map(|t| t.mem_out) != Some(self.d_env) {
            return Err(Error::DimensionMismatch("last memory output must equal d_env".into()));
        }
        let mut labels = HashSet::new();
        for t in &self.teeth {
            for w in t.in_wires.iter().chain(&t.out_wires) {
                if !labels.insert(w.label.clone()) {
                    return Err(Error::LabelCollision(w.label.clone()));
                }
            }
            if t.in_wires.iter().any(|w| w.direction != Direction::Input)
                || t.out_wires.iter().any(|w| w.direction != Direction::Output)
            {
                return Err(Error::InvalidProcess("tooth wire directions do not match their role".into()));
            }
            let din = total_dim(&t.in_wires) * t.mem_in;
            let dout = total_dim(&t.out_wires) * t.mem_out;
            if t.kraus.is_empty() {
                return Err(Error::InvalidProcess("tooth has no Kraus operators".into()));
            }
            for k in &t.kraus {
                if k.shape() != (dout, din) {
                    return Err(Error::DimensionMismatch(format!(
                        "tooth Kraus operator is {}x{}, expected {dout}x{din}",
                        k.nrows(),
                        k.ncols()
                    )));
                }
            }
            let dev = kraus_completeness(&t.kraus, din);
            if dev > TRACE_TOL {
                return Err(Error::NotTracePreserving(dev));
            }
        }
        Ok(())
    }

    pub fn inputs(&self) -> Vec<Wire> {
        self.teeth.iter().flat_map(|t| t.in_wires.iter().cloned()).collect()
    }

    pub fn outputs(&self) -> Vec<Wire> {
        self.teeth.iter().flat_map(|t| t.out_wires.iter().cloned()).collect()
    }

    /// The tooth order as an unravelling.
    pub fn ordering(&self) -> Unravelling {
        Unravelling::new(
            self.teeth
                .iter()
                .map(|t| {
                    Step::new(
                        t.in_wires.iter().map(|w| w.label.clone()),
                        t.out_wires.iter().map(|w| w.label.clone()),
                    )
                })
                .collect(),
        )
    }
}

/// Pure vector over named tensor factors.
struct FactorVec {
    names: Vec<String>,
    dims: Vec<usize>,
    v: Vec<C64>,
}

impl FactorVec {
    fn position(&self, name: &str) -> usize {
        self.names.iter().position(|n| n == name).expect("factor exists")
    }

    /// Apply `op` (rows over `outs`, columns over `ins`); the output factors
    /// are appended after the untouched ones.
    fn apply(&mut self, op: &CMatrix, ins: &[String], outs: &[(String, usize)]) {
        let in_pos: Vec<usize> = ins.iter().map(|n| self.position(n)).collect();
        let rest: Vec<usize> = (0..self.names.len()).filter(|i| !in_pos.contains(i)).collect();
        let io = offsets(&self.dims, &in_pos);
        let ro = offsets(&self.dims, &rest);
        let dout: usize = outs.iter().map(|o| o.1).product();
        let mut next = vec![C64::new(0.0, 0.0); ro.len() * dout];
        for (ri, &r) in ro.iter().enumerate() {
            let row = &mut next[ri * dout..(ri + 1) * dout];
            for (ai, &a) in io.iter().enumerate() {
                let x = self.v[r + a];
                if x == C64::new(0.0, 0.0) {
                    continue;
                }
                for (b, slot) in row.iter_mut().enumerate() {
                    *slot += op[(b, ai)] * x;
                }
            }
        }
        self.names = rest.iter().map(|&i| self.names[i].clone()).chain(outs.iter().map(|o| o.0.clone())).collect();
        self.dims = rest.iter().map(|&i| self.dims[i]).chain(outs.iter().map(|o| o.1)).collect();
        self.v = next;
    }
}

/// Choi state of the whole comb. Every tooth is dilated to an isometry whose
/// environment is traced out together with the final memory. Wires of the
/// result are in natural label order.
pub fn compose_comb(comb: &Comb) -> Result<ProcessMatrix> {
    comb.validate()?;
    let mut inputs = comb.inputs();
    let mut outputs = comb.outputs();
    inputs.sort_by_key(|w| natural_key(&w.label));
    outputs.sort_by_key(|w| natural_key(&w.label));
    let din = total_dim(&inputs);

    let port = |l: &str| format!("\u{0}in:{l}");
    let mut names: Vec<String> = inputs.iter().map(|w| w.label.clone()).collect();
    names.extend(inputs.iter().map(|w| port(&w.label)));
    names.push("\u{0}mem:0".into());
    let mut dims: Vec<usize> = inputs.iter().map(|w| w.dim).collect();
    dims.extend(inputs.iter().map(|w| w.dim));
    dims.push(1);
    let mut v = vec![C64::new(0.0, 0.0); din * din];
    for i in 0..din {
        v[i * din + i] = C64::new(1.0, 0.0);
    }
    let mut state = FactorVec { names, dims, v };

    let mut env_names = Vec::new();
    for (k, t) in comb.teeth.iter().enumerate() {
        let r = t.kraus.len();
        let (rows, cols) = t.kraus[0].shape();
        let mut iso = CMatrix::zeros(rows * r, cols);
        for (e, kr) in t.kraus.iter().enumerate() {
            for b in 0..rows {
                for a in 0..cols {
                    iso[(b * r + e, a)] = kr[(b, a)];
                }
            }
        }
        let mut ins: Vec<String> = t.in_wires.iter().map(|w| port(&w.label)).collect();
        ins.push(format!("\u{0}mem:{k}"));
        let mut outs: Vec<(String, usize)> = t.out_wires.iter().map(|w| (w.label.clone(), w.dim)).collect();
        outs.push((format!("\u{0}mem:{}", k + 1), t.mem_out));
        let env = format!("\u{0}env:{k}");
        outs.push((env.clone(), r));
        env_names.push(env);
        state.apply(&iso, &ins, &outs);
    }

    let kept: Vec<usize> = inputs
        .iter()
        .chain(&outputs)
        .map(|w| state.position(&w.label))
        .collect();
    let traced: Vec<usize> = (0..state.names.len()).filter(|i| !kept.contains(i)).collect();
    let ko = offsets(&state.dims, &kept);
    let to = offsets(&state.dims, &traced);
    let psi = CMatrix::from_fn(ko.len(), to.len(), |a, b| state.v[ko[a] + to[b]]);
    let choi = (&psi * psi.adjoint()).unscale(din as f64);
    ProcessMatrix::from_choi(inputs, outputs, choi)
}

/// Embed every wire into dimension `d` by zero-padding. Padded input levels
/// are sent to the first output basis state by extra Kraus operators, so the
/// Kraus rank can grow.
pub fn standardize(p: &ProcessMatrix, d: usize) -> Result<ProcessMatrix> {
    if let Some(w) = p.inputs.iter().chain(&p.outputs).find(|w| w.dim > d) {
        return Err(Error::InvalidParameter(format!("wire `{}` has dimension {} > {d}", w.label, w.dim)));
    }
    let pad = |ws: &[Wire]| -> Vec<Wire> { ws.iter().map(|w| Wire { dim: d, ..w.clone() }).collect() };
    let (ni, no) = (pad(&p.inputs), pad(&p.outputs));
    // Flat index maps from the original spaces into the padded ones.
    let embed = |orig: &[Wire]| -> Vec<usize> {
        let mut out = vec![0usize];
        for w in orig {
            out = out.iter().flat_map(|&b| (0..w.dim).map(move |x| b * d + x)).collect();
        }
        out
    };
    let (ei, eo) = (embed(&p.inputs), embed(&p.outputs));
    let (din, dout) = (total_dim(&ni), total_dim(&no));
    let mut kraus: Vec<CMatrix> = kraus_from_choi(p)
        .into_iter()
        .map(|k| {
            let mut m = CMatrix::zeros(dout, din);
            for (a, &ia) in ei.iter().enumerate() {
                for (b, &ob) in eo.iter().enumerate() {
                    m[(ob, ia)] = k[(b, a)];
                }
            }
            m
        })
        .collect();
    let inside: HashSet<usize> = ei.iter().copied().collect();
    for x in (0..din).filter(|x| !inside.contains(x)) {
        let mut m = CMatrix::zeros(dout, din);
        m[(0, x)] = C64::new(1.0, 0.0);
        kraus.push(m);
    }
    choi_from_kraus(&kraus, ni, no)
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    re: Vec<Vec<f64>>,
    #[serde(default)]
    im: Vec<Vec<f64>>,
}

impl RawMatrix {
    fn from(m: &CMatrix) -> Self {
        let (re, im) = crate::tensor::to_re_im(m);
        Self { re, im }
    }

    fn to_matrix(&self) -> Result<CMatrix> {
        crate::tensor::from_re_im(&self.re, &self.im)
    }
}

#[derive(Serialize, Deserialize)]
struct ProcessJson {
    inputs: Vec<Wire>,
    outputs: Vec<Wire>,
    repr: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    choi: Option<RawMatrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kraus: Option<Vec<RawMatrix>>,
}

#[derive(Serialize, Deserialize)]
struct ToothJson {
    kraus: Vec<RawMatrix>,
    in_wires: Vec<Wire>,
    out_wires: Vec<Wire>,
    mem_in: usize,
    mem_out: usize,
}

#[derive(Serialize, Deserialize)]
struct CombJson {
    teeth: Vec<ToothJson>,
    d_env: usize,
}

impl ProcessMatrix {
    pub fn to_json(&self) -> Result<String> {
        let j = ProcessJson {
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            repr: "choi".into(),
            choi: Some(RawMatrix::from(&self.choi.data)),
            kraus: None,
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    /// Read a process file or a comb file.
    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        if value.get("teeth").is_some() {
            return compose_comb(&Comb::from_json(s)?);
        }
        let j: ProcessJson = serde_json::from_value(value)?;
        match j.repr.as_str() {
            "choi" => {
                let m = j.choi.ok_or_else(|| Error::InvalidProcess("missing `choi`".into()))?;
                ProcessMatrix::from_choi(j.inputs, j.outputs, m.to_matrix()?)
            }
            "kraus" => {
                let ks = j.kraus.ok_or_else(|| Error::InvalidProcess("missing `kraus`".into()))?;
                let ks: Vec<CMatrix> = ks.iter().map(RawMatrix::to_matrix).collect::<Result<_>>()?;
                choi_from_kraus(&ks, j.inputs, j.outputs)
            }
            other => Err(Error::InvalidProcess(format!("unknown repr `{other}`"))),
        }
    }
}

impl Comb {
    pub fn to_json(&self) -> Result<String> {
        let j = CombJson {
            teeth: self
                .teeth
                .iter()
                .map(|t| ToothJson {
                    kraus: t.kraus.iter().map(RawMatrix::from).collect(),
                    in_wires: t.in_wires.clone(),
                    out_wires: t.out_wires.clone(),
                    mem_in: t.mem_in,
                    mem_out: t.mem_out,
                })
                .collect(),
            d_env: self.d_env,
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: CombJson = serde_json::from_str(s)?;
        let teeth = j
            .teeth
            .into_iter()
            .map(|t| {
                Ok(Tooth {
                    kraus: t.kraus.iter().map(RawMatrix::to_matrix).collect::<Result<_>>()?,
                    in_wires: t.in_wires,
                    out_wires: t.out_wires,
                    mem_in: t.mem_in,
                    mem_out: t.mem_out,
                })
            })
            .collect::<Result<_>>()?;
        let comb = Comb { teeth, d_env: j.d_env };
        comb.validate()?;
        Ok(comb)
    }
}

/// Commonly used fixed processes.
pub mod fixtures {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    pub fn identity_channel(a: &str, b: &str, d: usize) -> ProcessMatrix {
        choi_from_kraus(&[CMatrix::identity(d, d)], vec![Wire::input(a, d)], vec![Wire::output(b, d)])
            .expect("identity is a channel")
    }

    /// Channel that discards its input and prepares `sigma`.
    pub fn constant_channel(a: &str, b: &str, d_in: usize, sigma: &CMatrix) -> Result<ProcessMatrix> {
        let choi = CMatrix::identity(d_in, d_in).unscale(d_in as f64).kronecker(sigma);
        ProcessMatrix::from_choi(vec![Wire::input(a, d_in)], vec![Wire::output(b, sigma.nrows())], choi)
    }

    /// CNOT with control A1 -> B1 and target A2 -> B2.
    pub fn cnot() -> ProcessMatrix {
        let mut u = CMatrix::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            u[(i, j)] = c(1.0);
        }
        choi_from_kraus(
            &[u],
            vec![Wire::input("A1", 2), Wire::input("A2", 2)],
            vec![Wire::output("B1", 2), Wire::output("B2", 2)],
        )
        .expect("cnot is unitary")
    }

    /// Two-tooth comb: the first tooth parks A1 in memory and emits |0> on
    /// B1, the second releases the memory on B2 and discards A2.
    pub fn delayed_swap_comb() -> Comb {
        let mut t1 = CMatrix::zeros(4, 2);
        // |psi>_A1 -> |0>_B1 |psi>_M
        t1[(0, 0)] = c(1.0);
        t1[(1, 1)] = c(1.0);
        let mut t2 = CMatrix::zeros(4, 4);
        // |a>_A2 |m>_M -> |m>_B2 |a>_E
        for a in 0..2 {
            for m in 0..2 {
                t2[(m * 2 + a, a * 2 + m)] = c(1.0);
            }
        }
        Comb {
            teeth: vec![
                Tooth {
                    kraus: vec![t1],
                    in_wires: vec![Wire::input("A1", 2)],
                    out_wires: vec![Wire::output("B1", 2)],
                    mem_in: 1,
                    mem_out: 2,
                },
                Tooth {
                    kraus: vec![t2],
                    in_wires: vec![Wire::input("A2", 2)],
                    out_wires: vec![Wire::output("B2", 2)],
                    mem_in: 2,
                    mem_out: 2,
                },
            ],
            d_env: 2,
        }
    }
}
