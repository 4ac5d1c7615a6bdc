//! Random processes with known causal structure.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::algorithms::{unravel_general_c, UnravelParams};
use crate::channel::{
    chi1, compose_comb, kraus_rank, last_tooth_residual, reduce_channel, Comb, ProcessMatrix, Step, Tooth,
    Unravelling,
};
use crate::error::{Error, Result};
use crate::random::{haar_isometry, haar_unitary, random_channel_kraus, random_density};
use crate::rng::Rng;
use crate::tensor::{hermitian_eigen, CMatrix, Wire, C64};

/// Correlations at or below this value count as structurally zero.
pub const ZERO_CORRELATION: f64 = 1e-9;
/// Rejection-sampling attempts before giving up.
pub const MAX_ATTEMPTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    IsometricChain,
    Memoryless,
    TotalOrderChain,
    EntanglingC2,
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "isometric_chain" => Ok(Family::IsometricChain),
            "memoryless" => Ok(Family::Memoryless),
            "total_order_chain" => Ok(Family::TotalOrderChain),
            "entangling_c2" => Ok(Family::EntanglingC2),
            other => Err(Error::InvalidParameter(format!("unknown family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub family: Family,
    pub n: usize,
    pub d: usize,
    pub d_mem: usize,
    pub d_env: usize,
    pub chi_min_target: f64,
    pub seed: u64,
    /// Memoryless family only: how many teeth are constant channels.
    #[serde(default)]
    pub n_constant: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            family: Family::IsometricChain,
            n: 3,
            d: 2,
            d_mem: 2,
            d_env: 1,
            chi_min_target: 0.1,
            seed: 0,
            n_constant: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.d_mem == 0 || self.d_env == 0 {
            return Err(Error::InvalidParameter("n and all dimensions must be positive".into()));
        }
        if !(self.chi_min_target >= 0.0) {
            return Err(Error::InvalidParameter("chi_min_target must be non-negative".into()));
        }
        if self.n_constant > self.n {
            return Err(Error::InvalidParameter("more constant teeth than teeth".into()));
        }
        if self.family == Family::EntanglingC2 && self.n != 3 {
            return Err(Error::InvalidParameter("the entangling family has exactly three inputs".into()));
        }
        Ok(())
    }
}

/// Ground truth shipped with every generated process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub ordering: Vec<Step>,
    pub chi_min_achieved: f64,
    pub kraus_rank: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Truth {
    pub fn unravelling(&self) -> Unravelling {
        Unravelling::new(self.ordering.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub comb: Comb,
    pub process: ProcessMatrix,
    pub truth: Truth,
}

/// Mapping from old to new wire labels produced by [`shuffle_wires`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Relabelling {
    pub forward: HashMap<String, String>,
}

impl Relabelling {
    pub fn inverse(&self) -> Relabelling {
        Relabelling { forward: self.forward.iter().map(|(a, b)| (b.clone(), a.clone())).collect() }
    }

    fn get(&self, l: &str) -> String {
        self.forward.get(l).cloned().unwrap_or_else(|| l.to_string())
    }

    pub fn apply_steps(&self, steps: &[Step]) -> Vec<Step> {
        steps
            .iter()
            .map(|s| Step {
                inputs: s.inputs.iter().map(|l| self.get(l)).collect(),
                outputs: s.outputs.iter().map(|l| self.get(l)).collect(),
            })
            .collect()
    }

    pub fn apply_comb(&self, comb: &Comb) -> Comb {
        let re = |ws: &[Wire]| ws.iter().map(|w| Wire { label: self.get(&w.label), ..w.clone() }).collect();
        Comb {
            teeth: comb
                .teeth
                .iter()
                .map(|t| Tooth { in_wires: re(&t.in_wires), out_wires: re(&t.out_wires), ..t.clone() })
                .collect(),
            d_env: comb.d_env,
        }
    }

    pub fn apply_process(&self, p: &ProcessMatrix) -> Result<ProcessMatrix> {
        p.relabel(&self.forward)?.canonical()
    }
}

fn random_relabelling(inputs: &[String], outputs: &[String], rng: &mut Rng) -> Relabelling {
    let mut forward = HashMap::new();
    for (names, prefix) in [(inputs, "A"), (outputs, "B")] {
        let mut idx: Vec<usize> = (0..names.len()).collect();
        idx.shuffle(rng);
        for (k, &i) in idx.iter().enumerate() {
            forward.insert(names[i].clone(), format!("{prefix}{}", k + 1));
        }
    }
    Relabelling { forward }
}

/// Rename inputs to `A1..` and outputs to `B1..` in an independent random
/// order. The returned map sends old labels to new ones.
pub fn shuffle_wires(p: &ProcessMatrix, rng: &mut Rng) -> Result<(ProcessMatrix, Relabelling)> {
    let map = random_relabelling(&p.input_labels(), &p.output_labels(), rng);
    Ok((map.apply_process(p)?, map))
}

fn labelled_teeth(n: usize) -> (Vec<Vec<Wire>>, Vec<Vec<Wire>>) {
    (
        (1..=n).map(|k| vec![Wire::input(format!("A{k}"), 0)]).collect(),
        (1..=n).map(|k| vec![Wire::output(format!("B{k}"), 0)]).collect(),
    )
}

fn with_dim(ws: &[Wire], d: usize) -> Vec<Wire> {
    ws.iter().map(|w| Wire { dim: d, ..w.clone() }).collect()
}

/// Correlations probed by a pair-wise recursive search on `p` when the
/// steps of `order` are peeled from the back, plus every single-wire
/// correlation of the full process.
pub fn probed_correlations(p: &ProcessMatrix, order: &[Step]) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for a in p.input_labels() {
        for b in p.output_labels() {
            values.push(chi1(p, &[a.as_str()], &[b.as_str()])?);
        }
    }
    let mut cur = p.clone();
    for step in order.iter().skip(1).rev() {
        for a in cur.input_labels() {
            for b in cur.output_labels() {
                values.push(last_tooth_residual(&cur, &[a.as_str()], &[b.as_str()])?);
            }
        }
        cur = reduce_channel(&cur, &step.inputs, &step.outputs)?;
    }
    Ok(values)
}

fn smallest_nonzero(values: &[f64]) -> f64 {
    values.iter().copied().filter(|&v| v > ZERO_CORRELATION).fold(f64::INFINITY, f64::min)
}

fn isometric_chain_comb(spec: &SynthSpec, rng: &mut Rng, notes: &mut Vec<String>) -> Comb {
    let (d, n) = (spec.d, spec.n);
    let (ins, outs) = labelled_teeth(n);
    // The last tooth must be an isometry from d * d_mem into d * d_env.
    let d_env = if n > 1 && spec.d_env < spec.d_mem {
        notes.push(format!(
            "d_env raised from {} to {} so that the last tooth is isometric",
            spec.d_env, spec.d_mem
        ));
        spec.d_mem
    } else {
        spec.d_env
    };
    let teeth = (0..n)
        .map(|k| {
            let mem_in = if k == 0 { 1 } else { spec.d_mem };
            let mem_out = if k + 1 == n { d_env } else { spec.d_mem };
            Tooth {
                kraus: vec![haar_isometry(d * mem_out, d * mem_in, rng)],
                in_wires: with_dim(&ins[k], d),
                out_wires: with_dim(&outs[k], d),
                mem_in,
                mem_out,
            }
        })
        .collect();
    Comb { teeth, d_env }
}

/// `exp(-i theta SWAP)` on two systems of dimension `d`.
fn partial_swap(d: usize, theta: f64) -> CMatrix {
    let mut swap = CMatrix::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            swap[(b * d + a, a * d + b)] = C64::new(1.0, 0.0);
        }
    }
    CMatrix::identity(d * d, d * d) * C64::new(theta.cos(), 0.0) - swap * C64::new(0.0, theta.sin())
}

fn total_order_comb(spec: &SynthSpec, rng: &mut Rng) -> Comb {
    let (d, n) = (spec.d, spec.n);
    let (ins, outs) = labelled_teeth(n);
    let teeth = (0..n)
        .map(|k| {
            let theta = rng.random_range(std::f64::consts::PI / 6.0..std::f64::consts::PI / 3.0);
            let before = haar_unitary(d, rng).kronecker(&haar_unitary(d, rng));
            let after = haar_unitary(d, rng).kronecker(&haar_unitary(d, rng));
            let mut u = after * partial_swap(d, theta) * before;
            let mem_in = if k == 0 { 1 } else { d };
            if k == 0 {
                // Memory starts in |0>.
                u = u.columns_with_step(0, d, d - 1).into_owned();
            }
            Tooth { kraus: vec![u], in_wires: with_dim(&ins[k], d), out_wires: with_dim(&outs[k], d), mem_in, mem_out: d }
        })
        .collect();
    Comb { teeth, d_env: d }
}

fn constant_kraus(d_in: usize, sigma: &CMatrix) -> Vec<CMatrix> {
    let (ev, vecs) = hermitian_eigen(sigma);
    let d_out = sigma.nrows();
    let mut out = Vec::new();
    for (i, &l) in ev.iter().enumerate() {
        if l <= 1e-14 {
            continue;
        }
        for a in 0..d_in {
            let mut k = CMatrix::zeros(d_out, d_in);
            for b in 0..d_out {
                k[(b, a)] = vecs[(b, i)] * l.sqrt();
            }
            out.push(k);
        }
    }
    out
}

fn memoryless_comb(spec: &SynthSpec, rng: &mut Rng) -> Comb {
    let (d, n) = (spec.d, spec.n);
    let mut constant: Vec<bool> = (0..n).map(|i| i < spec.n_constant).collect();
    constant.shuffle(rng);
    let mut pi: Vec<usize> = (0..n).collect();
    pi.shuffle(rng);
    let teeth = (0..n)
        .map(|i| {
            let kraus = if constant[i] {
                constant_kraus(d, &random_density(d, d, rng))
            } else {
                random_channel_kraus(d, d, 2, rng)
            };
            Tooth {
                kraus,
                in_wires: vec![Wire::input(format!("A{}", i + 1), d)],
                out_wires: vec![Wire::output(format!("B{}", pi[i] + 1), d)],
                mem_in: 1,
                mem_out: 1,
            }
        })
        .collect();
    Comb { teeth, d_env: 1 }
}

fn entangling_comb(spec: &SynthSpec, rng: &mut Rng) -> Comb {
    let (d, m) = (spec.d, spec.d_mem);
    let first = Tooth {
        kraus: vec![haar_isometry(d * d * m, d * d, rng)],
        in_wires: vec![Wire::input("A1", d), Wire::input("A2", d)],
        out_wires: vec![Wire::output("B1", d), Wire::output("B2", d)],
        mem_in: 1,
        mem_out: m,
    };
    let second = Tooth {
        kraus: vec![haar_isometry(d * m, d * m, rng)],
        in_wires: vec![Wire::input("A3", d)],
        out_wires: vec![Wire::output("B3", d)],
        mem_in: m,
        mem_out: m,
    };
    Comb { teeth: vec![first, second], d_env: m }
}

/// Draw a comb of the requested family whose nonzero probed correlations all
/// reach `chi_min_target`, retrying up to [`MAX_ATTEMPTS`] times. Wire labels
/// are shuffled so that label order carries no information about the truth.
pub fn random_comb(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let root = Rng::new(spec.seed);
    let mut best = 0.0f64;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = root.substream(attempt as u64);
        let mut notes = Vec::new();
        let comb = match spec.family {
            Family::IsometricChain => isometric_chain_comb(spec, &mut rng, &mut notes),
            Family::TotalOrderChain => total_order_comb(spec, &mut rng),
            Family::Memoryless => memoryless_comb(spec, &mut rng),
            Family::EntanglingC2 => entangling_comb(spec, &mut rng),
        };
        let ins: Vec<String> = comb.inputs().iter().map(|w| w.label.clone()).collect();
        let outs: Vec<String> = comb.outputs().iter().map(|w| w.label.clone()).collect();
        let map = random_relabelling(&ins, &outs, &mut rng);
        let comb = map.apply_comb(&comb);
        let process = compose_comb(&comb)?;
        let ordering = comb.ordering().steps;
        let (chi, ok) = accept(spec, &process, &ordering)?;
        best = best.max(chi);
        if !ok {
            continue;
        }
        let truth = Truth { ordering, chi_min_achieved: chi, kraus_rank: kraus_rank(&process)?, notes };
        return Ok(Synthetic { comb, process, truth });
    }
    Err(Error::Generation(format!(
        "no draw met chi_min_target {} within {MAX_ATTEMPTS} attempts (best {best})",
        spec.chi_min_target
    )))
}

/// Smallest nonzero correlation relevant to the family, and whether the
/// draw is acceptable.
fn accept(spec: &SynthSpec, p: &ProcessMatrix, ordering: &[Step]) -> Result<(f64, bool)> {
    let target = spec.chi_min_target;
    let chi = match spec.family {
        Family::IsometricChain => {
            let mut values = probed_correlations(p, ordering)?;
            let found = unravel_general_c(p, &UnravelParams::default())?;
            values.extend(probed_correlations(p, &found.steps)?);
            smallest_nonzero(&values)
        }
        Family::TotalOrderChain => {
            // Every input must influence its own and every later output.
            let mut min = f64::INFINITY;
            for (i, si) in ordering.iter().enumerate() {
                for sj in &ordering[i..] {
                    let v = chi1(p, &[si.inputs[0].as_str()], &[sj.outputs[0].as_str()])?;
                    if v <= ZERO_CORRELATION {
                        return Ok((0.0, false));
                    }
                    min = min.min(v);
                }
            }
            min
        }
        Family::Memoryless => {
            let mut values = Vec::new();
            for s in ordering {
                values.push(chi1(p, &[s.inputs[0].as_str()], &[s.outputs[0].as_str()])?);
            }
            smallest_nonzero(&values)
        }
        Family::EntanglingC2 => {
            let found = unravel_general_c(p, &UnravelParams { c: 2, ..Default::default() })?;
            if found.steps != ordering {
                return Ok((0.0, false));
            }
            smallest_nonzero(&probed_correlations(p, ordering)?)
        }
    };
    if !chi.is_finite() {
        // No nonzero correlation to protect.
        return Ok((0.0, true));
    }
    Ok((chi, chi >= target))
}

/// Memoryless product of `n` random channels on `d`-dimensional wires with
/// outputs assigned by a random permutation; `n_constant` of them ignore
/// their input.
pub fn random_memoryless(n: usize, d: usize, n_constant: usize, chi_min_target: f64, seed: u64) -> Result<Synthetic> {
    random_comb(&SynthSpec { family: Family::Memoryless, n, d, d_mem: 1, d_env: 1, chi_min_target, seed, n_constant })
}

/// Chain in which each tooth partially swaps its input into a memory of the
/// same dimension, so every input reaches its own and all later outputs.
pub fn total_order_chain(n: usize, d: usize, chi_min_target: f64, seed: u64) -> Result<Synthetic> {
    random_comb(&SynthSpec { family: Family::TotalOrderChain, n, d, d_mem: d, d_env: d, chi_min_target, seed, n_constant: 0 })
}
