//! Causal unravelling algorithms.
//!
//! * [`unravel_recursive`] and [`unravel_general_c`] peel last teeth off a
//!   process one at a time, either with exact factorisation tests or with
//!   SWAP-test estimates of Hilbert-Schmidt distances.
//! * [`unravel_total_order`] and [`unravel_memoryless`] only look at
//!   single-wire correlations estimated from local IC measurements.

mod bounds;
mod local;
mod recursive;

use serde::{Deserialize, Serialize};

use crate::channel::Step;
use crate::error::{Error, Result};

pub use bounds::{
    error_bound_approximate, ind_sample_size, ind_xi, lemma_false_lower_bound, lemma_true_upper_bound,
    sampled_thresholds, Thresholds,
};
pub use local::{
    chi1_from_frequencies, choi_distance, estimate_chi1, independence_matrix, memoryless_surrogate, unravel_memoryless,
    unravel_total_order, IndMatrix, MemorylessResult, Statistics,
};
pub use recursive::{check_last, check_rank_certificate, unravel_general_c, unravel_recursive, CheckOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Sampled,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "sampled" => Ok(Mode::Sampled),
            other => Err(Error::InvalidParameter(format!("unknown mode `{other}`"))),
        }
    }
}

/// Default soft-rank tolerance in sampled mode without a rank bound.
pub const DEFAULT_ETA_MAX: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnravelParams {
    /// Smallest nonzero correlation the process is promised to have.
    pub chi_min: f64,
    /// Overall failure probability.
    pub kappa0: f64,
    pub mode: Mode,
    /// Largest number of inputs or outputs in one step.
    pub c: usize,
    /// Overrides of the derived acceptance threshold and SWAP precision.
    pub delta: Option<f64>,
    pub eps: Option<f64>,
    /// Upper bound on the Kraus rank of the process.
    pub rank_bound: Option<usize>,
    /// Soft-rank tolerance used for certificates and, without a rank bound,
    /// for the sampled thresholds.
    pub eta_max: Option<f64>,
    /// When set, a candidate is accepted only if the soft rank of its
    /// marginal is at most this value.
    pub r_max: Option<usize>,
    /// Tolerance of the exact last-tooth test.
    pub tol: f64,
    pub seed: u64,
}

impl Default for UnravelParams {
    fn default() -> Self {
        Self {
            chi_min: 0.1,
            kappa0: 0.05,
            mode: Mode::Exact,
            c: 1,
            delta: None,
            eps: None,
            rank_bound: None,
            eta_max: None,
            r_max: None,
            tol: crate::channel::FACTOR_TOL,
            seed: 0,
        }
    }
}

impl UnravelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.chi_min > 0.0) {
            return Err(Error::InvalidParameter(format!("chi_min must be positive, got {}", self.chi_min)));
        }
        if !(self.kappa0 > 0.0 && self.kappa0 < 1.0) {
            return Err(Error::InvalidParameter(format!("kappa0 must lie in (0, 1), got {}", self.kappa0)));
        }
        if self.c == 0 {
            return Err(Error::InvalidParameter("c must be at least 1".into()));
        }
        if self.rank_bound == Some(0) || self.r_max == Some(0) {
            return Err(Error::InvalidParameter("rank bounds must be at least 1".into()));
        }
        for (name, v) in [("delta", self.delta), ("eps", self.eps), ("eta_max", self.eta_max)] {
            if let Some(x) = v {
                if !(x >= 0.0) || (name != "eta_max" && x == 0.0) {
                    return Err(Error::InvalidParameter(format!("{name} out of range: {x}")));
                }
            }
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be non-negative, got {}", self.tol)));
        }
        Ok(())
    }

    /// Soft-rank tolerance recorded in certificates.
    pub fn certificate_eta(&self) -> f64 {
        self.eta_max.unwrap_or(match self.mode {
            Mode::Exact => 0.0,
            Mode::Sampled => DEFAULT_ETA_MAX,
        })
    }
}

/// Soft rank of the marginal tested when step `k` (1-based, earliest first)
/// was accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertEntry {
    pub k: usize,
    pub eta: f64,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankCertificate {
    pub entries: Vec<CertEntry>,
}

/// Sampling budget of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub delta: f64,
    pub eps: f64,
    pub kappa: f64,
    pub shots_per_estimate: u64,
    pub max_queries: u64,
}

/// Output of every unravelling algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnravelReport {
    pub algorithm: String,
    pub steps: Vec<Step>,
    pub mode: Mode,
    pub queries: u64,
    pub warnings: Vec<String>,
    pub certificate: Vec<CertEntry>,
    pub error_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<Budget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independence: Option<IndMatrix>,
}

impl UnravelReport {
    pub fn unravelling(&self) -> crate::channel::Unravelling {
        crate::channel::Unravelling::new(self.steps.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
