use crate::error::{Error, Result};
use crate::sampling::swap_test_shots;

use super::{RankCertificate, UnravelParams, DEFAULT_ETA_MAX};

/// Acceptance threshold and SWAP-test precision used by the sampled
/// last-tooth check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub delta: f64,
    pub eps: f64,
    /// Failure probability allowed per check.
    pub kappa: f64,
    pub shots: u64,
}

/// Thresholds for a process with `n` steps and largest input dimension
/// `d_a`. With a Kraus-rank bound `r`: `delta = chi_min^2 / (8 d_a r)` and
/// `eps = delta / 5`. Without one: `delta = 2 eta_max^2` and
/// `eps = delta / 4`. Each check may fail with probability
/// `kappa0 / (3 n^3)`.
pub fn sampled_thresholds(params: &UnravelParams, n: usize, d_a: usize) -> Result<Thresholds> {
    params.validate()?;
    let n = n.max(1) as f64;
    let kappa = params.kappa0 / (3.0 * n.powi(3));
    let (delta, eps) = match params.rank_bound {
        Some(r) => {
            let delta = params.chi_min.powi(2) / (8.0 * d_a as f64 * r as f64);
            (delta, delta / 5.0)
        }
        None => {
            let eta = params.eta_max.unwrap_or(DEFAULT_ETA_MAX);
            if eta <= 0.0 {
                return Err(Error::InvalidParameter("eta_max must be positive in sampled mode".into()));
            }
            let delta = 2.0 * eta * eta;
            (delta, delta / 4.0)
        }
    };
    let delta = params.delta.unwrap_or(delta);
    let eps = params.eps.unwrap_or(eps);
    Ok(Thresholds { delta, eps, kappa, shots: swap_test_shots(eps, kappa)? })
}

/// Largest trace-norm correlation compatible with an accepted check whose
/// three SWAP estimates were each within `eps`.
pub fn lemma_true_upper_bound(d_a: usize, rank: usize, delta: f64, eps: f64) -> f64 {
    (4.0 * d_a as f64 * rank as f64 * (delta + 4.0 * eps)).sqrt()
}

/// Correlation lower bound implied by a rejected check with SWAP estimates
/// each within `eps`.
pub fn lemma_false_lower_bound(delta: f64, eps: f64) -> f64 {
    (2.0 * (delta - 4.0 * eps)).max(0.0).sqrt()
}

/// Constant in the Hoeffding exponent of the pairwise correlation
/// estimator: `sqrt(l_F l_G) / (sqrt(d_a^2 d_b^2 + 4 d_b^2 + 4 d_a^2) d_a d_b)`.
pub fn ind_xi(d_a: usize, d_b: usize, lambda_f: f64, lambda_g: f64) -> f64 {
    let (a, b) = (d_a as f64, d_b as f64);
    (lambda_f * lambda_g).sqrt() / ((a * a * b * b + 4.0 * b * b + 4.0 * a * a).sqrt() * a * b)
}

/// Rows needed so that all `n_pairs` correlation estimates are within
/// `eps0` with joint failure probability at most `kappa0`.
pub fn ind_sample_size(d_a: usize, d_b: usize, lambda_f: f64, lambda_g: f64, eps0: f64, kappa0: f64, n_pairs: usize) -> Result<u64> {
    if !(eps0 > 0.0) || !(kappa0 > 0.0 && kappa0 < 1.0) || n_pairs == 0 {
        return Err(Error::InvalidParameter("need eps0 > 0, 0 < kappa0 < 1 and at least one pair".into()));
    }
    let (a, b) = ((d_a * d_a) as f64, (d_b * d_b) as f64);
    let xi = ind_xi(d_a, d_b, lambda_f, lambda_g);
    let prefactor = 2.0 * (a * b + a + b) * n_pairs as f64;
    Ok(((prefactor / kappa0).ln() / (2.0 * xi * xi * eps0 * eps0)).ceil() as u64)
}

/// Distance bound for an unravelling accepted under soft-rank certificates:
/// `8 sqrt(2) m r_max^{1/4} eta_max^{1/2}`, or 0 without certified steps.
pub fn error_bound_approximate(cert: &RankCertificate, m: usize) -> f64 {
    if cert.entries.is_empty() {
        return 0.0;
    }
    let r = cert.entries.iter().map(|e| e.r).max().unwrap_or(1) as f64;
    let eta = cert.entries.iter().map(|e| e.eta).fold(0.0, f64::max);
    8.0 * 2f64.sqrt() * m as f64 * r.powf(0.25) * eta.sqrt()
}
