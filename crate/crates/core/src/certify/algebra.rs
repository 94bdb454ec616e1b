//! Nilpotency of the classes `Omega_k` and the spectral radius of `W_eps`.

use rand::Rng;
use serde_json::json;

use super::sampling::ic_rng;
use super::{worst, Certificate, Claim};
use crate::error::{Error, Result};
use crate::field::RadiusLadder;
use crate::kakutani::{compose, gelfand_estimate, power_norm_log, truncate, OmegaClass, TruncatedShift, WeightRule};

/// Random member of `Omega_k`: weights uniform in `[0, k0)`, zero where mandated.
fn random_member<R: Rng>(rng: &mut R, class: OmegaClass, k0: f64, dim: usize) -> Result<TruncatedShift> {
    let weights = (1..dim)
        .map(|n| if class.requires_zero(n) { 0.0 } else { k0 * rng.random::<f64>() })
        .collect();
    TruncatedShift::new(weights)
}

/// Every product of `2^k` random members of `Omega_k` is exactly zero, for
/// `k = 1..=kmax`, and `(W_eps - L_k)^(2^k - 1)` is not.
///
/// Zero is checked twice: structurally through the log entries of the
/// composed band, and by pushing an all-ones vector through the factors in
/// floating point.
pub fn certify_nilpotent_sets(k0: f64, kmax: u32, trials: usize, dim: usize, seed: u64) -> Result<Certificate> {
    if dim < (1usize << kmax) + 2 {
        return Err(Error::InvalidParameter(format!(
            "dimension {dim} is below 2^kmax + 2 = {}",
            (1usize << kmax) + 2
        )));
    }
    let params = json!({ "k0": k0, "kmax": kmax, "trials": trials, "dim": dim, "seed": seed });
    let mut failure = None;
    let mut index_margins = Vec::new();
    let mut index_rows = Vec::new();
    for k in 1..=kmax {
        let class = OmegaClass::new(k)?;
        let mut rng = ic_rng(seed, k as u64);
        for trial in 0..trials {
            let factors = (0..class.index())
                .map(|_| random_member(&mut rng, class, k0, dim))
                .collect::<Result<Vec<_>>>()?;
            let band = compose(&factors)?;
            let mut x = vec![1.0; dim];
            for f in factors.iter().rev() {
                x = f.apply(&x)?;
            }
            let numeric_zero = x.iter().all(|v| *v == 0.0);
            if (!band.is_zero() || !numeric_zero) && failure.is_none() {
                failure = Some(json!({
                    "k": k,
                    "trial": trial,
                    "first_nonzero_source": band.first_nonzero(),
                    "numeric_zero": numeric_zero,
                }));
            }
        }
        let w = truncate(&WeightRule::without_level(k0, k)?, dim)?;
        let power = compose(&vec![w; class.index() - 1])?;
        let peak = power.log_entries().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if power.is_zero() && failure.is_none() {
            failure = Some(json!({ "k": k, "index_power_is_zero": true }));
        }
        index_margins.push(peak);
        index_rows.push(json!({ "k": k, "power": class.index() - 1, "max_log_entry": peak, "first_nonzero_source": power.first_nonzero() }));
    }
    let ok = failure.is_none();
    let margin = if ok { worst(index_margins) } else { f64::NEG_INFINITY };
    let witness = failure.unwrap_or_else(|| json!({ "index_powers": index_rows }));
    Ok(Certificate::new("nilpotent", params, ok, margin, witness))
}

/// Gelfand estimates `log ||W_eps^(2^p - 1)||^(1/(2^p - 1))` are positive,
/// strictly decreasing and below `threshold` at `p = check_p`; brute-force
/// sliding windows reproduce the closed form for `p <= brute_pmax`.
pub fn certify_spectral(k0: f64, pmax: u32, check_p: u32, threshold: f64, brute_pmax: u32) -> Result<Certificate> {
    let params = json!({ "k0": k0, "pmax": pmax, "check_p": check_p, "threshold": threshold, "brute_pmax": brute_pmax });
    let full = WeightRule::full(k0)?;
    let estimates: Vec<f64> = (1..=pmax).map(|p| gelfand_estimate(k0, p)).collect();
    let mut failure = None;
    for (i, g) in estimates.iter().enumerate() {
        if !(*g > 0.0) {
            failure.get_or_insert(json!({ "p": i + 1, "estimate": g, "reason": "not positive" }));
        }
        if i > 0 && !(*g < estimates[i - 1]) {
            failure.get_or_insert(json!({ "p": i + 1, "estimate": g, "reason": "not decreasing" }));
        }
    }
    let at_check = estimates[(check_p - 1) as usize];
    if !(at_check < threshold) {
        failure.get_or_insert(json!({ "p": check_p, "estimate": at_check, "reason": "above threshold" }));
    }
    let mut worst_rel: f64 = 0.0;
    for p in 1..=brute_pmax {
        let n = (1usize << p) - 1;
        let brute = power_norm_log(&full, n, 1usize << (p + 1))? / n as f64;
        let closed = estimates[(p - 1) as usize];
        let rel = (brute - closed).abs() / closed.abs();
        worst_rel = worst_rel.max(rel);
        if !(rel <= 1e-12) {
            failure.get_or_insert(json!({ "p": p, "brute": brute, "closed": closed, "reason": "brute force mismatch" }));
        }
    }
    let ok = failure.is_none();
    let witness = failure.unwrap_or_else(|| json!({ "estimates": estimates, "worst_brute_rel": worst_rel }));
    Ok(Certificate::new("spectral", params, ok, (threshold / at_check).ln(), witness))
}

pub struct NilpotentClaim {
    pub kmax: u32,
    pub trials: usize,
    pub dim: usize,
}

impl Default for NilpotentClaim {
    fn default() -> Self {
        Self { kmax: 6, trials: 100, dim: 256 }
    }
}

impl Claim for NilpotentClaim {
    fn id(&self) -> &'static str {
        "nilpotent"
    }

    fn summary(&self) -> &'static str {
        "products of 2^k members of Omega_k vanish; (W - L_k)^(2^k - 1) does not"
    }

    fn certify(&self, ladder: &RadiusLadder, seed: u64) -> Result<Certificate> {
        certify_nilpotent_sets(ladder.k0(), self.kmax, self.trials, self.dim, seed)
    }
}

pub struct SpectralClaim {
    pub pmax: u32,
    pub check_p: u32,
    pub threshold: f64,
    pub brute_pmax: u32,
}

impl Default for SpectralClaim {
    fn default() -> Self {
        Self { pmax: 25, check_p: 20, threshold: 1e-3, brute_pmax: 6 }
    }
}

impl Claim for SpectralClaim {
    fn id(&self) -> &'static str {
        "spectral"
    }

    fn summary(&self) -> &'static str {
        "Gelfand estimates of W_eps decrease to log rho = 0"
    }

    fn certify(&self, ladder: &RadiusLadder, _seed: u64) -> Result<Certificate> {
        certify_spectral(ladder.k0(), self.pmax, self.check_p, self.threshold, self.brute_pmax)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nilpotent_small_run_passes() {
        let c = certify_nilpotent_sets(2.0, 4, 10, 32, 7).unwrap();
        assert!(c.passed(), "{:?}", c.witness);
        assert!(c.margin_log.is_finite());
    }

    #[test]
    fn nilpotent_rejects_small_dimension() {
        assert!(certify_nilpotent_sets(2.0, 6, 1, 64, 0).is_err());
    }

    #[test]
    fn spectral_defaults_pass() {
        let c = certify_spectral(2.0, 25, 20, 1e-3, 6).unwrap();
        assert!(c.passed(), "{:?}", c.witness);
    }

    #[test]
    fn spectral_threshold_is_sensitive() {
        let c = certify_spectral(2.0, 25, 5, 1e-3, 3).unwrap();
        assert!(!c.passed());
        assert!(c.margin_log < 0.0);
    }
}
