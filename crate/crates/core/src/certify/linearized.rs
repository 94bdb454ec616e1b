//! Transient growth of the linearized flow against decay of the nonlinear one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::dynamics::shell_runs;
use super::{Certificate, Claim};
use crate::error::Result;
use crate::field::RadiusLadder;
use crate::flow::{NormEstimate, PropagatorOperator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t: f64,
    pub n: usize,
    /// `log ||exp(t (-gamma I + W_N))||`.
    pub log_norm: f64,
}

/// Power-iteration norms of the truncated propagator on the grid `ts x ns`.
///
/// Each `t` row walks `ns` in order and warm-starts from the previous optimum,
/// so the estimates never decrease along a row of increasing `N`.
pub fn norm_sweep(ts: &[f64], ns: &[usize], k0: f64, gamma: f64, seed: u64) -> Result<Vec<SweepPoint>> {
    let rows: Vec<Vec<SweepPoint>> = ts
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut prev: Option<NormEstimate> = None;
            let mut row = Vec::with_capacity(ns.len());
            for &n in ns {
                let op = PropagatorOperator::new(n, t, k0, gamma)?;
                let est = op.log_norm(seed.wrapping_add(i as u64), 3, prev.as_ref().map(|p| p.vector.as_slice()));
                row.push(SweepPoint { t, n, log_norm: est.log_norm });
                prev = Some(est);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// `||exp(t DF(0))||` on the truncation exceeds `threshold` somewhere on the grid
/// and is nondecreasing in `N` at every `t`, while nonlinear trajectories from
/// shell `contrast_k` fall below `r_{k+2}`.
pub fn certify_linearized(
    ladder: &RadiusLadder,
    ts: &[f64],
    ns: &[usize],
    threshold: f64,
    contrast_k: usize,
    contrast_ics: usize,
    seed: u64,
) -> Result<Certificate> {
    let (k0, gamma) = (ladder.k0(), ladder.gamma());
    let params = json!({
        "ts": ts, "ns": ns, "threshold": threshold,
        "contrast_k": contrast_k, "contrast_ics": contrast_ics, "seed": seed,
    });
    let sweep = norm_sweep(ts, ns, k0, gamma, seed)?;
    let best = sweep
        .iter()
        .max_by(|a, b| a.log_norm.total_cmp(&b.log_norm))
        .cloned()
        .expect("non-empty grid");
    let mut failure = None;
    for pair in sweep.windows(2) {
        if pair[0].t == pair[1].t && pair[1].log_norm < pair[0].log_norm {
            failure.get_or_insert(json!({ "reason": "norm decreased in N", "from": pair[0], "to": pair[1] }));
        }
    }
    if best.log_norm < threshold.ln() {
        failure.get_or_insert(json!({ "reason": "no growth above threshold", "best": best }));
    }

    let dim = 256;
    let runs = shell_runs(ladder, contrast_k, contrast_ics, dim, dim / 2, contrast_k + 2, 1e-9, seed)?;
    let decayed = runs.iter().filter(|r| r.hit(contrast_k + 2).is_some()).count();
    if decayed != runs.len() {
        failure.get_or_insert(json!({ "reason": "nonlinear trajectory did not decay", "decayed": decayed, "runs": runs.len() }));
    }

    let ok = failure.is_none();
    let witness = failure.unwrap_or_else(|| {
        json!({ "best": best, "sweep": sweep, "nonlinear_decayed": decayed })
    });
    Ok(Certificate::new("linearized", params, ok, best.log_norm - threshold.ln(), witness))
}

pub struct LinearizedClaim {
    pub ts: Vec<f64>,
    pub ns: Vec<usize>,
    pub threshold: f64,
    pub contrast_k: usize,
    pub contrast_ics: usize,
}

impl Default for LinearizedClaim {
    fn default() -> Self {
        Self {
            ts: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            ns: vec![64, 128, 256, 512, 1024, 2048, 4096],
            threshold: 10.0,
            contrast_k: 4,
            contrast_ics: 8,
        }
    }
}

impl Claim for LinearizedClaim {
    fn id(&self) -> &'static str {
        "linearized"
    }

    fn summary(&self) -> &'static str {
        "the linearized flow grows past the threshold while nonlinear trajectories decay"
    }

    fn certify(&self, ladder: &RadiusLadder, seed: u64) -> Result<Certificate> {
        certify_linearized(ladder, &self.ts, &self.ns, self.threshold, self.contrast_k, self.contrast_ics, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_rows_are_monotone() {
        let pts = norm_sweep(&[2.0, 6.0], &[8, 16, 32], 2.0, 0.5, 4).unwrap();
        assert_eq!(pts.len(), 6);
        for w in pts.windows(2) {
            if w[0].t == w[1].t {
                assert!(w[1].log_norm >= w[0].log_norm);
            }
        }
    }
}
