//! Executable certificates for the checkable claims of the construction.
//!
//! Every claim is a [`Claim`] strategy registered by id in a [`ClaimRegistry`].
//! A run produces a [`Certificate`] whose verdict and margin depend only on the
//! ladder, the claim's own settings and the seed.

mod algebra;
mod bounds;
mod convergence;
mod dynamics;
mod linearized;
mod sampling;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::field::RadiusLadder;

pub use algebra::{certify_nilpotent_sets, certify_spectral, NilpotentClaim, SpectralClaim};
pub use bounds::{certify_bounds, certify_frechet_zero, BoundsClaim, FrechetClaim};
pub use convergence::{certify_euler_order, EulerOrderClaim};
pub use dynamics::{
    certify_envelope, certify_global, certify_step1, certify_step2, envelope_crossing_time,
    shell_runs, EnvelopeClaim, GlobalClaim, ShellRun, Step1Claim, Step2Claim,
};
pub use linearized::{certify_linearized, norm_sweep, LinearizedClaim, SweepPoint};
pub use sampling::{ic_rng, random_direction, shell_ic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Self::Pass
    }
}

/// Outcome of one claim.
///
/// `margin_log` is the worst log-space slack over everything checked; it is
/// negative exactly when some inequality failed. `witness` records the input
/// that realised it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub claim: String,
    pub params: Value,
    pub verdict: Verdict,
    pub margin_log: f64,
    pub witness: Value,
    pub runtime_ms: u64,
}

impl Certificate {
    pub fn new(claim: &str, params: Value, ok: bool, margin_log: f64, witness: Value) -> Self {
        let witness = if !ok && witness.is_null() {
            Value::String("no witness recorded".into())
        } else {
            witness
        };
        Self {
            claim: claim.to_string(),
            params,
            verdict: Verdict::from_bool(ok),
            margin_log,
            witness,
            runtime_ms: 0,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    /// Equal up to wall-clock time; margins compared bit for bit.
    pub fn same_outcome(&self, other: &Certificate) -> bool {
        self.claim == other.claim
            && self.params == other.params
            && self.verdict == other.verdict
            && self.margin_log.to_bits() == other.margin_log.to_bits()
            && self.witness == other.witness
    }
}

/// A checkable claim.
pub trait Claim: Send + Sync {
    fn id(&self) -> &'static str;

    fn summary(&self) -> &'static str;

    fn certify(&self, ladder: &RadiusLadder, seed: u64) -> Result<Certificate>;
}

/// Claims by id.
pub struct ClaimRegistry {
    claims: BTreeMap<&'static str, Box<dyn Claim>>,
}

impl Default for ClaimRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(NilpotentClaim::default()));
        reg.register(Box::new(SpectralClaim::default()));
        reg.register(Box::new(BoundsClaim::default()));
        reg.register(Box::new(FrechetClaim::default()));
        reg.register(Box::new(EnvelopeClaim::default()));
        reg.register(Box::new(Step1Claim::default()));
        reg.register(Box::new(Step2Claim::default()));
        reg.register(Box::new(GlobalClaim::default()));
        reg.register(Box::new(LinearizedClaim::default()));
        reg.register(Box::new(EulerOrderClaim::default()));
        reg
    }
}

impl ClaimRegistry {
    pub fn empty() -> Self {
        Self { claims: BTreeMap::new() }
    }

    pub fn register(&mut self, claim: Box<dyn Claim>) {
        self.claims.insert(claim.id(), claim);
    }

    pub fn get(&self, id: &str) -> Result<&dyn Claim> {
        self.claims
            .get(id)
            .map(|c| c.as_ref())
            .ok_or_else(|| Error::UnknownClaim(id.to_string()))
    }

    pub fn ids(&self) -> Vec<&'static str> {
        self.claims.keys().copied().collect()
    }

    /// Runs one claim and stamps its wall-clock time.
    pub fn run(&self, id: &str, ladder: &RadiusLadder, seed: u64) -> Result<Certificate> {
        let claim = self.get(id)?;
        let start = Instant::now();
        let mut cert = claim.certify(ladder, seed)?;
        cert.runtime_ms = start.elapsed().as_millis() as u64;
        Ok(cert)
    }

    /// Runs the selected claims concurrently; the report keeps selection order.
    pub fn run_suite(&self, ids: &[&str], ladder: &RadiusLadder, seed: u64) -> Result<SuiteReport> {
        for id in ids {
            self.get(id)?;
        }
        let certificates = ids
            .par_iter()
            .map(|id| self.run(id, ladder, seed))
            .collect::<Result<Vec<_>>>()?;
        Ok(SuiteReport::new(seed, certificates))
    }
}

/// Aggregate of a suite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub passed: usize,
    pub failed: usize,
    pub certificates: Vec<Certificate>,
}

impl SuiteReport {
    pub fn new(seed: u64, certificates: Vec<Certificate>) -> Self {
        let passed = certificates.iter().filter(|c| c.passed()).count();
        Self { seed, passed, failed: certificates.len() - passed, certificates }
    }

    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn failing_claims(&self) -> Vec<&str> {
        self.certificates.iter().filter(|c| !c.passed()).map(|c| c.claim.as_str()).collect()
    }
}

/// Smallest of a set of margins; `+inf` for none.
pub(crate) fn worst(margins: impl IntoIterator<Item = f64>) -> f64 {
    margins.into_iter().fold(f64::INFINITY, |a, b| if b < a || b.is_nan() { b } else { a })
}
