use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{modulation, q_log, shell_index, FieldKind, RadiusLadder, Shell, VectorField};
use crate::numerics::{ln_exp_taylor_with, ln_factorial_table, ln_norm, norm};

/// Default distance of the tail guard from the end of the truncation.
pub const GUARD_MARGIN: usize = 8;

/// Truncated `l2` state. Components past `tail_guard` (1-based) must stay
/// negligible relative to `|x|` for the truncation to be trusted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    components: Vec<f64>,
    tail_guard: usize,
}

impl StateVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        let guard = components.len().saturating_sub(GUARD_MARGIN).max(1);
        Self::with_guard(components, guard)
    }

    pub fn with_guard(components: Vec<f64>, tail_guard: usize) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::DimensionTooSmall(components.len()));
        }
        if tail_guard == 0 || tail_guard > components.len() {
            return Err(Error::InvalidParameter(format!(
                "tail guard {tail_guard} outside 1..={}",
                components.len()
            )));
        }
        if components.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("state has non-finite components".into()));
        }
        Ok(Self { components, tail_guard })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn into_components(self) -> Vec<f64> {
        self.components
    }

    pub fn tail_guard(&self) -> usize {
        self.tail_guard
    }

    pub fn norm(&self) -> f64 {
        norm(&self.components)
    }

    pub fn ln_norm(&self) -> f64 {
        ln_norm(&self.components)
    }

    /// First 1-based index past the guard with `|x_i| > tol |x|`.
    pub fn tail_breach(&self, tol: f64) -> Option<usize> {
        tail_breach(&self.components, self.tail_guard, tol * self.norm())
    }
}

pub(crate) fn tail_breach(x: &[f64], guard: usize, bound: f64) -> Option<usize> {
    x.iter()
        .enumerate()
        .skip(guard)
        .find(|(_, v)| v.abs() > bound)
        .map(|(i, _)| i + 1)
}

/// `x = exp(sigma) u` with `|u| = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRadialState {
    sigma: f64,
    direction: StateVector,
}

impl LogRadialState {
    /// Normalizes `direction`; rejects the zero vector.
    pub fn new(sigma: f64, direction: StateVector) -> Result<Self> {
        if !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("log-norm must be finite, got {sigma}")));
        }
        let n = direction.norm();
        if n == 0.0 {
            return Err(Error::InvalidParameter("direction must be nonzero".into()));
        }
        let guard = direction.tail_guard();
        let u: Vec<f64> = direction.into_components().into_iter().map(|v| v / n).collect();
        Ok(Self { sigma: sigma + 0.0, direction: StateVector::with_guard(u, guard)? })
    }

    pub fn from_state(x: &StateVector) -> Result<Self> {
        let sigma = x.ln_norm();
        if sigma == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter("the origin has no log-radial form".into()));
        }
        Self::new(sigma, x.clone())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn direction(&self) -> &StateVector {
        &self.direction
    }

    pub fn dim(&self) -> usize {
        self.direction.dim()
    }

    /// Cartesian form; underflows to zero components for very negative `sigma`.
    pub fn to_state(&self) -> StateVector {
        let scale = self.sigma.exp();
        let x = self.direction.components().iter().map(|v| v * scale).collect();
        StateVector { components: x, tail_guard: self.direction.tail_guard() }
    }
}

/// Starting point handed to an [`Integrator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    Cartesian(StateVector),
    Polar(LogRadialState),
}

impl InitialCondition {
    pub fn sigma(&self) -> f64 {
        match self {
            Self::Cartesian(x) => x.ln_norm(),
            Self::Polar(p) => p.sigma(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Cartesian(x) => x.dim(),
            Self::Polar(p) => p.dim(),
        }
    }

    pub fn is_origin(&self) -> bool {
        self.sigma() == f64::NEG_INFINITY
    }

    pub fn tail_guard(&self) -> usize {
        match self {
            Self::Cartesian(x) => x.tail_guard(),
            Self::Polar(p) => p.direction().tail_guard(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepControl {
    Fixed { h: f64 },
    Tolerance { tol: f64 },
}

/// Run controls shared by every integrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub t_end: f64,
    pub step: StepControl,
    /// Stop as soon as `log |x|` drops below this value.
    pub stop_below: Option<f64>,
    /// Relative size allowed past the tail guard.
    pub tail_tol: f64,
    /// `log |x|` below which `auto` switches to log-radial.
    pub handoff_log: f64,
    /// Lower clamp of `|x|` in the state-space error scale.
    pub error_floor: f64,
    pub max_steps: usize,
    /// Record every `sample_stride`-th step (the first and last are always kept).
    pub sample_stride: usize,
}

impl RunSpec {
    pub fn with_tolerance(t_end: f64, tol: f64) -> Self {
        Self { step: StepControl::Tolerance { tol }, ..Self::base(t_end) }
    }

    pub fn with_step(t_end: f64, h: f64) -> Self {
        Self { step: StepControl::Fixed { h }, ..Self::base(t_end) }
    }

    fn base(t_end: f64) -> Self {
        Self {
            t_end,
            step: StepControl::Tolerance { tol: 1e-8 },
            stop_below: None,
            tail_tol: 1e-12,
            handoff_log: (1e-200f64).ln(),
            error_floor: 1e-300,
            max_steps: 50_000_000,
            sample_stride: 1,
        }
    }

    pub fn stop_below(mut self, sigma: f64) -> Self {
        self.stop_below = Some(sigma);
        self
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride.max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidParameter(format!("t_end must be finite and >= 0, got {}", self.t_end)));
        }
        match self.step {
            StepControl::Fixed { h } if !(h > 0.0) => {
                Err(Error::InvalidParameter(format!("step h must be positive, got {h}")))
            }
            StepControl::Tolerance { tol } if !(tol > 0.0 && tol < 1.0) => {
                Err(Error::InvalidParameter(format!("tolerance must lie in (0, 1), got {tol}")))
            }
            _ => Ok(()),
        }
    }
}

/// Class-k decay envelope `log(p_{2^k - 1}(K0 t) e^(-gamma t))`.
pub fn envelope_log(k: usize, t: f64, k0: f64, gamma: f64) -> f64 {
    q_log((1usize << k) - 1, k0, gamma, t)
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    /// `log |x(t)|`.
    pub sigma: f64,
    pub shell: Shell,
    pub omega_min: Option<u32>,
    pub omega_max: Option<u32>,
    /// `sigma(0) + envelope_log(k, t)` for the class `k` of the starting shell.
    pub envelope_log: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum TerminalStatus {
    Completed,
    ReachedTarget,
    AtOrigin,
    LadderExhausted,
    TailGuardBreach { index: usize },
    StepLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorMeta {
    pub method: String,
    pub step: StepControl,
    pub steps: usize,
    pub rejected: usize,
    pub handoffs: usize,
    pub handoff_time: Option<f64>,
    /// Envelope class used for the `envelope_log` column.
    pub envelope_level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalState {
    Cartesian(Vec<f64>),
    Polar { sigma: f64, direction: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub meta: IntegratorMeta,
    pub status: TerminalStatus,
    pub final_time: f64,
    pub final_state: FinalState,
}

impl Trajectory {
    pub fn final_sigma(&self) -> f64 {
        match &self.final_state {
            FinalState::Cartesian(x) => ln_norm(x),
            FinalState::Polar { sigma, .. } => *sigma,
        }
    }

    pub fn max_sigma(&self) -> f64 {
        self.samples.iter().map(|s| s.sigma).fold(f64::NEG_INFINITY, f64::max)
    }

    /// First recorded time with `sigma < level`.
    pub fn first_time_below(&self, level: f64) -> Option<f64> {
        self.samples.iter().find(|s| s.sigma < level).map(|s| s.t)
    }

    pub const CSV_HEADER: &'static str =
        "t,sigma,shell,active_omega_min,active_omega_max,envelope_log,method";

    /// Deterministic CSV rendering, one row per sample.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        let opt = |v: Option<u32>| v.map(|k| k.to_string()).unwrap_or_default();
        for s in &self.samples {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.t,
                s.sigma,
                s.shell,
                opt(s.omega_min),
                opt(s.omega_max),
                s.envelope_log,
                self.meta.method
            )?;
        }
        Ok(())
    }
}

/// Builds [`Sample`]s relative to a starting point.
pub(crate) struct Sampler<'a> {
    ladder: &'a RadiusLadder,
    kind: FieldKind,
    t0: f64,
    sigma0: f64,
    level: usize,
    ln_fact: Vec<f64>,
}

impl<'a> Sampler<'a> {
    pub fn new(field: &'a VectorField, t0: f64, sigma0: f64) -> Self {
        let ladder = field.ladder();
        let level = match shell_index(sigma0, ladder) {
            Shell::Above => 2,
            Shell::Index(k) => k.max(2),
            Shell::Below => ladder.kmax(),
        };
        Self {
            ladder,
            kind: field.kind(),
            t0,
            sigma0,
            level,
            ln_fact: ln_factorial_table((1usize << level) - 1),
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn sample(&self, t: f64, sigma: f64) -> Sample {
        let (omega_min, omega_max) = if self.kind == FieldKind::Nonlinear {
            match modulation(sigma, self.ladder) {
                Ok(st) => {
                    let a = st.active_omegas();
                    (a.first().copied(), a.last().copied())
                }
                Err(_) => (None, None),
            }
        } else {
            (None, None)
        };
        let dt = t - self.t0;
        let n = (1usize << self.level) - 1;
        let env = ln_exp_taylor_with(n, self.ladder.k0() * dt, &self.ln_fact)
            - self.ladder.gamma() * dt;
        Sample {
            t,
            sigma,
            shell: shell_index(sigma, self.ladder),
            omega_min,
            omega_max,
            envelope_log: self.sigma0 + env,
        }
    }
}
