use serde::{Deserialize, Serialize};

use super::ladder::RadiusLadder;
use super::modulation::{modulation, ModulationState};
use crate::error::{Error, Result};
use crate::kakutani::{epsilon, level_of};
use crate::numerics::{dot, ln_norm, norm};

/// Levels tracked by a [`Generator`]; positions beyond `2^63` never occur.
const LEVELS: usize = 65;

/// Which right-hand side a [`VectorField`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// `(-gamma I + W_eps - L(|x|)) x`.
    Nonlinear,
    /// `DF(0) x = (-gamma I + W_eps) x`.
    Linearized,
    /// `-gamma x`.
    DecayOnly,
}

/// Frozen linear operator `-gamma I + W` where `W` is a weighted shift whose
/// weight depends only on the level of the position.
#[derive(Debug, Clone)]
pub struct Generator {
    gamma: f64,
    level_weights: [f64; LEVELS],
}

impl Generator {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn level_weight(&self, m: usize) -> f64 {
        self.level_weights[m]
    }

    /// Weight at 1-based position `n`.
    pub fn weight(&self, n: usize) -> f64 {
        self.level_weights[level_of(n)]
    }

    /// `out = (-gamma I + W) x`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), out.len());
        out[0] = -self.gamma * x[0];
        for i in 1..x.len() {
            out[i] = -self.gamma * x[i] + self.level_weights[level_of(i)] * x[i - 1];
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        out
    }

    /// `out = (-gamma I + W)^T y`.
    pub fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        let n = y.len();
        for i in 0..n - 1 {
            out[i] = -self.gamma * y[i] + self.level_weights[level_of(i + 1)] * y[i + 1];
        }
        out[n - 1] = -self.gamma * y[n - 1];
    }

    /// The shift part only (no `-gamma I`).
    pub fn shift_part(&self) -> Generator {
        Generator { gamma: 0.0, level_weights: self.level_weights }
    }
}

/// Position of `|x|` relative to the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shell {
    /// `|x| >= r_1`.
    Above,
    /// `r_{k+1} <= |x| < r_k`.
    Index(usize),
    /// `|x| < r_kmax`.
    Below,
}

impl std::fmt::Display for Shell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shell::Above => write!(f, "above"),
            Shell::Index(k) => write!(f, "{k}"),
            Shell::Below => write!(f, "below"),
        }
    }
}

/// Half-open shell lookup by binary search over the decreasing `log r_k`.
pub fn shell_index(s_log: f64, ladder: &RadiusLadder) -> Shell {
    let count = ladder.r_logs().partition_point(|&r| r > s_log);
    if count == 0 {
        Shell::Above
    } else if count == ladder.kmax() {
        Shell::Below
    } else {
        Shell::Index(count)
    }
}

/// The right-hand side `F` together with its derivative action.
#[derive(Debug, Clone)]
pub struct VectorField {
    ladder: RadiusLadder,
    kind: FieldKind,
}

impl VectorField {
    pub fn new(ladder: RadiusLadder) -> Self {
        Self { ladder, kind: FieldKind::Nonlinear }
    }

    pub fn with_kind(ladder: RadiusLadder, kind: FieldKind) -> Self {
        Self { ladder, kind }
    }

    pub fn ladder(&self) -> &RadiusLadder {
        &self.ladder
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.ladder.gamma()
    }

    pub fn k0(&self) -> f64 {
        self.ladder.k0()
    }

    /// `-gamma I + W_eps`.
    pub fn linearization(&self) -> Generator {
        let k0 = self.k0();
        let mut level_weights = [0.0; LEVELS];
        for (m, w) in level_weights.iter_mut().enumerate().skip(1) {
            *w = epsilon(k0, m as u32);
        }
        Generator { gamma: self.gamma(), level_weights }
    }

    /// Frozen operator `A(s) = -gamma I + W_eps - L(s)` at `s = exp(s_log)`.
    pub fn generator(&self, s_log: f64) -> Result<Generator> {
        match self.kind {
            FieldKind::Linearized => Ok(self.linearization()),
            FieldKind::DecayOnly => Ok(Generator { gamma: self.gamma(), level_weights: [0.0; LEVELS] }),
            FieldKind::Nonlinear => {
                let state = modulation(s_log, &self.ladder)?;
                Ok(self.generator_from(&state))
            }
        }
    }

    pub fn generator_from(&self, state: &ModulationState) -> Generator {
        let mut g = self.linearization();
        for m in 1..=state.max_level().min(LEVELS - 1) {
            g.level_weights[m] *= 1.0 - state.multiplier(m);
        }
        g
    }

    /// `s L'(s)` as a pure weighted shift (zero for the linear kinds).
    pub fn log_derivative_shift(&self, s_log: f64) -> Result<Generator> {
        let mut level_weights = [0.0; LEVELS];
        if self.kind == FieldKind::Nonlinear {
            let state = modulation(s_log, &self.ladder)?;
            for m in 1..=state.max_level().min(LEVELS - 1) {
                level_weights[m] = epsilon(self.k0(), m as u32) * state.log_derivative(m);
            }
        }
        Ok(Generator { gamma: 0.0, level_weights })
    }

    /// `F(x)`; `F(0) = 0`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != out.len() || x.is_empty() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: out.len() });
        }
        let s_log = ln_norm(x);
        if s_log == f64::NEG_INFINITY {
            out.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        self.generator(s_log)?.apply_into(x, out);
        Ok(())
    }

    /// `G(x) = L(|x|) x`, the part removed from the linearization.
    pub fn nonlinear_part(&self, x: &[f64]) -> Result<Vec<f64>> {
        let s_log = ln_norm(x);
        if s_log == f64::NEG_INFINITY || self.kind != FieldKind::Nonlinear {
            return Ok(vec![0.0; x.len()]);
        }
        let lin = self.linearization().shift_part().apply(x);
        let mut eff = vec![0.0; x.len()];
        self.generator(s_log)?.shift_part().apply_into(x, &mut eff);
        Ok(lin.iter().zip(&eff).map(|(a, b)| a - b).collect())
    }

    /// `DF(x)[y] = A(|x|) y - (s L'(s)) x * <x, y> / |x|^2`, and
    /// `DF(0)[y] = (-gamma I + W_eps) y`.
    pub fn jacobian_action(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
        }
        let nx = norm(x);
        if nx == 0.0 {
            return Ok(self.linearization().apply(y));
        }
        let s_log = ln_norm(x);
        let mut out = self.generator(s_log)?.apply(y);
        let coeff = dot(&x.iter().map(|v| v / nx).collect::<Vec<_>>(), y) / nx;
        if coeff != 0.0 {
            let radial = self.log_derivative_shift(s_log)?.apply(x);
            for (o, r) in out.iter_mut().zip(&radial) {
                *o -= coeff * r;
            }
        }
        Ok(out)
    }
}
