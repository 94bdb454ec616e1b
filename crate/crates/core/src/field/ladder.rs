use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ln_exp_taylor_with, ln_factorial_table, log_sum_exp};

/// Parameters of the nonlinear field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    pub k0: f64,
    pub gamma: f64,
    /// `log r_1`.
    pub r1_log: f64,
    /// Deepest ladder level materialized.
    pub kmax: usize,
    /// Truncation dimension of state vectors.
    pub dim: usize,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self { k0: 2.0, gamma: 0.5, r1_log: 0.0, kmax: 10, dim: 256 }
    }
}

impl FieldParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k0 > 1.0) || !self.k0.is_finite() {
            return Err(Error::InvalidParameter(format!("k0 must exceed 1, got {}", self.k0)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !self.r1_log.is_finite() {
            return Err(Error::InvalidParameter("r1_log must be finite".into()));
        }
        if self.kmax < 4 || self.kmax > 40 {
            return Err(Error::InvalidParameter(format!(
                "kmax must lie in [4, 40], got {}",
                self.kmax
            )));
        }
        if self.dim < 2 {
            return Err(Error::DimensionTooSmall(self.dim));
        }
        Ok(())
    }
}

/// `log q_n(t)` with `q_n(t) = p_n(K0 t) e^(-gamma t)`.
pub fn q_log(n: usize, k0: f64, gamma: f64, t: f64) -> f64 {
    ln_exp_taylor_with(n, k0 * t, &ln_factorial_table(n)) - gamma * t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QMax {
    pub t_star: f64,
    /// `log Q_n`.
    pub log_q: f64,
}

/// Maximizer and maximum of `q_n` over `t >= 0`.
///
/// The stationarity condition `K0 p_{n-1}(K0 t) = gamma p_n(K0 t)` is written as
/// `log(K0/gamma) + log(1 - (K0 t)^n / (n! p_n(K0 t))) = 0`, whose left side
/// decreases from `log(K0/gamma) > 0`; bisection runs to relative `1e-10`.
pub fn q_max(n: usize, k0: f64, gamma: f64) -> QMax {
    assert!(n >= 1 && k0 > gamma && gamma > 0.0);
    let ln_fact = ln_factorial_table(n);
    let stationarity = |t: f64| -> f64 {
        let z = k0 * t;
        if z == 0.0 {
            return (k0 / gamma).ln();
        }
        let lz = z.ln();
        let terms: Vec<f64> = (0..=n).map(|j| j as f64 * lz - ln_fact[j]).collect();
        let lse = log_sum_exp(&terms);
        (k0 / gamma).ln() + (-(terms[n] - lse).exp()).ln_1p()
    };
    let mut lo = 0.0;
    let mut hi = n as f64 / gamma + n as f64 / k0;
    while stationarity(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if stationarity(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_star = 0.5 * (lo + hi);
    QMax { t_star, log_q: ln_exp_taylor_with(n, k0 * t_star, &ln_fact) - gamma * t_star }
}

/// One exported ladder row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub k: usize,
    pub r_log: f64,
    pub q_log: f64,
    pub t_star: f64,
}

/// Radii `r_1 > r_2 > ...` in log space with the envelope maxima
/// `Q_{2^k - 1}` that define them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusLadder {
    params: FieldParams,
    r_log: Vec<f64>,
    q_log: Vec<f64>,
    t_star: Vec<f64>,
}

/// `r_k = min(r_{k-1} / 2, r_{k-1} / (2 Q_{2^k - 1}))`, evaluated in log space.
pub fn build_ladder(params: &FieldParams) -> Result<RadiusLadder> {
    params.validate()?;
    let maxima: Vec<QMax> = (1..=params.kmax)
        .map(|k| q_max((1usize << k) - 1, params.k0, params.gamma))
        .collect();
    let mut r_log = Vec::with_capacity(params.kmax);
    r_log.push(params.r1_log);
    for k in 2..=params.kmax {
        let prev = r_log[k - 2];
        r_log.push(prev - std::f64::consts::LN_2 - maxima[k - 1].log_q.max(0.0));
    }
    Ok(RadiusLadder {
        params: params.clone(),
        r_log,
        q_log: maxima.iter().map(|m| m.log_q).collect(),
        t_star: maxima.iter().map(|m| m.t_star).collect(),
    })
}

impl RadiusLadder {
    pub fn params(&self) -> &FieldParams {
        &self.params
    }

    pub fn kmax(&self) -> usize {
        self.params.kmax
    }

    pub fn k0(&self) -> f64 {
        self.params.k0
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    /// `log r_k` for `1 <= k <= kmax`.
    pub fn r_log(&self, k: usize) -> f64 {
        self.r_log[k - 1]
    }

    /// `log r_j` extended by `-inf` past the deepest level.
    pub(crate) fn r_log_ext(&self, j: usize) -> f64 {
        if j > self.kmax() {
            f64::NEG_INFINITY
        } else {
            self.r_log[j - 1]
        }
    }

    /// `log Q_{2^k - 1}`.
    pub fn q_log(&self, k: usize) -> f64 {
        self.q_log[k - 1]
    }

    pub fn t_star(&self, k: usize) -> f64 {
        self.t_star[k - 1]
    }

    pub fn r_logs(&self) -> &[f64] {
        &self.r_log
    }

    /// Smallest `log |x|` at which the field is fully determined: `log r_kmax`.
    pub fn floor_log(&self) -> f64 {
        self.r_log[self.kmax() - 1]
    }

    pub fn rows(&self) -> Vec<LadderRow> {
        (1..=self.kmax())
            .map(|k| LadderRow {
                k,
                r_log: self.r_log(k),
                q_log: self.q_log(k),
                t_star: self.t_star(k),
            })
            .collect()
    }
}
