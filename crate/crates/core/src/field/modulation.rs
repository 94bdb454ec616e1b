use serde::{Deserialize, Serialize};

use super::ladder::RadiusLadder;
use super::profile::smoothstep_log;
use crate::error::{Error, Result};
use crate::kakutani::{epsilon, WeightRule};

/// Level multipliers `c_m(s)` of `L(s) = sum_m c_m(s) L_m` at one radius.
///
/// `multipliers[m]` and `log_derivatives[m]` (`s dc_m/ds`) are indexed by level;
/// levels past the stored range carry `c_m = 0`. Level 1 is never modulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    pub s_log: f64,
    multipliers: Vec<f64>,
    log_derivatives: Vec<f64>,
}

impl ModulationState {
    pub fn multiplier(&self, m: usize) -> f64 {
        self.multipliers.get(m).copied().unwrap_or(0.0)
    }

    /// `s * dc_m/ds`.
    pub fn log_derivative(&self, m: usize) -> f64 {
        self.log_derivatives.get(m).copied().unwrap_or(0.0)
    }

    /// Highest level that may carry a nonzero multiplier.
    pub fn max_level(&self) -> usize {
        self.multipliers.len().saturating_sub(1)
    }

    pub fn nonzero_levels(&self) -> Vec<usize> {
        (1..self.multipliers.len())
            .filter(|&m| self.multipliers[m] != 0.0)
            .collect()
    }

    pub fn moving_levels(&self) -> Vec<usize> {
        (1..self.log_derivatives.len())
            .filter(|&m| self.log_derivatives[m] != 0.0)
            .collect()
    }

    /// Levels `k` with `W_eps - L(s)` in `Omega_k`, i.e. `c_k(s) = 1` exactly.
    pub fn active_omegas(&self) -> Vec<u32> {
        (1..self.multipliers.len())
            .filter(|&m| self.multipliers[m] == 1.0)
            .map(|m| m as u32)
            .collect()
    }

    /// Effective weight of `W_eps - L(s)` on level `m`.
    pub fn effective_weight(&self, k0: f64, m: usize) -> f64 {
        epsilon(k0, m as u32) * (1.0 - self.multiplier(m))
    }

    /// `||L(s)|| = max_m c_m eps_m`.
    pub fn modulation_norm(&self, k0: f64) -> f64 {
        (1..self.multipliers.len())
            .map(|m| self.multipliers[m] * epsilon(k0, m as u32))
            .fold(0.0, f64::max)
    }

    /// `||s L'(s)|| = max_m |s c_m'| eps_m`.
    pub fn log_derivative_norm(&self, k0: f64) -> f64 {
        (1..self.log_derivatives.len())
            .map(|m| self.log_derivatives[m].abs() * epsilon(k0, m as u32))
            .fold(0.0, f64::max)
    }
}

/// Multipliers at `s = exp(s_log)`.
///
/// Level `m >= 3` rises on `[r_{m+3}, r_{m+2})`, is 1 on `[r_{m+2}, r_{m-1})` and
/// falls on `[r_{m-1}, r_{m-2})`; level 2 rises on `[r_5, r_4)` and stays at 1
/// above. For `s >= r_kmax` only levels up to `kmax + 1` can be nonzero and all
/// of them depend on materialized radii only; below that the ladder is exhausted.
pub fn modulation(s_log: f64, ladder: &RadiusLadder) -> Result<ModulationState> {
    if s_log.is_nan() || s_log == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter(format!("log radius must be a number, got {s_log}")));
    }
    let floor = ladder.floor_log();
    if s_log < floor {
        return Err(Error::LadderExhausted { s_log, floor });
    }
    let top = ladder.kmax() + 1;
    let mut multipliers = vec![0.0; top + 1];
    let mut log_derivatives = vec![0.0; top + 1];
    let r = |j: usize| ladder.r_log_ext(j);

    let (c, d) = if s_log >= r(4) {
        (1.0, 0.0)
    } else if s_log >= r(5) {
        smoothstep_log(r(5), r(4), s_log)?
    } else {
        (0.0, 0.0)
    };
    multipliers[2] = c;
    log_derivatives[2] = d;

    for m in 3..=top {
        let (c, d) = if s_log >= r(m - 2) {
            (0.0, 0.0)
        } else if s_log >= r(m - 1) {
            let (v, dv) = smoothstep_log(r(m - 1), r(m - 2), s_log)?;
            (1.0 - v, -dv)
        } else if s_log >= r(m + 2) {
            (1.0, 0.0)
        } else if s_log >= r(m + 3) {
            smoothstep_log(r(m + 3), r(m + 2), s_log)?
        } else {
            (0.0, 0.0)
        };
        multipliers[m] = c;
        log_derivatives[m] = d;
    }
    Ok(ModulationState { s_log, multipliers, log_derivatives })
}

/// Weight rule of `W_eps - L(s)`: level `m` scaled by `1 - c_m(s)`.
pub fn field_weights(s_log: f64, ladder: &RadiusLadder) -> Result<WeightRule> {
    let state = modulation(s_log, ladder)?;
    let factors = (1..=state.max_level())
        .map(|m| 1.0 - state.multiplier(m))
        .collect();
    WeightRule::modulated(ladder.k0(), factors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{build_ladder, FieldParams};
    use crate::kakutani::{omega_member, truncate};

    fn ladder() -> RadiusLadder {
        build_ladder(&FieldParams::default()).unwrap()
    }

    fn mid(a: f64, b: f64) -> f64 {
        0.5 * (a + b)
    }

    #[test]
    fn plateau_levels_are_active() {
        let l = ladder();
        for k in 3..=l.kmax() - 2 {
            let s = mid(l.r_log(k + 2), l.r_log(k - 1));
            let st = modulation(s, &l).unwrap();
            assert_eq!(st.multiplier(k), 1.0);
            assert!(st.active_omegas().contains(&(k as u32)));
            let w = truncate(&field_weights(s, &l).unwrap(), 512).unwrap();
            assert!(omega_member(&w, k as u32).unwrap().is_ok());
        }
    }

    #[test]
    fn shell_interior_sees_three_classes() {
        let l = ladder();
        for k in 3..l.kmax() - 1 {
            let st = modulation(mid(l.r_log(k + 1), l.r_log(k)), &l).unwrap();
            let active = st.active_omegas();
            for j in [k - 1, k, k + 1] {
                assert!(active.contains(&(j as u32)), "k={k} active={active:?}");
            }
        }
    }

    #[test]
    fn outside_support_is_zero() {
        let l = ladder();
        for k in 3..=6 {
            assert_eq!(modulation(l.r_log(k - 2), &l).unwrap().multiplier(k), 0.0);
            assert_eq!(modulation(l.r_log(k - 2) + 1.0, &l).unwrap().multiplier(k), 0.0);
            let below = l.r_log(k + 3) - 0.5;
            assert_eq!(modulation(below, &l).unwrap().multiplier(k), 0.0);
        }
    }

    #[test]
    fn level_two_is_on_above_r3() {
        let l = ladder();
        for s in [l.r_log(3) + 1e-9, 0.0, 5.0, 100.0] {
            let st = modulation(s, &l).unwrap();
            assert_eq!(st.multiplier(2), 1.0);
            assert_eq!(st.multiplier(1), 0.0);
        }
    }

    #[test]
    fn at_most_five_nonzero_and_two_moving() {
        let l = ladder();
        let (lo, hi) = (l.floor_log(), l.r_log(1) + 2.0);
        for i in 0..=20_000 {
            let s = lo + (hi - lo) * i as f64 / 20_000.0;
            let st = modulation(s, &l).unwrap();
            assert!(st.nonzero_levels().len() <= 5, "s={s}");
            assert!(st.moving_levels().len() <= 2, "s={s}");
        }
    }

    #[test]
    fn exhaustion_is_an_error() {
        let l = ladder();
        let err = modulation(l.floor_log() - 1e-9, &l).unwrap_err();
        assert!(matches!(err, Error::LadderExhausted { .. }));
        assert!(modulation(l.floor_log(), &l).is_ok());
    }

    #[test]
    fn far_above_only_level_two_is_removed() {
        let l = ladder();
        let rule = field_weights(50.0, &l).unwrap();
        let full = WeightRule::full(2.0).unwrap();
        let minus2 = WeightRule::without_level(2.0, 2).unwrap();
        let t = truncate(&rule, 300).unwrap();
        assert_eq!(t, truncate(&minus2, 300).unwrap());
        assert_ne!(t, truncate(&full, 300).unwrap());
    }
}
