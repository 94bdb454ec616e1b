//! Kakutani weight sequences and weighted-shift algebra.
//!
//! A weighted shift maps `e_n` to `alpha_n e_{n+1}`. Indices are 1-based
//! throughout, so the parity conditions `n = 2^(k-1) (2j + 1)` read exactly as
//! stated. Products and norms are carried in log space; an exact zero weight is
//! represented by `f64::NEG_INFINITY`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2-adic valuation of `n`: the exponent `kappa` in `n = 2^kappa (2l + 1)`.
pub fn kappa(n: u64) -> Result<u32> {
    if n == 0 {
        return Err(Error::ZeroIndex);
    }
    Ok(n.trailing_zeros())
}

/// Level `m = 1 + kappa(n)` of position `n`; caller guarantees `n >= 1`.
#[inline]
pub(crate) fn level_of(n: usize) -> usize {
    1 + n.trailing_zeros() as usize
}

/// `eps_m = k0^(2 - m)`.
pub fn epsilon(k0: f64, m: u32) -> f64 {
    // powi keeps dyadic weights exact when k0 is a power of two
    k0.powi(2 - m as i32)
}

pub fn log_epsilon(k0: f64, m: u32) -> f64 {
    (2.0 - m as f64) * k0.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// `W_eps`: every level present.
    Full,
    /// `L_k`: only level `k` present.
    SingleLevel(u32),
    /// Level `m` scaled by `multipliers[m - 1]`; levels past the end keep factor 1.
    Modulated(Vec<f64>),
}

/// Closed-form weight sequence `n -> alpha_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRule {
    k0: f64,
    kind: RuleKind,
}

impl WeightRule {
    pub fn full(k0: f64) -> Result<Self> {
        Self::new(k0, RuleKind::Full)
    }

    pub fn single_level(k0: f64, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("level k must be at least 1".into()));
        }
        Self::new(k0, RuleKind::SingleLevel(k))
    }

    pub fn modulated(k0: f64, multipliers: Vec<f64>) -> Result<Self> {
        if let Some(bad) = multipliers.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::InvalidParameter(format!(
                "level multiplier {bad} outside [0, 1]"
            )));
        }
        Self::new(k0, RuleKind::Modulated(multipliers))
    }

    /// `W_eps - L_k`: the full rule with level `k` removed.
    pub fn without_level(k0: f64, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("level k must be at least 1".into()));
        }
        let mut multipliers = vec![1.0; k as usize];
        multipliers[k as usize - 1] = 0.0;
        Self::modulated(k0, multipliers)
    }

    fn new(k0: f64, kind: RuleKind) -> Result<Self> {
        if !(k0 > 1.0) || !k0.is_finite() {
            return Err(Error::InvalidParameter(format!("K0 must exceed 1, got {k0}")));
        }
        Ok(Self { k0, kind })
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn kind(&self) -> &RuleKind {
        &self.kind
    }

    /// Factor applied to `eps_m` at level `m`.
    pub fn level_factor(&self, m: u32) -> f64 {
        match &self.kind {
            RuleKind::Full => 1.0,
            RuleKind::SingleLevel(k) => {
                if m == *k {
                    1.0
                } else {
                    0.0
                }
            }
            RuleKind::Modulated(c) => c.get(m as usize - 1).copied().unwrap_or(1.0),
        }
    }

    pub fn weight(&self, n: u64) -> Result<f64> {
        let m = 1 + kappa(n)?;
        Ok(epsilon(self.k0, m) * self.level_factor(m))
    }

    /// Exact log weight, `-inf` for a zero weight.
    pub fn log_weight(&self, n: u64) -> Result<f64> {
        let m = 1 + kappa(n)?;
        let f = self.level_factor(m);
        if f == 0.0 {
            Ok(f64::NEG_INFINITY)
        } else {
            Ok(log_epsilon(self.k0, m) + f.ln())
        }
    }
}

/// Dimension-`N` realization of a weighted shift: `weights[i - 1]` is the
/// coefficient of `e_i -> e_{i+1}`; `e_N` maps to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedShift {
    weights: Vec<f64>,
}

impl TruncatedShift {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::DimensionTooSmall(1));
        }
        if let Some(bad) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("negative or non-finite weight {bad}")));
        }
        Ok(Self { weights })
    }

    pub fn dim(&self) -> usize {
        self.weights.len() + 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at 1-based position `n`, `1 <= n <= dim - 1`.
    pub fn weight(&self, n: usize) -> f64 {
        self.weights[n - 1]
    }

    /// Operator norm: the largest weight.
    pub fn norm(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() || out.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: if x.len() != self.dim() { x.len() } else { out.len() },
            });
        }
        out[0] = 0.0;
        for i in 1..x.len() {
            out[i] = self.weights[i - 1] * x[i - 1];
        }
        Ok(())
    }

    /// Adjoint action: `(W^T y)_n = alpha_n y_{n+1}`.
    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: y.len() });
        }
        let mut out = vec![0.0; y.len()];
        for i in 0..self.weights.len() {
            out[i] = self.weights[i] * y[i + 1];
        }
        Ok(out)
    }
}

pub fn truncate(rule: &WeightRule, dim: usize) -> Result<TruncatedShift> {
    if dim < 2 {
        return Err(Error::DimensionTooSmall(dim));
    }
    let weights = (1..dim as u64)
        .map(|n| rule.weight(n))
        .collect::<Result<Vec<_>>>()?;
    TruncatedShift::new(weights)
}

/// The nilpotent class `Omega_k`: weighted shifts vanishing at every
/// `n = 2^(k-1) (2j + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OmegaClass {
    k: u32,
}

impl OmegaClass {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("Omega_k needs k >= 1".into()));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Nilpotency index bound `2^k`.
    pub fn index(&self) -> usize {
        1usize << self.k
    }

    pub fn requires_zero(&self, n: usize) -> bool {
        n >= 1 && n.trailing_zeros() + 1 == self.k
    }

    /// First 1-based position where a mandated zero is missing.
    pub fn first_violation(&self, shift: &TruncatedShift) -> Option<usize> {
        let start = 1usize << (self.k - 1);
        let step = 1usize << self.k;
        (start..shift.dim())
            .step_by(step)
            .find(|&n| shift.weight(n) != 0.0)
    }

    pub fn contains(&self, shift: &TruncatedShift) -> bool {
        self.first_violation(shift).is_none()
    }
}

/// Membership test with the offending index on failure.
pub fn omega_member(shift: &TruncatedShift, k: u32) -> Result<std::result::Result<(), usize>> {
    let class = OmegaClass::new(k)?;
    Ok(match class.first_violation(shift) {
        None => Ok(()),
        Some(n) => Err(n),
    })
}

/// A single-band operator `e_n -> entry(n) e_{n+offset}`, stored as log entries.
#[derive(Debug, Clone, PartialEq)]
pub struct BandOperator {
    dim: usize,
    offset: usize,
    log_entries: Vec<f64>,
}

impl BandOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Log of the coefficient for source index `n` (1-based); `-inf` when zero.
    pub fn log_entry(&self, n: usize) -> f64 {
        self.log_entries.get(n - 1).copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn entry(&self, n: usize) -> f64 {
        self.log_entry(n).exp()
    }

    pub fn log_entries(&self) -> &[f64] {
        &self.log_entries
    }

    /// True when every entry carries an exactly zero factor.
    pub fn is_zero(&self) -> bool {
        self.log_entries.iter().all(|&l| l == f64::NEG_INFINITY)
    }

    /// First source index with a nonzero coefficient.
    pub fn first_nonzero(&self) -> Option<usize> {
        self.log_entries
            .iter()
            .position(|&l| l != f64::NEG_INFINITY)
            .map(|i| i + 1)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let mut out = vec![0.0; self.dim];
        for (i, l) in self.log_entries.iter().enumerate() {
            out[i + self.offset] = l.exp() * x[i];
        }
        Ok(out)
    }
}

/// Product `W_1 W_2 ... W_m` of weighted shifts (`W_m` applied first).
///
/// The result lives on the `m`-th superdiagonal; the coefficient for source `n`
/// is `prod_{j<m} w_{m-j}(n + j)`.
pub fn compose(shifts: &[TruncatedShift]) -> Result<BandOperator> {
    let Some(first) = shifts.first() else {
        return Err(Error::InvalidParameter("compose needs at least one factor".into()));
    };
    let dim = first.dim();
    if let Some(bad) = shifts.iter().find(|s| s.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
    }
    let m = shifts.len();
    let sources = dim.saturating_sub(m);
    let log_entries = (1..=sources)
        .map(|n| {
            (0..m)
                .map(|j| {
                    let w = shifts[m - 1 - j].weight(n + j);
                    if w == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        w.ln()
                    }
                })
                .sum()
        })
        .collect();
    Ok(BandOperator { dim, offset: m, log_entries })
}

/// `log ||W^n||` as the largest sum of `n` consecutive log weights starting
/// in `[1, horizon - n + 1]`; `-inf` if every window holds a zero weight.
pub fn power_norm_log(rule: &WeightRule, n: usize, horizon: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::ZeroIndex);
    }
    if horizon < n {
        return Err(Error::HorizonTooShort { power: n, horizon });
    }
    // prefix[i]: sum of finite log weights over positions 1..=i; zeros[i]: zero count.
    let mut prefix = vec![0.0; horizon + 1];
    let mut zeros = vec![0usize; horizon + 1];
    for i in 1..=horizon {
        let lw = rule.log_weight(i as u64)?;
        if lw == f64::NEG_INFINITY {
            prefix[i] = prefix[i - 1];
            zeros[i] = zeros[i - 1] + 1;
        } else {
            prefix[i] = prefix[i - 1] + lw;
            zeros[i] = zeros[i - 1];
        }
    }
    let best = (1..=horizon - n + 1)
        .filter(|&s| zeros[s + n - 1] == zeros[s - 1])
        .map(|s| prefix[s + n - 1] - prefix[s - 1])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best)
}

/// `log ||W_eps^(2^p - 1)||^(1/(2^p - 1))` from the closed-form window product
/// `prod_q eps_q^(2^(p-q))`.
///
/// The terms `(2 - q) / 2^q` nearly cancel, so they are summed before the
/// `log K0` factor: each is a dyadic rational and the sum is exact in `f64`
/// for `p` up to about 50.
pub fn gelfand_estimate(k0: f64, p: u32) -> f64 {
    let two_p = (p as f64).exp2();
    let exponent: f64 = (1..=p)
        .map(|q| (2.0 - q as f64) / (q as f64).exp2())
        .sum();
    two_p / (two_p - 1.0) * exponent * k0.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    fn dense(shift: &TruncatedShift) -> Vec<Vec<f64>> {
        let n = shift.dim();
        let mut m = vec![vec![0.0; n]; n];
        for i in 1..n {
            m[i][i - 1] = shift.weight(i);
        }
        m
    }

    fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut c = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                if a[i][k] != 0.0 {
                    for j in 0..n {
                        c[i][j] += a[i][k] * b[k][j];
                    }
                }
            }
        }
        c
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(1).unwrap(), 0);
        assert_eq!(kappa(6).unwrap(), 1);
        assert_eq!(kappa(12).unwrap(), 2);
        assert_eq!(kappa(8).unwrap(), 3);
        assert_eq!(kappa(0), Err(Error::ZeroIndex));
    }

    #[test]
    fn full_rule_first_weights() {
        let rule = WeightRule::full(2.0).unwrap();
        let w: Vec<f64> = (1..=8).map(|n| rule.weight(n).unwrap()).collect();
        assert_eq!(w, vec![2.0, 1.0, 2.0, 0.5, 2.0, 1.0, 2.0, 0.25]);
    }

    #[test]
    fn single_level_and_deep_weights() {
        let l2 = WeightRule::single_level(2.0, 2).unwrap();
        assert_eq!(l2.weight(2).unwrap(), 1.0);
        assert_eq!(l2.weight(1).unwrap(), 0.0);
        assert_eq!(l2.log_weight(1).unwrap(), f64::NEG_INFINITY);

        // kappa(2^20) = 20, level 21, eps_21 = 2^(2 - 21).
        let full = WeightRule::full(2.0).unwrap();
        assert_eq!(full.weight(1 << 20).unwrap(), 2f64.powi(-19));
        assert!((full.log_weight(1 << 20).unwrap() + 19.0 * LN2).abs() < 1e-12);
    }

    #[test]
    fn rule_rejects_bad_k0() {
        assert!(WeightRule::full(1.0).is_err());
        assert!(WeightRule::full(f64::NAN).is_err());
        assert!(WeightRule::modulated(2.0, vec![1.5]).is_err());
    }

    #[test]
    fn truncate_examples() {
        let full = WeightRule::full(2.0).unwrap();
        assert_eq!(truncate(&full, 4).unwrap().weights(), &[2.0, 1.0, 2.0]);
        let l1 = WeightRule::single_level(2.0, 1).unwrap();
        assert_eq!(truncate(&l1, 4).unwrap().weights(), &[2.0, 0.0, 2.0]);
        let ones = WeightRule::modulated(2.0, vec![1.0; 10]).unwrap();
        assert_eq!(truncate(&ones, 300).unwrap(), truncate(&full, 300).unwrap());
        assert_eq!(truncate(&full, 1), Err(Error::DimensionTooSmall(1)));
    }

    #[test]
    fn apply_examples() {
        let w = TruncatedShift::new(vec![2.0, 1.0, 2.0]).unwrap();
        assert_eq!(w.apply(&[1.0, 0.0, 0.0, 0.0]).unwrap(), vec![0.0, 2.0, 0.0, 0.0]);
        assert_eq!(w.apply(&[0.0; 4]).unwrap(), vec![0.0; 4]);
        assert_eq!(w.apply(&[1.0; 4]).unwrap(), vec![0.0, 2.0, 1.0, 2.0]);
        assert!(matches!(w.apply(&[1.0; 3]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn compose_two_omega1_members_vanishes() {
        let a = TruncatedShift::new((1..20).map(|n| if n % 2 == 1 { 0.0 } else { 1.3 }).collect())
            .unwrap();
        let b = TruncatedShift::new((1..20).map(|n| if n % 2 == 1 { 0.0 } else { 0.7 }).collect())
            .unwrap();
        assert!(compose(&[a, b]).unwrap().is_zero());
    }

    #[test]
    fn compose_single_factor_is_the_shift() {
        let w = truncate(&WeightRule::full(2.0).unwrap(), 9).unwrap();
        let band = compose(std::slice::from_ref(&w)).unwrap();
        assert_eq!(band.offset(), 1);
        for n in 1..9 {
            assert!((band.entry(n) - w.weight(n)).abs() < 1e-15);
        }
    }

    #[test]
    fn compose_matches_dense_product_order() {
        let a = TruncatedShift::new(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let b = TruncatedShift::new(vec![0.5, 0.25, 2.0, 1.5, 3.0]).unwrap();
        let band = compose(&[a.clone(), b.clone()]).unwrap();
        let d = matmul(&dense(&a), &dense(&b));
        for n in 1..=4 {
            assert!((band.entry(n) - d[n + 1][n - 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn omega_membership_examples() {
        let full = truncate(&WeightRule::full(2.0).unwrap(), 64).unwrap();
        for k in 1..=6 {
            assert!(omega_member(&full, k).unwrap().is_err());
            let minus = truncate(&WeightRule::without_level(2.0, k).unwrap(), 64).unwrap();
            assert_eq!(omega_member(&minus, k).unwrap(), Ok(()));
        }
        let zero = TruncatedShift::new(vec![0.0; 63]).unwrap();
        assert!((1..=6).all(|k| omega_member(&zero, k).unwrap().is_ok()));
        assert_eq!(omega_member(&full, 3).unwrap(), Err(4));
    }

    #[test]
    fn power_norm_examples() {
        let full = WeightRule::full(2.0).unwrap();
        assert!((power_norm_log(&full, 3, 64).unwrap() - 4f64.ln()).abs() < 1e-14);
        assert!((power_norm_log(&full, 1, 64).unwrap() - LN2).abs() < 1e-15);
        let l1 = WeightRule::single_level(2.0, 1).unwrap();
        assert_eq!(power_norm_log(&l1, 2, 100).unwrap(), f64::NEG_INFINITY);
        assert!(power_norm_log(&full, 5, 4).is_err());
    }

    #[test]
    fn gelfand_examples() {
        let v = gelfand_estimate(2.0, 2);
        assert!((v - 4.0 / 3.0 * (LN2 / 2.0)).abs() < 1e-15);
        assert!((v - 0.4621).abs() < 1e-4);
        assert!(gelfand_estimate(2.0, 20).abs() < 1e-3);
    }

    #[test]
    fn epsilon_first_appearance_and_period() {
        let full = WeightRule::full(2.0).unwrap();
        for mu in 1..=16u32 {
            let first = 1u64 << (mu - 1);
            let eps = epsilon(2.0, mu);
            let positions: Vec<u64> = (1..=1u64 << 16)
                .filter(|&n| full.weight(n).unwrap() == eps)
                .collect();
            assert_eq!(positions[0], first);
            assert!(positions.windows(2).all(|w| w[1] - w[0] == 1 << mu));
        }
    }
}
