//! The truncated linear flow `exp(t (-gamma I + W_N))`.
//!
//! `W_N` is nilpotent, so the exponential series stops after `N` terms:
//! entry `(j + m, j)` equals `exp(-gamma t) t^m / m! * alpha_{j+1} ... alpha_{j+m}`
//! (1-based positions). Entries are assembled in log space.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kakutani::WeightRule;
use crate::numerics::ln_factorial_table;

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// 0-based entry `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.n + col] = v;
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let yi = y[i];
            if yi != 0.0 {
                for (o, a) in out.iter_mut().zip(&self.data[i * self.n..(i + 1) * self.n]) {
                    *o += a * yi;
                }
            }
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let mut c = DenseMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a != 0.0 {
                    for j in 0..n {
                        c.data[i * n + j] += a * other.data[k * n + j];
                    }
                }
            }
        }
        c
    }

    /// Max absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

fn check_args(n: usize, t: f64, k0: f64, gamma: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be finite and >= 0, got {t}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    WeightRule::full(k0).map(|_| ())
}

/// Prefix sums of `ln alpha_p` for the full Kakutani rule, `p = 1..n`.
fn log_weight_prefix(n: usize, k0: f64) -> Result<Vec<f64>> {
    let rule = WeightRule::full(k0)?;
    let mut prefix = vec![0.0; n];
    for p in 1..n {
        prefix[p] = prefix[p - 1] + rule.log_weight(p as u64)?;
    }
    Ok(prefix)
}

/// Dense `exp(t (-gamma I + W_N))`.
pub fn linear_propagator(n: usize, t: f64, k0: f64, gamma: f64) -> Result<DenseMatrix> {
    check_args(n, t, k0, gamma)?;
    if t == 0.0 {
        return Ok(DenseMatrix::identity(n));
    }
    let prefix = log_weight_prefix(n, k0)?;
    let ln_fact = ln_factorial_table(n);
    let lt = t.ln();
    let mut out = DenseMatrix::zeros(n);
    for m in 0..n {
        let band = -gamma * t + m as f64 * lt - ln_fact[m];
        for j in 0..n - m {
            let l = band + prefix[j + m] - prefix[j];
            if l > f64::MAX.ln() {
                return Err(Error::PropagatorOverflow { log_entry: l });
            }
            out.set(j + m, j, l.exp());
        }
    }
    Ok(out)
}

/// Banded, scaled form of the propagator for norm estimation at large `N`.
///
/// Entries are stored relative to `exp(log_scale)`, where `log_scale` and the
/// retained bands depend on `(t, K0, gamma)` only. The leading block of the
/// operator for a larger `N` therefore reproduces this one bit for bit.
#[derive(Debug, Clone)]
pub struct PropagatorOperator {
    n: usize,
    log_scale: f64,
    bands: Vec<(usize, Vec<f64>)>,
}

/// Bands whose a-priori bound falls this far below `exp(-gamma t)` are dropped.
const BAND_CUTOFF: f64 = 40.0;

impl PropagatorOperator {
    pub fn new(n: usize, t: f64, k0: f64, gamma: f64) -> Result<Self> {
        check_args(n, t, k0, gamma)?;
        if t == 0.0 {
            return Ok(Self { n, log_scale: 0.0, bands: vec![(0, vec![1.0; n])] });
        }
        // Band m is bounded by exp(-gamma t) (t K0)^m / m!.
        let lz = (t * k0).ln();
        let mut bounds = Vec::new();
        let mut ln_fact = 0.0;
        let mut m = 0usize;
        loop {
            if m > 0 {
                ln_fact += (m as f64).ln();
            }
            let b = m as f64 * lz - ln_fact;
            bounds.push(b);
            if m as f64 > t * k0 && b < -BAND_CUTOFF {
                break;
            }
            m += 1;
        }
        // The global peak keeps the scale independent of N; fall back to the
        // peak over reachable bands when the gap would underflow every entry.
        let peak = bounds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let reachable = bounds[..bounds.len().min(n)].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_scale = -gamma * t + if peak - reachable < 600.0 { peak } else { reachable };
        let prefix = log_weight_prefix(n, k0)?;
        let ln_fact = ln_factorial_table(bounds.len());
        let lt = t.ln();
        let bands = (0..bounds.len().min(n))
            .filter(|&m| bounds[m] >= -BAND_CUTOFF)
            .map(|m| {
                let band = -gamma * t + m as f64 * lt - ln_fact[m] - log_scale;
                let entries = (0..n - m).map(|j| (band + prefix[j + m] - prefix[j]).exp()).collect();
                (m, entries)
            })
            .collect();
        Ok(Self { n, log_scale, bands })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Scaled action `exp(-log_scale) P x`.
    pub fn apply_scaled(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (m, entries) in &self.bands {
            for ((o, e), xj) in out[*m..].iter_mut().zip(entries).zip(x) {
                *o += e * xj;
            }
        }
        out
    }

    pub fn apply_transpose_scaled(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (m, entries) in &self.bands {
            for ((o, e), yi) in out.iter_mut().zip(entries).zip(&y[*m..]) {
                *o += e * yi;
            }
        }
        out
    }

    /// `log |P x|`.
    pub fn log_norm_of(&self, x: &[f64]) -> f64 {
        self.log_scale + plain_norm(&self.apply_scaled(x)).ln()
    }

    /// `log ||P||` by power iteration; see [`operator_norm`].
    pub fn log_norm(&self, seed: u64, restarts: usize, warm: Option<&[f64]>) -> NormEstimate {
        let mut est = operator_norm(
            self.n,
            |x| self.apply_scaled(x),
            |y| self.apply_transpose_scaled(y),
            seed,
            restarts,
            1e-8,
            warm,
        );
        est.log_norm += self.log_scale;
        est
    }
}

const MAX_POWER_ITERATIONS: usize = 2_000;

#[derive(Debug, Clone, PartialEq)]
pub struct NormEstimate {
    pub log_norm: f64,
    /// Unit vector achieving the estimate.
    pub vector: Vec<f64>,
    pub iterations: usize,
}

fn plain_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Largest singular value by power iteration on `A^T A`.
///
/// Runs from `warm` (zero-padded to `n`) and from `restarts` seeded Gaussian
/// vectors, each until successive estimates agree to `tol` relative. The
/// returned value is the largest `|A v|` seen over all iterates, so a warm start
/// can never lower the estimate.
pub fn operator_norm(
    n: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    apply_t: impl Fn(&[f64]) -> Vec<f64>,
    seed: u64,
    restarts: usize,
    tol: f64,
    warm: Option<&[f64]>,
) -> NormEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = warm {
        let mut v = vec![0.0; n];
        let k = w.len().min(n);
        v[..k].copy_from_slice(&w[..k]);
        starts.push(v);
    }
    for _ in 0..restarts {
        starts.push((0..n).map(|_| StandardNormal.sample(&mut rng)).collect());
    }
    let mut best = NormEstimate { log_norm: f64::NEG_INFINITY, vector: vec![0.0; n], iterations: 0 };
    let mut best_val = -1.0;
    for start in starts {
        let nv = plain_norm(&start);
        if nv == 0.0 {
            continue;
        }
        let mut v: Vec<f64> = start.iter().map(|x| x / nv).collect();
        let mut prev = 0.0;
        for it in 0..MAX_POWER_ITERATIONS {
            let w = apply(&v);
            let est = plain_norm(&w);
            best.iterations += 1;
            if est > best_val {
                best_val = est;
                best.vector = v.clone();
            }
            if it > 0 && (est - prev).abs() <= tol * est {
                break;
            }
            prev = est;
            let z = apply_t(&w);
            let nz = plain_norm(&z);
            if nz == 0.0 {
                break;
            }
            v = z.iter().map(|x| x / nz).collect();
        }
    }
    best.log_norm = best_val.ln();
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_is_identity() {
        assert_eq!(linear_propagator(5, 0.0, 2.0, 0.5).unwrap(), DenseMatrix::identity(5));
    }

    #[test]
    fn two_by_two_closed_form() {
        for t in [0.3, 1.0, 4.0] {
            let p = linear_propagator(2, t, 2.0, 0.5).unwrap();
            let e = (-0.5 * t).exp();
            assert!((p.get(0, 0) - e).abs() < 1e-15);
            assert!((p.get(1, 0) - 2.0 * t * e).abs() < 1e-14);
            assert_eq!(p.get(0, 1), 0.0);
            let col = (p.get(0, 0).powi(2) + p.get(1, 0).powi(2)).sqrt();
            assert!((col - e * (1.0 + 4.0 * t * t).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn semigroup_property() {
        let (s, t) = (0.7, 1.9);
        let a = linear_propagator(32, s, 2.0, 0.5).unwrap();
        let b = linear_propagator(32, t, 2.0, 0.5).unwrap();
        let ab = linear_propagator(32, s + t, 2.0, 0.5).unwrap();
        let prod = a.matmul(&b);
        assert!(prod.max_abs_diff(&ab) <= 1e-10 * ab.max_abs());
    }

    #[test]
    fn overflow_is_reported() {
        let err = linear_propagator(512, 1e4, 2.0, 0.01).unwrap_err();
        assert!(matches!(err, Error::PropagatorOverflow { .. }));
        // The norm-only path still works.
        let op = PropagatorOperator::new(512, 1e4, 2.0, 0.01).unwrap();
        assert!(op.log_norm(1, 1, None).log_norm.is_finite());
    }

    #[test]
    fn banded_matches_dense() {
        let (n, t) = (64, 6.0);
        let dense = linear_propagator(n, t, 2.0, 0.5).unwrap();
        let op = PropagatorOperator::new(n, t, 2.0, 0.5).unwrap();
        let x: Vec<f64> = (0..n).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let yd = dense.apply(&x);
        let yb: Vec<f64> = op.apply_scaled(&x).iter().map(|v| v * op.log_scale().exp()).collect();
        let scale = yd.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in yd.iter().zip(&yb) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn power_iteration_matches_dense_norm_bounds() {
        let (n, t) = (48, 5.0);
        let dense = linear_propagator(n, t, 2.0, 0.5).unwrap();
        let est = PropagatorOperator::new(n, t, 2.0, 0.5).unwrap().log_norm(3, 3, None);
        let norm = est.log_norm.exp();
        // max column norm <= ||P|| <= sqrt(||P||_1 ||P||_inf)
        let col_max = (0..n)
            .map(|j| (0..n).map(|i| dense.get(i, j).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        assert!(norm >= col_max * (1.0 - 1e-8));
        assert!(norm <= (dense.norm_1() * dense.norm_inf()).sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn warm_start_keeps_estimates_monotone_in_n() {
        let t = 8.0;
        let mut prev: Option<NormEstimate> = None;
        for n in [16, 32, 64, 128, 256] {
            let op = PropagatorOperator::new(n, t, 2.0, 0.5).unwrap();
            let est = op.log_norm(5, 3, prev.as_ref().map(|p| p.vector.as_slice()));
            if let Some(p) = &prev {
                assert!(est.log_norm >= p.log_norm, "n={n}");
            }
            prev = Some(est);
        }
    }
}
