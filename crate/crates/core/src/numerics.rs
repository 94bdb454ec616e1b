//! Log-space helpers shared by the other modules.

/// `log(sum(exp(v)))` without overflow; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln(n!)` by direct summation. Exact enough for the degrees used here (< 10^5).
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Table of `ln(j!)` for `j = 0..=n`.
pub fn ln_factorial_table(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for j in 1..=n {
        acc += (j as f64).ln();
        table.push(acc);
    }
    table
}

/// `ln p_n(z)` where `p_n(z) = 1 + z + ... + z^n / n!` is the degree-`n`
/// Taylor polynomial of the exponential, for `z >= 0`.
pub fn ln_exp_taylor(n: usize, z: f64) -> f64 {
    ln_exp_taylor_with(n, z, &ln_factorial_table(n))
}

/// As [`ln_exp_taylor`] with a precomputed factorial table of length `> n`.
pub fn ln_exp_taylor_with(n: usize, z: f64, ln_fact: &[f64]) -> f64 {
    debug_assert!(z >= 0.0);
    if z == 0.0 {
        return 0.0;
    }
    let lz = z.ln();
    // Terms increase up to j ~ z and decrease afterwards; the max is at floor(min(z, n)).
    let peak = (z.floor() as usize).min(n);
    let max = peak as f64 * lz - ln_fact[peak];
    let sum: f64 = (0..=n)
        .map(|j| (j as f64 * lz - ln_fact[j] - max).exp())
        .sum();
    max + sum.ln()
}

/// Euclidean norm robust against underflow and overflow.
pub fn norm(x: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let sum: f64 = x.iter().map(|v| (v / scale).powi(2)).sum();
    scale * sum.sqrt()
}

/// `ln |x|`, `-inf` for the zero vector.
pub fn ln_norm(x: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = x.iter().map(|v| (v / scale).powi(2)).sum();
    scale.ln() + 0.5 * sum.ln()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive_for_moderate_values() {
        let v = [0.1, -2.0, 3.5];
        let naive = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&v) - naive).abs() < 1e-14);
    }

    #[test]
    fn lse_survives_underflow() {
        let v = [-1000.0, -1000.0];
        assert!((log_sum_exp(&v) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn exp_taylor_small_cases() {
        // p_1(3) = 4, p_2(2) = 1 + 2 + 2 = 5
        assert!((ln_exp_taylor(1, 3.0) - 4f64.ln()).abs() < 1e-14);
        assert!((ln_exp_taylor(2, 2.0) - 5f64.ln()).abs() < 1e-14);
        assert_eq!(ln_exp_taylor(7, 0.0), 0.0);
        // Large degree saturates to z.
        assert!((ln_exp_taylor(400, 50.0) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn norm_is_scale_safe() {
        let x = [3e-200, 4e-200];
        assert!((norm(&x) / 5e-200 - 1.0).abs() < 1e-15);
        assert!((ln_norm(&x) - (5e-200f64).ln()).abs() < 1e-12);
        assert_eq!(ln_norm(&[0.0, 0.0]), f64::NEG_INFINITY);
    }
}
