//! Operator bounds on `L(s)`, the Lipschitz bound on `G(x) = L(|x|) x`, and the
//! vanishing Frechet derivative of `N` at the origin.

use rand::Rng;
use serde_json::json;

use super::sampling::{ic_rng, random_direction};
use super::{worst, Certificate, Claim};
use crate::error::{Error, Result};
use crate::field::{modulation, FieldKind, ModulationState, RadiusLadder, VectorField};
use crate::kakutani::{epsilon, level_of, truncate, WeightRule};
use crate::numerics::norm;

/// `L(s) x` for the multipliers in `state`.
fn apply_modulation(state: &ModulationState, k0: f64, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in 1..x.len() {
        let m = level_of(i);
        out[i] = state.multiplier(m) * epsilon(k0, m as u32) * x[i - 1];
    }
    out
}

/// Radii (as logs) covering shells `2..kmax-1` on a log grid, plus both sides
/// of every ladder point at several relative offsets.
fn radius_samples(ladder: &RadiusLadder, per_shell: usize) -> Vec<f64> {
    let kmax = ladder.kmax();
    let floor = ladder.floor_log();
    let mut out = Vec::new();
    for k in 2..kmax {
        let (lo, hi) = (ladder.r_log(k + 1), ladder.r_log(k));
        out.extend((0..per_shell).map(|i| lo + (hi - lo) * i as f64 / per_shell as f64));
    }
    for j in 1..=kmax {
        for delta in [1e-10, 1e-8, 1e-6, 1e-3, 1e-1] {
            for side in [-1.0, 1.0] {
                let s = ladder.r_log(j) + (1.0f64 + side * delta).ln();
                if s >= floor {
                    out.push(s);
                }
            }
        }
    }
    out.extend([ladder.r_log(1) + 1.0, ladder.r_log(1) + 10.0]);
    out
}

/// Jumps of `c_m` and `s c_m'` across a ladder point at relative offset `delta`.
fn jumps(ladder: &RadiusLadder, j: usize, delta: f64) -> Result<(f64, f64)> {
    let lo = modulation(ladder.r_log(j) + (1.0 - delta).ln(), ladder)?;
    let hi = modulation(ladder.r_log(j) + (1.0 + delta).ln(), ladder)?;
    let top = lo.max_level().max(hi.max_level());
    let mut value: f64 = 0.0;
    let mut slope: f64 = 0.0;
    for m in 1..=top {
        value = value.max((hi.multiplier(m) - lo.multiplier(m)).abs());
        slope = slope.max((hi.log_derivative(m) - lo.log_derivative(m)).abs());
    }
    Ok((value, slope))
}

/// `||L(s)|| <= 5 K0` (and `<= K0`), `||s L'(s)|| <= 8 K0`, per level
/// `||s L_k'(s)|| <= 4 ||L_k||`, at most two moving levels, `C^1` joins at the
/// ladder points, and `|G(x) - G(y)| <= 12 K0 |x - y|` on `pairs` random pairs.
///
/// Pairs are drawn in scaled form: `x = rho u`, `y = rho e^d v`, so the quotient
/// is independent of `rho` and shells far below the float range are reachable.
pub fn certify_bounds(ladder: &RadiusLadder, per_shell: usize, pairs: usize, dim: usize, seed: u64) -> Result<Certificate> {
    let k0 = ladder.k0();
    let kmax = ladder.kmax();
    let floor = ladder.floor_log();
    let params = json!({ "per_shell": per_shell, "pairs": pairs, "dim": dim, "seed": seed });
    let mut failure = None;

    let radii = radius_samples(ladder, per_shell);
    let (mut norm_margin, mut deriv_margin, mut level_margin) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut worst_s = f64::NAN;
    for &s in &radii {
        let st = modulation(s, ladder)?;
        let n = st.modulation_norm(k0);
        let d = st.log_derivative_norm(k0);
        let per_level = (1..=st.max_level()).map(|m| st.log_derivative(m).abs()).fold(0.0, f64::max);
        let m1 = (5.0 * k0 / n).ln();
        let m2 = (8.0 * k0 / d).ln();
        let m3 = (4.0 / per_level).ln();
        if m1.min(m2).min(m3) < norm_margin.min(deriv_margin).min(level_margin) {
            worst_s = s;
        }
        norm_margin = norm_margin.min(m1);
        deriv_margin = deriv_margin.min(m2);
        level_margin = level_margin.min(m3);
        if n > k0 || m1 < 0.0 || m2 < 0.0 || m3 < 0.0 || st.moving_levels().len() > 2 {
            failure.get_or_insert(json!({
                "s_log": s, "norm": n, "log_derivative_norm": d, "max_level_slope": per_level,
                "moving_levels": st.moving_levels(),
            }));
        }
    }

    // C^1 joins: value jumps vanish to 1e-10, slope jumps shrink linearly.
    let mut join_rows = Vec::new();
    for j in 1..kmax {
        let (v8, s8) = jumps(ladder, j, 1e-8)?;
        let (_, s10) = jumps(ladder, j, 1e-10)?;
        let ok = v8 <= 1e-10 && s8 <= 50.0 * 1e-8 && s10 <= 50.0 * 1e-10;
        if !ok {
            failure.get_or_insert(json!({ "ladder_point": j, "value_jump": v8, "slope_jump_1e-8": s8, "slope_jump_1e-10": s10 }));
        }
        join_rows.push(json!({ "j": j, "value_jump": v8, "slope_jump": s8 }));
    }

    // Lipschitz pairs.
    let mut lip_worst = 0.0;
    let mut lip_witness = json!(null);
    for i in 0..pairs {
        let mut rng = ic_rng(seed, i as u64);
        let k = rng.random_range(2..kmax);
        let (lo, hi) = (ladder.r_log(k + 1), ladder.r_log(k));
        let s = lo + rng.random::<f64>() * (hi - lo);
        let u = random_direction(&mut rng, dim, dim / 2);
        let (mut d, v) = if i % 2 == 0 {
            (rng.random_range(-1.5..1.5), random_direction(&mut rng, dim, dim / 2))
        } else {
            let w = random_direction(&mut rng, dim, dim / 2);
            let mut v: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a + 1e-3 * b).collect();
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            (rng.random_range(-1e-3..1e-3), v)
        };
        if s + d < floor {
            d = d.abs();
        }
        let r = d.exp();
        let gu = apply_modulation(&modulation(s, ladder)?, k0, &u);
        let gv = apply_modulation(&modulation(s + d, ladder)?, k0, &v);
        let num: Vec<f64> = gu.iter().zip(&gv).map(|(a, b)| a - r * b).collect();
        let den: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - r * b).collect();
        let q = norm(&num) / norm(&den);
        if q > lip_worst {
            lip_worst = q;
            lip_witness = json!({ "pair": i, "shell": k, "s_log": s, "d": d, "quotient": q });
        }
    }
    let lip_margin = (12.0 * k0 / lip_worst).ln();
    if lip_margin < 0.0 {
        failure.get_or_insert(lip_witness.clone());
    }

    let ok = failure.is_none();
    let margin = worst([norm_margin, deriv_margin, level_margin, lip_margin]);
    let witness = failure.unwrap_or_else(|| {
        json!({
            "radii": radii.len(),
            "worst_s_log": worst_s,
            "norm_margin": norm_margin,
            "derivative_margin": deriv_margin,
            "level_margin": level_margin,
            "lipschitz": lip_witness,
            "joins": join_rows,
        })
    });
    Ok(Certificate::new("bounds", params, ok, margin, witness))
}

/// `N(x) = L(|x|) x` has `DN(0) = 0`.
///
/// At `rho = r_k` the quotient `|N(y)| / |y|` stays below `||L(rho)||`, and its
/// sup over the sampled directions (which include maximisers when
/// `dim > 2^kmax`) decreases to zero along the ladder; the closed
/// form `DN(x) = DF(0) - DF(x)` shrinks with `|x|`; `DF(0)` is exactly
/// `-gamma I + W_eps`; difference quotients of `F` at the origin converge to it.
pub fn certify_frechet_zero(ladder: &RadiusLadder, directions: usize, dim: usize, seed: u64) -> Result<Certificate> {
    let k0 = ladder.k0();
    let kmax = ladder.kmax();
    if kmax < 5 {
        return Err(Error::InvalidParameter("Frechet check needs kmax >= 5".into()));
    }
    let params = json!({ "directions": directions, "dim": dim, "seed": seed });
    let field = VectorField::with_kind(ladder.clone(), FieldKind::Nonlinear);
    let mut dirs: Vec<Vec<f64>> = (0..directions)
        .map(|i| random_direction(&mut ic_rng(seed, i as u64), dim, dim))
        .collect();
    // e_{n-1} with n = 2^(m-1) feeds the first weight of level m, so these
    // directions attain ||L(rho)|| exactly.
    let random_count = dirs.len();
    for m in 1..=kmax + 2 {
        let n = 1usize << (m - 1);
        if n < dim {
            let mut e = vec![0.0; dim];
            e[n - 1] = 1.0;
            dirs.push(e);
        }
    }
    let mut failure = None;
    let mut margins = Vec::new();

    // Quotients along the ladder, in scaled form.
    let mut sups = Vec::new();
    for k in 2..kmax {
        let st = modulation(ladder.r_log(k), ladder)?;
        let bound = st.modulation_norm(k0);
        let sup = dirs.iter().map(|y| norm(&apply_modulation(&st, k0, y))).fold(0.0, f64::max);
        if sup > bound * (1.0 + 1e-12) {
            failure.get_or_insert(json!({ "k": k, "quotient": sup, "bound": bound }));
        }
        if sup > 0.0 {
            margins.push((bound / sup).ln());
        }
        sups.push(sup);
    }
    if sups.windows(2).any(|w| w[1] > w[0]) {
        failure.get_or_insert(json!({ "quotient_sups": sups, "reason": "not decreasing" }));
    }
    let tail = *sups.last().unwrap();
    if tail > epsilon(k0, (kmax - 3) as u32) {
        failure.get_or_insert(json!({ "quotient_sups": sups, "reason": "does not approach zero" }));
    }

    // Closed-form DN at representable radii (mid-shell, where L' is live).
    let mut dn_sups = Vec::new();
    for k in 2..kmax {
        let s = 0.5 * (ladder.r_log(k) + ladder.r_log(k + 1));
        if s < -700.0 {
            break;
        }
        let st = modulation(s, ladder)?;
        let bound = st.modulation_norm(k0) + st.log_derivative_norm(k0);
        let x: Vec<f64> = dirs[0].iter().map(|v| v * s.exp()).collect();
        let mut sup: f64 = 0.0;
        for y in &dirs[..random_count] {
            let lin = field.jacobian_action(&vec![0.0; dim], y)?;
            let full = field.jacobian_action(&x, y)?;
            let dn: Vec<f64> = lin.iter().zip(&full).map(|(a, b)| a - b).collect();
            sup = sup.max(norm(&dn));
        }
        if sup > bound * (1.0 + 1e-9) {
            failure.get_or_insert(json!({ "shell": k, "dn_norm": sup, "bound": bound }));
        }
        dn_sups.push(sup);
    }
    if dn_sups.last() >= dn_sups.first() {
        failure.get_or_insert(json!({ "dn_sups": dn_sups, "reason": "DN(x) does not shrink" }));
    }

    // DF(0) against an independent assembly of -gamma I + W_eps.
    let w = truncate(&WeightRule::full(k0)?, dim)?;
    let gamma = ladder.gamma();
    let mut exact = true;
    for y in &dirs {
        let mut oracle = vec![-gamma * y[0]; dim];
        for i in 1..dim {
            oracle[i] = -gamma * y[i] + w.weight(i) * y[i - 1];
        }
        exact &= field.jacobian_action(&vec![0.0; dim], y)? == oracle;
    }
    if !exact {
        failure.get_or_insert(json!({ "reason": "DF(0) differs from -gamma I + W_eps" }));
    }

    // Difference quotients (F(h y) - F(0)) / h -> DF(0) y.
    let y = &dirs[0];
    let df0 = field.jacobian_action(&vec![0.0; dim], y)?;
    let mut fd_errors = Vec::new();
    for k in 2..kmax {
        if ladder.r_log(k) < -700.0 {
            break;
        }
        let h = ladder.r_log(k).exp();
        let hy: Vec<f64> = y.iter().map(|v| h * v).collect();
        let f = field.eval(&hy)?;
        let err = norm(&f.iter().zip(&df0).map(|(a, b)| a / h - b).collect::<Vec<_>>());
        let bound = modulation(ladder.r_log(k), ladder)?.modulation_norm(k0);
        if err > bound * (1.0 + 1e-9) + 1e-12 {
            failure.get_or_insert(json!({ "k": k, "difference_error": err, "bound": bound }));
        }
        fd_errors.push(err);
    }

    let ok = failure.is_none();
    let witness = failure.unwrap_or_else(|| {
        json!({ "quotient_sups": sups, "dn_sups": dn_sups, "difference_errors": fd_errors, "df0_exact": exact })
    });
    Ok(Certificate::new("frechet", params, ok, worst(margins), witness))
}

pub struct BoundsClaim {
    pub per_shell: usize,
    pub pairs: usize,
    pub dim: usize,
}

impl Default for BoundsClaim {
    fn default() -> Self {
        Self { per_shell: 400, pairs: 10_000, dim: 64 }
    }
}

impl Claim for BoundsClaim {
    fn id(&self) -> &'static str {
        "bounds"
    }

    fn summary(&self) -> &'static str {
        "||L|| <= 5K0, ||sL'|| <= 8K0, per-level slopes <= 4, Lipschitz <= 12K0"
    }

    fn certify(&self, ladder: &RadiusLadder, seed: u64) -> Result<Certificate> {
        certify_bounds(ladder, self.per_shell, self.pairs, self.dim, seed)
    }
}

pub struct FrechetClaim {
    pub directions: usize,
    pub dim: usize,
}

impl Default for FrechetClaim {
    fn default() -> Self {
        Self { directions: 32, dim: 2048 }
    }
}

impl Claim for FrechetClaim {
    fn id(&self) -> &'static str {
        "frechet"
    }

    fn summary(&self) -> &'static str {
        "DN(0) = 0 and DF(0) = -gamma I + W_eps"
    }

    fn certify(&self, ladder: &RadiusLadder, seed: u64) -> Result<Certificate> {
        certify_frechet_zero(ladder, self.directions, self.dim, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{build_ladder, FieldParams};

    fn ladder() -> RadiusLadder {
        build_ladder(&FieldParams::default()).unwrap()
    }

    #[test]
    fn bounds_pass_on_a_small_sample() {
        let c = certify_bounds(&ladder(), 50, 500, 32, 3).unwrap();
        assert!(c.passed(), "{}", c.witness);
        assert!(c.margin_log > 0.0);
    }

    #[test]
    fn modulation_action_matches_the_field() {
        let l = ladder();
        let f = VectorField::new(l.clone());
        let x: Vec<f64> = (0..16).map(|i| 0.01 * (i as f64 + 1.0)).collect();
        let s = crate::numerics::ln_norm(&x);
        let direct = apply_modulation(&modulation(s, &l).unwrap(), l.k0(), &x);
        let via = f.nonlinear_part(&x).unwrap();
        for (a, b) in direct.iter().zip(&via) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn frechet_passes() {
        let c = certify_frechet_zero(&ladder(), 8, 2048, 1).unwrap();
        assert!(c.passed(), "{}", c.witness);
    }
}
