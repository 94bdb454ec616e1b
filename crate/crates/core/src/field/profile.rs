use crate::error::{Error, Result};

/// Cubic profile `3u^2 - 2u^3` and its derivative in `u`.
#[inline]
fn cubic(u: f64) -> (f64, f64) {
    (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u))
}

/// `phi_1(a, b; s)` and `d phi_1 / ds`; `s` is clamped to `[a, b]`.
///
/// The value rises from 0 at `a` to 1 at `b` with zero slope at both ends. The
/// slope never exceeds `1.5 / (b - a)`. `phi_2 = 1 - phi_1`.
pub fn smoothstep(a: f64, b: f64, s: f64) -> Result<(f64, f64)> {
    if !(a < b) {
        return Err(Error::EmptyInterval { a, b });
    }
    if s <= a {
        return Ok((0.0, 0.0));
    }
    if s >= b {
        return Ok((1.0, 0.0));
    }
    let width = b - a;
    let (v, dv) = cubic((s - a) / width);
    Ok((v, dv / width))
}

/// `phi_1` for arguments given by their logarithms: returns the value and the
/// log-derivative `s * d phi_1 / ds`. Radii far below the `f64` range are fine
/// because only differences of logs are exponentiated.
pub fn smoothstep_log(log_a: f64, log_b: f64, log_s: f64) -> Result<(f64, f64)> {
    if !(log_a < log_b) {
        return Err(Error::EmptyInterval { a: log_a, b: log_b });
    }
    if log_s <= log_a {
        return Ok((0.0, 0.0));
    }
    if log_s >= log_b {
        return Ok((1.0, 0.0));
    }
    let gap = log_a - log_b;
    let width = -gap.exp_m1(); // (b - a) / b
    let lift = log_s - log_a;
    let numerator = if lift < 1.0 {
        gap.exp() * lift.exp_m1()
    } else {
        (log_s - log_b).exp() - gap.exp()
    };
    let u = (numerator / width).clamp(0.0, 1.0);
    let s_du_ds = (log_s - log_b).exp() / width;
    let (v, dv) = cubic(u);
    Ok((v, dv * s_du_ds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_and_endpoints() {
        let (v, d) = smoothstep(0.0, 1.0, 0.5).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert!((d - 1.5).abs() < 1e-15);
        assert_eq!(smoothstep(0.0, 1.0, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(smoothstep(0.0, 1.0, 1.0).unwrap(), (1.0, 0.0));
        assert!((smoothstep(2.0, 4.0, 3.0).unwrap().0 - 0.5).abs() < 1e-15);
        assert!(matches!(smoothstep(1.0, 1.0, 1.0), Err(Error::EmptyInterval { .. })));
    }

    #[test]
    fn slope_bound_holds_on_a_grid() {
        for (a, b) in [(0.0, 1.0), (0.3, 0.31), (-5.0, 7.0)] {
            for i in 0..=1000 {
                let s = a + (b - a) * i as f64 / 1000.0;
                let (v, d) = smoothstep(a, b, s).unwrap();
                assert!((0.0..=1.0).contains(&v));
                assert!(d >= 0.0 && d <= 2.0 / (b - a) + 1e-12);
            }
        }
    }

    #[test]
    fn log_variant_agrees_with_direct() {
        let (a, b) = (0.2f64, 0.7f64);
        for i in 1..100 {
            let s = a + (b - a) * i as f64 / 100.0;
            let (v, d) = smoothstep(a, b, s).unwrap();
            let (vl, dl) = smoothstep_log(a.ln(), b.ln(), s.ln()).unwrap();
            assert!((v - vl).abs() < 1e-13);
            assert!((d * s - dl).abs() < 1e-12);
        }
    }

    #[test]
    fn log_variant_handles_radii_below_f64_range() {
        let (la, lb) = (-1500.0, -1499.0);
        let (v, d) = smoothstep_log(la, lb, -1499.5).unwrap();
        assert!(v > 0.0 && v < 1.0);
        assert!(d > 0.0 && d.is_finite());
    }
}
