//! Values checked against independent computations in plain floating point.

use shiftlab::field::{build_ladder, q_max, FieldParams};
use shiftlab::flow::{envelope_log, euler_polygon, linear_propagator, DenseMatrix, StateVector};
use shiftlab::kakutani::{gelfand_estimate, power_norm_log, WeightRule};

/// `max_t p_n(K0 t) e^(-gamma t)` by direct summation and golden-section search.
fn q_max_oracle(n: usize, k0: f64, gamma: f64) -> f64 {
    let q = |t: f64| {
        let z = k0 * t;
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..=n {
            term *= z / j as f64;
            sum += term;
        }
        sum * (-gamma * t).exp()
    };
    let (mut a, mut b) = (0.0, 4.0 * n as f64 / gamma + 10.0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..300 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if q(c) > q(d) {
            b = d;
        } else {
            a = c;
        }
    }
    q(0.5 * (a + b))
}

#[test]
fn envelope_maxima_match_direct_search() {
    for n in [1usize, 3, 7, 15, 31, 63] {
        let ours = q_max(n, 2.0, 0.5).log_q;
        let oracle = q_max_oracle(n, 2.0, 0.5).ln();
        assert!((ours - oracle).abs() < 1e-9, "n={n}: {ours} vs {oracle}");
    }
}

#[test]
fn first_envelope_maximum_is_closed_form() {
    // q_1 = (1 + 2t) e^(-t/2) peaks at t = 3/2 with value 4 e^(-3/4).
    let q = q_max(1, 2.0, 0.5);
    assert!((q.t_star - 1.5).abs() < 1e-8);
    assert!((q.log_q - (4.0f64.ln() - 0.75)).abs() < 1e-12);
}

#[test]
fn ladder_follows_the_halving_recursion() {
    let l = build_ladder(&FieldParams::default()).unwrap();
    let mut r = 0.0;
    // Past k = 7 the plain sum overflows f64 near its peak.
    for k in 2..=7 {
        let q = q_max_oracle((1 << k) - 1, 2.0, 0.5);
        r = r - 2f64.ln() - q.max(1.0).ln();
        assert!((l.r_log(k) - r).abs() < 1e-8 * r.abs(), "k={k}");
    }
    let expected = [0.0, -3.63, -12.40, -31.90, -73.21, -158.5, -332.2, -683.0, -1388.4, -2803.1];
    for (k, e) in expected.iter().enumerate() {
        assert!((l.r_log(k + 1) - e).abs() < 0.05 + 5e-4 * e.abs(), "k={}: {}", k + 1, l.r_log(k + 1));
    }
}

#[test]
fn envelope_starts_at_zero_and_peaks_at_q() {
    for k in 1..6 {
        assert_eq!(envelope_log(k, 0.0, 2.0, 0.5), 0.0);
        let q = q_max((1 << k) - 1, 2.0, 0.5);
        assert!((envelope_log(k, q.t_star, 2.0, 0.5) - q.log_q).abs() < 1e-12);
    }
}

#[test]
fn gelfand_matches_windows_and_closed_form() {
    let full = WeightRule::full(2.0).unwrap();
    for p in 1..=8u32 {
        let n = (1usize << p) - 1;
        let brute = power_norm_log(&full, n, 1 << (p + 1)).unwrap() / n as f64;
        let closed = f64::from(p) * 2f64.ln() / (f64::from(p).exp2() - 1.0);
        assert!((brute - closed).abs() <= 1e-12 * closed);
        assert!((gelfand_estimate(2.0, p) - closed).abs() <= 1e-12 * closed);
    }
}

/// `exp(t A)` by scaling and squaring a Taylor series, for a dense matrix `A`.
fn expm_oracle(a: &DenseMatrix, t: f64) -> DenseMatrix {
    let n = a.dim();
    let squarings = 8;
    let h = t / f64::from(1u32 << squarings);
    let mut term = DenseMatrix::identity(n);
    let mut sum = DenseMatrix::identity(n);
    let mut scaled = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            scaled.set(i, j, h * a.get(i, j));
        }
    }
    for j in 1..30 {
        term = term.matmul(&scaled);
        for r in 0..n {
            for c in 0..n {
                let v = sum.get(r, c) + term.get(r, c) / (1..=j).map(f64::from).product::<f64>();
                sum.set(r, c, v);
            }
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

#[test]
fn propagator_matches_scaling_and_squaring() {
    let n = 16;
    let w = WeightRule::full(2.0).unwrap();
    let mut a = DenseMatrix::zeros(n);
    for i in 0..n {
        a.set(i, i, -0.5);
        if i + 1 < n {
            a.set(i + 1, i, w.weight(i as u64 + 1).unwrap());
        }
    }
    for t in [0.5, 2.0, 5.0] {
        let ours = linear_propagator(n, t, 2.0, 0.5).unwrap();
        let oracle = expm_oracle(&a, t);
        assert!(ours.max_abs_diff(&oracle) <= 1e-10 * oracle.max_abs(), "t={t}");
    }
}

#[test]
fn single_euler_step_is_explicit() {
    // From x = (r, 0, ...) with r inside shell 1 only level-2 modulation can act,
    // and the first weight (level 1) is never modulated.
    let l = build_ladder(&FieldParams::default()).unwrap();
    let f = shiftlab::field::VectorField::new(l);
    let mut x = vec![0.0; 16];
    x[0] = 0.5;
    let p = euler_polygon(&StateVector::new(x).unwrap(), 0.1, 1, &f).unwrap();
    let end = p.endpoint();
    assert!((end[0] - 0.5 * (1.0 - 0.05)).abs() < 1e-15);
    assert!((end[1] - 0.1 * 2.0 * 0.5).abs() < 1e-15);
}
