use proptest::prelude::*;

use shiftlab::field::{build_ladder, modulation, smoothstep, FieldParams, VectorField};
use shiftlab::flow::linear_propagator;
use shiftlab::kakutani::{compose, kappa, truncate, OmegaClass, TruncatedShift, WeightRule};
use shiftlab::numerics::{log_sum_exp, norm};

fn ladder() -> shiftlab::field::RadiusLadder {
    build_ladder(&FieldParams::default()).unwrap()
}

proptest! {
    #[test]
    fn kappa_counts_factors_of_two(odd in 0u64..1_000_000, shift in 0u32..20) {
        let n = (2 * odd + 1) << shift;
        prop_assert_eq!(kappa(n).unwrap(), shift);
    }

    #[test]
    fn omega_products_vanish(k in 1u32..5, seed_weights in prop::collection::vec(0.01f64..3.0, 64)) {
        let class = OmegaClass::new(k).unwrap();
        let dim = 40;
        let factors: Vec<TruncatedShift> = (0..class.index())
            .map(|j| {
                let w = (1..dim)
                    .map(|n| if class.requires_zero(n) { 0.0 } else { seed_weights[(n + 7 * j) % 64] })
                    .collect();
                TruncatedShift::new(w).unwrap()
            })
            .collect();
        prop_assert!(factors.iter().all(|f| class.contains(f)));
        prop_assert!(compose(&factors).unwrap().is_zero());
        // one factor fewer is generically nonzero
        prop_assert!(!compose(&factors[1..]).unwrap().is_zero());
    }

    #[test]
    fn smoothstep_is_monotone_and_bounded(a in 0.1f64..10.0, w in 0.01f64..10.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let b = a + w;
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let (p, dp) = smoothstep(a, b, a + lo * w).unwrap();
        let (q, _) = smoothstep(a, b, a + hi * w).unwrap();
        prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&q));
        prop_assert!(p <= q);
        prop_assert!(dp >= 0.0 && dp <= 1.5 / w + 1e-12);
    }

    #[test]
    fn multipliers_stay_in_unit_interval(s in -2800.0f64..5.0) {
        let st = modulation(s, &ladder()).unwrap();
        for m in 1..=st.max_level() {
            prop_assert!((0.0..=1.0).contains(&st.multiplier(m)));
        }
        prop_assert!(st.moving_levels().len() <= 2);
        prop_assert!(st.modulation_norm(2.0) <= 2.0);
    }

    #[test]
    fn field_norm_is_linearly_bounded(xs in prop::collection::vec(-1.0f64..1.0, 32), scale in -30.0f64..2.0) {
        let f = VectorField::new(ladder());
        let x: Vec<f64> = xs.iter().map(|v| v * scale.exp()).collect();
        let fx = f.eval(&x).unwrap();
        prop_assert!(norm(&fx) <= (0.5 + 2.0) * norm(&x) * (1.0 + 1e-12));
    }

    #[test]
    fn propagator_is_a_semigroup(s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let a = linear_propagator(24, s, 2.0, 0.5).unwrap();
        let b = linear_propagator(24, t, 2.0, 0.5).unwrap();
        let ab = linear_propagator(24, s + t, 2.0, 0.5).unwrap();
        prop_assert!(a.matmul(&b).max_abs_diff(&ab) <= 1e-10 * ab.max_abs());
    }

    #[test]
    fn log_sum_exp_matches_naive_sum(xs in prop::collection::vec(-30.0f64..30.0, 1..20)) {
        let naive = xs.iter().map(|v| v.exp()).sum::<f64>().ln();
        prop_assert!((log_sum_exp(&xs) - naive).abs() <= 1e-12 * naive.abs().max(1.0));
    }

    #[test]
    fn truncated_weights_follow_the_level(n in 1usize..4096) {
        let w = truncate(&WeightRule::full(2.0).unwrap(), 4097).unwrap();
        let level = n.trailing_zeros() as i32 + 1;
        prop_assert_eq!(w.weight(n), 2f64.powi(2 - level));
    }
}

#[test]
fn binomial_coefficient_bound() {
    use shiftlab::flow::ln_binomial;
    use shiftlab::numerics::ln_factorial;
    for n in [1usize, 10, 100, 1000] {
        for i in 0..=n.min(64) {
            assert!(ln_binomial(n, i) <= i as f64 * (n as f64).ln() - ln_factorial(i) + 1e-9, "n={n} i={i}");
        }
    }
}
