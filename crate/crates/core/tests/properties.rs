use std::f64::consts::E;

use pconvex::conditions::{
    check_f_concave, check_g_convex, check_ratio_superadditive, check_sign_identity, check_superquadratic, f_transform,
    quadratic_sides,
};
use pconvex::{Generator, Grid2, MeasureSpace, ParanormContext, Verdict};
use proptest::prelude::*;

fn generators() -> Vec<Generator> {
    vec![
        Generator::power(1.0).unwrap(),
        Generator::power(1.5).unwrap(),
        Generator::power(2.0).unwrap(),
        Generator::power(3.5).unwrap(),
        Generator::exp_minus_one(E).unwrap(),
        Generator::exp_minus_one(2.0).unwrap(),
        Generator::power_times_exp(2.0, E).unwrap(),
        Generator::cubic_rational(3.0).unwrap(),
    ]
}

fn weight() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), Just(0.3), Just(2.5), 0.0f64..4.0]
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(weight(), 1..7).prop_filter("some positive weight", |w| w.iter().any(|&a| a > 0.0))
}

fn coords(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-20.0f64..20.0, k)
}

fn permutation(k: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..k).collect::<Vec<_>>()).prop_shuffle()
}

fn lp_norm(x: &[f64], p: f64) -> f64 {
    x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(p.recip())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn classification_ignores_order(w in weights(), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..w.len()).collect();
        perm.sort_by_key(|&i| (i as u64).wrapping_mul(seed | 1).rotate_left(17));
        let shuffled: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
        let a = MeasureSpace::new(w).unwrap().classify();
        let b = MeasureSpace::new(shuffled).unwrap().classify();
        prop_assert_eq!(a.sub_probability, b.sub_probability);
        prop_assert_eq!(a.counting_like, b.counting_like);
        prop_assert_eq!(a.integer_weights, b.integer_weights);
        prop_assert_eq!(a.total_mass.to_bits(), b.total_mass.to_bits());
    }

    #[test]
    fn pnorm_reads_only_absolute_values(
        (w, x) in weights().prop_flat_map(|w| { let k = w.len(); (Just(w), coords(k)) }),
        gi in 0usize..8,
    ) {
        let g = generators().swap_remove(gi);
        let ctx = ParanormContext::new(g, MeasureSpace::new(w).unwrap());
        let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        match (ctx.pnorm(&x), ctx.pnorm(&abs)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn pnorm_is_permutation_invariant(
        (w, x, perm) in weights().prop_flat_map(|w| { let k = w.len(); (Just(w), coords(k), permutation(k)) }),
        gi in 0usize..8,
    ) {
        let g = generators().swap_remove(gi);
        let pw: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
        let px: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
        let a = ParanormContext::new(g.clone(), MeasureSpace::new(w).unwrap()).pnorm(&x);
        let b = ParanormContext::new(g, MeasureSpace::new(pw).unwrap()).pnorm(&px);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn power_generators_give_lp_norms(x in prop::collection::vec(-50.0f64..50.0, 1..8)) {
        for p in [1.0, 2.0, 3.5] {
            let ctx = ParanormContext::new(Generator::power(p).unwrap(), MeasureSpace::counting(x.len()).unwrap());
            let got = ctx.pnorm(&x).unwrap();
            let want = lp_norm(&x, p);
            prop_assert!((got - want).abs() <= 1e-12 * want.max(f64::MIN_POSITIVE), "p = {}: {} vs {}", p, got, want);
        }
    }

    #[test]
    fn inverse_is_monotone(gi in 0usize..8, a in 0.0f64..1.0, b in 0.0f64..1.0, scale in -8i32..12) {
        let g = generators().swap_remove(gi);
        let cap = g.value_cap().min(1e300);
        let s = 10f64.powi(scale);
        let (y1, y2) = ((a * s).min(cap), (b * s).min(cap));
        let (lo, hi) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
        prop_assert!(g.inverse(lo).unwrap() <= g.inverse(hi).unwrap());
    }

    #[test]
    fn inverse_round_trips(gi in 0usize..8, log_t in -13.8f64..6.0) {
        let g = generators().swap_remove(gi);
        let t = log_t.exp().min(g.t_max());
        let back = g.inverse(g.phi(t)).unwrap();
        prop_assert!((back - t).abs() <= 1e-10 * t.max(1.0), "{}: {} -> {}", g, t, back);
    }

    #[test]
    fn balls_of_convex_generators_are_convex(
        gi in 1usize..8,
        r in 0.1f64..5.0,
        a in 0.0f64..std::f64::consts::TAU,
        b in 0.0f64..std::f64::consts::TAU,
        w1 in 0.2f64..3.0,
        w2 in 0.2f64..3.0,
    ) {
        let g = generators().swap_remove(gi);
        let ctx = ParanormContext::new(g, MeasureSpace::new(vec![w1, w2]).unwrap());
        let x = ctx.radial_scale(&[a.cos(), a.sin()], r).unwrap();
        let y = ctx.radial_scale(&[b.cos(), b.sin()], r).unwrap();
        let mid = [0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])];
        prop_assert!(ctx.pnorm(&mid).unwrap() <= r + 1e-9);
    }

    #[test]
    fn sign_identity_holds_for_every_generator(
        gi in 0usize..8,
        pairs in prop::collection::vec((-30.0f64..30.0, -30.0f64..30.0), 1..50),
    ) {
        let g = generators().swap_remove(gi);
        let rep = check_sign_identity(&g, &pairs);
        prop_assert!(rep.holds(), "{}: {:?}", g, rep.witness);
    }

    #[test]
    fn subsampled_grids_keep_order(n in 2usize..300, m in 2usize..40) {
        let grid = Grid2::new(1e-3, 10.0, n, pconvex::Spacing::Log).unwrap();
        let sub = grid.subsample(m);
        prop_assert_eq!(sub.len(), n.min(m));
        prop_assert!(sub.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(sub[0], 1e-3);
        prop_assert_eq!(*sub.last().unwrap(), 10.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// φ′/φ″ superadditive on a grid ⇒ F concave and G convex on the same grid.
    #[test]
    fn ratio_superadditivity_implies_f_and_g(family in 0usize..4, p in 1.05f64..4.0, a in 1.2f64..4.0) {
        let g = match family {
            0 => Generator::power(p).unwrap(),
            1 => Generator::cubic_rational(p.max(1.5)).unwrap(),
            2 => Generator::exp_minus_one(a).unwrap(),
            _ => Generator::power_times_exp(p, a).unwrap(),
        };
        let grid = Grid2::new(1e-3, 20.0, 40, pconvex::Spacing::Log).unwrap();
        let ratio = check_ratio_superadditive(&g, &grid);
        let f = check_f_concave(&g, &grid);
        let gc = check_g_convex(&g, &grid);
        if ratio.holds() {
            prop_assert!(f.holds(), "{}: F {}", g, f.verdict);
            prop_assert!(gc.holds(), "{}: G {}", g, gc.verdict);
        }
        prop_assert!(f.cross_checks.iter().all(|c| c.holds));
        prop_assert!(gc.cross_checks.iter().all(|c| c.holds));
    }
}

#[test]
fn failing_witnesses_reproduce() {
    let grid = Grid2::default();
    let exp = Generator::exp_minus_one(E).unwrap();
    let rep = check_superquadratic(&exp, &grid);
    assert_eq!(rep.verdict, Verdict::Fails);
    let w = rep.witness.as_ref().unwrap();
    let (lhs, rhs) = quadratic_sides(&exp, w.point[0], w.point[1]);
    assert!(lhs - rhs <= 0.5 * rep.margin);

    let rep = check_f_concave(&exp, &grid);
    assert_eq!(rep.verdict, Verdict::Fails);
    let pt = &rep.witness.as_ref().unwrap().point;
    let at_mid = f_transform(&exp, pt[4], pt[5]);
    let avg = 0.5 * (f_transform(&exp, pt[0], pt[1]) + f_transform(&exp, pt[2], pt[3]));
    assert!(at_mid - avg <= 0.5 * rep.margin);
}
