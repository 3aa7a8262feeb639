use std::f64::consts::E;

use pconvex::modulus::exp_eps_max;
use pconvex::oracle::{arc_f, arc_t};
use pconvex::{
    arc_max_exp, check_lower_bound, delta0, delta_ea, empirical_modulus, empirical_modulus_with, Generator,
    MeasureSpace, Modulus, ParanormContext, SearchConfig, SearchMode,
};
use proptest::prelude::*;

fn ctx(g: Generator, w: &[f64]) -> ParanormContext {
    ParanormContext::new(g, MeasureSpace::new(w.to_vec()).unwrap())
}

fn diff(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

#[test]
fn arc_sweep_matches_delta0() {
    for i in 0..8 {
        let r = 0.1 + 0.7 * i as f64;
        let top = exp_eps_max(r);
        for j in 1..=8 {
            // the arc collapses to a point at eps = top
            let eps = top * j as f64 / 9.0;
            let arc = arc_max_exp(r, eps).unwrap();
            let want = r - delta0(r, eps).unwrap();
            assert!((arc.oracle.worst - want).abs() <= 1e-8, "r={r} eps={eps}");
            assert!(arc.argmax_at_endpoint, "r={r} eps={eps}");
            assert!(arc.critical_is_strict_min, "r={r} eps={eps}");
        }
    }
}

#[test]
fn arc_endpoints_share_the_maximum() {
    let arc = arc_max_exp(1.0, 0.5).unwrap();
    let (rho, alpha) = (arc.rho, arc.alpha);
    // the two endpoints are mirror images (s, t) ↔ (ρ − t, ρ − s)
    let t1 = arc_t(rho, alpha, 1.0);
    let f1 = arc_f(rho, 1.0, t1);
    let f2 = arc_f(rho, arc.s_end, rho - 1.0);
    assert!((f1 - f2).abs() < 1e-10);
    assert!((arc.s_end - (rho - t1)).abs() < 1e-9);
    // the point on the arc satisfies t/s + (ρ − s)/(ρ − t) = α
    let s = 0.5 * (1.0 + arc.s_end);
    let t = arc_t(rho, alpha, s);
    assert!((t / s + (rho - s) / (rho - t) - alpha).abs() < 1e-10);
}

#[test]
fn returned_pairs_revalidate() {
    let cases = [
        (Generator::power(2.0).unwrap(), vec![1.0, 1.0]),
        (Generator::power(3.0).unwrap(), vec![0.5, 0.3, 2.0]),
        (Generator::exp_minus_one(E).unwrap(), vec![1.0, 1.0]),
        (Generator::cubic_rational(3.0).unwrap(), vec![0.5, 0.25]),
    ];
    for (g, w) in cases {
        let c = ctx(g, &w);
        for (r, eps) in [(0.5, 0.2), (1.0, 1.0), (2.0, 3.5)] {
            let res = empirical_modulus(&c, r, eps, 2000, 9).unwrap();
            assert!(c.p(&res.x) <= r + 1e-12);
            assert!(c.p(&res.y) <= r + 1e-12);
            assert!(c.p(&diff(&res.x, &res.y)) >= eps - 1e-12);
            assert!(res.worst >= res.sampled_worst);
        }
    }
}

#[test]
fn identical_seeds_give_identical_results() {
    let c = ctx(Generator::exp_minus_one(E).unwrap(), &[1.0, 1.0]);
    let a = empirical_modulus(&c, 1.2, 0.8, 5000, 42).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| empirical_modulus(&c, 1.2, 0.8, 5000, 42).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.delta_hat.to_bits(), b.delta_hat.to_bits());
}

#[test]
fn more_samples_never_lower_the_sampled_maximum() {
    let c = ctx(Generator::power(3.0).unwrap(), &[1.0, 2.0]);
    let mut last = f64::NEG_INFINITY;
    for n in [100, 700, 1024, 1500, 4096, 9000] {
        let res = empirical_modulus(&c, 1.0, 0.7, n, 17).unwrap();
        assert!(res.sampled_worst >= last, "n={n}");
        last = res.sampled_worst;
    }
}

#[test]
fn sphere_mode_stays_on_the_sphere_before_climbing() {
    let c = ctx(Generator::power(2.0).unwrap(), &[1.0, 1.0]);
    let mut cfg = SearchConfig::new(3000, 4);
    cfg.mode = SearchMode::Sphere;
    let res = empirical_modulus_with(&c, 1.0, 1.0, &cfg).unwrap();
    assert!(res.delta_hat >= 1.0 - 3f64.sqrt() / 2.0 - 1e-6);
}

#[test]
fn low_coverage_is_a_warning() {
    let c = ctx(Generator::power(2.0).unwrap(), &[1.0, 1.0]);
    let res = empirical_modulus(&c, 1.0, 1.99, 50, 0).unwrap();
    assert!(res.low_coverage);
}

#[test]
fn lower_bound_rows_do_not_depend_on_grid_order() {
    let g = Generator::power(3.0).unwrap();
    let c = ctx(g.clone(), &[1.0, 1.0]);
    let m = Modulus::EA(g);
    let pts = [(1.0, 0.5), (2.0, 1.0)];
    let fwd = check_lower_bound(&c, &m, &pts, 1500, 3, 1.0).unwrap();
    let one = check_lower_bound(&c, &m, &pts[..1], 1500, 3, 1.0).unwrap();
    assert_eq!(fwd.rows[0], one.rows[0]);
    assert_eq!(fwd.violations, 0);
}

#[test]
fn inflated_modulus_is_caught() {
    let g = Generator::power(2.0).unwrap();
    let c = ctx(g.clone(), &[1.0, 1.0]);
    let report = check_lower_bound(&c, &Modulus::EA(g.clone()), &[(1.0, 1.0)], 4000, 8, 1.5).unwrap();
    assert_eq!(report.violations, 1);
    let row = &report.rows[0];
    assert!(row.violation);
    assert!(row.delta_empirical < 1.5 * delta_ea(&g, 1.0, 1.0).unwrap());
    assert_eq!(row.x.len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn search_respects_the_explicit_modulus(p in 2.0f64..4.0, r in 0.2f64..3.0, f in 0.05f64..0.95, seed in any::<u64>()) {
        let g = Generator::power(p).unwrap();
        let c = ctx(g.clone(), &[1.0, 0.7]);
        let eps = 2.0 * r * f;
        let res = empirical_modulus(&c, r, eps, 1500, seed).unwrap();
        prop_assert!(res.delta_hat >= delta_ea(&g, r, eps).unwrap() - 1e-9);
        prop_assert!(c.p(&diff(&res.x, &res.y)) >= eps - 1e-12);
    }
}
