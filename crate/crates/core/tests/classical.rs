mod common;

use std::sync::OnceLock;

use mfimpulse::policy::BoundaryCase;
use mfimpulse::numerics::{integrate, Endpoints, QuadratureSpec};
use mfimpulse::{Problem, ThresholdPolicy};
use proptest::prelude::*;

fn logistic() -> &'static Problem {
    static P: OnceLock<Problem> = OnceLock::new();
    P.get_or_init(common::logistic)
}

fn loksendal() -> &'static Problem {
    static P: OnceLock<Problem> = OnceLock::new();
    P.get_or_init(common::loksendal)
}

fn nu_mass(pb: &Problem, pol: &ThresholdPolicy, f: impl Fn(f64) -> f64) -> f64 {
    let spec = QuadratureSpec { abs_tol: 1e-12, rel_tol: 1e-11, endpoints: Endpoints::Regular, ..QuadratureSpec::default() };
    // below the resolved range the density is negligible
    let a = pb.engine().resolved_left();
    let g = |x: f64| f(x) * pb.nu_density(pol, x).unwrap();
    let left = integrate(&g, a, pol.w, &QuadratureSpec { endpoints: Endpoints::LeftSingular, ..spec }).unwrap().value;
    let right = integrate(&g, pol.w, pol.y, &spec).unwrap().value;
    left + right
}

#[test]
fn first_order_conditions_hold_at_table_prices() {
    for (pb, p) in [(logistic(), 0.463276), (logistic(), 0.537337), (loksendal(), 0.4), (loksendal(), 0.6)] {
        let sol = pb.solve_classical(p).unwrap();
        assert!(sol.residual_w <= 1e-6 && sol.residual_y <= 1e-6, "{sol:?}");
        assert_eq!(sol.boundary_case, BoundaryCase::Interior);
        let oracle = sol.oracle_value.unwrap();
        assert!(oracle <= sol.value + 1e-6, "2D search beat the level search: {oracle} > {}", sol.value);
    }
}

#[test]
fn logistic_mfg_policy_at_its_price() {
    let sol = logistic().solve_classical(0.463276).unwrap();
    assert!((sol.policy.w - 1.279499).abs() < 1e-4, "{:?}", sol.policy);
    assert!((sol.policy.y - 5.368681).abs() < 1e-4);
    assert!((sol.value - 2.674072).abs() < 1e-5);
}

#[test]
fn h_has_a_single_peak() {
    for (pb, p) in [(logistic(), 0.5), (loksendal(), 0.5)] {
        let e = pb.engine();
        let (lo, hi) = e.window();
        let hs: Vec<f64> = (0..=400).map(|i| e.h(e.to_x(lo + (hi - lo) * i as f64 / 400.0), p).unwrap()).collect();
        let turns = hs.windows(3).filter(|w| (w[1] - w[0]) * (w[2] - w[1]) < 0.0).count();
        assert_eq!(turns, 1, "h_p has {turns} turning points");
    }
}

#[test]
fn optimal_value_is_lipschitz_in_price() {
    for pb in [logistic(), loksendal()] {
        let z0 = pb.engine().z0();
        let prices = [0.45, 0.5, 0.62, 0.8];
        let vals: Vec<f64> = prices.iter().map(|&p| pb.solve_classical_with(p, false).unwrap().value).collect();
        for i in 0..prices.len() {
            for j in i + 1..prices.len() {
                assert!((vals[j] - vals[i]).abs() <= z0 * (prices[j] - prices[i]) + 1e-9);
            }
        }
    }
}

#[test]
fn stationary_density_reproduces_value() {
    for (pb, p) in [(logistic(), 0.5), (loksendal(), 0.5)] {
        let sol = pb.solve_classical_with(p, false).unwrap();
        let pol = sol.policy;
        let rho = 1.0 / pb.cycle_time(&pol).unwrap();
        assert!((nu_mass(pb, &pol, |_| 1.0) - 1.0).abs() < 1e-6);
        let k = pb.market().fixed_cost();
        let e = pb.engine();
        let v = nu_mass(pb, &pol, |x| e.reward_rate(x, p) - k * rho);
        assert!((v / sol.value - 1.0).abs() < 1e-5, "{v} vs {}", sol.value);
    }
}

#[test]
fn infeasible_price_is_reported() {
    // zero price: resetting only forfeits running reward
    assert!(!logistic().is_feasible(0.0).unwrap());
    assert!(logistic().solve_classical(0.0).is_err());
}

#[test]
fn entrance_boundary_resets_to_zero() {
    let pb = common::immigration();
    for p in [1.0, 2.0, 4.0] {
        let sol = pb.solve_classical(p).unwrap();
        assert_eq!(sol.boundary_case, BoundaryCase::WAtA, "price {p}: {sol:?}");
        assert_eq!(sol.policy.w, 0.0);
        assert!(sol.residual_w > 0.0, "h_p(a) must lie above the value");
        assert!(sol.residual_y < 1e-6);
        assert!(sol.oracle_value.unwrap() <= sol.value + 1e-6);
    }
}

fn policy_strategy() -> impl Strategy<Value = (f64, f64)> {
    (0.2f64..4.0, 0.05f64..5.0).prop_map(|(w, gap)| (w, w + gap))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn value_is_affine_in_price((w, y) in policy_strategy(), p1 in 0.0f64..2.0, p2 in 0.0f64..2.0) {
        let pb = logistic();
        let pol = ThresholdPolicy::new(w, y);
        let z = pb.supply_rate(&pol).unwrap();
        let d = pb.value(&pol, p2).unwrap() - pb.value(&pol, p1).unwrap();
        prop_assert!((d - (p2 - p1) * z).abs() < 1e-10 * (1.0 + d.abs()));
    }

    #[test]
    fn supply_rate_never_exceeds_z0((w, y) in policy_strategy()) {
        for pb in [logistic(), loksendal()] {
            let b = pb.model().b();
            let pol = ThresholdPolicy::new(w.min(b * 0.9), y.min(b * 0.999));
            if pol.w < pol.y {
                prop_assert!(pb.supply_rate(&pol).unwrap() <= pb.engine().z0() * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn h_shifts_by_price_over_xi_prime(x in 0.05f64..12.0, p in 0.0f64..3.0) {
        let e = logistic().engine();
        let shift = e.h(x, p).unwrap() - e.h(x, 0.0).unwrap();
        let expected = p / e.xi_prime(x).unwrap();
        prop_assert!((shift - expected).abs() <= 1e-9 * expected.abs().max(1.0));
    }
}
