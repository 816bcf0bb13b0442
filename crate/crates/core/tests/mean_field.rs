mod common;

use std::sync::OnceLock;

use mfimpulse::config::RunConfig;
use mfimpulse::mfc::OptimumReport;
use mfimpulse::mfg::EquilibriumReport;
use mfimpulse::{Error, PriceForm, Problem, SolverOptions};

struct Solved {
    problem: Problem,
    mfg: EquilibriumReport,
    mfc: OptimumReport,
}

fn solve(pb: Problem) -> Solved {
    let mfg = pb.solve_mfg().unwrap();
    let mfc = pb.solve_mfc().unwrap();
    Solved { problem: pb, mfg, mfc }
}

fn logistic() -> &'static Solved {
    static S: OnceLock<Solved> = OnceLock::new();
    S.get_or_init(|| solve(common::logistic()))
}

fn loksendal() -> &'static Solved {
    static S: OnceLock<Solved> = OnceLock::new();
    S.get_or_init(|| solve(common::loksendal()))
}

#[test]
fn logistic_equilibrium_matches_table() {
    let m = &logistic().mfg;
    let want = [1.279499, 5.368681, 5.221743, 0.463276, 2.674072];
    let got = [m.policy.w, m.policy.y, m.z_star, m.price, m.value];
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-5, "{got:?}");
    }
    assert!(m.residual <= 1e-6);
    assert!(!m.jump_flag);
    assert_eq!(m.failed_points, 0);
}

#[test]
fn logistic_optimum_matches_table() {
    let o = &logistic().mfc;
    let want = [1.106232, 6.306876, 4.559874, 0.537337, 2.916862];
    let got = [o.policy.w, o.policy.y, o.supply_rate, o.price, o.value];
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-4, "{got:?}");
    }
    let d = &o.deviation;
    assert!((d.policy.w - 1.326678).abs() < 1e-4 && (d.policy.y - 5.216696).abs() < 1e-4, "{d:?}");
    assert!((d.gap.unwrap() - 0.147439).abs() < 1e-5);
}

#[test]
fn fixed_points_are_self_consistent() {
    for s in [logistic(), loksendal()] {
        assert!(!s.mfg.all_fixed_points.is_empty());
        for fp in &s.mfg.all_fixed_points {
            assert!(fp.residual <= 1e-6, "{fp:?}");
            assert!(fp.value_check <= 1e-9);
        }
        assert!(s.mfg.z_star > 0.0 && s.mfg.z_star < s.mfg.z0);
    }
}

#[test]
fn planner_beats_equilibrium_and_doing_nothing() {
    for s in [logistic(), loksendal()] {
        assert!(s.mfc.value >= s.mfg.value - 1e-9);
        assert!(s.mfc.value > s.mfc.cbar);
        assert!(s.mfc.deviation.gap.unwrap() >= -1e-9, "a best response cannot lose to the planner policy at the same price");
    }
}

#[test]
fn planner_value_is_the_upsilon_of_its_policy() {
    for s in [logistic(), loksendal()] {
        let u = s.problem.upsilon(&s.mfc.policy).unwrap();
        assert!((u - s.mfc.value).abs() < 1e-12);
    }
}

#[test]
fn multiplier_recovers_the_planner_rate() {
    for s in [logistic(), loksendal()] {
        let d = s.problem.lagrange_multiplier(s.mfc.supply_rate).unwrap();
        assert!(d.residual <= 1e-6, "{d:?}");
        assert!(d.lambda < d.lambda_upper);
        assert!((d.lagrangian_value - d.upsilon_value).abs() < 1e-6, "{d:?}");
    }
}

#[test]
fn rates_outside_the_range_are_rejected() {
    let s = logistic();
    assert!(matches!(s.problem.evaluate_map(-1.0), Err(Error::Precondition(_))));
    assert!(s.problem.lagrange_multiplier(s.mfg.z0 * 1.01).is_err());
}

#[test]
fn infeasible_price_floor_stops_the_game() {
    let mut cfg = RunConfig::logistic_example();
    cfg.market.price = PriceForm::Constant { value: 0.0 };
    let pb = common::problem(&cfg, SolverOptions::default());
    assert!(!pb.price_floor_certificate().unwrap().feasible);
    assert!(matches!(pb.solve_mfg(), Err(Error::Precondition(_))));
}
