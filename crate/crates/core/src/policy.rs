//! Threshold policies and the classical long-run-average impulse problem at a fixed price.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundaryKind, DiffusionModel, MarketModel};
use crate::numerics::{find_root, maximize_2d, maximize_unimodal, Box2, Bracket, Max2d, Multistart};
use crate::potentials::{EngineOptions, PotentialEngine, Potentials};

/// Reset to `w` whenever the state reaches `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdPolicy {
    pub w: f64,
    pub y: f64,
}

impl ThresholdPolicy {
    pub fn new(w: f64, y: f64) -> ThresholdPolicy {
        ThresholdPolicy { w, y }
    }

    /// Harvested amount per impulse.
    pub fn width(&self) -> f64 {
        self.y - self.w
    }
}

/// f(y) - f(w).
pub fn increment<F: Fn(f64) -> f64>(f: F, w: f64, y: f64) -> f64 {
    f(y) - f(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCase {
    Interior,
    WAtA,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSolution {
    pub policy: ThresholdPolicy,
    pub price: f64,
    pub value: f64,
    pub supply_rate: f64,
    pub boundary_case: BoundaryCase,
    /// |h_p(w) - F| for interior solutions, h_p(a) - F when w sits at a.
    pub residual_w: f64,
    /// |h_p(y) - F|
    pub residual_y: f64,
    /// Maximizer of h_p and its value.
    pub peak: f64,
    pub peak_value: f64,
    pub cbar: f64,
    /// Value found by the independent 2D search, when run.
    pub oracle_value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub engine: EngineOptions,
    pub optimizer: Multistart,
    /// Number of intervals in the fixed-point scan.
    pub mfg_grid: usize,
    /// Cross-check each classical solve against a 2D search of F_p.
    pub verify: bool,
    /// sup F_p must exceed the do-nothing value by more than this.
    pub feasibility_margin: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            engine: EngineOptions::default(),
            optimizer: Multistart::default(),
            mfg_grid: 256,
            verify: true,
            feasibility_margin: 1e-9,
        }
    }
}

/// A model/market pair with its potentials built, ready for solving.
#[derive(Debug)]
pub struct Problem {
    engine: PotentialEngine,
    options: SolverOptions,
}

/// Best point of a 2D search over policies.
#[derive(Debug, Clone)]
pub struct PolicySearch {
    pub policy: ThresholdPolicy,
    pub value: f64,
    pub grid: Max2d,
    /// Value of the best policy with w at an entrance boundary, if searched.
    pub edge_value: Option<f64>,
}

const PEAK_GRID: usize = 400;
const LEVEL_TOL: f64 = 1e-13;

impl Problem {
    pub fn new(model: &DiffusionModel, market: &MarketModel, options: SolverOptions) -> Result<Problem> {
        let engine = PotentialEngine::build(model, market, &options.engine)?;
        Ok(Problem { engine, options })
    }

    pub fn engine(&self) -> &PotentialEngine {
        &self.engine
    }

    pub fn model(&self) -> &DiffusionModel {
        self.engine.model()
    }

    pub fn market(&self) -> &MarketModel {
        self.engine.market()
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    fn entrance(&self) -> bool {
        self.model().left_boundary() == BoundaryKind::Entrance
    }

    pub fn check_policy(&self, policy: &ThresholdPolicy) -> Result<()> {
        let (a, b) = (self.model().a(), self.model().b());
        let w_ok = policy.w > a || (policy.w == a && self.entrance());
        if !(w_ok && policy.w < policy.y && policy.y < b) {
            return Err(Error::Precondition(format!(
                "policy (w = {}, y = {}) must satisfy a <= w < y < b, with w = a only at an entrance boundary",
                policy.w, policy.y
            )));
        }
        Ok(())
    }

    fn pair(&self, policy: &ThresholdPolicy) -> Result<(Potentials, Potentials, f64)> {
        self.check_policy(policy)?;
        let pw = self.engine.at(policy.w)?;
        let py = self.engine.at(policy.y)?;
        let bxi = py.xi - pw.xi;
        if !(bxi > 1e-14 * py.xi.abs().max(pw.xi.abs())) {
            return Err(Error::Evaluation { x: policy.y, what: "xi(y) - xi(w) underflows".into() });
        }
        Ok((pw, py, bxi))
    }

    /// xi(y) - xi(w): expected travel time from w up to y.
    pub fn cycle_time(&self, policy: &ThresholdPolicy) -> Result<f64> {
        Ok(self.pair(policy)?.2)
    }

    /// g(y) - g(w): expected running reward collected on the way from w to y.
    pub fn cycle_reward(&self, policy: &ThresholdPolicy) -> Result<f64> {
        let (pw, py, _) = self.pair(policy)?;
        Ok(py.g - pw.g)
    }

    /// F_p(w, y): long-run average reward of the policy at price `p`.
    pub fn value(&self, policy: &ThresholdPolicy, p: f64) -> Result<f64> {
        let (pw, py, bxi) = self.pair(policy)?;
        Ok((py.g - pw.g + p * policy.width() - self.market().fixed_cost()) / bxi)
    }

    /// Long-run average harvest rate (y - w) / (xi(y) - xi(w)).
    pub fn supply_rate(&self, policy: &ThresholdPolicy) -> Result<f64> {
        let (_, _, bxi) = self.pair(policy)?;
        Ok(policy.width() / bxi)
    }

    /// Stationary density of the controlled process.
    pub fn nu_density(&self, policy: &ThresholdPolicy, x: f64) -> Result<f64> {
        let (pw, py, bxi) = self.pair(policy)?;
        if x > policy.y {
            return Ok(0.0);
        }
        let px = self.engine.at(x)?;
        let span = if x <= policy.w {
            py.scale_measure - pw.scale_measure
        } else {
            py.scale_measure - px.scale_measure
        };
        Ok(px.speed * span / bxi)
    }

    /// Maximizer of h_p over the search window.
    pub fn h_peak(&self, p: f64) -> Result<(f64, f64)> {
        let (t_lo, t_hi) = self.engine.window();
        let h = |t: f64| self.engine.h(self.engine.to_x(t), p).unwrap_or(f64::NEG_INFINITY);
        let ts: Vec<f64> = (0..=PEAK_GRID)
            .map(|i| t_lo + (t_hi - t_lo) * i as f64 / PEAK_GRID as f64)
            .collect();
        let vals: Vec<f64> = ts.iter().map(|&t| h(t)).collect();
        let best = (0..=PEAK_GRID)
            .max_by(|&i, &j| vals[i].total_cmp(&vals[j]).then(j.cmp(&i)))
            .expect("non-empty grid");
        if best == PEAK_GRID {
            return Err(Error::Infeasible {
                price: p,
                reason: "h_p still increasing at the right end of the search window".into(),
            });
        }
        if !vals[best].is_finite() {
            return Err(Error::Evaluation { x: self.engine.to_x(ts[best]), what: "h_p not finite on the search grid".into() });
        }
        let lo = ts[best.saturating_sub(1)];
        let hi = ts[best + 1];
        let (t, v) = maximize_unimodal(h, lo, hi, 1e-13);
        Ok((self.engine.to_x(t), v))
    }

    /// Lower end for levels: the larger of the do-nothing value and h_p near a
    /// (natural boundary) or at b's side of the window.
    fn level_floor(&self, p: f64) -> Result<f64> {
        let (t_lo, t_hi) = self.engine.window();
        let mut floor = self.engine.cbar_b().max(self.engine.h(self.engine.to_x(t_hi), p)?);
        if !self.entrance() {
            floor = floor.max(self.engine.h(self.engine.to_x(t_lo), p)?);
        }
        Ok(floor)
    }

    /// Roots of h_p = level on each side of the peak. `None` for w means w = a.
    fn level_points(&self, p: f64, level: f64, t_peak: f64, h_at_a: Option<f64>) -> Result<(Option<f64>, f64)> {
        let (t_lo, t_hi) = self.engine.window();
        let e = &self.engine;
        let f = |t: f64| e.h(e.to_x(t), p).map(|v| v - level).unwrap_or(f64::NAN);
        let w = match h_at_a {
            Some(ha) if level <= ha => None,
            _ => {
                let mut lo = t_lo;
                if f(lo) > 0.0 && h_at_a.is_some() {
                    lo = e.to_t(e.resolved_left());
                }
                match Bracket::new(f, lo, t_peak) {
                    Ok(br) => Some(e.to_x(find_root(f, &br, LEVEL_TOL)?)),
                    Err(Error::NoBracket { .. }) if h_at_a.is_some() => None,
                    Err(err) => return Err(err),
                }
            }
        };
        let br = Bracket::new(f, t_peak, t_hi)?;
        let y = e.to_x(find_root(f, &br, LEVEL_TOL)?);
        Ok((w, y))
    }

    fn policy_from(&self, w: Option<f64>, y: f64) -> ThresholdPolicy {
        ThresholdPolicy { w: w.unwrap_or(self.model().a()), y }
    }

    /// Optimal thresholds and value at price `p`, from the first-order conditions.
    pub fn solve_classical(&self, p: f64) -> Result<ClassicalSolution> {
        self.solve_classical_with(p, self.options.verify)
    }

    /// As [`Problem::solve_classical`] with the 2D cross-check chosen per call.
    pub fn solve_classical_with(&self, p: f64, verify: bool) -> Result<ClassicalSolution> {
        let (x_peak, h_max) = self.h_peak(p)?;
        let t_peak = self.engine.to_t(x_peak);
        let floor = self.level_floor(p)?;
        let cbar = self.engine.cbar_b();
        if !(h_max > floor) {
            return Err(Error::Infeasible { price: p, reason: format!("max h_p = {h_max} does not exceed {floor}") });
        }
        let h_at_a = if self.entrance() { Some(self.engine.h_left_limit(p)?) } else { None };

        let gap = |level: f64| -> Result<(f64, ThresholdPolicy)> {
            let (w, y) = self.level_points(p, level, t_peak, h_at_a)?;
            let policy = self.policy_from(w, y);
            Ok((self.value(&policy, p)? - level, policy))
        };
        // descend from the peak until the level lies below the value of its own policy
        let span = h_max - floor;
        let mut upper = h_max;
        let mut upper_gap = f64::NEG_INFINITY;
        let mut bracket = None;
        let fractions = [0.999, 0.99, 0.9, 0.75, 0.5, 0.25, 0.1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12];
        for frac in fractions {
            let level = floor + frac * span;
            let q = match gap(level) {
                Ok((q, _)) => q,
                Err(Error::Evaluation { .. }) if frac > 0.5 => f64::NEG_INFINITY,
                Err(e) => return Err(e),
            };
            if q > 0.0 {
                bracket = Some((level, q));
                break;
            }
            upper = level;
            upper_gap = q;
        }
        let (lower, lower_gap) = bracket.ok_or_else(|| Error::Infeasible {
            price: p,
            reason: format!("F_p stays below every level above {floor}"),
        })?;
        if !upper_gap.is_finite() {
            // the first trial already sits below the value; tighten towards the peak
            let mut found = false;
            for k in 4..=14 {
                let level = h_max - span * 10f64.powi(-k);
                if let Ok((q, _)) = gap(level) {
                    if q <= 0.0 {
                        upper = level;
                        upper_gap = q;
                        found = true;
                        break;
                    }
                }
            }
            if !found {
                return Err(Error::Convergence(format!("cannot bracket the optimal level at price {p}")));
            }
        }
        let q = |l: f64| gap(l).map(|r| r.0).unwrap_or(f64::NAN);
        let br = Bracket::from_values(lower, upper, lower_gap, upper_gap)?;
        let level = find_root(q, &br, LEVEL_TOL * h_max.abs().max(1.0))?;
        let (_, policy) = gap(level)?;
        let value = self.value(&policy, p)?;
        if !(value > cbar + self.options.feasibility_margin) {
            return Err(Error::Infeasible { price: p, reason: format!("optimal value {value} does not exceed {cbar}") });
        }

        let residual_y = (self.engine.h(policy.y, p)? - value).abs();
        let (boundary_case, residual_w) = match h_at_a {
            Some(ha) if policy.w == self.model().a() => (BoundaryCase::WAtA, ha - value),
            _ => (BoundaryCase::Interior, (self.engine.h(policy.w, p)? - value).abs()),
        };
        let mut solution = ClassicalSolution {
            policy,
            price: p,
            value,
            supply_rate: self.supply_rate(&policy)?,
            boundary_case,
            residual_w,
            residual_y,
            peak: x_peak,
            peak_value: h_max,
            cbar,
            oracle_value: None,
        };
        if verify {
            let search = self.search(|pol| self.value(pol, p))?;
            let tol = 10.0 * self.options.optimizer.tol;
            solution.oracle_value = Some(search.value);
            if (search.value - value).abs() > tol.max(1e-9 * value.abs()) {
                if search.value > value {
                    return Err(Error::Consistency(format!(
                        "level search value {value} at price {p} is below the 2D search value {} at ({}, {})",
                        search.value, search.policy.w, search.policy.y
                    )));
                }
                warn!("2D search at price {p} stopped at {} below level-search value {value}", search.value);
            }
        }
        debug!("classical solve at p = {p}: {:?} value {value}", solution.policy);
        Ok(solution)
    }

    /// Maximizes `f` over threshold policies: grid scan and Nelder-Mead in
    /// (ln-coordinate of w, log of the coordinate gap), plus the w = a edge at an entrance.
    pub fn search<F>(&self, f: F) -> Result<PolicySearch>
    where
        F: Fn(&ThresholdPolicy) -> Result<f64> + Sync,
    {
        let e = &self.engine;
        let (t_lo, t_hi) = e.window();
        let span = t_hi - t_lo;
        let point = |q: [f64; 2]| -> Option<ThresholdPolicy> {
            let t_y = q[0] + q[1].exp();
            if !(t_y <= t_hi) {
                return None;
            }
            let pol = ThresholdPolicy { w: e.to_x(q[0]), y: e.to_x(t_y) };
            (pol.w < pol.y).then_some(pol)
        };
        let objective = |q: [f64; 2]| match point(q) {
            Some(pol) => f(&pol).unwrap_or(f64::NAN),
            None => f64::NAN,
        };
        let bx = Box2::new([t_lo, -12.0], [t_hi, span.ln()]);
        let grid = maximize_2d(objective, &bx, &self.options.optimizer);
        if grid.warning {
            debug!("2D policy search: no start improved on the grid optimum {}", grid.value);
        }
        let mut best = match point(grid.arg) {
            Some(pol) if grid.value.is_finite() => (pol, grid.value),
            _ => return Err(Error::Convergence("2D policy search found no admissible point".into())),
        };
        let mut edge_value = None;
        if self.entrance() {
            let a = self.model().a();
            let g = |t: f64| f(&ThresholdPolicy { w: a, y: e.to_x(t) }).unwrap_or(f64::NEG_INFINITY);
            let (t, v) = grid_then_golden(g, t_lo, t_hi, 200, self.options.optimizer.tol);
            edge_value = Some(v);
            if v > best.1 {
                best = (ThresholdPolicy { w: a, y: e.to_x(t) }, v);
            }
        }
        Ok(PolicySearch { policy: best.0, value: best.1, grid, edge_value })
    }

    /// sup over policies of F_p exceeds the do-nothing value.
    pub fn is_feasible(&self, p: f64) -> Result<bool> {
        let search = self.search(|pol| self.value(pol, p))?;
        Ok(search.value > self.engine.cbar_b() + self.options.feasibility_margin)
    }

    /// inf of the feasible prices, by bisection on feasibility.
    pub fn p0(&self) -> Result<f64> {
        let (a, b) = (self.model().a(), self.model().b());
        let k = self.market().fixed_cost();
        let mut lo = if b.is_finite() { k / (b - a) } else { 0.0 };
        if self.is_feasible(lo)? {
            return Ok(lo);
        }
        let mut hi = (2.0 * lo).max(1.0);
        let mut doublings = 0;
        while !self.is_feasible(hi)? {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > 40 {
                return Err(Error::Convergence(format!("no feasible price below {hi}")));
            }
        }
        let tol = self.options.engine.root_tol;
        while hi - lo > tol * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.is_feasible(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Minimum of the price function over [0, upper], grid then golden refinement.
    pub fn price_floor(&self, upper: f64) -> (f64, f64) {
        let phi = |z: f64| -self.market().price(z);
        let (z, v) = grid_then_golden(phi, 0.0, upper, 2000, 1e-12);
        (z, -v)
    }
}

/// Dense scan then golden-section refinement around the best grid point.
pub(crate) fn grid_then_golden<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, tol: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| {
        let v = f(x);
        if v.is_nan() { f64::NEG_INFINITY } else { v }
    }).collect();
    let best = (0..=n)
        .max_by(|&i, &j| vals[i].total_cmp(&vals[j]).then(j.cmp(&i)))
        .expect("non-empty grid");
    let (x, v) = maximize_unimodal(&f, xs[best.saturating_sub(1)], xs[(best + 1).min(n)], tol);
    if v >= vals[best] {
        (x, v)
    } else {
        (xs[best], vals[best])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increment_telescopes() {
        assert_eq!(increment(|x| x, 1.0, 3.0), 2.0);
        let f = |x: f64| x * x;
        assert_eq!(increment(f, 1.0, 2.0) + increment(f, 2.0, 4.0), increment(f, 1.0, 4.0));
    }

    #[test]
    fn golden_after_grid_finds_global() {
        let (x, v) = grid_then_golden(|x| (3.0 * x).sin() - 0.1 * x, 0.0, 10.0, 100, 1e-12);
        let x_star = (0.1f64 / 3.0).acos() / 3.0;
        assert!((x - x_star).abs() < 1e-6, "{x}");
        assert!((v - ((3.0 * x_star).sin() - 0.1 * x_star)).abs() < 1e-12);
    }
}
