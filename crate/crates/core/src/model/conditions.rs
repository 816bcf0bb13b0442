//! Numerical checks of the standing assumptions on a model/market pair.

use serde::{Deserialize, Serialize};

use super::{BoundaryKind, DiffusionModel, MarketModel};
use crate::policy::{Problem, SolverOptions};
use crate::potentials::{classify_growth, Growth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Pass,
    Fail,
    Indeterminate,
}

/// A sampled point or integral that supports a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Evidence {
    pub label: String,
    pub x: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionReport {
    pub id: String,
    pub status: ConditionStatus,
    pub evidence: Vec<Evidence>,
    pub notes: String,
}

impl ConditionReport {
    fn new(id: &str, status: ConditionStatus, notes: impl Into<String>) -> ConditionReport {
        ConditionReport { id: id.into(), status, evidence: Vec::new(), notes: notes.into() }
    }

    fn with(mut self, label: &str, x: Option<f64>, value: f64) -> ConditionReport {
        self.evidence.push(Evidence { label: label.into(), x, value });
        self
    }
}

fn growth_status(g: Growth) -> ConditionStatus {
    match g {
        Growth::Diverges => ConditionStatus::Pass,
        Growth::Converges => ConditionStatus::Fail,
        Growth::Indeterminate => ConditionStatus::Indeterminate,
    }
}

/// Sample points spread over (a, b) on a logarithmic scale around x0.
fn sample_points(model: &DiffusionModel, n: usize) -> Vec<f64> {
    let (a, b, x0) = (model.a(), model.b(), model.x0());
    let t = |x: f64| if b.is_finite() { ((x - a) / (b - x)).ln() } else { ((x - a) / (x0 - a)).ln() };
    let x_of = |t: f64| if b.is_finite() { b - (b - a) / (1.0 + t.exp()) } else { a + (x0 - a) * t.exp() };
    let lo = t(a + 1e-6 * (x0 - a));
    let hi = if b.is_finite() { t(b - 1e-6 * (b - x0)) } else { t(a + 50.0 * (x0 - a)) };
    (0..n).map(|i| x_of(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect()
}

/// Runs every check; a failure to build the potentials is itself reported.
pub fn check_conditions(model: &DiffusionModel, market: &MarketModel, options: &SolverOptions) -> Vec<ConditionReport> {
    use ConditionStatus::*;
    let mut out = Vec::new();
    let xs = sample_points(model, 200);
    let a = model.a();

    let bad_sigma = xs.iter().copied().find(|&x| !(model.volatility(x).powi(2) > 0.0));
    out.push(match bad_sigma {
        None => ConditionReport::new("diffusion_nondegenerate", Pass, "sigma^2 > 0 at all sampled points"),
        Some(x) => ConditionReport::new("diffusion_nondegenerate", Fail, "sigma^2 vanishes inside the interval")
            .with("sigma", Some(x), model.volatility(x)),
    });

    let mu_a = model.drift(a);
    out.push(if !mu_a.is_finite() {
        ConditionReport::new("left_non_attracting", Fail, "drift has no finite limit at a").with("mu", Some(a), mu_a)
    } else if mu_a < 0.0 {
        ConditionReport::new("left_non_attracting", Fail, "left boundary attracting").with("mu", Some(a), mu_a)
    } else {
        ConditionReport::new("left_non_attracting", Pass, "mu(a) >= 0").with("mu", Some(a), mu_a)
    });

    out.push(reward_regularity(model, market, &xs));
    out.push(shape(model, market, &xs));

    let problem = match Problem::new(model, market, options.clone()) {
        Ok(p) => p,
        Err(e) => {
            out.push(ConditionReport::new(
                "speed_finite_left",
                Indeterminate,
                format!("potentials could not be built: {e}"),
            ));
            return out;
        }
    };
    let engine = problem.engine();

    let probe: Vec<f64> = xs.iter().copied().step_by(20).collect();
    let (ms, stopped) = engine.sample(&probe, |p| p.speed_measure);
    let mut rep = if ms.iter().all(|m| m.is_finite() && *m > 0.0) && !ms.is_empty() {
        ConditionReport::new("speed_finite_left", Pass, "M[a,y] finite at sampled y")
    } else {
        ConditionReport::new("speed_finite_left", Fail, "M[a,y] not finite")
    };
    for (x, m) in probe.iter().zip(&ms) {
        rep = rep.with("M[a,y]", Some(*x), *m);
    }
    if stopped {
        rep.notes.push_str("; sampling stopped early at the floating-point range");
    }
    out.push(rep);

    let right = engine.right_sequence();
    let (sm, _) = engine.sample(&right, |p| p.xi_prime);
    let mut rep = ConditionReport::new(
        "scale_speed_diverges_right",
        growth_status(classify_growth(&sm)),
        "s(x) M[a,x] along x -> b",
    );
    for (x, v) in right.iter().zip(&sm) {
        rep = rep.with("s*M", Some(*x), *v);
    }
    out.push(rep);

    if model.left_boundary() == BoundaryKind::Natural {
        let left = engine.left_sequence();
        let (sv, _) = engine.sample(&left, |p| -p.scale_measure);
        let mut rep = ConditionReport::new(
            "scale_diverges_left",
            growth_status(classify_growth(&sv)),
            "S(x, x0] along x -> a",
        );
        for (x, v) in left.iter().zip(&sv) {
            rep = rep.with("S", Some(*x), *v);
        }
        out.push(rep);
    } else {
        out.push(ConditionReport::new("scale_diverges_left", Pass, "not required at an entrance boundary"));
    }

    let z0 = engine.z0();
    let zs: Vec<f64> = (0..=400).map(|i| z0 * i as f64 / 400.0).collect();
    let bad_phi = zs.iter().copied().find(|&z| !(market.price(z) >= 0.0 && market.price(z).is_finite()));
    let jump = zs
        .windows(2)
        .map(|w| (market.price(w[1]) - market.price(w[0])).abs())
        .fold(0.0, f64::max);
    out.push(match bad_phi {
        None => ConditionReport::new("price_regular", Pass, "phi finite and nonnegative on [0, z0]")
            .with("z0", None, z0)
            .with("largest step between grid points", None, jump),
        Some(z) => ConditionReport::new("price_regular", Fail, "phi negative or not finite").with("phi", Some(z), market.price(z)),
    });

    let (z_min, phi_min) = problem.price_floor(z0);
    out.push(match problem.is_feasible(phi_min) {
        Ok(true) => ConditionReport::new("price_floor_feasible", Pass, "min phi on [0, z0] is a feasible price"),
        Ok(false) => ConditionReport::new("price_floor_feasible", Fail, "min phi on [0, z0] is not a feasible price"),
        Err(e) => ConditionReport::new("price_floor_feasible", Indeterminate, format!("feasibility test failed: {e}")),
    }
    .with("phi_min", Some(z_min), phi_min)
    .with("cbar", None, engine.cbar_b()));
    out
}

fn reward_regularity(model: &DiffusionModel, market: &MarketModel, xs: &[f64]) -> ConditionReport {
    use ConditionStatus::*;
    let id = "reward_regular";
    if let Some(&x) = xs.iter().find(|&&x| !(market.reward(x) >= 0.0)) {
        return ConditionReport::new(id, Fail, "c negative").with("c", Some(x), market.reward(x));
    }
    if let Some(w) = xs.windows(2).find(|w| market.reward(w[1]) < market.reward(w[0]) - 1e-12) {
        return ConditionReport::new(id, Fail, "c decreasing").with("c", Some(w[1]), market.reward(w[1]));
    }
    let ca = market.reward(model.a());
    let b = model.b();
    let far = if b.is_finite() { b } else { model.x0() + (model.x0() - model.a()) * 1e6 };
    let cb = market.reward(far);
    if !(ca.is_finite() && cb.is_finite()) {
        return ConditionReport::new(id, Fail, "c has no finite boundary limit").with("c", Some(far), cb);
    }
    ConditionReport::new(id, Pass, "c nonnegative, nondecreasing, finite at both ends")
        .with("c", Some(model.a()), ca)
        .with("c", Some(far), cb)
}

/// mu increasing up to some point, c and mu concave after it.
fn shape(model: &DiffusionModel, market: &MarketModel, xs: &[f64]) -> ConditionReport {
    use ConditionStatus::*;
    let id = "shape";
    let concave_at = |f: &dyn Fn(f64) -> f64, i: usize| {
        let (x0, x1, x2) = (xs[i - 1], xs[i], xs[i + 1]);
        let (f0, f1, f2) = (f(x0), f(x1), f(x2));
        let chord = f0 + (f2 - f0) * (x1 - x0) / (x2 - x0);
        f1 >= chord - 1e-10 * (1.0 + f1.abs())
    };
    let mu = |x: f64| model.drift(x);
    let c = |x: f64| market.reward(x);
    let n = xs.len();
    // smallest split index with concavity everywhere to its right
    let mut split = n - 1;
    for i in (1..n - 1).rev() {
        if concave_at(&mu, i) && concave_at(&c, i) {
            split = i;
        } else {
            break;
        }
    }
    let split = split.saturating_sub(1);
    let violation = (1..=split).find(|&i| !(mu(xs[i]) > mu(xs[i - 1])));
    match violation {
        None => ConditionReport::new(id, Pass, "mu increasing before the split point, c and mu concave after")
            .with("split point", Some(xs[split]), mu(xs[split])),
        Some(i) => ConditionReport::new(id, Fail, "mu not increasing before the concave region")
            .with("mu", Some(xs[i]), mu(xs[i]))
            .with("split point", Some(xs[split]), mu(xs[split])),
    }
}
