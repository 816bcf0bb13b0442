//! Mean-field control: the planner's optimum with the price evaluated at the
//! policy's own supply rate, and diagnostics against the game.

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{find_root, Bracket};
use crate::policy::{Problem, ThresholdPolicy};

/// Outcome of a single agent deviating optimally at a fixed aggregate rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BestResponse {
    pub rate: f64,
    pub price: f64,
    pub policy: ThresholdPolicy,
    pub value: f64,
    /// value minus the baseline, when one is given
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimumReport {
    pub policy: ThresholdPolicy,
    pub supply_rate: f64,
    pub price: f64,
    pub value: f64,
    pub cbar: f64,
    pub grid_value: f64,
    pub improved_starts: usize,
    pub optimizer_warning: bool,
    /// Best value with w at an entrance boundary, if that edge was searched.
    pub edge_value: Option<f64>,
    pub deviation: BestResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangeDiagnostic {
    pub z: f64,
    pub lambda: f64,
    pub residual: f64,
    /// phi(z) - p0
    pub lambda_upper: f64,
    pub p0: f64,
    pub policy: ThresholdPolicy,
    /// optimal value at the shifted price plus lambda z
    pub lagrangian_value: f64,
    /// planner objective at the same policy
    pub upsilon_value: f64,
}

const NEAR_TIE: f64 = 1e-6;
const EXPANSIONS: i32 = 16;

impl Problem {
    /// Long-run reward of a policy when the price is set by its own supply rate.
    pub fn upsilon(&self, policy: &ThresholdPolicy) -> Result<f64> {
        let z = self.supply_rate(policy)?;
        let z0 = self.engine().z0();
        if z > z0 * (1.0 + 1e-9) {
            return Err(Error::Evaluation { x: policy.y, what: format!("supply rate {z} exceeds z0 = {z0}") });
        }
        self.value(policy, self.market().price(z))
    }

    pub fn solve_mfc(&self) -> Result<OptimumReport> {
        let search = self.search(|pol| self.upsilon(pol))?;
        let policy = search.policy;
        let value = search.value;
        let supply_rate = self.supply_rate(&policy)?;
        let near_ties = search
            .grid
            .refined
            .iter()
            .filter(|(arg, v)| {
                let apart = (arg[0] - search.grid.arg[0]).abs().max((arg[1] - search.grid.arg[1]).abs()) > 1e-3;
                apart && (v - search.grid.value).abs() <= NEAR_TIE
            })
            .count();
        if near_ties > 0 {
            info!("planner objective has {near_ties} distinct near-optimal starts within {NEAR_TIE}");
        }
        let deviation = self.best_response(supply_rate, Some(value))?;
        Ok(OptimumReport {
            policy,
            supply_rate,
            price: self.market().price(supply_rate),
            value,
            cbar: self.engine().cbar_b(),
            grid_value: search.grid.grid_value,
            improved_starts: search.grid.improved_starts,
            optimizer_warning: search.grid.warning,
            edge_value: search.edge_value,
            deviation,
        })
    }

    /// Optimal individual policy when everyone else supplies at rate `z`.
    pub fn best_response(&self, z: f64, baseline: Option<f64>) -> Result<BestResponse> {
        let price = self.market().price(z);
        let sol = self.solve_classical(price)?;
        Ok(BestResponse {
            rate: z,
            price,
            policy: sol.policy,
            value: sol.value,
            gap: baseline.map(|b| sol.value - b),
        })
    }

    /// Multiplier lambda with z = mapped rate at price phi(z) - lambda.
    pub fn lagrange_multiplier(&self, z: f64) -> Result<LagrangeDiagnostic> {
        let z0 = self.engine().z0();
        if !(z > 0.0 && z < z0) {
            return Err(Error::Precondition(format!("rate {z} outside (0, z0 = {z0})")));
        }
        let p0 = self.p0()?;
        let phi = self.market().price(z);
        let upper = phi - p0;
        let gap = |lambda: f64| -> Result<f64> {
            let sol = self.solve_classical_with(phi - lambda, false)?;
            Ok(z - sol.supply_rate)
        };

        let mut lo = None;
        for k in 0..=EXPANSIONS {
            let lambda = upper - 2f64.powi(k);
            if let Ok(g) = gap(lambda) {
                if g < 0.0 {
                    lo = Some((lambda, g));
                    break;
                }
            }
        }
        let (lo, g_lo) = lo.ok_or_else(|| Error::Convergence(format!("no lower bracket for the multiplier at z = {z}")))?;
        let mut hi = None;
        let mut eps = 0.5 * (upper - lo);
        for _ in 0..60 {
            let lambda = upper - eps;
            if let Ok(g) = gap(lambda) {
                if g > 0.0 {
                    hi = Some((lambda, g));
                    break;
                }
            }
            eps *= 0.5;
        }
        let (hi, g_hi) = hi.ok_or_else(|| Error::Convergence(format!("no upper bracket for the multiplier at z = {z}")))?;
        let br = Bracket::from_values(lo, hi, g_lo, g_hi)?;
        let tol = self.options().engine.root_tol * 1e-3;
        let lambda = find_root(|l| gap(l).unwrap_or(f64::NAN), &br, tol)?;
        let sol = self.solve_classical_with(phi - lambda, false)?;
        Ok(LagrangeDiagnostic {
            z,
            lambda,
            residual: (z - sol.supply_rate).abs(),
            lambda_upper: upper,
            p0,
            policy: sol.policy,
            lagrangian_value: sol.value + lambda * z,
            upsilon_value: self.upsilon(&sol.policy)?,
        })
    }
}
