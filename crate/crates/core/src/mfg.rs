//! Mean-field-game equilibria as fixed points of
//! supply rate -> price -> optimal policy -> supply rate.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{find_root, Bracket};
use crate::policy::{Problem, ThresholdPolicy};

/// One application of the composed map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapPoint {
    pub z: f64,
    pub price: f64,
    pub policy: ThresholdPolicy,
    pub value: f64,
    pub mapped: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPoint {
    pub z_star: f64,
    pub price: f64,
    pub policy: ThresholdPolicy,
    pub value: f64,
    /// |z - mapped(z)|
    pub residual: f64,
    /// |F_p at the reported policy - value|
    pub value_check: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceFloor {
    pub z: f64,
    pub price: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumReport {
    pub z_star: f64,
    pub price: f64,
    pub policy: ThresholdPolicy,
    pub value: f64,
    pub residual: f64,
    pub all_fixed_points: Vec<FixedPoint>,
    pub price_floor: PriceFloor,
    pub z0: f64,
    pub cbar: f64,
    /// Largest change of the mapped rate between neighbouring grid points.
    pub max_map_jump: f64,
    pub jump_flag: bool,
    /// Grid points where the map could not be evaluated.
    pub failed_points: usize,
    #[serde(skip)]
    pub trace: Vec<MapPoint>,
}

/// Jumps above this fraction of z0 between grid neighbours are flagged.
const JUMP_FRACTION: f64 = 0.1;

impl Problem {
    /// Minimum of the price over [0, z0] and whether it is a feasible price.
    pub fn price_floor_certificate(&self) -> Result<PriceFloor> {
        let (z, price) = self.price_floor(self.engine().z0());
        Ok(PriceFloor { z, price, feasible: self.is_feasible(price)? })
    }

    /// z -> phi(z) -> optimal policy -> its supply rate.
    pub fn evaluate_map(&self, z: f64) -> Result<MapPoint> {
        self.evaluate_map_with(z, self.options().verify)
    }

    fn evaluate_map_with(&self, z: f64, verify: bool) -> Result<MapPoint> {
        let z0 = self.engine().z0();
        if !(0.0..=z0).contains(&z) {
            return Err(Error::Precondition(format!("rate {z} outside [0, z0 = {z0}]")));
        }
        let price = self.market().price(z);
        let sol = self.solve_classical_with(price, verify)?;
        Ok(MapPoint { z, price, policy: sol.policy, value: sol.value, mapped: sol.supply_rate })
    }

    pub fn solve_mfg(&self) -> Result<EquilibriumReport> {
        let engine = self.engine();
        let z0 = engine.z0();
        let floor = self.price_floor_certificate()?;
        if !floor.feasible {
            return Err(Error::Precondition(format!(
                "minimum price {} (at rate {}) is not feasible",
                floor.price, floor.z
            )));
        }
        let n = self.options().mfg_grid.max(2);
        let results: Vec<(f64, Result<MapPoint>)> = (0..=n)
            .into_par_iter()
            .map(|i| {
                let z = z0 * i as f64 / n as f64;
                (z, self.evaluate_map_with(z, false))
            })
            .collect();
        let mut trace = Vec::with_capacity(results.len());
        let mut failed = 0;
        for (z, r) in results {
            match r {
                Ok(pt) => trace.push(pt),
                Err(e) => {
                    warn!("map evaluation failed at z = {z}: {e}");
                    failed += 1;
                }
            }
        }
        let max_map_jump = trace.windows(2).map(|w| (w[1].mapped - w[0].mapped).abs()).fold(0.0, f64::max);
        let jump_flag = max_map_jump > JUMP_FRACTION * z0;
        if jump_flag {
            warn!("composed map jumps by {max_map_jump} between grid points");
        }

        let tol = self.options().engine.root_tol;
        let gap = |z: f64| self.evaluate_map_with(z, false).map(|m| z - m.mapped).unwrap_or(f64::NAN);
        let mut roots = Vec::new();
        for w in trace.windows(2) {
            let (ga, gb) = (w[0].z - w[0].mapped, w[1].z - w[1].mapped);
            if ga == 0.0 {
                roots.push(w[0].z);
            } else if ga * gb < 0.0 {
                let br = Bracket::from_values(w[0].z, w[1].z, ga, gb)?;
                roots.push(find_root(gap, &br, tol)?);
            }
        }
        if let Some(last) = trace.last() {
            if last.z - last.mapped == 0.0 {
                roots.push(last.z);
            }
        }
        if roots.is_empty() {
            return Err(Error::Convergence("no sign change of z - mapped(z) on the scan grid".into()));
        }

        let mut fixed = Vec::with_capacity(roots.len());
        for z in roots {
            let pt = self.evaluate_map_with(z, self.options().verify)?;
            let check = self.value(&pt.policy, pt.price)?;
            fixed.push(FixedPoint {
                z_star: z,
                price: pt.price,
                policy: pt.policy,
                value: pt.value,
                residual: (z - pt.mapped).abs(),
                value_check: (check - pt.value).abs(),
            });
        }
        let primary = fixed
            .iter()
            .max_by(|a, b| a.value.total_cmp(&b.value).then(b.z_star.total_cmp(&a.z_star)))
            .cloned()
            .expect("at least one fixed point");
        if fixed.len() > 1 {
            info!("{} fixed points; primary at z = {}", fixed.len(), primary.z_star);
        }
        Ok(EquilibriumReport {
            z_star: primary.z_star,
            price: primary.price,
            policy: primary.policy,
            value: primary.value,
            residual: primary.residual,
            all_fixed_points: fixed,
            price_floor: floor,
            z0,
            cbar: engine.cbar_b(),
            max_map_jump,
            jump_flag,
            failed_points: failed,
            trace,
        })
    }
}
