//! Euler-Maruyama simulation of the controlled diffusion and renewal-reward estimators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiffusionModel, MarketModel};
use crate::policy::ThresholdPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    #[serde(with = "crate::model::decimal")]
    pub dt: f64,
    pub cycles: usize,
    pub seed: u64,
    /// Cycles (or horizon blocks) per batch for batch-means standard errors.
    pub batch: usize,
    /// Distance of the guard rail from a, relative to x0 - a.
    #[serde(with = "crate::model::decimal")]
    pub guard: f64,
    /// Test for crossings between grid times with the Brownian-bridge probability.
    pub bridge: bool,
    /// A single cycle longer than this is an error.
    #[serde(with = "crate::model::decimal")]
    pub max_cycle_time: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-4,
            cycles: 10_000,
            seed: 20240601,
            batch: 100,
            guard: 1e-9,
            bridge: true,
            max_cycle_time: 1e4,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Simulation(format!("time step {} must be positive", self.dt)));
        }
        if self.cycles == 0 {
            return Err(Error::Simulation("at least one cycle is required".into()));
        }
        if !(self.guard > 0.0 && self.guard < 1.0) {
            return Err(Error::Simulation(format!("guard {} must lie in (0, 1)", self.guard)));
        }
        if !(self.max_cycle_time > 0.0) {
            return Err(Error::Simulation("max_cycle_time must be positive".into()));
        }
        if self.batch == 0 {
            return Err(Error::Simulation("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

impl Stat {
    /// |mean - target| in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.se
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleRecord {
    pub time: f64,
    pub running_reward: f64,
    pub steps: u64,
    pub guard_hits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimEstimate {
    pub policy: ThresholdPolicy,
    pub price: f64,
    pub cycles: usize,
    pub dt: f64,
    pub seed: u64,
    pub steps: u64,
    pub guard_hits: u64,
    /// Set when guard activations exceed 0.1% of steps.
    pub guard_flag: bool,
    pub cycle_time: Stat,
    pub running_reward: Stat,
    pub supply_rate: Stat,
    pub value: Stat,
    #[serde(skip)]
    pub per_cycle: Vec<CycleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonEstimate {
    pub policy: Option<ThresholdPolicy>,
    pub price: f64,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub impulses: u64,
    pub guard_hits: u64,
    pub guard_flag: bool,
    /// time average of c(X)
    pub running_reward: Stat,
    /// harvested amount per unit time
    pub supply_rate: Stat,
    /// running reward plus impulse rewards, per unit time
    pub value: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    /// occupation density per bin, normalized by the horizon
    pub density: Vec<f64>,
    /// fraction of time spent above the upper edge
    pub mass_above: f64,
    pub total_mass: f64,
}

impl Histogram {
    pub fn edges(&self) -> Vec<f64> {
        let n = self.density.len();
        (0..=n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / n as f64).collect()
    }
}

const GUARD_LIMIT: f64 = 1e-3;

struct Stepper<'a> {
    model: &'a DiffusionModel,
    dt: f64,
    sqrt_dt: f64,
    rail: f64,
    bridge: bool,
    rng: ChaCha8Rng,
    guard_hits: u64,
}

/// Where a step ends relative to the reset threshold.
enum Step {
    Inside(f64),
    /// Fraction of the step elapsed at the crossing.
    Crossed(f64),
}

impl<'a> Stepper<'a> {
    fn new(model: &'a DiffusionModel, cfg: &SimConfig, stream: u64) -> Stepper<'a> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        let rail = model.a() + cfg.guard * (model.x0() - model.a());
        Stepper { model, dt: cfg.dt, sqrt_dt: cfg.dt.sqrt(), rail, bridge: cfg.bridge, rng, guard_hits: 0 }
    }

    fn step(&mut self, x: f64, threshold: f64) -> Result<Step> {
        let sigma = self.model.volatility(x);
        let dw: f64 = self.rng.sample::<f64, _>(StandardNormal) * self.sqrt_dt;
        let mut next = x + self.model.drift(x) * self.dt + sigma * dw;
        if !next.is_finite() {
            return Err(Error::Simulation(format!("non-finite state after a step from {x}")));
        }
        if next >= threshold {
            return Ok(Step::Crossed(((threshold - x) / (next - x)).clamp(0.0, 1.0)));
        }
        if self.bridge && threshold.is_finite() {
            let var = sigma * sigma * self.dt;
            let p = (-2.0 * (threshold - x) * (threshold - next) / var).exp();
            if p > 0.0 && self.rng.random::<f64>() < p {
                return Ok(Step::Crossed(0.5));
            }
        }
        if next <= self.rail {
            next = self.rail;
            self.guard_hits += 1;
        }
        Ok(Step::Inside(next))
    }
}

fn check_policy(model: &DiffusionModel, policy: &ThresholdPolicy) -> Result<()> {
    if !(policy.w >= model.a() && policy.w < policy.y && policy.y < model.b()) {
        return Err(Error::Precondition(format!(
            "policy (w = {}, y = {}) must satisfy a <= w < y < b",
            policy.w, policy.y
        )));
    }
    Ok(())
}

/// Standard error of the mean of `xs`.
fn spread(xs: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0);
    (var / k).sqrt()
}

fn batch_stat(values: &[f64], batch: usize) -> Stat {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = values.chunks(batch).filter(|c| c.len() == batch).map(|c| c.iter().sum::<f64>() / batch as f64).collect();
    let se = if means.len() >= 2 {
        spread(&means)
    } else if n >= 2 {
        // too few full batches: fall back to single observations
        spread(values)
    } else {
        0.0
    };
    Stat { mean, se }
}

/// Ratio of means with a delta-method standard error from batch means.
fn ratio_stat(num: &[f64], den: &[f64], batch: usize) -> Stat {
    let n = num.len() as f64;
    let mean_num = num.iter().sum::<f64>() / n;
    let mean_den = den.iter().sum::<f64>() / n;
    let ratio = mean_num / mean_den;
    let resid: Vec<f64> = num.iter().zip(den).map(|(a, b)| a - ratio * b).collect();
    let r = batch_stat(&resid, batch);
    Stat { mean: ratio, se: r.se / mean_den.abs() }
}

/// Independent renewal cycles from w up to y, simulated in parallel.
pub fn simulate_cycles(
    model: &DiffusionModel,
    market: &MarketModel,
    policy: &ThresholdPolicy,
    price: f64,
    cfg: &SimConfig,
) -> Result<SimEstimate> {
    cfg.validate()?;
    check_policy(model, policy)?;
    let records: Vec<Result<CycleRecord>> = (0..cfg.cycles)
        .into_par_iter()
        .map(|c| run_cycle(model, market, policy, cfg, c as u64))
        .collect();
    let per_cycle = records.into_iter().collect::<Result<Vec<_>>>()?;

    let times: Vec<f64> = per_cycle.iter().map(|r| r.time).collect();
    let running: Vec<f64> = per_cycle.iter().map(|r| r.running_reward).collect();
    let impulse = price * policy.width() - market.fixed_cost();
    let rewards: Vec<f64> = running.iter().map(|r| r + impulse).collect();
    let steps: u64 = per_cycle.iter().map(|r| r.steps).sum();
    let guard_hits: u64 = per_cycle.iter().map(|r| r.guard_hits).sum();

    let cycle_time = batch_stat(&times, cfg.batch);
    let supply_rate = Stat {
        mean: policy.width() / cycle_time.mean,
        se: policy.width() / cycle_time.mean.powi(2) * cycle_time.se,
    };
    Ok(SimEstimate {
        policy: *policy,
        price,
        cycles: cfg.cycles,
        dt: cfg.dt,
        seed: cfg.seed,
        steps,
        guard_hits,
        guard_flag: guard_hits as f64 > GUARD_LIMIT * steps as f64,
        cycle_time,
        running_reward: batch_stat(&running, cfg.batch),
        supply_rate,
        value: ratio_stat(&rewards, &times, cfg.batch),
        per_cycle,
    })
}

fn run_cycle(
    model: &DiffusionModel,
    market: &MarketModel,
    policy: &ThresholdPolicy,
    cfg: &SimConfig,
    index: u64,
) -> Result<CycleRecord> {
    let mut st = Stepper::new(model, cfg, index);
    let (mut x, mut time, mut running, mut steps) = (policy.w.max(st.rail), 0.0, 0.0, 0u64);
    loop {
        steps += 1;
        match st.step(x, policy.y)? {
            Step::Crossed(frac) => {
                time += frac * cfg.dt;
                running += market.reward(x) * frac * cfg.dt;
                break;
            }
            Step::Inside(next) => {
                time += cfg.dt;
                running += market.reward(x) * cfg.dt;
                x = next;
            }
        }
        if time > cfg.max_cycle_time {
            return Err(Error::Simulation(format!(
                "cycle {index} exceeded time {} at step {steps}",
                cfg.max_cycle_time
            )));
        }
    }
    Ok(CycleRecord { time, running_reward: running, steps, guard_hits: st.guard_hits })
}

/// Number of time blocks used for horizon standard errors.
const HORIZON_BLOCKS: usize = 50;

fn horizon_run<F: FnMut(f64)>(
    model: &DiffusionModel,
    market: &MarketModel,
    policy: Option<&ThresholdPolicy>,
    price: f64,
    horizon: f64,
    cfg: &SimConfig,
    mut visit: F,
) -> Result<HorizonEstimate> {
    cfg.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Simulation(format!("horizon {horizon} must be positive")));
    }
    if let Some(p) = policy {
        check_policy(model, p)?;
    }
    let total = (horizon / cfg.dt).ceil() as u64;
    let per_block = (total / HORIZON_BLOCKS as u64).max(1);
    let mut st = Stepper::new(model, cfg, u64::MAX);
    let threshold = policy.map_or(f64::INFINITY, |p| p.y);
    let mut x = policy.map_or(model.x0(), |p| p.w.max(st.rail));
    let mut impulses = 0u64;
    let (mut blk_run, mut blk_imp, mut blk_harvest) = (0.0, 0.0, 0.0);
    let (mut runs, mut imps, mut harvests) = (Vec::new(), Vec::new(), Vec::new());
    for step in 0..total {
        visit(x);
        blk_run += market.reward(x) * cfg.dt;
        match st.step(x, threshold)? {
            Step::Crossed(_) => {
                let p = policy.expect("crossing requires a policy");
                impulses += 1;
                blk_imp += price * p.width() - market.fixed_cost();
                blk_harvest += p.width();
                x = p.w.max(st.rail);
            }
            Step::Inside(next) => x = next,
        }
        if (step + 1) % per_block == 0 || step + 1 == total {
            let len = ((step % per_block) + 1) as f64 * cfg.dt;
            runs.push(blk_run / len);
            imps.push(blk_imp / len);
            harvests.push(blk_harvest / len);
            blk_run = 0.0;
            blk_imp = 0.0;
            blk_harvest = 0.0;
        }
    }
    let n = runs.len();
    runs.truncate(n.min(HORIZON_BLOCKS));
    imps.truncate(n.min(HORIZON_BLOCKS));
    harvests.truncate(n.min(HORIZON_BLOCKS));
    let values: Vec<f64> = runs.iter().zip(&imps).map(|(a, b)| a + b).collect();
    Ok(HorizonEstimate {
        policy: policy.copied(),
        price,
        horizon: total as f64 * cfg.dt,
        dt: cfg.dt,
        seed: cfg.seed,
        impulses,
        guard_hits: st.guard_hits,
        guard_flag: st.guard_hits as f64 > GUARD_LIMIT * total as f64,
        running_reward: batch_stat(&runs, 1),
        supply_rate: batch_stat(&harvests, 1),
        value: batch_stat(&values, 1),
    })
}

/// One long trajectory of length `horizon`; `None` never intervenes.
pub fn simulate_horizon(
    model: &DiffusionModel,
    market: &MarketModel,
    policy: Option<&ThresholdPolicy>,
    price: f64,
    horizon: f64,
    cfg: &SimConfig,
) -> Result<HorizonEstimate> {
    horizon_run(model, market, policy, price, horizon, cfg, |_| {})
}

/// Time-weighted occupation density of the controlled state over `bins` cells of [a, y].
pub fn occupation_histogram(
    model: &DiffusionModel,
    market: &MarketModel,
    policy: &ThresholdPolicy,
    horizon: f64,
    bins: usize,
    cfg: &SimConfig,
) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Simulation("histogram needs at least one bin".into()));
    }
    let (lo, hi) = (model.a(), policy.y);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    let mut above = 0u64;
    let mut below = 0u64;
    let est = horizon_run(model, market, Some(policy), 0.0, horizon, cfg, |x| {
        if x > hi {
            above += 1;
        } else if x < lo {
            below += 1;
        } else {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
    })?;
    let total = (counts.iter().sum::<u64>() + above + below) as f64;
    let density: Vec<f64> = counts.iter().map(|&c| c as f64 / (total * width)).collect();
    let _ = est;
    Ok(Histogram {
        lo,
        hi,
        total_mass: density.iter().sum::<f64>() * width + above as f64 / total,
        mass_above: above as f64 / total,
        density,
    })
}
