#![allow(dead_code)]

use mfimpulse::config::RunConfig;
use mfimpulse::{DiffusionModel, MarketModel, Problem, SolverOptions};

pub fn problem(cfg: &RunConfig, options: SolverOptions) -> Problem {
    let model: DiffusionModel = cfg.diffusion().unwrap();
    let market: MarketModel = cfg.market().unwrap();
    Problem::new(&model, &market, options).unwrap()
}

pub fn logistic() -> Problem {
    problem(&RunConfig::logistic_example(), SolverOptions::default())
}

pub fn loksendal() -> Problem {
    problem(&RunConfig::loksendal_example(), SolverOptions::default())
}

pub fn immigration() -> Problem {
    let cfg = RunConfig::parse(include_str!("../../../../configs/immigration.toml")).unwrap();
    problem(&cfg, SolverOptions::default())
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut sum = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(lo + i as f64 * h);
    }
    sum * h / 3.0
}
