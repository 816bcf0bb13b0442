//! Long-run-average impulse control of one-dimensional diffusions under
//! threshold policies: classical solves at a fixed price, mean-field-game
//! equilibria, mean-field-control optima and Monte Carlo validation.

pub mod config;
pub mod error;
pub mod mfc;
pub mod mfg;
pub mod model;
pub mod numerics;
pub mod policy;
pub mod potentials;
pub mod report;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{DiffusionModel, MarketModel, ModelSpec, PriceForm, RewardForm};
pub use policy::{ClassicalSolution, Problem, SolverOptions, ThresholdPolicy};
pub use potentials::PotentialEngine;
