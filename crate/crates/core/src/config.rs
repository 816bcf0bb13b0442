//! Run configuration: one TOML document per solve. Every real is written as a
//! decimal string so that a parsed document serializes back to the same bits.
//!
//! ```toml
//! [model]
//! name = "logistic"
//! r = "5"
//! delta = "5"
//! sigma = "1"
//! x0 = "1"
//!
//! [market]
//! reward = "one_minus_exp{rate=1}"
//! price = "rational_sin{a=3,b=1,c=2}"
//! fixed_cost = "0.5"
//! ```
//!
//! Optional tables: `[tolerances]`, `[solver]`, `[simulation]`, `[output]`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{decimal, decimal_opt, DiffusionModel, MarketModel, ModelSpec, PriceForm, RewardForm};
use crate::numerics::{Multistart, QuadratureSpec};
use crate::policy::SolverOptions;
use crate::potentials::EngineOptions;
use crate::simulate::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub reward: RewardForm,
    pub price: PriceForm,
    #[serde(with = "decimal")]
    pub fixed_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    #[serde(with = "decimal")]
    pub quad_abs: f64,
    #[serde(with = "decimal")]
    pub quad_rel: f64,
    #[serde(with = "decimal")]
    pub root: f64,
    #[serde(with = "decimal")]
    pub optimizer: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { quad_abs: 1e-10, quad_rel: 1e-9, root: 1e-9, optimizer: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Intervals in the rate scan for equilibria.
    pub mfg_grid: usize,
    /// Points per axis of the coarse policy grid.
    pub policy_grid: usize,
    /// Grid cells refined locally.
    pub starts: usize,
    /// Cross-check each level-set solve against a direct policy search.
    pub verify: bool,
    /// Replaces the computed do-nothing value when the boundary limit cannot be decided.
    #[serde(with = "decimal_opt", skip_serializing_if = "Option::is_none")]
    pub cbar_override: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let ms = Multistart::default();
        SolverSection { mfg_grid: 256, policy_grid: ms.grid, starts: ms.starts, verify: true, cbar_override: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// JSON report destination; stdout when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// CSV trace destination for subcommands that produce one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub market: MarketSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub simulation: SimConfig,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn new(model: ModelSpec, market: MarketSpec) -> RunConfig {
        RunConfig {
            model,
            market,
            tolerances: Tolerances::default(),
            solver: SolverSection::default(),
            simulation: SimConfig::default(),
            output: OutputSection::default(),
        }
    }

    /// Parses and validates a TOML document.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.build()?;
        self.market()?;
        let t = &self.tolerances;
        for (label, v) in [("quad_abs", t.quad_abs), ("quad_rel", t.quad_rel), ("root", t.root), ("optimizer", t.optimizer)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("tolerance `{label}` must lie in (0, 1), got {v}")));
            }
        }
        let s = &self.solver;
        if s.mfg_grid < 2 || s.policy_grid < 4 || s.starts == 0 {
            return Err(Error::Config("solver grids need mfg_grid >= 2, policy_grid >= 4, starts >= 1".into()));
        }
        if let Some(c) = s.cbar_override {
            if c < 0.0 {
                return Err(Error::Config(format!("cbar_override must be nonnegative, got {c}")));
            }
        }
        self.simulation.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn diffusion(&self) -> Result<DiffusionModel> {
        self.model.build()
    }

    pub fn market(&self) -> Result<MarketModel> {
        MarketModel::from_forms(self.market.reward, self.market.price, self.market.fixed_cost)
    }

    pub fn solver_options(&self) -> SolverOptions {
        let t = &self.tolerances;
        let defaults = SolverOptions::default();
        SolverOptions {
            engine: EngineOptions {
                quadrature: QuadratureSpec { abs_tol: t.quad_abs, rel_tol: t.quad_rel, ..QuadratureSpec::default() },
                root_tol: t.root,
                cbar_override: self.solver.cbar_override,
            },
            optimizer: Multistart { grid: self.solver.policy_grid, starts: self.solver.starts, tol: t.optimizer },
            mfg_grid: self.solver.mfg_grid,
            verify: self.solver.verify,
            ..defaults
        }
    }

    /// The logistic example with c = 1 - e^{-x} and phi(z) = 3 / (3 + z + 2 sin z).
    pub fn logistic_example() -> RunConfig {
        RunConfig::new(
            ModelSpec::Logistic { r: 5.0, delta: 5.0, sigma: 1.0, x0: 1.0 },
            MarketSpec {
                reward: RewardForm::OneMinusExp { rate: 1.0 },
                price: PriceForm::RationalSin { a: 3.0, b: 1.0, c: 2.0 },
                fixed_cost: 0.5,
            },
        )
    }

    /// The Loksendal example on (0, 5) with c = 1 - e^{-3x} + x^{1/4}/100 and
    /// phi(z) = 2 / (3 + z + cos 2z).
    pub fn loksendal_example() -> RunConfig {
        RunConfig::new(
            ModelSpec::Loksendal { r: 0.75, b: 5.0, sigma: 0.5, x0: 1.0 },
            MarketSpec {
                reward: RewardForm::OneMinusExpPlusPower { rate: 3.0, coef: 0.01, power: 0.25 },
                price: PriceForm::RationalCos { num: 2.0, a: 3.0, b: 1.0, c: 1.0, freq: 2.0 },
                fixed_cost: 0.2,
            },
        )
    }

    pub fn example(name: &str) -> Result<RunConfig> {
        match name {
            "logistic" => Ok(RunConfig::logistic_example()),
            "loksendal" => Ok(RunConfig::loksendal_example()),
            other => Err(Error::Config(format!("unknown example `{other}` (expected logistic or loksendal)"))),
        }
    }
}
