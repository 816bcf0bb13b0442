//! Diffusion and market models, the builtin model registry, and numerical
//! checks of the standing assumptions.

mod conditions;
pub mod forms;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate, QuadratureSpec};

pub use conditions::{check_conditions, ConditionReport, ConditionStatus, Evidence};
pub use forms::{PriceForm, RewardForm};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Entrance,
    Natural,
}

/// A regular diffusion dX = mu(X) dt + sigma(X) dW on (a, b).
#[derive(Clone)]
pub struct DiffusionModel {
    name: String,
    a: f64,
    b: f64,
    x0: f64,
    left_boundary: BoundaryKind,
    drift: RealFn,
    volatility: RealFn,
}

impl fmt::Debug for DiffusionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionModel")
            .field("name", &self.name)
            .field("a", &self.a)
            .field("b", &self.b)
            .field("x0", &self.x0)
            .field("left_boundary", &self.left_boundary)
            .finish_non_exhaustive()
    }
}

impl DiffusionModel {
    /// Builds a model from drift and volatility functions. `b` may be `f64::INFINITY`.
    pub fn new<M, S>(
        name: impl Into<String>,
        (a, b): (f64, f64),
        x0: f64,
        left_boundary: BoundaryKind,
        drift: M,
        volatility: S,
    ) -> Result<DiffusionModel>
    where
        M: Fn(f64) -> f64 + Send + Sync + 'static,
        S: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !a.is_finite() {
            return Err(Error::Config("left boundary must be finite".into()));
        }
        if !(a < x0 && x0 < b) || !x0.is_finite() || b.is_nan() {
            return Err(Error::Config(format!("need a < x0 < b, got a={a}, x0={x0}, b={b}")));
        }
        Ok(DiffusionModel {
            name: name.into(),
            a,
            b,
            x0,
            left_boundary,
            drift: Arc::new(drift),
            volatility: Arc::new(volatility),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn left_boundary(&self) -> BoundaryKind {
        self.left_boundary
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.drift)(x)
    }

    pub fn volatility(&self, x: f64) -> f64 {
        (self.volatility)(x)
    }

    /// 2 mu / sigma^2, the log-derivative of 1/s.
    pub fn drift_ratio(&self, x: f64) -> f64 {
        let s = self.volatility(x);
        2.0 * self.drift(x) / (s * s)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a < x && x < self.b
    }

    /// Scale density s(x), by direct quadrature from x0.
    pub fn scale_density(&self, x: f64) -> Result<f64> {
        self.scale_density_with(x, &QuadratureSpec::default())
    }

    pub fn scale_density_with(&self, x: f64, spec: &QuadratureSpec) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::Evaluation { x, what: "outside the state interval".into() });
        }
        let integral = integrate(|u| self.drift_ratio(u), self.x0, x, spec).map_err(|e| match e {
            Error::NonFinite { x } => Error::Evaluation { x, what: "non-finite drift ratio".into() },
            other => other,
        })?;
        let s = (-integral.value).exp();
        if s.is_finite() && s > 0.0 {
            Ok(s)
        } else {
            Err(Error::Evaluation { x, what: "scale density out of floating-point range".into() })
        }
    }

    /// Speed density m(x) = 2 / (sigma(x)^2 s(x)).
    pub fn speed_density(&self, x: f64) -> Result<f64> {
        let s = self.scale_density(x)?;
        let v = self.volatility(x);
        let m = 2.0 / (v * v * s);
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::Evaluation { x, what: "speed density out of floating-point range".into() })
        }
    }
}

/// Running reward, price function and fixed cost.
#[derive(Clone)]
pub struct MarketModel {
    reward: RealFn,
    price: RealFn,
    fixed_cost: f64,
}

impl fmt::Debug for MarketModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MarketModel")
            .field("fixed_cost", &self.fixed_cost)
            .finish_non_exhaustive()
    }
}

impl MarketModel {
    pub fn new<C, P>(reward: C, price: P, fixed_cost: f64) -> Result<MarketModel>
    where
        C: Fn(f64) -> f64 + Send + Sync + 'static,
        P: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(fixed_cost > 0.0) || !fixed_cost.is_finite() {
            return Err(Error::Config(format!("fixed cost K must be positive, got {fixed_cost}")));
        }
        Ok(MarketModel { reward: Arc::new(reward), price: Arc::new(price), fixed_cost })
    }

    pub fn from_forms(reward: RewardForm, price: PriceForm, fixed_cost: f64) -> Result<MarketModel> {
        MarketModel::new(move |x| reward.eval(x), move |z| price.eval(z), fixed_cost)
    }

    pub fn reward(&self, x: f64) -> f64 {
        (self.reward)(x)
    }

    pub fn price(&self, z: f64) -> f64 {
        (self.price)(z)
    }

    pub fn fixed_cost(&self) -> f64 {
        self.fixed_cost
    }

    /// Same reward and price with a different fixed cost.
    pub fn with_fixed_cost(&self, fixed_cost: f64) -> Result<MarketModel> {
        let mut m = self.clone();
        if !(fixed_cost > 0.0) || !fixed_cost.is_finite() {
            return Err(Error::Config(format!("fixed cost K must be positive, got {fixed_cost}")));
        }
        m.fixed_cost = fixed_cost;
        Ok(m)
    }
}

pub(crate) mod decimal {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::forms::{format_real, parse_real};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_real(*x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        parse_real(&text).map_err(serde::de::Error::custom)
    }
}

pub(crate) mod decimal_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::forms::{format_real, parse_real};

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => s.serialize_some(&format_real(*v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<String>::deserialize(d)? {
            Some(text) => parse_real(&text).map(Some).map_err(serde::de::Error::custom),
            None => Ok(None),
        }
    }
}


/// Builtin diffusion models, keyed by name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// dX = r X (1 - X/delta) dt + sigma X dW on (0, inf).
    Logistic {
        #[serde(with = "decimal")]
        r: f64,
        #[serde(with = "decimal")]
        delta: f64,
        #[serde(with = "decimal")]
        sigma: f64,
        #[serde(with = "decimal")]
        x0: f64,
    },
    /// dX = r X (b - X) dt + sigma X (b - X) dW on (0, b).
    Loksendal {
        #[serde(with = "decimal")]
        r: f64,
        #[serde(with = "decimal")]
        b: f64,
        #[serde(with = "decimal")]
        sigma: f64,
        #[serde(with = "decimal")]
        x0: f64,
    },
    /// Logistic growth with constant immigration and square-root noise:
    /// dX = (mu0 + r X (1 - X/delta)) dt + sigma sqrt(X) dW. Zero is an
    /// entrance boundary when 2 mu0 >= sigma^2.
    Immigration {
        #[serde(with = "decimal")]
        mu0: f64,
        #[serde(with = "decimal")]
        r: f64,
        #[serde(with = "decimal")]
        delta: f64,
        #[serde(with = "decimal")]
        sigma: f64,
        #[serde(with = "decimal")]
        x0: f64,
    },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Logistic { .. } => "logistic",
            ModelSpec::Loksendal { .. } => "loksendal",
            ModelSpec::Immigration { .. } => "immigration",
        }
    }

    pub fn build(&self) -> Result<DiffusionModel> {
        let positive = |label: &str, v: f64| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{}: `{label}` must be positive", self.name())))
            }
        };
        match *self {
            ModelSpec::Logistic { r, delta, sigma, x0 } => {
                positive("r", r)?;
                positive("delta", delta)?;
                positive("sigma", sigma)?;
                DiffusionModel::new(
                    "logistic",
                    (0.0, f64::INFINITY),
                    x0,
                    BoundaryKind::Natural,
                    move |x| r * x * (1.0 - x / delta),
                    move |x| sigma * x,
                )
            }
            ModelSpec::Loksendal { r, b, sigma, x0 } => {
                positive("r", r)?;
                positive("b", b)?;
                positive("sigma", sigma)?;
                DiffusionModel::new(
                    "loksendal",
                    (0.0, b),
                    x0,
                    BoundaryKind::Natural,
                    move |x| r * x * (b - x),
                    move |x| sigma * x * (b - x),
                )
            }
            ModelSpec::Immigration { mu0, r, delta, sigma, x0 } => {
                positive("mu0", mu0)?;
                positive("r", r)?;
                positive("delta", delta)?;
                positive("sigma", sigma)?;
                if 2.0 * mu0 < sigma * sigma {
                    return Err(Error::Config(
                        "immigration: zero is not an entrance boundary unless 2 mu0 >= sigma^2".into(),
                    ));
                }
                DiffusionModel::new(
                    "immigration",
                    (0.0, f64::INFINITY),
                    x0,
                    BoundaryKind::Entrance,
                    move |x| mu0 + r * x * (1.0 - x / delta),
                    move |x| sigma * x.max(0.0).sqrt(),
                )
            }
        }
    }
}
