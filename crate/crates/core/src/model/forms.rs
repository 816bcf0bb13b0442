//! Named parametric forms for the running reward and the price function,
//! written as `name{key=value,...}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A parsed but not yet validated form expression.
#[derive(Debug, Clone, PartialEq)]
pub struct FormSpec {
    pub name: String,
    pub params: Vec<(String, f64)>,
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Parses a finite real written in decimal or scientific notation.
pub fn parse_real(text: &str) -> Result<f64> {
    let t = text.trim();
    let ok = !t.is_empty()
        && t.chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'));
    let value = if ok { t.parse::<f64>().ok() } else { None };
    match value {
        Some(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Config(format!("`{t}` is not a finite decimal number"))),
    }
}

/// Shortest representation that parses back to the same bits.
pub fn format_real(x: f64) -> String {
    let s = format!("{x:?}");
    match s.strip_suffix(".0") {
        Some(int) => int.to_string(),
        None => s,
    }
}

impl FormSpec {
    pub fn parse(text: &str) -> Result<FormSpec> {
        let text = text.trim();
        let (name, body) = match text.find('{') {
            None => (text, None),
            Some(open) => {
                let rest = &text[open + 1..];
                let inner = rest
                    .strip_suffix('}')
                    .ok_or_else(|| Error::Config(format!("`{text}`: missing closing brace")))?;
                (text[..open].trim(), Some(inner))
            }
        };
        if !is_ident(name) {
            return Err(Error::Config(format!("`{name}` is not a valid form name")));
        }
        let mut params: Vec<(String, f64)> = Vec::new();
        if let Some(body) = body {
            if body.contains(['{', '}']) {
                return Err(Error::Config(format!("`{text}`: nested braces")));
            }
            for item in body.split(',').map(str::trim) {
                if item.is_empty() {
                    if body.trim().is_empty() {
                        continue;
                    }
                    return Err(Error::Config(format!("`{text}`: empty parameter")));
                }
                let (key, value) = item
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("`{item}`: expected key=value")))?;
                let key = key.trim();
                if !is_ident(key) {
                    return Err(Error::Config(format!("`{key}` is not a valid parameter name")));
                }
                if params.iter().any(|(k, _)| k == key) {
                    return Err(Error::Config(format!("parameter `{key}` given twice")));
                }
                params.push((key.to_string(), parse_real(value)?));
            }
        }
        Ok(FormSpec { name: name.to_string(), params })
    }

    fn take(&self, allowed: &[&str]) -> Result<Vec<f64>> {
        for (k, _) in &self.params {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::Config(format!("form `{}` has no parameter `{k}`", self.name)));
            }
        }
        allowed
            .iter()
            .map(|a| {
                self.params
                    .iter()
                    .find(|(k, _)| k == a)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| Error::Config(format!("form `{}` needs parameter `{a}`", self.name)))
            })
            .collect()
    }
}

impl fmt::Display for FormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{", self.name)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}={}", format_real(*v))?;
        }
        write!(f, "}}")
    }
}

/// Running reward rate c(x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardForm {
    Constant { value: f64 },
    /// 1 - exp(-rate x)
    OneMinusExp { rate: f64 },
    /// 1 - exp(-rate x) + coef x^power
    OneMinusExpPlusPower { rate: f64, coef: f64, power: f64 },
}

impl RewardForm {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            RewardForm::Constant { value } => value,
            RewardForm::OneMinusExp { rate } => -(-rate * x).exp_m1(),
            RewardForm::OneMinusExpPlusPower { rate, coef, power } => {
                -(-rate * x).exp_m1() + coef * x.max(0.0).powf(power)
            }
        }
    }

    fn spec(&self) -> FormSpec {
        let (name, params): (&str, Vec<(&str, f64)>) = match *self {
            RewardForm::Constant { value } => ("constant", vec![("value", value)]),
            RewardForm::OneMinusExp { rate } => ("one_minus_exp", vec![("rate", rate)]),
            RewardForm::OneMinusExpPlusPower { rate, coef, power } => (
                "one_minus_exp_plus_power",
                vec![("rate", rate), ("coef", coef), ("power", power)],
            ),
        };
        FormSpec {
            name: name.into(),
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

impl TryFrom<&FormSpec> for RewardForm {
    type Error = Error;

    fn try_from(spec: &FormSpec) -> Result<RewardForm> {
        match spec.name.as_str() {
            "constant" => {
                let v = spec.take(&["value"])?;
                Ok(RewardForm::Constant { value: v[0] })
            }
            "one_minus_exp" => {
                let v = spec.take(&["rate"])?;
                Ok(RewardForm::OneMinusExp { rate: v[0] })
            }
            "one_minus_exp_plus_power" => {
                let v = spec.take(&["rate", "coef", "power"])?;
                Ok(RewardForm::OneMinusExpPlusPower { rate: v[0], coef: v[1], power: v[2] })
            }
            other => Err(Error::Config(format!("unknown reward form `{other}`"))),
        }
    }
}

/// Price as a function of the aggregate supply rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriceForm {
    Constant { value: f64 },
    /// a / (a + b z + c sin z)
    RationalSin { a: f64, b: f64, c: f64 },
    /// num / (a + b z + c cos(freq z))
    RationalCos { num: f64, a: f64, b: f64, c: f64, freq: f64 },
}

impl PriceForm {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            PriceForm::Constant { value } => value,
            PriceForm::RationalSin { a, b, c } => a / (a + b * z + c * z.sin()),
            PriceForm::RationalCos { num, a, b, c, freq } => num / (a + b * z + c * (freq * z).cos()),
        }
    }

    fn spec(&self) -> FormSpec {
        let (name, params): (&str, Vec<(&str, f64)>) = match *self {
            PriceForm::Constant { value } => ("constant", vec![("value", value)]),
            PriceForm::RationalSin { a, b, c } => ("rational_sin", vec![("a", a), ("b", b), ("c", c)]),
            PriceForm::RationalCos { num, a, b, c, freq } => (
                "rational_cos",
                vec![("num", num), ("a", a), ("b", b), ("c", c), ("freq", freq)],
            ),
        };
        FormSpec {
            name: name.into(),
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

impl TryFrom<&FormSpec> for PriceForm {
    type Error = Error;

    fn try_from(spec: &FormSpec) -> Result<PriceForm> {
        match spec.name.as_str() {
            "constant" => {
                let v = spec.take(&["value"])?;
                Ok(PriceForm::Constant { value: v[0] })
            }
            "rational_sin" => {
                let v = spec.take(&["a", "b", "c"])?;
                Ok(PriceForm::RationalSin { a: v[0], b: v[1], c: v[2] })
            }
            "rational_cos" => {
                let v = spec.take(&["num", "a", "b", "c", "freq"])?;
                Ok(PriceForm::RationalCos { num: v[0], a: v[1], b: v[2], c: v[3], freq: v[4] })
            }
            other => Err(Error::Config(format!("unknown price form `{other}`"))),
        }
    }
}

macro_rules! string_form {
    ($ty:ty) => {
        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<$ty> {
                <$ty>::try_from(&FormSpec::parse(s)?)
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.spec().fmt(f)
            }
        }

        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<$ty, D::Error> {
                let text = String::deserialize(d)?;
                text.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_form!(RewardForm);
string_form!(PriceForm);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_logistic_forms() {
        let c: RewardForm = "one_minus_exp{rate=1}".parse().unwrap();
        assert_eq!(c, RewardForm::OneMinusExp { rate: 1.0 });
        let phi: PriceForm = "rational_sin{a=3, b=1, c=2}".parse().unwrap();
        assert_eq!(phi, PriceForm::RationalSin { a: 3.0, b: 1.0, c: 2.0 });
        assert!((phi.eval(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn display_is_canonical() {
        let phi = PriceForm::RationalCos { num: 2.0, a: 3.0, b: 1.0, c: 1.0, freq: 2.0 };
        assert_eq!(phi.to_string(), "rational_cos{num=2,a=3,b=1,c=1,freq=2}");
        let c = RewardForm::OneMinusExpPlusPower { rate: 3.0, coef: 0.01, power: 0.25 };
        assert_eq!(c.to_string().parse::<RewardForm>().unwrap(), c);
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "",
            "one_minus_exp{rate=1",
            "one_minus_exp{rate}",
            "one_minus_exp{rate=1,rate=2}",
            "one_minus_exp{rate=x}",
            "one_minus_exp{rate=inf}",
            "one_minus_exp{scale=1}",
            "Rational{a=1}",
            "constant{}",
            "constant{value=1,}",
        ] {
            assert!(bad.parse::<RewardForm>().is_err(), "{bad}");
        }
    }

    #[test]
    fn real_formatting_round_trips() {
        for x in [0.1, 1e-10, 5.0, -2.5, 1.0 / 3.0, 6.02e23] {
            assert_eq!(parse_real(&format_real(x)).unwrap().to_bits(), x.to_bits());
        }
    }
}
