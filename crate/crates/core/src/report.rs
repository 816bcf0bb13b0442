//! JSON report envelope shared by every subcommand.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::mfc::{BestResponse, LagrangeDiagnostic, OptimumReport};
use crate::mfg::EquilibriumReport;
use crate::model::ConditionReport;
use crate::policy::ClassicalSolution;
use crate::simulate::{HorizonEstimate, SimEstimate};

pub const TOOL: &str = "mfimpulse";
pub const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Report {
    Conditions(Vec<ConditionReport>),
    Classical(ClassicalSolution),
    Equilibrium(EquilibriumReport),
    Optimum(OptimumReport),
    BestResponse(BestResponse),
    Lagrange(LagrangeDiagnostic),
    Simulation(SimEstimate),
    Horizon(HorizonEstimate),
    Tables(TableReport),
}

/// One row of a reproduced results table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRow {
    pub w: f64,
    pub y: f64,
    pub supply_rate: f64,
    pub price: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableReport {
    pub example: String,
    pub mfg: TableRow,
    pub mfc: TableRow,
}

impl TableReport {
    /// CSV with the published layout, six decimals per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Problem,w*,y*,Supply Rate,Price,Value\n");
        for (label, r) in [("MFG", self.mfg), ("MFC", self.mfc)] {
            out.push_str(&format!(
                "{label},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                r.w, r.y, r.supply_rate, r.price, r.value
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportEnvelope {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<RunConfig>,
    pub timing: Timing,
    pub report: Report,
}

impl ReportEnvelope {
    pub fn new(command: &str, config: Option<RunConfig>, elapsed_seconds: f64, report: Report) -> ReportEnvelope {
        ReportEnvelope {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            timing: Timing { elapsed_seconds },
            report,
        }
    }

    /// Pretty JSON with every float rounded to nine significant digits.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        round_floats(&mut v);
        serde_json::to_string_pretty(&v).expect("value serializes")
    }

    pub fn from_json(text: &str) -> Result<ReportEnvelope> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed report: {e}")))
    }
}

pub fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().unwrap_or_default(), SIGNIFICANT_DIGITS);
            if let Some(r) = serde_json::Number::from_f64(x) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Machine-readable error document for stderr.
pub fn error_json(err: &Error) -> String {
    serde_json::json!({
        "tool": TOOL,
        "error": { "kind": err.kind(), "exit_code": err.exit_code(), "message": err.to_string() }
    })
    .to_string()
}
