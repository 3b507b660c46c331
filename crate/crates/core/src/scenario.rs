//! Scenario documents and the built-in example suite.
//!
//! A scenario file is one JSON object:
//!
//! ```json
//! {
//!   "name": "two-cycle",
//!   "n": 2,
//!   "F": [0, 1,
//!         1, 0],
//!   "nu": 0.5, "alpha": 0, "s_total": 1, "c": 1,
//!   "q0": [1, 1],
//!   "horizon": 20, "step": 0.01
//! }
//! ```
//!
//! `F` is row-major: entry `i * n + j` is the spillover from technology `j`
//! to technology `i`. An optional `assumed` array lists fields that were
//! chosen as defaults rather than taken from a source.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{validate_model, EconomyParams, Model, QualityState, SpilloverMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub matrix: SpilloverMatrix,
    pub params: EconomyParams,
    pub q0: QualityState,
    pub horizon: f64,
    pub step: f64,
    /// Fields holding defaults rather than documented values.
    pub assumed: Vec<String>,
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        matrix: SpilloverMatrix,
        params: EconomyParams,
        q0: QualityState,
        horizon: f64,
        step: f64,
    ) -> Result<Self> {
        check_time("horizon", horizon)?;
        check_time("step", step)?;
        validate_model(&matrix, &params, &q0)?;
        Ok(Self {
            name: name.into(),
            matrix,
            params,
            q0,
            horizon,
            step,
            assumed: Vec::new(),
        })
    }

    pub fn with_assumed(mut self, fields: &[&str]) -> Self {
        self.assumed = fields.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn model(&self) -> Result<Model> {
        validate_model(&self.matrix, &self.params, &self.q0)
    }

    /// The scenario as a JSON document, one matrix row per line.
    pub fn to_json(&self) -> String {
        let num = |x: f64| serde_json::to_string(&x).expect("finite numbers serialize");
        let list = |xs: &[f64]| xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(", ");
        let n = self.n();
        let rows: Vec<String> = self
            .matrix
            .to_row_major()
            .chunks(n)
            .map(|r| format!("    {}", list(r)))
            .collect();
        let mut out = String::from("{\n");
        out += &format!(
            "  \"name\": {},\n",
            serde_json::to_string(&self.name).expect("strings serialize")
        );
        out += &format!("  \"n\": {n},\n");
        out += &format!("  \"F\": [\n{}\n  ],\n", rows.join(",\n"));
        out += &format!("  \"nu\": {},\n", num(self.params.nu()));
        out += &format!("  \"alpha\": {},\n", num(self.params.alpha()));
        out += &format!("  \"s_total\": {},\n", num(self.params.s_total()));
        out += &format!("  \"c\": {},\n", num(self.params.c()));
        out += &format!("  \"q0\": [{}],\n", list(self.q0.q()));
        out += &format!("  \"horizon\": {},\n", num(self.horizon));
        out += &format!("  \"step\": {}", num(self.step));
        if !self.assumed.is_empty() {
            out += &format!(
                ",\n  \"assumed\": {}",
                serde_json::to_string(&self.assumed).expect("strings serialize")
            );
        }
        out += "\n}\n";
        out
    }
}

fn check_time(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter {
            name,
            value,
            expected: "a finite value > 0",
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    n: Option<usize>,
    #[serde(rename = "F")]
    f: Option<Vec<f64>>,
    nu: Option<f64>,
    alpha: Option<f64>,
    s_total: Option<f64>,
    c: Option<f64>,
    q0: Option<Vec<f64>>,
    horizon: Option<f64>,
    step: Option<f64>,
    #[serde(default)]
    assumed: Vec<String>,
}

/// 1-based line of the first occurrence of `"key"` in the document.
fn key_line(text: &str, key: &str) -> usize {
    let quoted = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&quoted))
        .map_or(0, |i| i + 1)
}

fn require<T>(path: &Path, value: Option<T>, field: &'static str) -> Result<T> {
    value.ok_or_else(|| Error::MissingField {
        path: path.to_path_buf(),
        field,
    })
}

/// Parses a scenario document; `path` is only used for error context.
pub fn parse_scenario(text: &str, path: &Path) -> Result<Scenario> {
    let raw: RawScenario = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let name = require(path, raw.name, "name")?;
    let n = require(path, raw.n, "n")?;
    let f = require(path, raw.f, "F")?;
    let nu = require(path, raw.nu, "nu")?;
    let alpha = require(path, raw.alpha, "alpha")?;
    let s_total = require(path, raw.s_total, "s_total")?;
    let c = require(path, raw.c, "c")?;
    let q0 = require(path, raw.q0, "q0")?;
    let horizon = require(path, raw.horizon, "horizon")?;
    let step = require(path, raw.step, "step")?;

    let at = |key: &str, e: Error| Error::Validation {
        path: path.to_path_buf(),
        line: key_line(text, key),
        source: Box::new(e),
    };
    let matrix = SpilloverMatrix::from_row_major(n, &f).map_err(|e| at("F", e))?;
    let params = EconomyParams::new(nu, alpha, s_total, c).map_err(|e| {
        let key = match &e {
            Error::Parameter { name, .. } => *name,
            _ => "nu",
        };
        at(key, e)
    })?;
    let q0 = QualityState::at_zero(q0).map_err(|e| at("q0", e))?;
    check_time("horizon", horizon).map_err(|e| at("horizon", e))?;
    check_time("step", step).map_err(|e| at("step", e))?;
    validate_model(&matrix, &params, &q0).map_err(|e| at("q0", e))?;
    Ok(Scenario {
        name,
        matrix,
        params,
        q0,
        horizon,
        step,
        assumed: raw.assumed,
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, path)
}

pub fn write_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scenario.to_json()).map_err(|e| Error::io(path, e))
}

/// Scenario files (`*.json`) in a directory, sorted by file name.
pub fn scenario_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

const DEFAULT_HORIZON: f64 = 60.0;
const DEFAULT_STEP: f64 = 0.01;

fn defaults() -> EconomyParams {
    EconomyParams::new(0.5, 1.0, 1.0, 1.0).expect("valid defaults")
}

fn builtin(name: &str, rows: &[[f64; 4]], params: EconomyParams, q0: [f64; 4]) -> Scenario {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    Scenario::new(
        name,
        SpilloverMatrix::from_rows(&rows).expect("built-in matrix"),
        params,
        QualityState::at_zero(q0.to_vec()).expect("built-in state"),
        DEFAULT_HORIZON,
        DEFAULT_STEP,
    )
    .expect("built-in scenario")
}

pub const ONE_WAY: [[f64; 4]; 4] = [
    [0.0, 0.0, 0.0, 0.0],
    [1.0, 0.0, 1.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0],
];

pub const CIRCULAR: [[f64; 4]; 4] = [
    [0.0, 0.0, 0.0, 1.0],
    [1.0, 0.0, 1.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0],
];

pub const TRANSITIONS: [[f64; 4]; 4] = [
    [0.75, 0.0, 0.0, 1.0],
    [0.5, 0.5, 0.0, 0.0],
    [0.0, 1.0 / 3.0, 0.0, 1.0],
    [0.0, 0.0, 3.0, 0.0],
];

pub const EVENTUALLY_NONNEGATIVE: [[f64; 4]; 4] = [
    [1.0, 1.0, 1.0, 1.0],
    [1.0, 1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0, 1.0],
    [1.0, 0.0, 1.0, 1.0],
];

/// The five reference scenarios, in a fixed order.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let all_defaults = ["nu", "alpha", "s_total", "c", "q0", "horizon", "step"];
    vec![
        builtin("fig12-oneway", &ONE_WAY, defaults(), [1.0; 4]).with_assumed(&all_defaults),
        builtin("fig12-circular", &CIRCULAR, defaults(), [1.0; 4]).with_assumed(&all_defaults),
        builtin(
            "fig4-transitions",
            &TRANSITIONS,
            EconomyParams::new(0.5, 0.0, 1.0, 1.0).expect("valid"),
            [1.0, 0.1, 0.1, 0.1],
        )
        .with_assumed(&["c", "horizon", "step"]),
        builtin(
            "sec4-eventually-nn",
            &EVENTUALLY_NONNEGATIVE,
            defaults(),
            [1.0; 4],
        )
        .with_assumed(&all_defaults),
        builtin("homogeneous-baseline", &[[1.0; 4]; 4], defaults(), [1.0; 4])
            .with_assumed(&all_defaults),
    ]
}

pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}
