//! JSON run configurations. Unknown fields are rejected and every embedded
//! parameter type validates itself while parsing, so a config that loads is
//! a config that can run.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use tfd_core::mc_solver::McConfig;
use tfd_core::pde_series::{IntervalDomain, Method};
use tfd_core::TemperedParams;

use crate::CliError;

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxConfig {
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub t: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivativeKind {
    Rl,
    Caputo,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivativeConfig {
    /// CSV with header `t,value` on a uniform grid starting at `t = 0`.
    pub input: PathBuf,
    pub kind: DerivativeKind,
    pub beta: f64,
    /// `λ > 0` selects the tempered operator.
    #[serde(default)]
    pub lambda: f64,
    /// Exponents `σ` of `t^σ` terms to integrate exactly near the origin.
    #[serde(default)]
    pub singular_exponents: Vec<f64>,
}

/// Built-in initial data.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// A single eigenfunction `ψ_n`.
    Mode { index: Vec<usize> },
    /// `Π 4 x_i (M_i − x_i) / M_i²`.
    PolynomialBump,
    /// `Π ½(tanh((x_i − a)/w) − tanh((x_i − b)/w))`.
    SmoothedIndicator { a: f64, b: f64, width: f64 },
    /// Values on a uniform grid over `[0, M]` (interval only), interpolated linearly.
    Samples { values: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Point {
    pub fn coords(&self) -> Vec<f64> {
        match self {
            Point::Scalar(x) => vec![*x],
            Point::Vector(v) => v.clone(),
        }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::Series]
}

fn default_bias() -> f64 {
    0.01
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub params: TemperedParams,
    pub domain: IntervalDomain,
    pub initial: InitialData,
    pub t: Vec<f64>,
    pub x: Vec<Point>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Modes per axis; adaptive doubling from 64 when absent.
    #[serde(default)]
    pub n_max: Option<usize>,
    #[serde(default)]
    pub mc: Option<McConfig>,
    /// Allowance added to `3·std_error` when flagging Monte Carlo rows.
    #[serde(default = "default_bias")]
    pub mc_bias_allowance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub params: TemperedParams,
    pub dx: f64,
    pub n_paths: u64,
    pub t_query: Vec<f64>,
    /// Defaults to the largest query time.
    #[serde(default)]
    pub t_horizon: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dump_paths: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default)]
    pub profile: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_config_parses_and_rejects_unknown_fields() {
        let ok = r#"{"params": {"beta": 0.5, "lambda": 1.0}, "domain": {"lengths": [3.0]},
                     "initial": {"kind": "mode", "index": [1]}, "t": [0.5], "x": [1.0, [2.0]]}"#;
        let c: SolveConfig = serde_json::from_str(ok).unwrap();
        assert_eq!(c.methods, vec![Method::Series]);
        assert_eq!(c.x[1].coords(), vec![2.0]);

        let bad = ok.replace("\"t\": [0.5]", "\"t\": [0.5], \"colour\": 1");
        let err = serde_json::from_str::<SolveConfig>(&bad).unwrap_err().to_string();
        assert!(err.contains("colour") && err.contains("line"), "{err}");

        let bad = ok.replace("\"beta\": 0.5", "\"beta\": 1.5");
        assert!(serde_json::from_str::<SolveConfig>(&bad)
            .unwrap_err()
            .to_string()
            .contains("beta"));

        let bad = ok.replace("\"index\": [1]", "\"index\": [1], \"extra\": 2");
        assert!(serde_json::from_str::<SolveConfig>(&bad).is_err());
    }
}
