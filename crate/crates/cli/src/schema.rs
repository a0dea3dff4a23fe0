//! Input file formats.
//!
//! Scenario file:
//! `{"state": S, "measurements": {"A1": M, "A2": M, "B1": M, "B2": M}}` where a state is
//! `{"bloch": [x, y, z]}` or `{"matrix": rows}` and a measurement is `{"bloch": [x, y, z]}`
//! (projective), `{"matrix": rows}` (the outcome-0 effect) or
//! `{"povm": {"direction": [x, y, z], "sharpness": λ, "bias": γ}}`. Matrices are rows of
//! `[re, im]` pairs.
//!
//! Statistics file: `{"joint": {"i,j,a,b": p, ...}, "marginalsNoAlice": {"j,b": p, ...},
//! "tolerance": t}` with settings 1-based and outcomes 0/1.

use std::collections::BTreeMap;

use lgi_core::qcore::{
    biased_effect_pair, bloch_to_density, projective_measurement, BinaryMeasurement, BlochVector, ComplexMatrix,
    DensityMatrix, C64,
};
use lgi_core::seqstats::{Scenario, StatisticsTable};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_STATISTICS_TOLERANCE: f64 = 1e-6;

pub type MatrixRows = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum StateSpec {
    Bloch([f64; 3]),
    Matrix(MatrixRows),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmSpec {
    pub direction: [f64; 3],
    pub sharpness: f64,
    #[serde(default)]
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum MeasurementSpec {
    Bloch([f64; 3]),
    Matrix(MatrixRows),
    Povm(PovmSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSet {
    #[serde(rename = "A1")]
    pub a1: MeasurementSpec,
    #[serde(rename = "A2")]
    pub a2: MeasurementSpec,
    #[serde(rename = "B1")]
    pub b1: MeasurementSpec,
    #[serde(rename = "B2")]
    pub b2: MeasurementSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub state: StateSpec,
    pub measurements: MeasurementSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StatisticsFile {
    pub joint: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginals_no_alice: Option<BTreeMap<String, f64>>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    DEFAULT_STATISTICS_TOLERANCE
}

pub enum InputFile {
    Scenario(ScenarioFile),
    Statistics(StatisticsFile),
}

fn parse_error(path: &str, e: serde_json::Error) -> CliError {
    CliError::Usage(format!("{path}:{}:{}: {e}", e.line(), e.column()))
}

pub fn read(path: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{path}: {e}")))
}

pub fn parse_scenario(path: &str, text: &str) -> Result<ScenarioFile, CliError> {
    serde_json::from_str(text).map_err(|e| parse_error(path, e))
}

pub fn parse_statistics(path: &str, text: &str) -> Result<StatisticsFile, CliError> {
    serde_json::from_str(text).map_err(|e| parse_error(path, e))
}

/// Chooses the format from the top-level keys.
pub fn parse_any(path: &str, text: &str) -> Result<InputFile, CliError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| parse_error(path, e))?;
    if value.get("joint").is_some() {
        parse_statistics(path, text).map(InputFile::Statistics)
    } else {
        parse_scenario(path, text).map(InputFile::Scenario)
    }
}

fn matrix(rows: &MatrixRows) -> Result<ComplexMatrix, CliError> {
    let rows: Vec<Vec<C64>> = rows
        .iter()
        .map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect())
        .collect();
    ComplexMatrix::from_rows(&rows).map_err(CliError::invariant)
}

fn bloch(v: [f64; 3]) -> BlochVector {
    BlochVector::new(v[0], v[1], v[2])
}

impl StateSpec {
    pub fn build(&self) -> Result<DensityMatrix, CliError> {
        match self {
            StateSpec::Bloch(v) => bloch_to_density(bloch(*v)),
            StateSpec::Matrix(rows) => DensityMatrix::new(matrix(rows)?),
        }
        .map_err(CliError::invariant)
    }
}

impl MeasurementSpec {
    pub fn build(&self) -> Result<BinaryMeasurement, CliError> {
        match self {
            MeasurementSpec::Bloch(v) => projective_measurement(bloch(*v)),
            MeasurementSpec::Matrix(rows) => BinaryMeasurement::from_effect(matrix(rows)?),
            MeasurementSpec::Povm(p) => biased_effect_pair(bloch(p.direction), p.sharpness, p.bias),
        }
        .map_err(CliError::invariant)
    }
}

impl ScenarioFile {
    pub fn build(&self) -> Result<Scenario, CliError> {
        let m = &self.measurements;
        Scenario::new(
            self.state.build()?,
            [m.a1.build()?, m.a2.build()?],
            [m.b1.build()?, m.b2.build()?],
        )
        .map_err(CliError::invariant)
    }
}

fn indices(key: &str, n: usize) -> Option<Vec<usize>> {
    let parts: Vec<usize> = key.split(',').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
    (parts.len() == n).then_some(parts)
}

fn setting(i: usize) -> Option<usize> {
    (1..=2).contains(&i).then(|| i - 1)
}

fn outcome(a: usize) -> Option<usize> {
    (a <= 1).then_some(a)
}

impl StatisticsFile {
    /// Schema problems are usage errors; probabilities outside `[0, 1]` or blocks that do
    /// not sum to one are data-invariant errors.
    pub fn build(&self) -> Result<StatisticsTable, CliError> {
        if !(self.tolerance >= 0.0) {
            return Err(CliError::Usage(format!("tolerance {} must be non-negative", self.tolerance)));
        }
        let mut joint = [[[[f64::NAN; 2]; 2]; 2]; 2];
        for (key, &p) in &self.joint {
            let idx = indices(key, 4)
                .and_then(|v| Some((setting(v[0])?, setting(v[1])?, outcome(v[2])?, outcome(v[3])?)))
                .ok_or_else(|| CliError::Usage(format!("joint key {key:?} is not \"i,j,a,b\"")))?;
            joint[idx.0][idx.1][idx.2][idx.3] = p;
        }
        if self.joint.len() != 16 || joint.iter().flatten().flatten().flatten().any(|p| p.is_nan()) {
            return Err(CliError::Usage("joint needs exactly the 16 keys \"i,j,a,b\"".into()));
        }
        let marginals = match &self.marginals_no_alice {
            None => None,
            Some(map) => {
                let mut m = [[f64::NAN; 2]; 2];
                for (key, &p) in map {
                    let idx = indices(key, 2)
                        .and_then(|v| Some((setting(v[0])?, outcome(v[1])?)))
                        .ok_or_else(|| CliError::Usage(format!("marginal key {key:?} is not \"j,b\"")))?;
                    m[idx.0][idx.1] = p;
                }
                if map.len() != 4 || m.iter().flatten().any(|p| p.is_nan()) {
                    return Err(CliError::Usage("marginalsNoAlice needs exactly the 4 keys \"j,b\"".into()));
                }
                Some(m)
            }
        };
        let all = joint.iter().flatten().flatten().flatten().chain(marginals.iter().flatten().flatten());
        for &p in all {
            if !(-self.tolerance..=1.0 + self.tolerance).contains(&p) {
                return Err(CliError::Invariant(format!("probability {p} outside [0, 1]")));
            }
        }
        let table = StatisticsTable {
            joint,
            marginals_no_alice: marginals,
        };
        let defect = table.normalization_defect();
        if defect > self.tolerance {
            return Err(CliError::Invariant(format!(
                "probabilities miss normalisation by {defect:.3e} (tolerance {:.3e})",
                self.tolerance
            )));
        }
        Ok(table)
    }
}
