//! Declarative scenario files.
//!
//! ```json
//! {
//!   "name": "splitter",
//!   "dim": 2,
//!   "cells": { "A": [0], "B": [1] },
//!   "psi0": [[1, 0], [0, 0]],
//!   "schedule": [
//!     [[[0.7071067811865476, 0], [0, 0.7071067811865476]],
//!      [[0, 0.7071067811865476], [0.7071067811865476, 0]]]
//!   ],
//!   "stochastic": { "initial": [1, 0], "kernels": [[[0.5, 0.5], [0.5, 0.5]]] }
//! }
//! ```
//!
//! Complex numbers are `[re, im]` pairs. A schedule entry is either a dense
//! row-major matrix or `{"householder": [...]}` giving the reflection vector
//! `w` of `I − 2ww†/(w†w)`. The optional `stochastic` section describes a
//! Markov chain over the same cell labels (in `cells` order). The JSON schema
//! lives in `schema/scenario.schema.json`.

use std::path::Path;

use indexmap::IndexMap;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::structure::{QuantumStructure, Step};
use crate::twin::StochasticProcessSpec;

pub type ComplexPair = [f64; 2];

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum StepSpec {
    Dense(Vec<Vec<ComplexPair>>),
    Householder { householder: Vec<ComplexPair> },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StochasticSection {
    pub initial: Vec<f64>,
    pub kernels: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dim: usize,
    pub cells: IndexMap<String, Vec<usize>>,
    pub psi0: Vec<ComplexPair>,
    pub schedule: Vec<StepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stochastic: Option<StochasticSection>,
}

fn to_c64(v: &[ComplexPair]) -> Array1<C64> {
    v.iter().map(|[re, im]| C64::new(*re, *im)).collect()
}

fn to_pairs(v: &Array1<C64>) -> Vec<ComplexPair> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization is infallible")
    }

    pub fn from_structure(name: Option<&str>, q: &QuantumStructure) -> Self {
        let schedule = q
            .steps()
            .iter()
            .map(|step| match step {
                Step::Dense(m) => StepSpec::Dense(
                    m.rows()
                        .into_iter()
                        .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
                        .collect(),
                ),
                Step::Reflection(w) => StepSpec::Householder {
                    householder: to_pairs(w),
                },
            })
            .collect();
        ScenarioFile {
            name: name.map(str::to_owned),
            dim: q.dim(),
            cells: q.cells().clone(),
            psi0: to_pairs(q.psi0()),
            schedule,
            stochastic: None,
        }
    }

    pub fn with_stochastic(mut self, chain: &StochasticProcessSpec) -> Self {
        self.stochastic = Some(StochasticSection {
            initial: chain.initial().to_vec(),
            kernels: chain.kernels().to_vec(),
        });
        self
    }

    pub fn structure(&self) -> Result<QuantumStructure> {
        if self.psi0.len() != self.dim {
            return Err(invalid(format!(
                "psi0 has {} entries but dim is {}",
                self.psi0.len(),
                self.dim
            )));
        }
        let mut steps = Vec::with_capacity(self.schedule.len());
        for (k, spec) in self.schedule.iter().enumerate() {
            let step = match spec {
                StepSpec::Dense(rows) => {
                    if rows.len() != self.dim || rows.iter().any(|r| r.len() != self.dim) {
                        return Err(invalid(format!(
                            "schedule step {k} must be {0}×{0}",
                            self.dim
                        )));
                    }
                    let flat: Vec<C64> = rows
                        .iter()
                        .flatten()
                        .map(|[re, im]| C64::new(*re, *im))
                        .collect();
                    Step::Dense(
                        Array2::from_shape_vec((self.dim, self.dim), flat).expect("shape checked"),
                    )
                }
                StepSpec::Householder { householder } => {
                    if householder.len() != self.dim {
                        return Err(invalid(format!(
                            "householder step {k} must have {} entries",
                            self.dim
                        )));
                    }
                    Step::Reflection(to_c64(householder))
                }
            };
            steps.push(step);
        }
        QuantumStructure::new(to_c64(&self.psi0), steps, self.cells.clone())
    }

    /// The Markov chain of the `stochastic` section, if present.
    pub fn stochastic(&self) -> Result<Option<StochasticProcessSpec>> {
        self.stochastic
            .as_ref()
            .map(|s| {
                StochasticProcessSpec::new(
                    self.cells.keys().cloned().collect(),
                    s.initial.clone(),
                    s.kernels.clone(),
                )
            })
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    const SPLITTER: &str = r#"{
        "name": "splitter",
        "dim": 2,
        "cells": {"A": [0], "B": [1]},
        "psi0": [[1, 0], [0, 0]],
        "schedule": [
            [[[0.7071067811865476, 0], [0, 0.7071067811865476]],
             [[0, 0.7071067811865476], [0.7071067811865476, 0]]],
            {"householder": [[0, 0], [0, 0]]}
        ],
        "stochastic": {"initial": [1, 0], "kernels": [[[0.5, 0.5], [0.5, 0.5]], [[1, 0], [0, 1]]]}
    }"#;

    #[test]
    fn parses_dense_and_householder_steps() {
        let file = ScenarioFile::from_json(SPLITTER).unwrap();
        let q = file.structure().unwrap();
        assert_eq!(q.final_time(), 2);
        let chain = file.stochastic().unwrap().unwrap();
        assert_eq!(chain.final_time(), 2);
        let again = ScenarioFile::from_json(&file.to_json()).unwrap();
        assert_eq!(again, file);
    }

    #[test]
    fn parse_error_carries_position() {
        let err = ScenarioFile::from_json("{\n  \"dim\": 2,\n  \"cells\": oops }").unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_validation_error() {
        let mut file = ScenarioFile::from_json(SPLITTER).unwrap();
        file.psi0.push([0.0, 0.0]);
        assert!(matches!(file.structure(), Err(Error::Validation(_))));
    }
}
