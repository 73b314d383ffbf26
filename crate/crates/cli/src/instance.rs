//! Instance files: ensembles written as JSON with explicit `[re, im]` pairs.
//!
//! ```json
//! {
//!   "dims": [2, 2],
//!   "states": [
//!     {"type": "pure", "vector": [[1, 0], [0, 0], [0, 0], [0, 0]]},
//!     {"type": "mixed", "matrix": [[[0.5, 0], [0, 0], ...], ...]}
//!   ],
//!   "delta": [1, 2],
//!   "priors": [0.5, 0.5]
//! }
//! ```
//!
//! Pure vectors are normalized on load. Mixed matrices keep their trace; a
//! trace away from 1 marks the state as unnormalized.

use std::path::Path;

use locc_usd::linalg::{CMatrix, CVector};
use locc_usd::state::{DensityMatrix, SpaceShape, StateEnsemble};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A complex number as `[re, im]`.
pub type Pair = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum StateEntry {
    Pure { vector: Vec<Pair> },
    Mixed { matrix: Vec<Vec<Pair>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub dims: Vec<usize>,
    pub states: Vec<StateEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<Vec<f64>>,
}

pub fn to_pairs(v: &CVector) -> Vec<Pair> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn matrix_to_pairs(m: &CMatrix) -> Vec<Vec<Pair>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

fn to_complex(p: &Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            CliError::Input(format!("line {}, column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Builds the ensemble, reporting the offending field on failure.
    pub fn to_ensemble(&self) -> Result<StateEnsemble, CliError> {
        let shape = SpaceShape::new(self.dims.clone())
            .map_err(|e| CliError::Input(format!("dims: {e}")))?;
        let d = shape.total();
        let states = self
            .states
            .iter()
            .enumerate()
            .map(|(k, entry)| {
                let field = |what: &str| format!("states[{k}].{what}");
                match entry {
                    StateEntry::Pure { vector } => {
                        if vector.len() != d {
                            return Err(CliError::Input(format!(
                                "{}: expected {d} amplitudes, found {}",
                                field("vector"),
                                vector.len()
                            )));
                        }
                        let v = CVector::from_iterator(d, vector.iter().map(to_complex));
                        DensityMatrix::pure(shape.clone(), &v)
                            .map_err(|e| CliError::Input(format!("{}: {e}", field("vector"))))
                    }
                    StateEntry::Mixed { matrix } => {
                        if matrix.len() != d {
                            return Err(CliError::Input(format!(
                                "{}: expected {d} rows, found {}",
                                field("matrix"),
                                matrix.len()
                            )));
                        }
                        if let Some((r, row)) = matrix.iter().enumerate().find(|(_, row)| row.len() != d) {
                            return Err(CliError::Input(format!(
                                "{}[{r}]: expected {d} entries, found {}",
                                field("matrix"),
                                row.len()
                            )));
                        }
                        let m = CMatrix::from_fn(d, d, |r, c| to_complex(&matrix[r][c]));
                        let tr: f64 = (0..d).map(|i| m[(i, i)].re).sum();
                        let built = if (tr - 1.0).abs() <= 1e-10 {
                            DensityMatrix::new(shape.clone(), m)
                        } else {
                            DensityMatrix::unnormalized(shape.clone(), m)
                        };
                        built.map_err(|e| CliError::Input(format!("{}: {e}", field("matrix"))))
                    }
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        StateEnsemble::new(states, self.delta.clone(), self.priors.clone())
            .map_err(|e| CliError::Input(format!("ensemble: {e}")))
    }

    /// Whether every entry is given as a pure vector.
    pub fn all_pure(&self) -> bool {
        self.states.iter().all(|s| matches!(s, StateEntry::Pure { .. }))
    }
}
