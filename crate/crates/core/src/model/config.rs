//! JSON model configuration.
//!
//! ```json
//! {
//!   "r": 2,
//!   "pi": [0.5, 0.5],
//!   "layers": [
//!     { "q": 2, "tensor": { "two_param": { "a": 3.0, "b": 1.0 } } },
//!     { "q": 3, "tensor": { "entries": { "3,0": 2.0, "2,1": 0.5, "1,2": 0.5, "0,3": 2.0 } } }
//!   ],
//!   "weights": [1.0, 1.0]
//! }
//! ```
//!
//! Composition keys are comma-separated counts per community. Serialising a
//! parsed config reproduces the canonical text byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{tensor_two_param, two_param_from_degree, ModelParams, SymTensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub r: usize,
    pub pi: Vec<f64>,
    pub layers: Vec<LayerConfig>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub q: usize,
    pub tensor: TensorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorSpec {
    Entries(BTreeMap<String, f64>),
    TwoParam { a: f64, b: f64 },
}

impl LayerConfig {
    pub fn to_tensor(&self, r: usize) -> Result<SymTensor> {
        match &self.tensor {
            TensorSpec::TwoParam { a, b } => tensor_two_param(r, self.q, *a, *b),
            TensorSpec::Entries(map) => {
                let mut t = SymTensor::zeros(self.q, r)?;
                for (k, &v) in map {
                    let comp = parse_key(k)?;
                    t.set(&comp, v)?;
                }
                Ok(t)
            }
        }
    }

    pub fn from_tensor(t: &SymTensor) -> Self {
        let map = t.entries().map(|(k, v)| (format_key(k), v)).collect();
        Self {
            q: t.q(),
            tensor: TensorSpec::Entries(map),
        }
    }
}

fn parse_key(k: &str) -> Result<Vec<u32>> {
    k.split(',')
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .map_err(|e| Error::InvalidTensor(format!("bad composition key {k:?}: {e}")))
        })
        .collect()
}

fn format_key(k: &[u32]) -> String {
    k.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ModelConfig {
    pub fn to_params(&self) -> Result<ModelParams> {
        ModelParams::new(self.pi.clone(), &self.tensors()?, self.weights.clone())
    }

    /// Builds parameters without the average-degree lower bound.
    pub fn to_params_relaxed(&self) -> Result<ModelParams> {
        ModelParams::new_relaxed(self.pi.clone(), &self.tensors()?, self.weights.clone())
    }

    fn tensors(&self) -> Result<Vec<SymTensor>> {
        if self.pi.len() != self.r {
            return Err(Error::InvalidModel(format!(
                "pi has {} entries, r = {}",
                self.pi.len(),
                self.r
            )));
        }
        self.layers.iter().map(|l| l.to_tensor(self.r)).collect()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Canonical text form (pretty JSON, trailing newline).
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serialises");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    /// Balanced `r`-block model from `(q, d, mu)` per layer using
    /// two-parameter tensors.
    pub fn balanced(r: usize, layers: &[(usize, f64, f64)], weights: Vec<f64>) -> Self {
        let layers = layers
            .iter()
            .map(|&(q, d, mu)| {
                let (a, b) = two_param_from_degree(r, q, d, mu);
                LayerConfig {
                    q,
                    tensor: TensorSpec::TwoParam { a, b },
                }
            })
            .collect();
        Self {
            r,
            pi: vec![1.0 / r as f64; r],
            layers,
            weights,
        }
    }

    /// Two balanced blocks with a graph layer `(q=2, d=2, mu=1)` and a
    /// 4-uniform layer `(q=4, d=4, mu=1)`, weighted by `mu/d`. Both layers
    /// are individually below the detection threshold.
    pub fn two_layer_demo() -> Self {
        Self::balanced(2, &[(2, 2.0, 1.0), (4, 4.0, 1.0)], vec![0.5, 0.25])
    }
}
