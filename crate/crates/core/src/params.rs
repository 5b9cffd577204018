//! Externally supplied parameter sets (projection weights, edge maps,
//! attention weights) stored as named row-major arrays with a shape header.
//!
//! File layout:
//!
//! ```json
//! { "arrays": { "V": { "shape": [8, 8], "data": [ ...64 reals... ] },
//!               "b": { "shape": [8], "data": [ ... ] } } }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl ParamArray {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows()).flat_map(|r| m.row(r).iter().copied().collect::<Vec<_>>()).collect();
        Self { shape: vec![m.nrows(), m.ncols()], data }
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        Self { shape: vec![v.len()], data: v.iter().copied().collect() }
    }

    fn check(&self, name: &str) -> Result<()> {
        let n: usize = self.shape.iter().product();
        if n != self.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "array '{name}': shape {:?} holds {n} values, data has {}",
                self.shape,
                self.data.len()
            )));
        }
        if let Some(bad) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::ConfigInvalid(format!("array '{name}': non-finite value at {bad}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub arrays: BTreeMap<String, ParamArray>,
}

impl ParamSet {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let set: ParamSet = serde_json::from_str(s)?;
        for (name, a) in &set.arrays {
            a.check(name)?;
        }
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn insert(&mut self, name: impl Into<String>, array: ParamArray) {
        self.arrays.insert(name.into(), array);
    }

    fn get(&self, name: &str) -> Result<&ParamArray> {
        self.arrays.get(name).ok_or_else(|| Error::ConfigInvalid(format!("missing parameter array '{name}'")))
    }

    pub fn matrix(&self, name: &str) -> Result<DMatrix<f64>> {
        let a = self.get(name)?;
        match a.shape.as_slice() {
            [r, c] => Ok(DMatrix::from_row_slice(*r, *c, &a.data)),
            s => Err(Error::ShapeMismatch(format!("array '{name}' has shape {s:?}, expected 2-D"))),
        }
    }

    pub fn vector(&self, name: &str) -> Result<DVector<f64>> {
        let a = self.get(name)?;
        match a.shape.as_slice() {
            [n] => Ok(DVector::from_column_slice(&a.data[..*n])),
            s => Err(Error::ShapeMismatch(format!("array '{name}' has shape {s:?}, expected 1-D"))),
        }
    }
}

/// Affine layer `y = act(W x + b)` with `W` stored out x in.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub relu: bool,
}

impl Linear {
    pub fn new(weight: DMatrix<f64>, bias: DVector<f64>, relu: bool) -> Result<Self> {
        if weight.nrows() != bias.len() {
            return Err(Error::ShapeMismatch(format!(
                "weight has {} rows, bias has {} entries",
                weight.nrows(),
                bias.len()
            )));
        }
        Ok(Self { weight, bias, relu })
    }

    pub fn identity(dim: usize) -> Self {
        Self { weight: DMatrix::identity(dim, dim), bias: DVector::zeros(dim), relu: false }
    }

    /// Loads `<prefix>.weight` and `<prefix>.bias`.
    pub fn from_params(set: &ParamSet, prefix: &str, relu: bool) -> Result<Self> {
        Self::new(set.matrix(&format!("{prefix}.weight"))?, set.vector(&format!("{prefix}.bias"))?, relu)
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.in_dim(), "linear layer input width");
        (0..self.out_dim())
            .map(|r| {
                let v = self.weight.row(r).iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.bias[r];
                if self.relu {
                    v.max(0.0)
                } else {
                    v
                }
            })
            .collect()
    }
}
