use nalgebra::DVector;

use crate::error::{Error, Result};

/// An n×p batch of observations, stored row-wise.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    rows: Vec<DVector<f64>>,
    dim: usize,
}

impl DataMatrix {
    /// Builds from observation rows; requires at least one row, a common
    /// dimension, and finite entries.
    pub fn from_rows(rows: Vec<DVector<f64>>) -> Result<Self> {
        let dim = match rows.first() {
            Some(r) if r.len() > 0 => r.len(),
            _ => return Err(Error::Data("empty dataset".to_string())),
        };
        for (j, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Data(format!(
                    "row {} has {} entries, expected {dim}",
                    j + 1,
                    row.len()
                )));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::Data(format!("row {} has a non-finite entry", j + 1)));
            }
        }
        Ok(Self { rows, dim })
    }

    pub fn from_vecs(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows.into_iter().map(DVector::from_vec).collect())
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, j: usize) -> &DVector<f64> {
        &self.rows[j]
    }

    pub fn rows(&self) -> &[DVector<f64>] {
        &self.rows
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DVector<f64>> {
        self.rows.iter()
    }
}
