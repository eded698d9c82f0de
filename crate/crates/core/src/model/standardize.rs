use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-feature z-scoring with training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Columns with zero training variance; their std is forced to 1.
    pub flagged: Vec<usize>,
}

impl Standardizer {
    /// Column means and population standard deviations of an `n x k` matrix.
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "standardizer needs at least 2 rows, got {n}"
            )));
        }
        let mut means = Vec::with_capacity(x.ncols());
        let mut stds = Vec::with_capacity(x.ncols());
        let mut flagged = Vec::new();
        for (j, col) in x.column_iter().enumerate() {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            means.push(mean);
            if std > 0.0 && std.is_finite() {
                stds.push(std);
            } else {
                stds.push(1.0);
                flagged.push(j);
            }
        }
        Ok(Standardizer { means, stds, flagged })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.len() {
            return Err(Error::shape(format!("{} features", self.len()), format!("{} features", x.len())));
        }
        Ok(x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn apply_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.len() {
            return Err(Error::shape(format!("{} columns", self.len()), format!("{} columns", x.ncols())));
        }
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }
}
