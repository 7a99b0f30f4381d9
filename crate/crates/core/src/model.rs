//! Fitted regressors as exchanged between network nodes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::ForestModel;
use crate::linear::LinearModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model expects input column {column}, but only {available} inputs were given")]
    InputMismatch { column: usize, available: usize },
    #[error("prediction failed: {0}")]
    Prediction(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Model {
    Linear(LinearModel),
    Forest(ForestModel),
}

impl Model {
    /// Predicts from a matrix holding exactly the model's own columns.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>, ModelError> {
        match self {
            Model::Linear(m) => m.predict(x).map_err(|e| ModelError::Prediction(e.to_string())),
            Model::Forest(m) => m.predict(x).map_err(|e| ModelError::Prediction(e.to_string())),
        }
    }
}

/// Settings chosen by a nested tuning network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningSummary {
    /// `[sample_ratio, feature_ratio, n_trees]`.
    pub parameters: Vec<f64>,
    pub evaluations: usize,
    /// Set when the inner search stopped on its budget before finishing.
    pub budget_exhausted: bool,
}

/// A fitted model with its errors on the data partitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelWithQuality {
    pub model: Model,
    /// Indices of the model's inputs in the originating dataset.
    pub columns: Vec<usize>,
    pub n_features: usize,
    pub train_mae: f64,
    pub validation_mae: f64,
    /// Filled in once, after search has finished.
    pub test_mae: Option<f64>,
    pub rank_deficient: bool,
    pub tuning: Option<TuningSummary>,
}

impl ModelWithQuality {
    /// Predicts from rows of the full input space, picking the model's columns.
    pub fn predict_full(&self, x: &DMatrix<f64>) -> Result<DVector<f64>, ModelError> {
        if let Some(&column) = self.columns.iter().find(|&&c| c >= x.ncols()) {
            return Err(ModelError::InputMismatch {
                column,
                available: x.ncols(),
            });
        }
        let projected = if self.columns.is_empty() {
            DMatrix::zeros(x.nrows(), 0)
        } else {
            x.select_columns(self.columns.iter())
        };
        self.model.predict(&projected)
    }

    /// Single-point prediction in the full input space.
    pub fn predict_point(&self, x: &[f64]) -> Result<f64, ModelError> {
        let row = DMatrix::from_row_slice(1, x.len(), x);
        Ok(self.predict_full(&row)?[0])
    }
}
