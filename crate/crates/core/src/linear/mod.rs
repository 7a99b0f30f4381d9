//! Linear regression: least squares, elastic net, grid search and error metrics.

mod elastic_net;
mod grid;
mod ols;

pub use elastic_net::{
    fit_elastic_net, lasso_null_lambda, soft_threshold, ElasticNetConfig, ElasticNetFit,
    Standardization,
};
pub use grid::{default_lambda_grid, default_p_grid, grid_search_elastic_net, GridCell, GridSearchResult};
pub use ols::{fit_ols, fit_ols_full_rank, OlsFit, RANK_TOLERANCE};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("design matrix is rank deficient (rank {rank} of {columns})")]
    RankDeficient { rank: usize, columns: usize },
    #[error("invalid elastic-net config: {0}")]
    InvalidConfig(String),
    #[error("lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
}

/// Fitted linear model `y = X w + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub feature_names: Vec<String>,
}

impl LinearModel {
    pub fn constant(value: f64) -> Self {
        Self {
            weights: Vec::new(),
            intercept: value,
            feature_names: Vec::new(),
        }
    }

    /// Features with a weight magnitude above `1e-10`.
    pub fn selected_count(&self) -> usize {
        self.weights.iter().filter(|w| w.abs() > 1e-10).count()
    }

    pub fn predict(&self, features: &DMatrix<f64>) -> Result<DVector<f64>, LinearError> {
        predict(self, features)
    }
}

pub fn predict(model: &LinearModel, features: &DMatrix<f64>) -> Result<DVector<f64>, LinearError> {
    if features.ncols() != model.weights.len() {
        return Err(LinearError::ShapeMismatch(format!(
            "model has {} weights, input has {} columns",
            model.weights.len(),
            features.ncols()
        )));
    }
    let w = DVector::from_column_slice(&model.weights);
    let mut out = features * w;
    out.add_scalar_mut(model.intercept);
    Ok(out)
}

/// Mean absolute error.
pub fn mae(predicted: &[f64], actual: &[f64]) -> Result<f64, LinearError> {
    if predicted.len() != actual.len() {
        return Err(LinearError::LengthMismatch(predicted.len(), actual.len()));
    }
    if predicted.is_empty() {
        return Err(LinearError::EmptyInput);
    }
    let total: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).abs())
        .sum();
    Ok(total / predicted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn predict_examples() {
        let m = LinearModel {
            weights: vec![2.0],
            intercept: 0.0,
            feature_names: vec!["x".into()],
        };
        let x = DMatrix::from_row_slice(1, 1, &[3.0]);
        assert_eq!(predict(&m, &x).unwrap().as_slice(), &[6.0]);

        let c = LinearModel::constant(5.0);
        assert_eq!(c.predict(&DMatrix::zeros(3, 0)).unwrap().as_slice(), &[5.0; 3]);

        let m = LinearModel {
            weights: vec![1.0, 1.0],
            intercept: 1.0,
            feature_names: vec!["a".into(), "b".into()],
        };
        assert_eq!(m.predict(&DMatrix::from_row_slice(1, 2, &[1.0, 1.0])).unwrap()[0], 3.0);
        assert!(matches!(
            m.predict(&DMatrix::zeros(1, 3)),
            Err(LinearError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mae(&[3.0], &[1.0]).unwrap(), 2.0);
        assert_eq!(mae(&[1.0], &[1.0, 2.0]), Err(LinearError::LengthMismatch(1, 2)));
        assert_eq!(mae(&[], &[]), Err(LinearError::EmptyInput));
    }

    proptest! {
        #[test]
        fn mae_sign_and_shift_invariance(
            pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..40),
            shift in -1e3f64..1e3,
        ) {
            let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let base = mae(&p, &a).unwrap();
            let np: Vec<f64> = p.iter().map(|v| -v).collect();
            let na: Vec<f64> = a.iter().map(|v| -v).collect();
            prop_assert!((mae(&np, &na).unwrap() - base).abs() <= 1e-9 * (1.0 + base));
            let sp: Vec<f64> = p.iter().map(|v| v + shift).collect();
            let sa: Vec<f64> = a.iter().map(|v| v + shift).collect();
            prop_assert!((mae(&sp, &sa).unwrap() - base).abs() <= 1e-9 * (1.0 + base));
        }
    }
}
