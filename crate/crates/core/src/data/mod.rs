//! Datasets, feature masks, synthetic benchmark generation and partitioning.

mod benchmark;
mod csv_io;
mod partition;

pub use benchmark::{generate_benchmark, BenchmarkConfig, GroundTruth};
pub use csv_io::{load_csv, write_csv};
pub use partition::{partition, PartitionRatios, PartitionedDataset, RegressionProblem};

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("invalid benchmark config: {0}")]
    InvalidConfig(String),
    #[error("invalid partition ratios: {0}")]
    InvalidRatios(String),
    #[error("mask length {mask} does not match feature count {features}")]
    LengthMismatch { mask: usize, features: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    ParseError {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("target column `{0}` not found in header")]
    MissingTarget(String),
    #[error("non-numeric cell `{value}` at row {row}, column {column}")]
    NonNumericCell {
        row: usize,
        column: usize,
        value: String,
    },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

/// Observation matrix plus target vector.
///
/// Rows are observations, columns are features. Values are immutable once
/// constructed and always finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: DMatrix<f64>,
    target: DVector<f64>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: DMatrix<f64>,
        target: DVector<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self, DataError> {
        if features.ncols() != feature_names.len() {
            return Err(DataError::InvalidDataset(format!(
                "{} columns but {} feature names",
                features.ncols(),
                feature_names.len()
            )));
        }
        if features.nrows() != target.len() {
            return Err(DataError::InvalidDataset(format!(
                "{} rows but target of length {}",
                features.nrows(),
                target.len()
            )));
        }
        if features.iter().chain(target.iter()).any(|v| !v.is_finite()) {
            return Err(DataError::InvalidDataset("non-finite value".into()));
        }
        Ok(Self {
            features,
            target,
            feature_names,
        })
    }

    /// Builds a dataset with generated names `x0, x1, ...`.
    pub fn with_default_names(
        features: DMatrix<f64>,
        target: DVector<f64>,
    ) -> Result<Self, DataError> {
        let names = default_feature_names(features.ncols());
        Self::new(features, target, names)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let features = self.features.select_rows(rows.iter());
        let target = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.target[r]));
        Dataset {
            features,
            target,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Subset of columns, in the given order. Row order and target are kept.
    pub fn select_columns(&self, columns: &[usize]) -> Dataset {
        let features = if columns.is_empty() {
            DMatrix::zeros(self.n_rows(), 0)
        } else {
            self.features.select_columns(columns.iter())
        };
        Dataset {
            features,
            target: self.target.clone(),
            feature_names: columns
                .iter()
                .map(|&c| self.feature_names[c].clone())
                .collect(),
        }
    }
}

pub fn default_feature_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

/// Binary feature-subset vector; bit `i` set means feature `i` enters the model.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct FeatureMask {
    bits: Vec<bool>,
}

impl FeatureMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn all(n: usize) -> Self {
        Self { bits: vec![true; n] }
    }

    pub fn none(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Self {
        let mut bits = vec![false; n];
        for &i in indices {
            bits[i] = true;
        }
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_selected(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn selected(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for FeatureMask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid mask character `{other}`")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(FeatureMask::new)
    }
}

impl From<FeatureMask> for String {
    fn from(mask: FeatureMask) -> Self {
        mask.to_string()
    }
}

impl TryFrom<String> for FeatureMask {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// Keeps exactly the columns whose mask bit is set.
pub fn project_features(dataset: &Dataset, mask: &FeatureMask) -> Result<Dataset, DataError> {
    if mask.len() != dataset.n_features() {
        return Err(DataError::LengthMismatch {
            mask: mask.len(),
            features: dataset.n_features(),
        });
    }
    Ok(dataset.select_columns(&mask.selected()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> Dataset {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        Dataset::with_default_names(x, DVector::from_vec(vec![10.0, 20.0])).unwrap()
    }

    #[test]
    fn projection_examples() {
        let d = toy();
        assert_eq!(project_features(&d, &FeatureMask::all(3)).unwrap(), d);

        let empty = project_features(&d, &FeatureMask::none(3)).unwrap();
        assert_eq!(empty.n_features(), 0);
        assert_eq!(empty.n_rows(), 2);
        assert_eq!(empty.target(), d.target());

        let p = project_features(&d, &"101".parse().unwrap()).unwrap();
        assert_eq!(p.feature_names(), &["x0".to_string(), "x2".to_string()]);
        assert_eq!(p.features()[(1, 1)], 6.0);

        assert_eq!(
            project_features(&d, &FeatureMask::all(2)),
            Err(DataError::LengthMismatch { mask: 2, features: 3 })
        );
    }

    #[test]
    fn rejects_non_finite_and_shape_errors() {
        let x = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(Dataset::with_default_names(x, DVector::from_vec(vec![1.0])).is_err());
        let x = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(Dataset::with_default_names(x, DVector::from_vec(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn mask_string_form() {
        let m: FeatureMask = "0110".parse().unwrap();
        assert_eq!(m.selected(), vec![1, 2]);
        assert_eq!(m.to_string(), "0110");
        assert!("01x".parse::<FeatureMask>().is_err());
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, "\"0110\"");
    }

    proptest! {
        #[test]
        fn projecting_twice_with_all_ones_is_a_no_op(bits in proptest::collection::vec(any::<bool>(), 3)) {
            let d = toy();
            let mask = FeatureMask::new(bits);
            let once = project_features(&d, &mask).unwrap();
            let twice = project_features(&once, &FeatureMask::all(once.n_features())).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
