use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, FeatureMask};
use crate::rng;

/// Train / validation / test fractions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for PartitionRatios {
    fn default() -> Self {
        Self {
            train: 0.25,
            validation: 0.25,
            test: 0.5,
        }
    }
}

impl PartitionRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Self {
        Self {
            train,
            validation,
            test,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(DataError::InvalidRatios(format!(
                "ratios must be positive, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DataError::InvalidRatios(format!(
                "ratios must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }

    /// Partition sizes for `n` rows by the largest-remainder rule.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        let raw = [self.train, self.validation, self.test].map(|r| r * n as f64);
        let mut sizes = raw.map(|r| r.floor() as usize);
        let assigned: usize = sizes.iter().sum();
        let mut order = [0usize, 1, 2];
        // Stable sort: equal remainders go to the earlier partition.
        order.sort_by(|&a, &b| {
            let ra = raw[a] - raw[a].floor();
            let rb = raw[b] - raw[b].floor();
            rb.partial_cmp(&ra).unwrap()
        });
        for &i in order.iter().take(n.saturating_sub(assigned)) {
            sizes[i] += 1;
        }
        sizes
    }
}

/// A dataset split into disjoint train, validation and test rows.
///
/// Train and validation data are materialized once. Test rows are only
/// handed out through [`PartitionedDataset::test`], which counts every
/// access so search code can be checked for test-set leakage.
#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "PartitionRecord", into = "PartitionRecord")]
pub struct PartitionedDataset {
    base: Dataset,
    train_rows: Vec<usize>,
    validation_rows: Vec<usize>,
    test_rows: Vec<usize>,
    train: Dataset,
    validation: Dataset,
    test_reads: AtomicUsize,
}

#[derive(Serialize, Deserialize)]
struct PartitionRecord {
    base: Dataset,
    train_rows: Vec<usize>,
    validation_rows: Vec<usize>,
    test_rows: Vec<usize>,
}

impl TryFrom<PartitionRecord> for PartitionedDataset {
    type Error = DataError;

    fn try_from(r: PartitionRecord) -> Result<Self, Self::Error> {
        Self::from_rows(r.base, r.train_rows, r.validation_rows, r.test_rows)
    }
}

impl From<PartitionedDataset> for PartitionRecord {
    fn from(p: PartitionedDataset) -> Self {
        Self {
            base: p.base,
            train_rows: p.train_rows,
            validation_rows: p.validation_rows,
            test_rows: p.test_rows,
        }
    }
}

impl Clone for PartitionedDataset {
    fn clone(&self) -> Self {
        Self::from_rows(
            self.base.clone(),
            self.train_rows.clone(),
            self.validation_rows.clone(),
            self.test_rows.clone(),
        )
        .expect("cloned partition is valid")
    }
}

impl PartialEq for PartitionedDataset {
    fn eq(&self, other: &Self) -> bool {
        self.base == other.base
            && self.train_rows == other.train_rows
            && self.validation_rows == other.validation_rows
            && self.test_rows == other.test_rows
    }
}

impl PartitionedDataset {
    /// Builds a partition from explicit row lists.
    pub fn from_rows(
        base: Dataset,
        train_rows: Vec<usize>,
        validation_rows: Vec<usize>,
        test_rows: Vec<usize>,
    ) -> Result<Self, DataError> {
        let n = base.n_rows();
        let mut seen = vec![false; n];
        for &r in train_rows.iter().chain(&validation_rows).chain(&test_rows) {
            if r >= n || seen[r] {
                return Err(DataError::InvalidRatios(format!(
                    "row {r} out of range or assigned twice"
                )));
            }
            seen[r] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(DataError::InvalidRatios("partitions do not cover all rows".into()));
        }
        if train_rows.is_empty() || validation_rows.is_empty() || test_rows.is_empty() {
            return Err(DataError::InvalidRatios(format!(
                "{n} rows leave an empty partition"
            )));
        }
        let train = base.select_rows(&train_rows);
        let validation = base.select_rows(&validation_rows);
        Ok(Self {
            base,
            train_rows,
            validation_rows,
            test_rows,
            train,
            validation,
            test_reads: AtomicUsize::new(0),
        })
    }

    pub fn base(&self) -> &Dataset {
        &self.base
    }

    pub fn n_features(&self) -> usize {
        self.base.n_features()
    }

    pub fn train_rows(&self) -> &[usize] {
        &self.train_rows
    }

    pub fn validation_rows(&self) -> &[usize] {
        &self.validation_rows
    }

    pub fn test_rows(&self) -> &[usize] {
        &self.test_rows
    }

    pub fn train(&self) -> &Dataset {
        &self.train
    }

    pub fn validation(&self) -> &Dataset {
        &self.validation
    }

    /// Test rows. Every call is counted.
    pub fn test(&self) -> Dataset {
        self.test_reads.fetch_add(1, Ordering::Relaxed);
        self.base.select_rows(&self.test_rows)
    }

    /// Number of times test rows have been read.
    pub fn test_reads(&self) -> usize {
        self.test_reads.load(Ordering::Relaxed)
    }

    /// Regression problem restricted to the selected columns. Never carries
    /// test rows.
    pub fn problem(&self, mask: &FeatureMask) -> Result<RegressionProblem, DataError> {
        if mask.len() != self.n_features() {
            return Err(DataError::LengthMismatch {
                mask: mask.len(),
                features: self.n_features(),
            });
        }
        let columns = mask.selected();
        Ok(RegressionProblem {
            train: self.train().select_columns(&columns),
            validation: self.validation().select_columns(&columns),
            columns,
            parameters: None,
        })
    }
}

/// Projected train/validation data handed from an orchestrator to a model node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionProblem {
    pub train: Dataset,
    pub validation: Dataset,
    /// Column indices into the originating dataset.
    pub columns: Vec<usize>,
    /// Optional algorithm hyperparameters attached by a tuning node.
    pub parameters: Option<Vec<f64>>,
}

/// Shuffles rows by seed and assigns contiguous blocks by ratio.
pub fn partition(
    dataset: &Dataset,
    ratios: PartitionRatios,
    seed: u64,
) -> Result<PartitionedDataset, DataError> {
    ratios.validate()?;
    let n = dataset.n_rows();
    let [n_train, n_validation, _] = ratios.sizes(n);
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng::named_stream(seed, "partition"));
    let test = rows.split_off(n_train + n_validation);
    let validation = rows.split_off(n_train);
    PartitionedDataset::from_rows(dataset.clone(), rows, validation, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn rows(n: usize) -> Dataset {
        let x = DMatrix::from_fn(n, 2, |i, j| (i * 2 + j) as f64);
        Dataset::with_default_names(x, DVector::from_fn(n, |i, _| i as f64)).unwrap()
    }

    #[test]
    fn sizes_follow_largest_remainder() {
        assert_eq!(PartitionRatios::new(0.6, 0.2, 0.2).sizes(10), [6, 2, 2]);
        assert_eq!(PartitionRatios::new(0.5, 0.3, 0.2).sizes(10), [5, 3, 2]);
        assert_eq!(PartitionRatios::new(0.5, 0.25, 0.25).sizes(1000), [500, 250, 250]);
        assert_eq!(PartitionRatios::new(0.4, 0.3, 0.3).sizes(11), [5, 3, 3]);
    }

    #[test]
    fn partition_examples() {
        let p = partition(&rows(10), PartitionRatios::new(0.6, 0.2, 0.2), 1).unwrap();
        assert_eq!(
            (p.train_rows().len(), p.validation_rows().len(), p.test_rows().len()),
            (6, 2, 2)
        );
        let p = partition(&rows(10), PartitionRatios::new(0.5, 0.3, 0.2), 1).unwrap();
        assert_eq!(
            (p.train_rows().len(), p.validation_rows().len(), p.test_rows().len()),
            (5, 3, 2)
        );
        assert!(matches!(
            partition(&rows(10), PartitionRatios::new(0.5, 0.2, 0.2), 1),
            Err(DataError::InvalidRatios(_))
        ));
        assert!(matches!(
            partition(&rows(2), PartitionRatios::new(0.5, 0.25, 0.25), 1),
            Err(DataError::InvalidRatios(_))
        ));
    }

    #[test]
    fn test_reads_are_counted() {
        let p = partition(&rows(12), PartitionRatios::default(), 3).unwrap();
        let _ = p.train();
        let _ = p.problem(&FeatureMask::all(2)).unwrap();
        assert_eq!(p.test_reads(), 0);
        let t = p.test();
        assert_eq!(t.n_rows(), p.test_rows().len());
        assert_eq!(p.test_reads(), 1);
    }

    #[test]
    fn deterministic_and_serializable() {
        let a = partition(&rows(20), PartitionRatios::default(), 5).unwrap();
        let b = partition(&rows(20), PartitionRatios::default(), 5).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        let c: PartitionedDataset = serde_json::from_str(&json).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.train(), c.train());
    }

    proptest! {
        #[test]
        fn partitions_are_disjoint_and_cover(
            n in 3usize..300,
            a in 0.05f64..1.0,
            b in 0.05f64..1.0,
            c in 0.05f64..1.0,
            seed in any::<u64>(),
        ) {
            let total = a + b + c;
            let ratios = PartitionRatios::new(a / total, b / total, 1.0 - a / total - b / total);
            let sizes = ratios.sizes(n);
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            match partition(&rows(n), ratios, seed) {
                Ok(p) => {
                    let mut all: Vec<usize> = p.train_rows().iter()
                        .chain(p.validation_rows()).chain(p.test_rows()).copied().collect();
                    all.sort_unstable();
                    prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                }
                Err(DataError::InvalidRatios(_)) => prop_assert!(sizes.contains(&0)),
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}
