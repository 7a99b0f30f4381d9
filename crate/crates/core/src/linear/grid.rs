use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_elastic_net, mae, ElasticNetConfig, LinearError, LinearModel};
use crate::data::PartitionedDataset;

/// λ ∈ {10^k : k = -4, -3.75, ..., 2}.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=24).map(|i| 10f64.powf(-4.0 + 0.25 * i as f64)).collect()
}

pub fn default_p_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lambda: f64,
    pub p: f64,
    pub validation_mae: Option<f64>,
    pub n_selected: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    /// One entry per (λ, p) pair, λ-major in grid order.
    pub cells: Vec<GridCell>,
    pub best_index: usize,
    pub best_model: LinearModel,
    /// Test MAE of the best model only.
    pub test_mae: f64,
}

impl GridSearchResult {
    pub fn best(&self) -> &GridCell {
        &self.cells[self.best_index]
    }

    /// One CSV row per cell.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["lambda", "p", "validation_mae", "n_selected", "converged", "error"])
            .expect("in-memory write");
        for c in &self.cells {
            w.write_record([
                c.lambda.to_string(),
                c.p.to_string(),
                c.validation_mae.map(|v| v.to_string()).unwrap_or_default(),
                c.n_selected.to_string(),
                c.converged.to_string(),
                c.error.clone().unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

fn fit_cell(
    data: &PartitionedDataset,
    lambda: f64,
    p: f64,
) -> Result<(GridCell, LinearModel), LinearError> {
    let train = data.train();
    let validation = data.validation();
    let fit = fit_elastic_net(train.features(), train.target(), &ElasticNetConfig::new(lambda, p))?;
    let pred = fit.model.predict(validation.features())?;
    let validation_mae = mae(pred.as_slice(), validation.target().as_slice())?;
    let mut model = fit.model;
    model.feature_names = train.feature_names().to_vec();
    Ok((
        GridCell {
            lambda,
            p,
            validation_mae: Some(validation_mae),
            n_selected: model.selected_count(),
            converged: fit.converged,
            error: None,
        },
        model,
    ))
}

/// Fits every (λ, p) cell on train and scores it on validation.
///
/// Best cell: lowest validation MAE, then fewer selected features, then
/// smaller λ, then grid order. Failed cells are recorded and skipped.
pub fn grid_search_elastic_net(
    data: &PartitionedDataset,
    lambda_grid: &[f64],
    p_grid: &[f64],
) -> Result<GridSearchResult, LinearError> {
    if lambda_grid.is_empty() || p_grid.is_empty() {
        return Err(LinearError::EmptyInput);
    }
    let pairs: Vec<(f64, f64)> = lambda_grid
        .iter()
        .flat_map(|&l| p_grid.iter().map(move |&p| (l, p)))
        .collect();
    let fitted: Vec<Result<(GridCell, LinearModel), (f64, f64, LinearError)>> = pairs
        .par_iter()
        .map(|&(l, p)| fit_cell(data, l, p).map_err(|e| (l, p, e)))
        .collect();

    let mut cells = Vec::with_capacity(fitted.len());
    let mut models = Vec::with_capacity(fitted.len());
    for outcome in fitted {
        match outcome {
            Ok((cell, model)) => {
                cells.push(cell);
                models.push(Some(model));
            }
            Err((lambda, p, e)) => {
                cells.push(GridCell {
                    lambda,
                    p,
                    validation_mae: None,
                    n_selected: 0,
                    converged: false,
                    error: Some(e.to_string()),
                });
                models.push(None);
            }
        }
    }

    let best_index = (0..cells.len())
        .filter(|&i| cells[i].validation_mae.is_some())
        .min_by(|&a, &b| {
            let (ca, cb) = (&cells[a], &cells[b]);
            ca.validation_mae
                .partial_cmp(&cb.validation_mae)
                .unwrap()
                .then(ca.n_selected.cmp(&cb.n_selected))
                .then(ca.lambda.partial_cmp(&cb.lambda).unwrap())
        })
        .ok_or(LinearError::EmptyInput)?;
    let best_model = models[best_index].take().expect("successful cell has a model");

    let test = data.test();
    let pred = best_model.predict(test.features())?;
    let test_mae = mae(pred.as_slice(), test.target().as_slice())?;

    Ok(GridSearchResult {
        cells,
        best_index,
        best_model,
        test_mae,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_benchmark, partition, BenchmarkConfig, PartitionRatios};
    use crate::linear::{fit_ols, lasso_null_lambda};
    use approx::assert_abs_diff_eq;

    fn small(seed: u64) -> PartitionedDataset {
        let cfg = BenchmarkConfig {
            n_observations: 200,
            n_features: 10,
            n_relevant: 3,
            ..Default::default()
        };
        let (d, _) = generate_benchmark(&cfg, seed).unwrap();
        partition(&d, PartitionRatios::new(0.5, 0.25, 0.25), seed).unwrap()
    }

    #[test]
    fn lambda_zero_cell_is_ols() {
        let data = small(1);
        let r = grid_search_elastic_net(&data, &[0.0], &[0.5]).unwrap();
        let ols = fit_ols(data.train().features(), data.train().target()).unwrap().model;
        for (a, b) in r.best_model.weights.iter().zip(&ols.weights) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-5);
        }
        assert_eq!(data.test_reads(), 1);
    }

    #[test]
    fn null_lambda_cell_selects_nothing() {
        let data = small(2);
        let null = lasso_null_lambda(data.train().features(), data.train().target(), 1.0);
        let r = grid_search_elastic_net(&data, &[0.01, null * 1.01], &[1.0]).unwrap();
        assert_eq!(r.cells[1].n_selected, 0);
        assert_eq!(r.best_index, 0);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("lambda,p,validation_mae"));
    }

    #[test]
    fn ties_prefer_fewer_features_then_smaller_lambda() {
        let data = small(3);
        // Two λ values above the null threshold give identical constant models.
        let null = lasso_null_lambda(data.train().features(), data.train().target(), 1.0);
        let r = grid_search_elastic_net(&data, &[null * 3.0, null * 2.0], &[1.0]).unwrap();
        assert_eq!(r.cells[0].validation_mae, r.cells[1].validation_mae);
        assert_eq!(r.best_index, 1);
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert_eq!(
            grid_search_elastic_net(&small(4), &[], &[1.0]),
            Err(LinearError::EmptyInput)
        );
    }

    #[test]
    fn default_grid_shape() {
        let l = default_lambda_grid();
        assert_eq!(l.len(), 25);
        assert_abs_diff_eq!(l[0], 1e-4, epsilon = 1e-18);
        assert_abs_diff_eq!(l[24], 100.0, epsilon = 1e-9);
        assert_eq!(default_p_grid().len(), 5);
    }
}
