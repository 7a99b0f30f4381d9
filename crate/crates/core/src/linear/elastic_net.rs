//! Elastic net by cyclic coordinate descent.
//!
//! Minimizes, on standardized features `Z` and centered target `y`:
//!
//! ```text
//! (1/2n) ||y - Z β||² + λ (p ||β||₁ + (1-p)/2 ||β||₂²)
//! ```
//!
//! The intercept is unpenalized and recovered after de-standardizing.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LinearError, LinearModel};
use crate::data::default_feature_names;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticNetConfig {
    /// Overall penalty strength.
    pub lambda: f64,
    /// L1 share of the penalty: 1 is the lasso, 0 is ridge.
    pub p: f64,
    /// Sweeps stop once no standardized coefficient moves by more than this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            p: 0.5,
            tolerance: 1e-7,
            max_iterations: 1000,
        }
    }
}

impl ElasticNetConfig {
    pub fn new(lambda: f64, p: f64) -> Self {
        Self {
            lambda,
            p,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), LinearError> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(LinearError::InvalidConfig(format!("lambda = {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(LinearError::InvalidConfig(format!("p = {}", self.p)));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(LinearError::InvalidConfig(
                "tolerance must be positive and max_iterations at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Column means and population standard deviations.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    /// Zero for constant columns, which are left out of the fit.
    pub scales: Vec<f64>,
}

impl Standardization {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows() as f64;
        let (means, scales) = x
            .column_iter()
            .map(|c| {
                let m = c.mean();
                let var = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
                (m, var.sqrt())
            })
            .unzip();
        Self { means, scales }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x.clone();
        for (j, mut col) in z.column_iter_mut().enumerate() {
            let s = self.scales[j];
            if s > 0.0 {
                col.apply(|v| *v = (*v - self.means[j]) / s);
            } else {
                col.fill(0.0);
            }
        }
        z
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElasticNetFit {
    pub model: LinearModel,
    /// Coefficients on the standardized scale.
    pub standardized_weights: Vec<f64>,
    pub standardization: Standardization,
    pub converged: bool,
    pub sweeps: usize,
    /// Objective at the start and after every sweep.
    pub objective_history: Vec<f64>,
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Smallest λ at which the fit is all-zero for mix `p > 0`.
pub fn lasso_null_lambda(features: &DMatrix<f64>, target: &DVector<f64>, p: f64) -> f64 {
    let z = Standardization::fit(features).apply(features);
    let y = target.add_scalar(-target.mean());
    let n = features.nrows() as f64;
    z.tr_mul(&y).amax() / (n * p)
}

fn objective(residual: &DVector<f64>, beta: &[f64], lambda: f64, p: f64) -> f64 {
    let n = residual.len() as f64;
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    residual.norm_squared() / (2.0 * n) + lambda * (p * l1 + 0.5 * (1.0 - p) * l2)
}

/// Fits the elastic net. Non-convergence within `max_iterations` is reported
/// through `converged = false`, with the last iterate kept.
pub fn fit_elastic_net(
    features: &DMatrix<f64>,
    target: &DVector<f64>,
    config: &ElasticNetConfig,
) -> Result<ElasticNetFit, LinearError> {
    config.validate()?;
    let (n, d) = features.shape();
    if n != target.len() {
        return Err(LinearError::ShapeMismatch(format!(
            "{n} rows but target of length {}",
            target.len()
        )));
    }
    if n < 2 {
        return Err(LinearError::TooFewRows { needed: 2, got: n });
    }

    let standardization = Standardization::fit(features);
    let z = standardization.apply(features);
    let y_mean = target.mean();
    let mut residual = target.add_scalar(-y_mean);
    let mut beta = vec![0.0; d];
    let nf = n as f64;
    let l1 = config.lambda * config.p;
    let shrink = 1.0 + config.lambda * (1.0 - config.p);

    let mut history = vec![objective(&residual, &beta, config.lambda, config.p)];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < config.max_iterations {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..d {
            if standardization.scales[j] == 0.0 {
                continue;
            }
            let col = z.column(j);
            // standardized columns have (1/n)||z_j||² = 1
            let rho = col.dot(&residual) / nf + beta[j];
            let updated = soft_threshold(rho, l1) / shrink;
            let delta = updated - beta[j];
            if delta != 0.0 {
                residual.axpy(-delta, &col, 1.0);
                beta[j] = updated;
                max_change = max_change.max(delta.abs());
            }
        }
        history.push(objective(&residual, &beta, config.lambda, config.p));
        if max_change < config.tolerance {
            converged = true;
            break;
        }
    }

    let weights: Vec<f64> = beta
        .iter()
        .zip(&standardization.scales)
        .map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 })
        .collect();
    let intercept = y_mean
        - weights
            .iter()
            .zip(&standardization.means)
            .map(|(w, m)| w * m)
            .sum::<f64>();

    Ok(ElasticNetFit {
        model: LinearModel {
            weights,
            intercept,
            feature_names: default_feature_names(d),
        },
        standardized_weights: beta,
        standardization,
        converged,
        sweeps,
        objective_history: history,
    })
}
