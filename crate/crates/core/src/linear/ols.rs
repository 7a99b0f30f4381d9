use nalgebra::{DMatrix, DVector};

use super::{LinearError, LinearModel};
use crate::data::default_feature_names;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Least-squares fit plus its numerical-rank diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct OlsFit {
    pub model: LinearModel,
    /// Rank of the centered design matrix.
    pub rank: usize,
    /// Set when the minimum-norm solution was returned.
    pub rank_deficient: bool,
}

/// Ordinary least squares with intercept, solved by SVD.
///
/// The intercept is handled by centering, which is equivalent to appending a
/// column of ones: the augmented design has full rank iff the centered one
/// does. Rank-deficient designs get the minimum-norm weight vector and the
/// `rank_deficient` flag instead of an error.
pub fn fit_ols(features: &DMatrix<f64>, target: &DVector<f64>) -> Result<OlsFit, LinearError> {
    let (n, d) = features.shape();
    if n != target.len() {
        return Err(LinearError::ShapeMismatch(format!(
            "{n} rows but target of length {}",
            target.len()
        )));
    }
    if n == 0 {
        return Err(LinearError::TooFewRows { needed: 1, got: 0 });
    }
    let y_mean = target.mean();
    if d == 0 {
        return Ok(OlsFit {
            model: LinearModel::constant(y_mean),
            rank: 0,
            rank_deficient: false,
        });
    }

    let col_means: Vec<f64> = features.column_iter().map(|c| c.mean()).collect();
    let mut centered = features.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-col_means[j]);
    }
    let y_centered = target.add_scalar(-y_mean);

    let svd = centered.svd(true, true);
    let u = svd.u.as_ref().expect("u computed");
    let v_t = svd.v_t.as_ref().expect("v_t computed");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.max();
    let cutoff = RANK_TOLERANCE * sigma_max;

    // w = V Σ⁺ Uᵀ y
    let uty = u.tr_mul(&y_centered);
    let mut weights = DVector::zeros(d);
    let mut rank = 0;
    for (k, &s) in sigma.iter().enumerate() {
        if sigma_max > 0.0 && s > cutoff {
            rank += 1;
            weights.axpy(uty[k] / s, &v_t.row(k).transpose(), 1.0);
        }
    }
    let intercept = y_mean
        - weights
            .iter()
            .zip(&col_means)
            .map(|(w, m)| w * m)
            .sum::<f64>();

    Ok(OlsFit {
        model: LinearModel {
            weights: weights.as_slice().to_vec(),
            intercept,
            feature_names: default_feature_names(d),
        },
        rank,
        rank_deficient: rank < d,
    })
}

/// Like [`fit_ols`] but refuses rank-deficient designs.
pub fn fit_ols_full_rank(
    features: &DMatrix<f64>,
    target: &DVector<f64>,
) -> Result<LinearModel, LinearError> {
    let fit = fit_ols(features, target)?;
    if fit.rank_deficient {
        return Err(LinearError::RankDeficient {
            rank: fit.rank,
            columns: features.ncols(),
        });
    }
    Ok(fit.model)
}
