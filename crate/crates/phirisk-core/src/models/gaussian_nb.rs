//! Gaussian naive Bayes for real-valued features.

use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;

use super::bernoulli_nb::softmax2;
use super::{check_training_input, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbParams {
    /// Every class variance is floored by this portion of the largest
    /// per-feature variance of the training data.
    pub var_smoothing: f64,
}

impl Default for GaussianNbParams {
    fn default() -> Self {
        GaussianNbParams {
            var_smoothing: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    params: GaussianNbParams,
    log_prior: [f64; 2],
    mean: [Vec<f64>; 2],
    /// Floored variances; always >= epsilon > 0.
    var: [Vec<f64>; 2],
    epsilon: f64,
    /// Per-class log-likelihood of the all-zero row, so sparse rows only pay
    /// for their nonzero entries.
    zero_row_score: [f64; 2],
}

/// Fits per-class feature means and (population) variances with the variance
/// floor, priors from class frequencies.
pub fn train_gaussian_nb(
    x: &FeatureMatrix,
    y: &[u8],
    params: &GaussianNbParams,
) -> Result<GaussianNbModel, ModelError> {
    check_training_input(x, y)?;
    let d = x.n_cols();
    let n = x.n_rows();

    let mut class_count = [0f64; 2];
    let mut sum = [vec![0f64; d], vec![0f64; d]];
    let mut sum_sq = [vec![0f64; d], vec![0f64; d]];
    let mut total_sum = vec![0f64; d];
    let mut total_sum_sq = vec![0f64; d];
    for i in 0..n {
        let c = usize::from(y[i] != 0);
        class_count[c] += 1.0;
        x.for_each_nonzero(i, |j, v| {
            sum[c][j] += v;
            sum_sq[c][j] += v * v;
            total_sum[j] += v;
            total_sum_sq[j] += v * v;
        });
    }

    // epsilon = var_smoothing * max_j Var(feature j over all samples);
    // falls back to the absolute smoothing value when every feature is
    // constant, keeping the floor positive.
    let mut max_total_var = 0f64;
    for j in 0..d {
        let mean = total_sum[j] / n as f64;
        let var = (total_sum_sq[j] / n as f64 - mean * mean).max(0.0);
        max_total_var = max_total_var.max(var);
    }
    let mut epsilon = params.var_smoothing * max_total_var;
    if epsilon.is_nan() || epsilon <= 0.0 {
        epsilon = params.var_smoothing;
    }

    let log_prior = [
        (class_count[0] / n as f64).ln(),
        (class_count[1] / n as f64).ln(),
    ];
    let mut mean = [vec![0f64; d], vec![0f64; d]];
    let mut var = [vec![0f64; d], vec![0f64; d]];
    let mut zero_row_score = [0f64; 2];
    for c in 0..2 {
        for j in 0..d {
            let m = sum[c][j] / class_count[c];
            let v = (sum_sq[c][j] / class_count[c] - m * m).max(0.0) + epsilon;
            mean[c][j] = m;
            var[c][j] = v;
            zero_row_score[c] += log_normal_density(0.0, m, v);
        }
        zero_row_score[c] += log_prior[c];
    }

    Ok(GaussianNbModel {
        params: *params,
        log_prior,
        mean,
        var,
        epsilon,
        zero_row_score,
    })
}

fn log_normal_density(x: f64, mean: f64, var: f64) -> f64 {
    let diff = x - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + diff * diff / var)
}

impl GaussianNbModel {
    pub fn n_features(&self) -> usize {
        self.mean[0].len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn class_mean(&self, class: usize, feature: usize) -> f64 {
        self.mean[class][feature]
    }

    pub fn class_var(&self, class: usize, feature: usize) -> f64 {
        self.var[class][feature]
    }

    fn joint_log_likelihood(&self, x: &FeatureMatrix, row: usize) -> [f64; 2] {
        let mut score = self.zero_row_score;
        x.for_each_nonzero(row, |j, v| {
            for c in 0..2 {
                score[c] += log_normal_density(v, self.mean[c][j], self.var[c][j])
                    - log_normal_density(0.0, self.mean[c][j], self.var[c][j]);
            }
        });
        score
    }

    /// Class-1 log-odds per row.
    pub fn decision_scores(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows())
            .map(|i| {
                let s = self.joint_log_likelihood(x, i);
                s[1] - s[0]
            })
            .collect()
    }

    /// Normalized class posteriors per row.
    pub fn posteriors(&self, x: &FeatureMatrix) -> Vec<[f64; 2]> {
        (0..x.n_rows())
            .map(|i| softmax2(self.joint_log_likelihood(x, i)))
            .collect()
    }
}
