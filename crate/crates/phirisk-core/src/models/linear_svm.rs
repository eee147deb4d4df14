//! Linear SVM with squared hinge loss, trained by dual coordinate descent.
//!
//! The bias is handled by feature augmentation: every sample gets an implicit
//! constant-1 feature whose weight is the bias, which is therefore (mildly)
//! regularized along with `w` — the convention of the linear solver the
//! defaults are taken from. The primal objective is
//!
//! ```text
//! f(w, b) = 1/2 (||w||^2 + b^2) + C * sum_i max(0, 1 - y_i (w . x_i + b))^2
//! ```
//!
//! whose dual is box-constrained below only, so plain cyclic coordinate
//! descent applies.

use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;

use super::{check_training_input, signed_labels, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmParams {
    /// Hinge penalty.
    pub c: f64,
    /// Convergence threshold on the maximal projected-gradient violation.
    pub tol: f64,
    pub max_epochs: usize,
}

impl Default for LinearSvmParams {
    fn default() -> Self {
        LinearSvmParams {
            c: 1.0,
            tol: 1e-4,
            max_epochs: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    params: LinearSvmParams,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    /// Dual objective after each epoch; non-increasing by construction.
    pub objective_curve: Vec<f64>,
}

/// Trains by cyclic dual coordinate descent until the maximal
/// projected-gradient violation over an epoch drops below `tol` or
/// `max_epochs` passes complete. Non-convergence keeps the best iterate and
/// is reported through the `converged` flag, not an error.
pub fn train_linear_svm(
    x: &FeatureMatrix,
    y: &[u8],
    params: &LinearSvmParams,
) -> Result<LinearSvmModel, ModelError> {
    check_training_input(x, y)?;
    let n = x.n_rows();
    let d = x.n_cols();
    let y = signed_labels(y);
    let damping = 1.0 / (2.0 * params.c);

    // diagonal of the dual Hessian: ||x_i||^2 + 1 (bias column) + 1/(2C)
    let q_diag: Vec<f64> = (0..n).map(|i| x.row_sq_norm(i) + 1.0 + damping).collect();

    let mut alpha = vec![0f64; n];
    let mut w = vec![0f64; d]; // maintained as sum_i alpha_i y_i x_i
    let mut b = 0f64;
    let mut converged = false;
    let mut objective_curve = Vec::new();

    // visiting coordinates in a fresh (seeded, reproducible) permutation
    // each epoch converges far faster than cyclic order on data with many
    // near-duplicate rows
    let mut order: Vec<usize> = (0..n).collect();
    let mut order_rng = crate::seeding::rng_for(0x11b5_u64, "linear-svm-order", n as u64);

    for _epoch in 0..params.max_epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut order_rng);
        let mut max_violation = 0f64;
        for &i in &order {
            let mut wx = b;
            x.for_each_nonzero(i, |j, v| wx += w[j] * v);
            let grad = y[i] * wx - 1.0 + alpha[i] * damping;
            let projected = if alpha[i] > 0.0 { grad } else { grad.min(0.0) };
            max_violation = max_violation.max(projected.abs());
            let new_alpha = (alpha[i] - grad / q_diag[i]).max(0.0);
            let delta = new_alpha - alpha[i];
            if delta != 0.0 {
                alpha[i] = new_alpha;
                let step = delta * y[i];
                x.for_each_nonzero(i, |j, v| w[j] += step * v);
                b += step;
            }
        }
        objective_curve.push(dual_objective(&alpha, &w, b, damping));
        if max_violation < params.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "linear svm did not reach tol {} within {} epochs; keeping best iterate",
            params.tol,
            params.max_epochs
        );
    }

    Ok(LinearSvmModel {
        params: *params,
        weights: w,
        bias: b,
        converged,
        objective_curve,
    })
}

/// Dual objective `1/2 ||w~||^2 + sum alpha^2/(4C) - sum alpha` where `w~`
/// includes the bias coordinate.
fn dual_objective(alpha: &[f64], w: &[f64], b: f64, damping: f64) -> f64 {
    let w_sq: f64 = w.iter().map(|v| v * v).sum::<f64>() + b * b;
    let a_sq: f64 = alpha.iter().map(|a| a * a).sum();
    0.5 * w_sq + 0.5 * damping * a_sq - alpha.iter().sum::<f64>()
}

impl LinearSvmModel {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn c(&self) -> f64 {
        self.params.c
    }

    /// Primal objective of `(weights, bias)` on a training set; exposed for
    /// optimality probes.
    pub fn primal_objective(&self, x: &FeatureMatrix, y: &[u8]) -> f64 {
        primal_objective(&self.weights, self.bias, x, &signed_labels(y), self.params.c)
    }

    /// Signed margin per row.
    pub fn decision_scores(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows())
            .map(|i| {
                let mut s = self.bias;
                x.for_each_nonzero(i, |j, v| s += self.weights[j] * v);
                s
            })
            .collect()
    }
}

pub(crate) fn primal_objective(w: &[f64], b: f64, x: &FeatureMatrix, y: &[f64], c: f64) -> f64 {
    let mut loss = 0f64;
    for i in 0..x.n_rows() {
        let mut wx = b;
        x.for_each_nonzero(i, |j, v| wx += w[j] * v);
        let slack = (1.0 - y[i] * wx).max(0.0);
        loss += slack * slack;
    }
    0.5 * (w.iter().map(|v| v * v).sum::<f64>() + b * b) + c * loss
}
