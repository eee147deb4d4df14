//! Discrete AdaBoost over depth-1 decision stumps.

use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;

use super::{check_training_input, signed_labels, ModelError};

/// Stage weight assigned to a stump with zero weighted error; also the clamp
/// for vanishingly small errors, keeping the reweight step finite.
const STAGE_WEIGHT_CAP: f64 = 30.0;

/// Weighted errors below this are treated as a perfect stump.
const PERFECT_ERR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostParams {
    pub rounds: usize,
    pub learning_rate: f64,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        AdaBoostParams {
            rounds: 50,
            learning_rate: 1.0,
        }
    }
}

/// A depth-1 threshold classifier: with polarity `+1` it votes `+1` when
/// `x[feature] > threshold`, with polarity `-1` the votes flip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: i8,
}

impl Stump {
    pub fn vote(&self, value: f64) -> f64 {
        let raw = if value > self.threshold { 1.0 } else { -1.0 };
        raw * self.polarity as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    params: AdaBoostParams,
    n_features: usize,
    /// `(stump, stage weight)` pairs in training order.
    pub stages: Vec<(Stump, f64)>,
}

/// Boosts decision stumps: each round picks the stump minimizing weighted
/// error over all (feature, midpoint threshold, polarity) candidates, weighs
/// it by `learning_rate * ln((1 - err) / err)`, and reweights the samples.
/// Stops early when no stump beats 0.5 or when a stump is perfect (the
/// perfect stump is kept with a capped weight).
pub fn train_adaboost(
    x: &FeatureMatrix,
    y: &[u8],
    params: &AdaBoostParams,
) -> Result<AdaBoostModel, ModelError> {
    check_training_input(x, y)?;
    let n = x.n_rows();
    let y = signed_labels(y);
    let mut w = vec![1.0 / n as f64; n];
    let mut stages = Vec::new();

    for _ in 0..params.rounds {
        let Some((stump, _)) = best_stump(x, &y, &w) else {
            break; // no feature has two distinct values
        };
        // the sweep's incremental error can drift by a few ulps, so the
        // chosen stump's error is recomputed exactly before it is used
        let err: f64 = (0..n)
            .filter(|&i| stump.vote(x.value(i, stump.feature)) != y[i])
            .map(|i| w[i])
            .sum();
        if err >= 0.5 {
            break;
        }
        let ln_odds = if err > PERFECT_ERR {
            (((1.0 - err) / err).ln()).min(STAGE_WEIGHT_CAP)
        } else {
            STAGE_WEIGHT_CAP
        };
        let alpha = params.learning_rate * ln_odds;
        stages.push((stump, alpha));
        if err <= PERFECT_ERR {
            break;
        }
        let mut sum = 0.0;
        for i in 0..n {
            w[i] *= (-alpha * y[i] * stump.vote(x.value(i, stump.feature))).exp();
            sum += w[i];
        }
        if !(sum.is_finite() && sum > 0.0) {
            break; // weights degenerated; keep what we have
        }
        for wi in &mut w {
            *wi /= sum;
        }
    }

    Ok(AdaBoostModel {
        params: *params,
        n_features: x.n_cols(),
        stages,
    })
}

/// Exhaustive stump search: thresholds are midpoints between consecutive
/// distinct sorted values of each feature; errors are maintained by a sweep
/// so the whole search is O(d n log n).
fn best_stump(x: &FeatureMatrix, y: &[f64], w: &[f64]) -> Option<(Stump, f64)> {
    let n = x.n_rows();
    let d = x.n_cols();
    let total_neg: f64 = (0..n).filter(|&i| y[i] < 0.0).map(|i| w[i]).sum();
    let total: f64 = w.iter().sum();

    let mut best: Option<(Stump, f64)> = None;
    for feature in 0..d {
        let mut vals: Vec<(f64, usize)> = (0..n).map(|i| (x.value(i, feature), i)).collect();
        vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        // err_plus = weighted error of the polarity +1 stump with the
        // threshold currently below vals[k..]
        let mut err_plus = total_neg;
        for k in 0..n - 1 {
            let (v, i) = vals[k];
            // moving sample i to the `<= threshold` side flips its vote to -1
            err_plus += if y[i] > 0.0 { w[i] } else { -w[i] };
            if v < vals[k + 1].0 {
                let threshold = 0.5 * (v + vals[k + 1].0);
                for (polarity, err) in [(1i8, err_plus), (-1i8, total - err_plus)] {
                    let candidate_is_better = match &best {
                        Some((_, best_err)) => err < *best_err,
                        None => true,
                    };
                    if candidate_is_better {
                        best = Some((
                            Stump {
                                feature,
                                threshold,
                                polarity,
                            },
                            err,
                        ));
                    }
                }
            }
        }
    }
    best
}

impl AdaBoostModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn rounds_used(&self) -> usize {
        self.stages.len()
    }

    /// Weighted stump vote per row.
    pub fn decision_scores(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows())
            .map(|i| {
                self.stages
                    .iter()
                    .map(|(s, a)| a * s.vote(x.value(i, s.feature)))
                    .sum()
            })
            .collect()
    }
}
