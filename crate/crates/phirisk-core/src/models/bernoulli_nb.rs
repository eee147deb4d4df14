//! Bernoulli naive Bayes for binary features.

use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;

use super::{check_training_input, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliNbParams {
    /// Laplace/Lidstone smoothing.
    pub alpha: f64,
    /// When set, real-valued inputs are mapped to `value > threshold`
    /// before training and prediction; when unset, non-binary input is a
    /// kind mismatch.
    pub binarize_at: Option<f64>,
}

impl Default for BernoulliNbParams {
    fn default() -> Self {
        BernoulliNbParams {
            alpha: 1.0,
            binarize_at: None,
        }
    }
}

/// Log priors and per-class log feature presence/absence probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliNbModel {
    params: BernoulliNbParams,
    log_prior: [f64; 2],
    /// `log_p1[c][j]` = log P(feature j = 1 | class c).
    log_p1: [Vec<f64>; 2],
    /// `log_p0[c][j]` = log P(feature j = 0 | class c).
    log_p0: [Vec<f64>; 2],
    /// Per-class score of the all-zero row, so scoring touches only the
    /// nonzero entries of a sparse row.
    zero_row_score: [f64; 2],
}

/// Fits presence probabilities `(count + alpha) / (class count + 2 alpha)`
/// with priors taken from class frequencies.
pub fn train_bernoulli_nb(
    x: &FeatureMatrix,
    y: &[u8],
    params: &BernoulliNbParams,
) -> Result<BernoulliNbModel, ModelError> {
    check_training_input(x, y)?;
    if x.kind() != crate::features::FeatureKind::Bow && params.binarize_at.is_none() {
        return Err(ModelError::KindMismatch(
            "Bernoulli NB requires binary input; pass a binarize threshold to apply it to \
             real-valued features"
                .to_string(),
        ));
    }
    let d = x.n_cols();
    let n = x.n_rows();
    let alpha = params.alpha;

    let mut class_count = [0f64; 2];
    let mut present = [vec![0f64; d], vec![0f64; d]];
    for i in 0..n {
        let c = usize::from(y[i] != 0);
        class_count[c] += 1.0;
        x.for_each_nonzero(i, |j, v| {
            if binarized(v, params.binarize_at) {
                present[c][j] += 1.0;
            }
        });
    }

    let log_prior = [
        (class_count[0] / n as f64).ln(),
        (class_count[1] / n as f64).ln(),
    ];
    let mut log_p1 = [vec![0f64; d], vec![0f64; d]];
    let mut log_p0 = [vec![0f64; d], vec![0f64; d]];
    let mut zero_row_score = [0f64; 2];
    for c in 0..2 {
        let denom = class_count[c] + 2.0 * alpha;
        for j in 0..d {
            let p1 = (present[c][j] + alpha) / denom;
            log_p1[c][j] = p1.ln();
            log_p0[c][j] = (1.0 - p1).ln();
            zero_row_score[c] += log_p0[c][j];
        }
        zero_row_score[c] += log_prior[c];
    }

    Ok(BernoulliNbModel {
        params: *params,
        log_prior,
        log_p1,
        log_p0,
        zero_row_score,
    })
}

fn binarized(v: f64, binarize_at: Option<f64>) -> bool {
    match binarize_at {
        Some(t) => v > t,
        None => v != 0.0,
    }
}

impl BernoulliNbModel {
    pub fn n_features(&self) -> usize {
        self.log_p1[0].len()
    }

    pub fn binarize_at(&self) -> Option<f64> {
        self.params.binarize_at
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    /// log P(feature j = 1 | class c).
    pub fn log_presence(&self, class: usize, feature: usize) -> f64 {
        self.log_p1[class][feature]
    }

    /// Per-class joint log-likelihoods (including priors) for a row.
    fn joint_log_likelihood(&self, x: &FeatureMatrix, row: usize) -> [f64; 2] {
        let mut score = self.zero_row_score;
        x.for_each_nonzero(row, |j, v| {
            if binarized(v, self.params.binarize_at) {
                for c in 0..2 {
                    score[c] += self.log_p1[c][j] - self.log_p0[c][j];
                }
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

    /// Normalized class posteriors per row; each pair sums to 1.
    pub fn posteriors(&self, x: &FeatureMatrix) -> Vec<[f64; 2]> {
        (0..x.n_rows())
            .map(|i| {
                let s = self.joint_log_likelihood(x, i);
                softmax2(s)
            })
            .collect()
    }
}

/// Numerically stable two-class softmax.
pub(super) fn softmax2(log_scores: [f64; 2]) -> [f64; 2] {
    let m = log_scores[0].max(log_scores[1]);
    let e0 = (log_scores[0] - m).exp();
    let e1 = (log_scores[1] - m).exp();
    [e0 / (e0 + e1), e1 / (e0 + e1)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMatrix;
    use approx::assert_relative_eq;

    fn bow(rows: Vec<Vec<u32>>, n_cols: usize) -> FeatureMatrix {
        FeatureMatrix::Bow { n_cols, rows }
    }

    /// The 4-sample worked example: X = [[1,0],[1,1],[0,1],[0,0]],
    /// y = [1,1,0,0], alpha = 1.
    ///
    /// Hand enumeration: P(f0=1|1) = (2+1)/(2+2) = 0.75, P(f1=1|c) = 0.5 for
    /// both classes, priors 0.5/0.5, so the class-1 posterior per row is
    /// 0.75, 0.75, 0.25, 0.25.
    #[test]
    fn four_sample_hand_example() {
        let x = bow(vec![vec![0], vec![0, 1], vec![1], vec![]], 2);
        let y = [1, 1, 0, 0];
        let model = train_bernoulli_nb(&x, &y, &BernoulliNbParams::default()).unwrap();
        assert_relative_eq!(model.log_presence(1, 0).exp(), 0.75, epsilon = 1e-12);
        let posteriors = model.posteriors(&x);
        let expected = [0.75, 0.75, 0.25, 0.25];
        for (p, e) in posteriors.iter().zip(expected) {
            assert_relative_eq!(p[1], e, epsilon = 1e-9);
            assert_relative_eq!(p[0] + p[1], 1.0, epsilon = 1e-12);
        }
        // predict([1,0]) = 1
        let probe = bow(vec![vec![0]], 2);
        let labels = super::super::TrainedModel::BernoulliNb(model).predict(&probe).unwrap();
        assert_eq!(labels, vec![1]);
    }

    #[test]
    fn identical_feature_across_classes_is_uninformative() {
        // feature 0 always on in both classes; feature 1 separates
        let x = bow(vec![vec![0, 1], vec![0, 1], vec![0], vec![0]], 2);
        let y = [1, 1, 0, 0];
        let model = train_bernoulli_nb(&x, &y, &BernoulliNbParams::default()).unwrap();
        assert_relative_eq!(
            model.log_presence(0, 0),
            model.log_presence(1, 0),
            epsilon = 1e-12
        );
        // decision driven by feature 1
        let probe = bow(vec![vec![0, 1], vec![0]], 2);
        let scores = model.decision_scores(&probe);
        assert!(scores[0] > 0.0);
        assert!(scores[1] < 0.0);
    }

    #[test]
    fn smoothing_keeps_unseen_features_nonzero() {
        // feature 1 never active in class 1 (2 samples): P = 1/(2+2) = 0.25
        let x = bow(vec![vec![0], vec![0], vec![1], vec![1]], 2);
        let y = [1, 1, 0, 0];
        let model = train_bernoulli_nb(&x, &y, &BernoulliNbParams::default()).unwrap();
        assert_relative_eq!(model.log_presence(1, 1).exp(), 0.25, epsilon = 1e-12);
        assert!(model.log_presence(1, 1).is_finite());
    }

    #[test]
    fn posteriors_sum_to_one_on_random_input() {
        use rand::Rng;
        let mut rng = crate::seeding::rng_for(5, "bnb-posteriors", 0);
        let d = 6;
        let rows: Vec<Vec<u32>> = (0..40)
            .map(|_| (0..d).filter(|_| rng.gen_bool(0.4)).map(|j| j as u32).collect())
            .collect();
        let y: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let x = bow(rows, d);
        let model = train_bernoulli_nb(&x, &y, &BernoulliNbParams::default()).unwrap();
        for p in model.posteriors(&x) {
            assert!(p[0].is_finite() && p[1].is_finite());
            assert_relative_eq!(p[0] + p[1], 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn binarize_at_emulates_binary_events_on_dense_input() {
        let x = FeatureMatrix::Emb {
            n_cols: 1,
            data: vec![0.7, 0.9, -0.2, 0.0],
        };
        let y = [1, 1, 0, 0];
        let params = BernoulliNbParams {
            binarize_at: Some(0.0),
            ..Default::default()
        };
        let model = train_bernoulli_nb(&x, &y, &params).unwrap();
        // values > 0 behave exactly like presence bits
        let equivalent = bow(vec![vec![0], vec![0], vec![], vec![]], 1);
        let binary_model = train_bernoulli_nb(&equivalent, &y, &BernoulliNbParams::default()).unwrap();
        assert_eq!(model.decision_scores(&x), binary_model.decision_scores(&equivalent));
        // without the threshold, dense input is refused
        assert!(train_bernoulli_nb(&x, &y, &BernoulliNbParams::default()).is_err());
    }
}
