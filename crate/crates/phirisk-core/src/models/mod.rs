//! The six classifiers, implemented from first principles.
//!
//! Every trainer takes a [`FeatureMatrix`]
//! and binary labels (`1` = high risk), checks that both classes are present,
//! and returns an immutable model. Prediction ties resolve to class 0 unless
//! [`TieBreak::High`] is requested.

mod adaboost;
mod bernoulli_nb;
mod forest;
mod gaussian_nb;
pub mod io;
mod kernel_svm;
mod linear_svm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureKind, FeatureMatrix};

pub use adaboost::{train_adaboost, AdaBoostModel, AdaBoostParams, Stump};
pub use bernoulli_nb::{train_bernoulli_nb, BernoulliNbModel, BernoulliNbParams};
pub use forest::{
    best_gini_split, train_random_forest, GiniSplit, RandomForestModel, RandomForestParams,
};
pub use gaussian_nb::{train_gaussian_nb, GaussianNbModel, GaussianNbParams};
pub use io::{load_model, save_model, ModelContainer};
pub use kernel_svm::{train_kernel_svm, Gamma, KernelSvmModel, KernelSvmParams};
pub use linear_svm::{train_linear_svm, LinearSvmModel, LinearSvmParams};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training labels contain a single class; both classes are required")]
    SingleClassInput,
    #[error("feature width mismatch: model expects {expected}, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("feature kind mismatch: {0}")]
    KindMismatch(String),
    #[error("labels length {labels} does not match {rows} feature rows")]
    LabelLengthMismatch { labels: usize, rows: usize },
    #[error("model file: {0}")]
    BadContainer(String),
    #[error("feature fingerprint mismatch: model was trained against {expected}, supplied featurizer is {found}")]
    FingerprintMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How exact score ties resolve. `Low` is the deterministic default; note it
/// is the risk-unsafe direction, so the CLI exposes a flag to flip it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieBreak {
    #[default]
    Low,
    High,
}

/// Classifier selector used by evaluation, the CLI, and model files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "bnb")]
    BernoulliNb,
    #[serde(rename = "gnb")]
    GaussianNb,
    #[serde(rename = "ada")]
    AdaBoost,
    #[serde(rename = "rf")]
    RandomForest,
    #[serde(rename = "lsvm")]
    LinearSvm,
    #[serde(rename = "svm")]
    KernelSvm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::BernoulliNb,
        ModelKind::GaussianNb,
        ModelKind::AdaBoost,
        ModelKind::RandomForest,
        ModelKind::LinearSvm,
        ModelKind::KernelSvm,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            ModelKind::BernoulliNb => "bnb",
            ModelKind::GaussianNb => "gnb",
            ModelKind::AdaBoost => "ada",
            ModelKind::RandomForest => "rf",
            ModelKind::LinearSvm => "lsvm",
            ModelKind::KernelSvm => "svm",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .iter()
            .copied()
            .find(|k| k.code() == s)
            .ok_or_else(|| format!("unknown model kind {s:?} (expected bnb|gnb|ada|rf|lsvm|svm)"))
    }
}

/// A trained classifier of any kind, with a uniform inference interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    BernoulliNb(BernoulliNbModel),
    GaussianNb(GaussianNbModel),
    AdaBoost(AdaBoostModel),
    RandomForest(RandomForestModel),
    LinearSvm(LinearSvmModel),
    KernelSvm(KernelSvmModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::BernoulliNb(_) => ModelKind::BernoulliNb,
            TrainedModel::GaussianNb(_) => ModelKind::GaussianNb,
            TrainedModel::AdaBoost(_) => ModelKind::AdaBoost,
            TrainedModel::RandomForest(_) => ModelKind::RandomForest,
            TrainedModel::LinearSvm(_) => ModelKind::LinearSvm,
            TrainedModel::KernelSvm(_) => ModelKind::KernelSvm,
        }
    }

    /// Feature width the model was trained on.
    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::BernoulliNb(m) => m.n_features(),
            TrainedModel::GaussianNb(m) => m.n_features(),
            TrainedModel::AdaBoost(m) => m.n_features(),
            TrainedModel::RandomForest(m) => m.n_features(),
            TrainedModel::LinearSvm(m) => m.n_features(),
            TrainedModel::KernelSvm(m) => m.n_features(),
        }
    }

    /// Whether training converged; always true for the closed-form and
    /// ensemble models.
    pub fn converged(&self) -> bool {
        match self {
            TrainedModel::LinearSvm(m) => m.converged,
            TrainedModel::KernelSvm(m) => m.converged,
            _ => true,
        }
    }

    /// Per-row decision scores: class-1 log-odds for the naive Bayes models,
    /// the weighted stump vote for AdaBoost, the mean class-1 leaf frequency
    /// for the forest, and the signed margin for the SVMs.
    pub fn decision_scores(&self, x: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        self.check_input(x)?;
        Ok(match self {
            TrainedModel::BernoulliNb(m) => m.decision_scores(x),
            TrainedModel::GaussianNb(m) => m.decision_scores(x),
            TrainedModel::AdaBoost(m) => m.decision_scores(x),
            TrainedModel::RandomForest(m) => m.decision_scores(x),
            TrainedModel::LinearSvm(m) => m.decision_scores(x),
            TrainedModel::KernelSvm(m) => m.decision_scores(x),
        })
    }

    /// Hard labels with ties resolved to class 0.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<u8>, ModelError> {
        self.predict_with(x, TieBreak::Low)
    }

    pub fn predict_with(&self, x: &FeatureMatrix, tie: TieBreak) -> Result<Vec<u8>, ModelError> {
        let scores = self.decision_scores(x)?;
        let threshold = self.score_threshold();
        Ok(scores
            .iter()
            .map(|&s| label_from_score(s, threshold, tie))
            .collect())
    }

    /// The score value at which the two classes tie.
    pub fn score_threshold(&self) -> f64 {
        match self {
            // forest scores are mean class-1 leaf frequencies in [0, 1]
            TrainedModel::RandomForest(_) => 0.5,
            _ => 0.0,
        }
    }

    fn check_input(&self, x: &FeatureMatrix) -> Result<(), ModelError> {
        if x.n_cols() != self.n_features() {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_features(),
                found: x.n_cols(),
            });
        }
        if let TrainedModel::BernoulliNb(m) = self {
            if x.kind() != FeatureKind::Bow && m.binarize_at().is_none() {
                return Err(ModelError::KindMismatch(
                    "Bernoulli NB requires binary input; pass a binarize threshold to apply it \
                     to real-valued features"
                        .to_string(),
                ));
            }
        }
        Ok(())
    }
}

pub(crate) fn label_from_score(score: f64, threshold: f64, tie: TieBreak) -> u8 {
    if score > threshold {
        1
    } else if score < threshold {
        0
    } else {
        match tie {
            TieBreak::Low => 0,
            TieBreak::High => 1,
        }
    }
}

/// Shared trainer precondition: labels match rows and both classes occur.
pub(crate) fn check_training_input(x: &FeatureMatrix, y: &[u8]) -> Result<(), ModelError> {
    if y.len() != x.n_rows() {
        return Err(ModelError::LabelLengthMismatch {
            labels: y.len(),
            rows: x.n_rows(),
        });
    }
    let has_low = y.contains(&0);
    let has_high = y.iter().any(|&l| l != 0);
    if !has_low || !has_high {
        return Err(ModelError::SingleClassInput);
    }
    Ok(())
}

/// Labels mapped to -1/+1 (high = +1) for the margin-based models.
pub(crate) fn signed_labels(y: &[u8]) -> Vec<f64> {
    y.iter().map(|&l| if l == 0 { -1.0 } else { 1.0 }).collect()
}
