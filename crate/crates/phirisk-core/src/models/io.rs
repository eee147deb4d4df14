//! Versioned model files.
//!
//! A saved model is a self-describing JSON container: format version, model
//! kind, the fingerprint of the featurizer it was trained against, and the
//! full parameter set. Prediction through the container refuses a featurizer
//! whose fingerprint does not match.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;

use super::{ModelError, ModelKind, TieBreak, TrainedModel};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelContainer {
    pub format_version: u32,
    pub kind: ModelKind,
    /// Fingerprint of the vocabulary or embedding table used at training.
    pub feature_fingerprint: String,
    pub model: TrainedModel,
}

impl ModelContainer {
    pub fn new(model: TrainedModel, feature_fingerprint: String) -> Self {
        ModelContainer {
            format_version: FORMAT_VERSION,
            kind: model.kind(),
            feature_fingerprint,
            model,
        }
    }

    /// Predicts only when `fingerprint` matches the featurizer the model was
    /// trained against.
    pub fn predict_checked(
        &self,
        x: &FeatureMatrix,
        fingerprint: &str,
        tie: TieBreak,
    ) -> Result<Vec<u8>, ModelError> {
        if fingerprint != self.feature_fingerprint {
            return Err(ModelError::FingerprintMismatch {
                expected: self.feature_fingerprint.clone(),
                found: fingerprint.to_string(),
            });
        }
        self.model.predict_with(x, tie)
    }
}

pub fn save_model(container: &ModelContainer, path: &Path) -> Result<(), ModelError> {
    let json = serde_json::to_string_pretty(container)
        .map_err(|e| ModelError::BadContainer(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelContainer, ModelError> {
    let bytes = std::fs::read(path)?;
    let container: ModelContainer = serde_json::from_slice(&bytes)
        .map_err(|e| ModelError::BadContainer(e.to_string()))?;
    if container.format_version != FORMAT_VERSION {
        return Err(ModelError::BadContainer(format!(
            "unsupported format version {} (expected {})",
            container.format_version, FORMAT_VERSION
        )));
    }
    if container.kind != container.model.kind() {
        return Err(ModelError::BadContainer(format!(
            "declared kind {} does not match stored parameters ({})",
            container.kind,
            container.model.kind()
        )));
    }
    Ok(container)
}
