//! Seeded k-fold cross-validation, precision/recall/F1, and report
//! rendering.
//!
//! Per fold, the vocabulary (for bag-of-words runs) is built from the
//! training rows only and the model is trained from scratch, so nothing from
//! a held-out fold leaks into featurization or training. Mean metrics are
//! the arithmetic means of the per-fold values; confusion matrices are also
//! pooled (summed) across folds.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{
    build_vocabulary, vectorize_bow, vectorize_embeddings, EmbeddingTable, FeatureError,
    FeatureKind, FeatureMatrix,
};
use crate::models::{
    train_adaboost, train_bernoulli_nb, train_gaussian_nb, train_kernel_svm, train_linear_svm,
    train_random_forest, AdaBoostParams, BernoulliNbParams, GaussianNbParams, KernelSvmParams,
    LinearSvmParams, ModelError, ModelKind, RandomForestParams, TieBreak, TrainedModel,
};
use crate::seeding::{derive_seed, rng_for};
use crate::segment::SentenceRecord;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("{what} has only {count} members, fewer than k = {k}")]
    TooFewSamples {
        what: String,
        count: usize,
        k: usize,
    },
    #[error("y_true has {0} entries but y_pred has {1}")]
    LengthMismatch(usize, usize),
    #[error("embedding features requested but no embedding table supplied")]
    MissingEmbeddings,
    #[error("fold {fold}: {source}")]
    FoldTraining { fold: usize, source: ModelError },
    #[error("fold {fold}: {source}")]
    FoldFeatures { fold: usize, source: FeatureError },
    #[error("unknown report format {0:?} (expected csv, confusion-csv, or json)")]
    UnknownFormat(String),
    #[error("report file: {0}")]
    BadReport(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FoldStrategy {
    /// Seeded per-class shuffle dealt round-robin; preserves class balance
    /// per fold, the default.
    #[default]
    #[serde(rename = "stratified-sentence")]
    StratifiedSentence,
    /// Whole documents dealt to folds, so no same-document vocabulary is
    /// shared between train and test.
    #[serde(rename = "document-grouped")]
    DocumentGrouped,
}

/// Assignment of every sentence to exactly one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub strategy: FoldStrategy,
    /// Per-sentence fold index in `[0, k)`.
    pub folds: Vec<u32>,
}

impl FoldAssignment {
    pub fn rows_in_fold(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] as usize == fold).collect()
    }

    pub fn rows_outside_fold(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] as usize != fold).collect()
    }
}

/// Stratified sentence-level folding: within each class, a seeded shuffle is
/// dealt round-robin into the folds. The dealing cursor carries across
/// classes, so overall fold sizes also differ by at most one.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<FoldAssignment, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidK(k));
    }
    let mut folds = vec![0u32; labels.len()];
    let mut cursor = 0usize;
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = (0..labels.len())
            .filter(|&i| (labels[i] != 0) == (class != 0))
            .collect();
        if rows.len() < k {
            return Err(EvalError::TooFewSamples {
                what: format!("class {class}"),
                count: rows.len(),
                k,
            });
        }
        let mut rng = rng_for(seed, "stratified-kfold", class as u64);
        rows.shuffle(&mut rng);
        for row in rows {
            folds[row] = (cursor % k) as u32;
            cursor += 1;
        }
    }
    Ok(FoldAssignment {
        k,
        seed,
        strategy: FoldStrategy::StratifiedSentence,
        folds,
    })
}

/// Document-grouped folding: distinct documents are shuffled once and dealt
/// round-robin, so all sentences of a document land in the same fold.
pub fn document_grouped_kfold(
    doc_ids: &[&str],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidK(k));
    }
    let mut docs: Vec<&str> = doc_ids.to_vec();
    docs.sort_unstable();
    docs.dedup();
    if docs.len() < k {
        return Err(EvalError::TooFewSamples {
            what: "documents".to_string(),
            count: docs.len(),
            k,
        });
    }
    let mut rng = rng_for(seed, "grouped-kfold", 0);
    docs.shuffle(&mut rng);
    let doc_fold: std::collections::HashMap<&str, u32> = docs
        .iter()
        .enumerate()
        .map(|(i, &d)| (d, (i % k) as u32))
        .collect();
    Ok(FoldAssignment {
        k,
        seed,
        strategy: FoldStrategy::DocumentGrouped,
        folds: doc_ids.iter().map(|d| doc_fold[d]).collect(),
    })
}

/// Binary confusion counts with high risk (1) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    #[serde(rename = "tp")]
    pub true_pos: u64,
    #[serde(rename = "fp")]
    pub false_pos: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
    #[serde(rename = "tn")]
    pub true_neg: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.true_pos += other.true_pos;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
        self.true_neg += other.true_neg;
    }

    /// Two-line layout mirroring the usual figure: rows are true labels
    /// (high first), columns predicted (high, low) — false negatives sit in
    /// the top-right cell.
    pub fn to_table(&self) -> String {
        format!(
            "true\\pred      high       low\nhigh      {:>9} {:>9}\nlow       {:>9} {:>9}\n",
            self.true_pos, self.false_neg, self.false_pos, self.true_neg
        )
    }
}

/// Precision, recall, and F1 with high risk as the positive class.
///
/// `zero_division` flags that some denominator was zero and the affected
/// metric was reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub zero_division: bool,
}

impl Metrics {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Metrics {
        let mut zero_division = false;
        let mut ratio = |num: u64, den: u64| -> f64 {
            if den == 0 {
                zero_division = true;
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(cm.true_pos, cm.true_pos + cm.false_pos);
        let recall = ratio(cm.true_pos, cm.true_pos + cm.false_neg);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Metrics {
            precision,
            recall,
            f1,
            zero_division,
        }
    }
}

/// Counts the confusion matrix and derives the metrics.
pub fn compute_metrics(y_true: &[u8], y_pred: &[u8]) -> Result<(Metrics, ConfusionMatrix), EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t != 0, p != 0) {
            (true, true) => cm.true_pos += 1,
            (false, true) => cm.false_pos += 1,
            (true, false) => cm.false_neg += 1,
            (false, false) => cm.true_neg += 1,
        }
    }
    Ok((Metrics::from_confusion(&cm), cm))
}

/// Everything needed to reproduce a cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub feature_kind: FeatureKind,
    pub model_kind: ModelKind,
    pub k: usize,
    pub seed: u64,
    pub strategy: FoldStrategy,
    pub tie_break: TieBreak,
    /// Maps real-valued features to bits for Bernoulli NB (`value > t`).
    pub binarize_at: Option<f64>,
    pub hyper: Hyperparams,
}

impl CvConfig {
    pub fn new(feature_kind: FeatureKind, model_kind: ModelKind) -> Self {
        CvConfig {
            feature_kind,
            model_kind,
            k: 5,
            seed: 42,
            strategy: FoldStrategy::StratifiedSentence,
            tie_break: TieBreak::Low,
            binarize_at: None,
            hyper: Hyperparams::default(),
        }
    }
}

/// Trainer defaults, reified so they serialize into every report.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Hyperparams {
    pub bernoulli: BernoulliNbParams,
    pub gaussian: GaussianNbParams,
    pub adaboost: AdaBoostParams,
    pub forest: ForestHyper,
    pub linear_svm: LinearSvmParams,
    pub kernel_svm: KernelSvmParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestHyper {
    pub trees: usize,
    pub bootstrap: bool,
}

impl Default for ForestHyper {
    fn default() -> Self {
        ForestHyper {
            trees: 100,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub features: FeatureKind,
    pub model: ModelKind,
    pub k: usize,
    pub seed: u64,
    pub strategy: FoldStrategy,
    pub tie_break: TieBreak,
    pub binarize_at: Option<f64>,
    pub hyperparameters: serde_json::Value,
    /// True when every fold's trainer reported convergence.
    pub all_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub meta: RunMeta,
    pub folds: Vec<FoldResult>,
    /// Arithmetic mean of the per-fold metrics.
    pub mean: Metrics,
    /// Element-wise sum of the per-fold confusion matrices.
    pub pooled: ConfusionMatrix,
}

/// Which rows fed featurizer fitting and training in one fold; used to
/// verify that held-out sentences never contribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldTrace {
    pub fold: usize,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// Rows whose text was consumed to build the fold's vocabulary (empty
    /// for embedding runs, whose table is pre-trained).
    pub vocab_rows: Vec<usize>,
}

/// Cross-validates one (feature kind, model kind) cell.
pub fn cross_validate(
    records: &[SentenceRecord],
    table: Option<&EmbeddingTable>,
    cfg: &CvConfig,
) -> Result<EvalReport, EvalError> {
    cross_validate_traced(records, table, cfg).map(|(report, _)| report)
}

/// As [`cross_validate`], also returning the per-fold row traces.
pub fn cross_validate_traced(
    records: &[SentenceRecord],
    table: Option<&EmbeddingTable>,
    cfg: &CvConfig,
) -> Result<(EvalReport, Vec<FoldTrace>), EvalError> {
    let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
    let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
    if cfg.feature_kind == FeatureKind::Emb && table.is_none() {
        return Err(EvalError::MissingEmbeddings);
    }

    let assignment = match cfg.strategy {
        FoldStrategy::StratifiedSentence => stratified_kfold(&labels, cfg.k, cfg.seed)?,
        FoldStrategy::DocumentGrouped => {
            let ids: Vec<&str> = records.iter().map(|r| r.doc_id.as_str()).collect();
            document_grouped_kfold(&ids, cfg.k, cfg.seed)?
        }
    };

    struct FoldOutcome {
        result: FoldResult,
        trace: FoldTrace,
        converged: bool,
    }

    let outcomes: Vec<Result<FoldOutcome, EvalError>> = (0..cfg.k)
        .into_par_iter()
        .map(|fold| {
            let train_rows = assignment.rows_outside_fold(fold);
            let test_rows = assignment.rows_in_fold(fold);
            let train_labels: Vec<u8> = train_rows.iter().map(|&i| labels[i]).collect();
            let test_labels: Vec<u8> = test_rows.iter().map(|&i| labels[i]).collect();

            // featurize: anything fitted sees training-fold text only
            let mut vocab_rows = Vec::new();
            let (x_train, x_test) = match cfg.feature_kind {
                FeatureKind::Bow => {
                    vocab_rows = train_rows.clone();
                    let train_texts: Vec<&str> =
                        vocab_rows.iter().map(|&i| texts[i]).collect();
                    let vocab = build_vocabulary(&train_texts)
                        .map_err(|source| EvalError::FoldFeatures { fold, source })?;
                    let test_texts: Vec<&str> = test_rows.iter().map(|&i| texts[i]).collect();
                    (
                        vectorize_bow(&train_texts, &vocab),
                        vectorize_bow(&test_texts, &vocab),
                    )
                }
                FeatureKind::Emb => {
                    let table = table.expect("checked above");
                    let train_texts: Vec<&str> = train_rows.iter().map(|&i| texts[i]).collect();
                    let test_texts: Vec<&str> = test_rows.iter().map(|&i| texts[i]).collect();
                    (
                        vectorize_embeddings(&train_texts, table),
                        vectorize_embeddings(&test_texts, table),
                    )
                }
            };

            let model = train_for_fold(cfg, fold, &x_train, &train_labels)
                .map_err(|source| EvalError::FoldTraining { fold, source })?;
            let predictions = model
                .predict_with(&x_test, cfg.tie_break)
                .map_err(|source| EvalError::FoldTraining { fold, source })?;
            let (metrics, confusion) = compute_metrics(&test_labels, &predictions)?;
            Ok(FoldOutcome {
                result: FoldResult {
                    fold,
                    metrics,
                    confusion,
                },
                trace: FoldTrace {
                    fold,
                    train_rows,
                    test_rows,
                    vocab_rows,
                },
                converged: model.converged(),
            })
        })
        .collect();

    let mut folds = Vec::with_capacity(cfg.k);
    let mut traces = Vec::with_capacity(cfg.k);
    let mut all_converged = true;
    for outcome in outcomes {
        let o = outcome?;
        all_converged &= o.converged;
        folds.push(o.result);
        traces.push(o.trace);
    }
    let (mean, pooled) = summarize_folds(&folds);

    let meta = RunMeta {
        features: cfg.feature_kind,
        model: cfg.model_kind,
        k: cfg.k,
        seed: cfg.seed,
        strategy: cfg.strategy,
        tie_break: cfg.tie_break,
        binarize_at: cfg.binarize_at,
        hyperparameters: hyper_json(cfg),
        all_converged,
    };
    Ok((
        EvalReport {
            meta,
            folds,
            mean,
            pooled,
        },
        traces,
    ))
}

fn train_for_fold(
    cfg: &CvConfig,
    fold: usize,
    x: &FeatureMatrix,
    y: &[u8],
) -> Result<TrainedModel, ModelError> {
    Ok(match cfg.model_kind {
        ModelKind::BernoulliNb => {
            let params = BernoulliNbParams {
                binarize_at: cfg.binarize_at,
                ..cfg.hyper.bernoulli
            };
            TrainedModel::BernoulliNb(train_bernoulli_nb(x, y, &params)?)
        }
        ModelKind::GaussianNb => {
            TrainedModel::GaussianNb(train_gaussian_nb(x, y, &cfg.hyper.gaussian)?)
        }
        ModelKind::AdaBoost => TrainedModel::AdaBoost(train_adaboost(x, y, &cfg.hyper.adaboost)?),
        ModelKind::RandomForest => {
            let params = RandomForestParams {
                trees: cfg.hyper.forest.trees,
                bootstrap: cfg.hyper.forest.bootstrap,
                seed: derive_seed(cfg.seed, "forest-fold", fold as u64),
            };
            TrainedModel::RandomForest(train_random_forest(x, y, &params)?)
        }
        ModelKind::LinearSvm => {
            TrainedModel::LinearSvm(train_linear_svm(x, y, &cfg.hyper.linear_svm)?)
        }
        ModelKind::KernelSvm => {
            TrainedModel::KernelSvm(train_kernel_svm(x, y, &cfg.hyper.kernel_svm)?)
        }
    })
}

fn hyper_json(cfg: &CvConfig) -> serde_json::Value {
    let v = match cfg.model_kind {
        ModelKind::BernoulliNb => serde_json::to_value(BernoulliNbParams {
            binarize_at: cfg.binarize_at,
            ..cfg.hyper.bernoulli
        }),
        ModelKind::GaussianNb => serde_json::to_value(cfg.hyper.gaussian),
        ModelKind::AdaBoost => serde_json::to_value(cfg.hyper.adaboost),
        ModelKind::RandomForest => serde_json::to_value(cfg.hyper.forest),
        ModelKind::LinearSvm => serde_json::to_value(cfg.hyper.linear_svm),
        ModelKind::KernelSvm => serde_json::to_value(cfg.hyper.kernel_svm),
    };
    v.unwrap_or(serde_json::Value::Null)
}

/// Mean metrics and pooled confusion over completed folds.
fn summarize_folds(folds: &[FoldResult]) -> (Metrics, ConfusionMatrix) {
    let n = folds.len().max(1) as f64;
    let mut mean = Metrics::default();
    let mut pooled = ConfusionMatrix::default();
    for f in folds {
        mean.precision += f.metrics.precision / n;
        mean.recall += f.metrics.recall / n;
        mean.f1 += f.metrics.f1 / n;
        mean.zero_division |= f.metrics.zero_division;
        pooled.add(&f.confusion);
    }
    (mean, pooled)
}

/// Generic fold runner used by [`cross_validate_traced`] and by tests that
/// substitute a stub predictor.
#[cfg(test)]
pub(crate) fn run_folds_with<F>(
    labels: &[u8],
    assignment: &FoldAssignment,
    predict_fold: F,
) -> (Vec<FoldResult>, Metrics, ConfusionMatrix)
where
    F: Fn(usize, &[usize], &[usize]) -> Vec<u8>,
{
    let mut folds = Vec::new();
    for fold in 0..assignment.k {
        let train_rows = assignment.rows_outside_fold(fold);
        let test_rows = assignment.rows_in_fold(fold);
        let y_true: Vec<u8> = test_rows.iter().map(|&i| labels[i]).collect();
        let y_pred = predict_fold(fold, &train_rows, &test_rows);
        let (metrics, confusion) = compute_metrics(&y_true, &y_pred).unwrap();
        folds.push(FoldResult {
            fold,
            metrics,
            confusion,
        });
    }
    let (mean, pooled) = summarize_folds(&folds);
    (folds, mean, pooled)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// `features,model,fold,precision,recall,f1` rows plus a `mean` row.
    Csv,
    /// `features,model,tp,fp,fn,tn` for the pooled matrix.
    ConfusionCsv,
    /// The full report.
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "confusion-csv" => Ok(ReportFormat::ConfusionCsv),
            "json" => Ok(ReportFormat::Json),
            other => Err(EvalError::UnknownFormat(other.to_string())),
        }
    }
}

/// Renders one report in the requested format.
pub fn render_report(report: &EvalReport, format: ReportFormat) -> Result<Vec<u8>, EvalError> {
    let out = match format {
        ReportFormat::Csv => {
            let mut s = String::from("features,model,fold,precision,recall,f1\n");
            for f in &report.folds {
                s.push_str(&format!(
                    "{},{},{},{:.4},{:.4},{:.4}\n",
                    report.meta.features,
                    report.meta.model,
                    f.fold,
                    f.metrics.precision,
                    f.metrics.recall,
                    f.metrics.f1
                ));
            }
            s.push_str(&format!(
                "{},{},mean,{:.4},{:.4},{:.4}\n",
                report.meta.features,
                report.meta.model,
                report.mean.precision,
                report.mean.recall,
                report.mean.f1
            ));
            s.into_bytes()
        }
        ReportFormat::ConfusionCsv => {
            let mut s = String::from("features,model,tp,fp,fn,tn\n");
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                report.meta.features,
                report.meta.model,
                report.pooled.true_pos,
                report.pooled.false_pos,
                report.pooled.false_neg,
                report.pooled.true_neg
            ));
            s.into_bytes()
        }
        ReportFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(report)
                .map_err(|e| EvalError::BadReport(e.to_string()))?;
            bytes.push(b'\n');
            bytes
        }
    };
    Ok(out)
}

/// Parses a JSON report produced by [`render_report`].
pub fn parse_report(bytes: &[u8]) -> Result<EvalReport, EvalError> {
    serde_json::from_slice(bytes).map_err(|e| EvalError::BadReport(e.to_string()))
}

/// Summary table over several runs: one mean row per (features, model).
pub fn render_summary(reports: &[EvalReport]) -> String {
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by_key(|r| (r.meta.features.to_string(), r.meta.model.to_string()));
    let mut s = String::from("features,model,precision,recall,f1\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{:.4},{:.4},{:.4}\n",
            r.meta.features, r.meta.model, r.mean.precision, r.mean.recall, r.mean.f1
        ));
    }
    s
}

/// Pooled confusion matrices over several runs, one row per run.
pub fn render_summary_confusions(reports: &[EvalReport]) -> String {
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by_key(|r| (r.meta.features.to_string(), r.meta.model.to_string()));
    let mut s = String::from("features,model,tp,fp,fn,tn\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.meta.features,
            r.meta.model,
            r.pooled.true_pos,
            r.pooled.false_pos,
            r.pooled.false_neg,
            r.pooled.true_neg
        ));
    }
    s
}
