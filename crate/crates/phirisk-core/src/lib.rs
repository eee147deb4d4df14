//! Core library for classifying clinical-note sentences by PHI leakage risk.
//!
//! The pipeline runs in stages, each its own module:
//!
//! - [`corpus`] — parse and validate gold-standard XML notes (CDATA text body
//!   plus offset-annotated PHI tags) and summarize tag counts.
//! - [`segment`] — split note text into offset-preserving sentences and label
//!   each sentence high/low risk from the gold tags it overlaps.
//! - [`features`] — binary unigram (bag-of-words) and averaged word-embedding
//!   featurization.
//! - [`models`] — six classifiers implemented from first principles:
//!   Bernoulli and Gaussian naive Bayes, AdaBoost over decision stumps, a
//!   random forest, a linear SVM, and an RBF-kernel SVM.
//! - [`eval`] — stratified k-fold cross-validation with precision/recall/F1
//!   and confusion-matrix reporting.
//! - [`synth`] — deterministic synthetic corpus and embedding generation with
//!   a recorded ground-truth ledger, so the full pipeline is testable without
//!   access-restricted clinical data.
//!
//! All randomness flows from a single 64-bit seed through [`seeding`], so
//! every stage is reproducible bit-for-bit given the same inputs and flags.

pub mod corpus;
pub mod eval;
pub mod features;
pub mod models;
pub mod seeding;
pub mod segment;
pub mod synth;
pub mod text;

pub use corpus::{
    corpus_stats, load_corpus, load_corpus_with, parse_document, parse_document_with, CorpusError,
    CorpusLoad, ParentCategory, ParseOptions, PhiCategory, PhiTag, RawDocument, TagCountReport,
};
pub use eval::{
    compute_metrics, cross_validate, stratified_kfold, ConfusionMatrix, CvConfig, EvalError,
    EvalReport, FoldAssignment, FoldStrategy, Metrics,
};
pub use features::{
    build_vocabulary, embed_sentence, load_embeddings, tokenize, vectorize_bow,
    vectorize_embeddings, EmbeddingTable, FeatureError, FeatureKind, FeatureMatrix, Vocabulary,
};
pub use models::{ModelError, ModelKind, TieBreak, TrainedModel};
pub use segment::{
    corpus_label_summary, label_sentences, split_sentences, LabelSummary, SentenceRecord, TagSpan,
};
pub use synth::{generate_corpus, generate_embeddings, GroundTruthLedger, SynthConfig, SynthError};
