//! Featurization: binary unigram presence vectors over a training-derived
//! vocabulary, and sentence vectors averaged from a pre-trained embedding
//! table.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::fnv1a;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no tokens in the training sentences; vocabulary would be empty")]
    EmptyVocabulary,
    #[error("bad embedding header: {0}")]
    BadHeader(String),
    #[error("embedding line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("embedding line {line}: non-finite value for token {token:?}")]
    NonFiniteValue { line: usize, token: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lowercased maximal alphanumeric runs of length >= 2, in order.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut run = String::new();
    let mut run_chars = 0usize;
    for c in text.chars().chain(std::iter::once(' ')) {
        if c.is_alphanumeric() {
            for lc in c.to_lowercase() {
                run.push(lc);
            }
            run_chars += 1;
        } else {
            if run_chars >= 2 {
                tokens.push(std::mem::take(&mut run));
            } else {
                run.clear();
            }
            run_chars = 0;
        }
    }
    tokens
}

/// Token-to-column map built from training sentences only; indices are
/// assigned in lexicographic token order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    ordered: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.ordered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.ordered.get(index).map(|s| s.as_str())
    }

    /// Content fingerprint; a model trained against one vocabulary refuses
    /// feature matrices built from another.
    pub fn fingerprint(&self) -> String {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"bow\n");
        for t in &self.ordered {
            bytes.extend_from_slice(t.as_bytes());
            bytes.push(b'\n');
        }
        format!("bow:{:016x}", fnv1a(&bytes))
    }
}

/// Builds a vocabulary from (training) sentences.
pub fn build_vocabulary<S: AsRef<str>>(train_sentences: &[S]) -> Result<Vocabulary, FeatureError> {
    let mut distinct: BTreeSet<String> = BTreeSet::new();
    for s in train_sentences {
        distinct.extend(tokenize(s.as_ref()));
    }
    if distinct.is_empty() {
        return Err(FeatureError::EmptyVocabulary);
    }
    let ordered: Vec<String> = distinct.into_iter().collect();
    let index = ordered
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();
    Ok(Vocabulary { ordered, index })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    /// Sparse binary unigram presence.
    Bow,
    /// Dense averaged word embeddings.
    Emb,
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureKind::Bow => "bow",
            FeatureKind::Emb => "w2v",
        })
    }
}

/// Row-per-sentence feature matrix: sparse {0,1} for BOW, dense reals for
/// embeddings.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    Bow {
        n_cols: usize,
        /// Per row, the sorted distinct column indices that are 1.
        rows: Vec<Vec<u32>>,
    },
    Emb {
        n_cols: usize,
        /// Row-major values, `n_rows * n_cols` long.
        data: Vec<f64>,
    },
}

impl FeatureMatrix {
    pub fn kind(&self) -> FeatureKind {
        match self {
            FeatureMatrix::Bow { .. } => FeatureKind::Bow,
            FeatureMatrix::Emb { .. } => FeatureKind::Emb,
        }
    }

    pub fn n_rows(&self) -> usize {
        match self {
            FeatureMatrix::Bow { rows, .. } => rows.len(),
            FeatureMatrix::Emb { n_cols, data } => {
                if *n_cols == 0 {
                    0
                } else {
                    data.len() / n_cols
                }
            }
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            FeatureMatrix::Bow { n_cols, .. } | FeatureMatrix::Emb { n_cols, .. } => *n_cols,
        }
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        match self {
            FeatureMatrix::Bow { rows, .. } => {
                if rows[row].binary_search(&(col as u32)).is_ok() {
                    1.0
                } else {
                    0.0
                }
            }
            FeatureMatrix::Emb { n_cols, data } => data[row * n_cols + col],
        }
    }

    /// Visits the nonzero entries of a row as `(column, value)`.
    pub fn for_each_nonzero<F: FnMut(usize, f64)>(&self, row: usize, mut f: F) {
        match self {
            FeatureMatrix::Bow { rows, .. } => {
                for &c in &rows[row] {
                    f(c as usize, 1.0);
                }
            }
            FeatureMatrix::Emb { n_cols, data } => {
                let base = row * n_cols;
                for (c, &v) in data[base..base + n_cols].iter().enumerate() {
                    if v != 0.0 {
                        f(c, v);
                    }
                }
            }
        }
    }

    /// Writes a dense copy of `row` into `buf` (`buf.len() == n_cols`).
    pub fn fill_row(&self, row: usize, buf: &mut [f64]) {
        debug_assert_eq!(buf.len(), self.n_cols());
        match self {
            FeatureMatrix::Bow { rows, .. } => {
                buf.fill(0.0);
                for &c in &rows[row] {
                    buf[c as usize] = 1.0;
                }
            }
            FeatureMatrix::Emb { n_cols, data } => {
                buf.copy_from_slice(&data[row * n_cols..(row + 1) * n_cols]);
            }
        }
    }

    pub fn dot_rows(&self, a: usize, b: usize) -> f64 {
        match self {
            FeatureMatrix::Bow { rows, .. } => {
                let (ra, rb) = (&rows[a], &rows[b]);
                let (mut i, mut j, mut dot) = (0usize, 0usize, 0u32);
                while i < ra.len() && j < rb.len() {
                    match ra[i].cmp(&rb[j]) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            dot += 1;
                            i += 1;
                            j += 1;
                        }
                    }
                }
                dot as f64
            }
            FeatureMatrix::Emb { n_cols, data } => {
                let (ba, bb) = (a * n_cols, b * n_cols);
                (0..*n_cols).map(|c| data[ba + c] * data[bb + c]).sum()
            }
        }
    }

    pub fn row_sq_norm(&self, row: usize) -> f64 {
        match self {
            FeatureMatrix::Bow { rows, .. } => rows[row].len() as f64,
            FeatureMatrix::Emb { .. } => self.dot_rows(row, row),
        }
    }
}

/// Binary unigram presence: entry (i, j) is 1 iff vocabulary token j occurs
/// in sentence i. Repeats collapse to 1; out-of-vocabulary tokens are
/// ignored.
pub fn vectorize_bow<S: AsRef<str>>(sentences: &[S], vocab: &Vocabulary) -> FeatureMatrix {
    let rows = sentences
        .iter()
        .map(|s| {
            let mut cols: Vec<u32> = tokenize(s.as_ref())
                .iter()
                .filter_map(|t| vocab.index_of(t))
                .collect();
            cols.sort_unstable();
            cols.dedup();
            cols
        })
        .collect();
    FeatureMatrix::Bow {
        n_cols: vocab.len(),
        rows,
    }
}

/// Pre-trained word vectors, loaded whole.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(|v| v.as_slice())
    }

    pub fn fingerprint(&self) -> String {
        let mut words: Vec<&String> = self.vectors.keys().collect();
        words.sort();
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"emb\n");
        bytes.extend_from_slice(&(self.dimension as u64).to_le_bytes());
        for w in words {
            bytes.extend_from_slice(w.as_bytes());
            bytes.push(b'\n');
            for v in &self.vectors[w] {
                bytes.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        format!("emb:{:016x}", fnv1a(&bytes))
    }
}

/// Loads an embedding table from the text vector format: an optional
/// `<vocab_size> <dimension>` header line, then one `<token> <v1> ... <vd>`
/// line per word. Duplicate words keep the first occurrence.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable, FeatureError> {
    let file = std::fs::File::open(path)?;
    parse_embeddings(std::io::BufReader::new(file))
}

pub fn parse_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable, FeatureError> {
    let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
    let mut dimension: Option<usize> = None;
    let mut declared: Option<(usize, usize)> = None;

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if lineno == 1 && fields.len() == 2 {
            // A two-integer first line is the header; anything else on two
            // fields would be a 1-d vector, which the header rule shadows.
            if let (Ok(n), Ok(d)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                if n == 0 || d == 0 {
                    return Err(FeatureError::BadHeader(format!(
                        "declared {n} vectors of dimension {d}"
                    )));
                }
                declared = Some((n, d));
                dimension = Some(d);
                continue;
            }
        }
        if fields.len() < 2 {
            return Err(FeatureError::BadHeader(format!(
                "line {lineno} has no vector components"
            )));
        }
        let token = fields[0].to_string();
        let found = fields.len() - 1;
        let expected = *dimension.get_or_insert(found);
        if found != expected {
            return Err(FeatureError::DimensionMismatch {
                line: lineno,
                expected,
                found,
            });
        }
        let mut vec = Vec::with_capacity(found);
        for f in &fields[1..] {
            let v: f64 = f.parse().map_err(|_| FeatureError::NonFiniteValue {
                line: lineno,
                token: token.clone(),
            })?;
            if !v.is_finite() {
                return Err(FeatureError::NonFiniteValue {
                    line: lineno,
                    token: token.clone(),
                });
            }
            vec.push(v);
        }
        vectors.entry(token).or_insert(vec);
    }

    let dimension = match dimension {
        Some(d) => d,
        None => return Err(FeatureError::BadHeader("empty embedding file".to_string())),
    };
    if let Some((n, _)) = declared {
        if vectors.is_empty() && n > 0 {
            return Err(FeatureError::BadHeader(format!(
                "header declares {n} vectors but the file has none"
            )));
        }
    }
    Ok(EmbeddingTable { dimension, vectors })
}

/// Mean of the vectors of in-table tokens, counting each occurrence once;
/// the zero vector when no token is in the table.
pub fn embed_sentence(tokens: &[String], table: &EmbeddingTable) -> Vec<f64> {
    let mut sum = vec![0.0; table.dimension()];
    let mut n = 0usize;
    for t in tokens {
        if let Some(v) = table.get(t) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    if n == 0 {
        log::debug!("sentence has no in-table tokens; embedding is the zero vector");
        return sum;
    }
    for s in &mut sum {
        *s /= n as f64;
    }
    sum
}

/// Dense matrix of averaged sentence embeddings.
pub fn vectorize_embeddings<S: AsRef<str>>(
    sentences: &[S],
    table: &EmbeddingTable,
) -> FeatureMatrix {
    let n_cols = table.dimension();
    let mut data = Vec::with_capacity(sentences.len() * n_cols);
    for s in sentences {
        data.extend(embed_sentence(&tokenize(s.as_ref()), table));
    }
    FeatureMatrix::Emb { n_cols, data }
}
