//! Deterministic synthetic corpus and embedding generation.
//!
//! Notes are assembled from fixed template sentences: a low-risk pool of
//! clinical boilerplate (including section headers) and one high-risk
//! template per tag category with a placeholder filled from an obviously
//! fake lexicon. Placeholder offsets are recorded as gold tags, sentences
//! are joined with separators the segmentation rules recover exactly, and a
//! ground-truth ledger captures every span, label, and tag. Output is
//! byte-stable for a fixed config.
//!
//! Low-risk templates and high-risk templates/fillers share no tokens, so
//! both bag-of-words and embedding features can separate the classes; the
//! emitted test embeddings place the two token sets in separated regions of
//! the vector space.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{serialize_document, PhiCategory, PhiTag, RawDocument};
use crate::features::tokenize;
use crate::seeding::{fnv1a, rng_for};
use crate::segment::LabelSummary;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub notes: usize,
    pub sentences_min: usize,
    pub sentences_max: usize,
    /// Probability that a sentence is drawn from the high-risk pool.
    pub high_fraction: f64,
    /// Relative weights for choosing the tag category of a high-risk
    /// sentence; non-negative, not all zero.
    pub tag_weights: BTreeMap<PhiCategory, f64>,
    /// Dimension of the emitted test embedding vectors.
    pub embedding_dim: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            notes: 100,
            sentences_min: 4,
            sentences_max: 10,
            high_fraction: 0.45,
            tag_weights: PhiCategory::ALL.iter().map(|&c| (c, 1.0)).collect(),
            embedding_dim: 25,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), SynthError> {
        if self.notes == 0 {
            return Err(SynthError::InvalidConfig("note count must be at least 1".into()));
        }
        if self.sentences_min == 0 || self.sentences_min > self.sentences_max {
            return Err(SynthError::InvalidConfig(format!(
                "sentence range {}..={} is empty or starts at zero",
                self.sentences_min, self.sentences_max
            )));
        }
        if !(0.0..=1.0).contains(&self.high_fraction) {
            return Err(SynthError::InvalidConfig(format!(
                "high fraction {} outside [0, 1]",
                self.high_fraction
            )));
        }
        if self.tag_weights.values().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(SynthError::InvalidConfig("tag weights must be non-negative".into()));
        }
        if self.tag_weights.values().sum::<f64>() <= 0.0 {
            return Err(SynthError::InvalidConfig("tag weights must not all be zero".into()));
        }
        if self.embedding_dim == 0 {
            return Err(SynthError::InvalidConfig("embedding dimension must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerTag {
    pub tag_id: String,
    pub category: PhiCategory,
    pub start: usize,
    pub end: usize,
    pub literal: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSentence {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub label: u8,
    pub tags: Vec<LedgerTag>,
}

/// Everything the generator decided, recorded exactly as serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthLedger {
    pub config: SynthConfig,
    /// Per-document sentence spans, labels, and tag placements.
    pub documents: BTreeMap<String, Vec<LedgerSentence>>,
    pub tag_counts: BTreeMap<PhiCategory, u64>,
    pub label_counts: LabelSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedNote {
    pub doc_id: String,
    pub document: RawDocument,
    pub xml: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub notes: Vec<GeneratedNote>,
    pub ledger: GroundTruthLedger,
}

const LOW_SENTENCES: [&str; 12] = [
    "The patient is resting comfortably in bed",
    "Vital signs remain stable overnight",
    "No acute distress noted this morning",
    "Lungs are clear to auscultation bilaterally",
    "Continue current medications as prescribed",
    "Follow up with the clinic in two weeks",
    "Diet advanced and well tolerated",
    "Abdomen is soft and nontender on exam",
    "Plan reviewed with nursing staff at length",
    "Labs pending at this time",
    "Patient denies chest pain or shortness of breath",
    "Gait steady without assistance",
];

/// Section headers are emitted on their own line and carry no terminator.
const LOW_HEADERS: [&str; 3] = ["ASSESSMENT AND PLAN:", "REVIEW OF SYSTEMS:", "PHYSICAL EXAM:"];

/// One high-risk template per category; `{}` is the tagged placeholder.
fn high_template(category: PhiCategory) -> &'static str {
    match category {
        PhiCategory::Email => "Contact email documented: {}",
        PhiCategory::Fax => "Fax number listed: {}",
        PhiCategory::Device => "Implanted device serial recorded: {}",
        PhiCategory::LocationOther => "Transferred from {} per transport log",
        PhiCategory::Organization => "Employer documented: {}",
        PhiCategory::Username => "Chart accessed under username {}",
        PhiCategory::Country => "Country listed: {}",
        PhiCategory::Street => "Home address recorded: {}",
        PhiCategory::Zip => "Postal code listed: {}",
        PhiCategory::Profession => "Occupation documented: {}",
        PhiCategory::State => "State listed: {}",
        PhiCategory::Idnum => "Case identifier recorded: {}",
        PhiCategory::Phone => "Callback telephone recorded: {}",
        PhiCategory::City => "City listed: {}",
        PhiCategory::MedicalRecord => "MRN recorded: {}",
        PhiCategory::Age => "Documented age {} years",
        PhiCategory::Hospital => "Transferred from {} facility",
        PhiCategory::Patient => "Name listed: {}",
        PhiCategory::Doctor => "Seen by Dr. {} during rounds",
        PhiCategory::Date => "Admission date recorded: {}",
    }
}

/// Obviously fake fillers; none resembles a real identity.
fn fillers(category: PhiCategory) -> &'static [&'static str] {
    match category {
        PhiCategory::Email => &[
            "zorp.quix@example.org",
            "blee.fadu@example.org",
            "mrr.vonk@example.org",
        ],
        PhiCategory::Fax => &["555-0111", "555-0122", "555-0133"],
        PhiCategory::Device => &["ZZDEV-4411", "ZZDEV-4422", "ZZDEV-4433"],
        PhiCategory::LocationOther => &["Zeta Annex", "Yotta Pavilion", "Quux Wing"],
        PhiCategory::Organization => &["Zzz Widgets Ltd", "Qqq Logistics Group", "Vvv Holdings Inc"],
        PhiCategory::Username => &["zuser01", "quser02", "vuser03"],
        PhiCategory::Country => &["Zorbia", "Quuxland", "Vextonia"],
        PhiCategory::Street => &["12 Zorble Lane", "44 Quixotic Row", "78 Vextor Way"],
        PhiCategory::Zip => &["99990", "88881", "77772"],
        PhiCategory::Profession => &["zeppelin rigger", "quantifier wrangler", "vortex plumber"],
        PhiCategory::State => &["Zetaland", "Quuxshire", "Vexholm"],
        PhiCategory::Idnum => &["ZZ-44-8812", "QQ-55-9923", "VV-66-0034"],
        PhiCategory::Phone => &["555-0147", "555-0168", "555-0189"],
        PhiCategory::City => &["Zorbleton", "Quuxville", "Vextham"],
        PhiCategory::MedicalRecord => &["MRN-220011", "MRN-330022", "MRN-440033"],
        PhiCategory::Age => &["34", "57", "72", "88"],
        PhiCategory::Hospital => &["ZZZ General", "QQQ Memorial", "VVV Regional"],
        PhiCategory::Patient => &["Zorbak Quine", "Quilla Vex", "Vondra Zett"],
        PhiCategory::Doctor => &["Zorblatt", "Quagmire", "Vexley"],
        PhiCategory::Date => &["2142-07-19", "2143-11-02", "2145-03-28", "2141-12-31"],
    }
}

/// The distinct tokens of the low-risk and high-risk pools. The two sets are
/// disjoint by construction (enforced by test), which is what makes the
/// synthetic corpora separable.
pub fn template_token_sets() -> (std::collections::BTreeSet<String>, std::collections::BTreeSet<String>) {
    let mut low = std::collections::BTreeSet::new();
    for s in LOW_SENTENCES.iter().chain(LOW_HEADERS.iter()) {
        low.extend(tokenize(s));
    }
    let mut high = std::collections::BTreeSet::new();
    for category in PhiCategory::ALL {
        high.extend(tokenize(&high_template(category).replace("{}", " ")));
        for f in fillers(category) {
            high.extend(tokenize(f));
        }
    }
    (low, high)
}

struct PlannedSentence {
    body: String,
    is_header: bool,
    /// `(category, filler, chars before the placeholder)`.
    tag: Option<(PhiCategory, &'static str, usize)>,
}

/// Generates the corpus and its ledger in memory.
pub fn generate_corpus(config: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    config.validate()?;
    let id_width = config.notes.saturating_sub(1).to_string().len().max(4);
    let weights: Vec<(PhiCategory, f64)> = config
        .tag_weights
        .iter()
        .filter(|(_, &w)| w > 0.0)
        .map(|(&c, &w)| (c, w))
        .collect();
    let weight_total: f64 = weights.iter().map(|(_, w)| w).sum();

    let mut notes = Vec::with_capacity(config.notes);
    let mut documents = BTreeMap::new();
    let mut tag_counts: BTreeMap<PhiCategory, u64> = BTreeMap::new();
    let mut low_total = 0usize;
    let mut high_total = 0usize;

    for note_idx in 0..config.notes {
        let doc_id = format!("note-{note_idx:0id_width$}");
        let mut rng = rng_for(config.seed, "note", note_idx as u64);
        let n_sentences = rng.gen_range(config.sentences_min..=config.sentences_max);

        let planned: Vec<PlannedSentence> = (0..n_sentences)
            .map(|_| {
                let is_high = config.high_fraction > 0.0 && rng.gen_bool(config.high_fraction);
                if is_high {
                    let category = weighted_choice(&weights, weight_total, &mut rng);
                    let filler = pick(fillers(category), &mut rng);
                    let template = high_template(category);
                    let prefix_chars = template.split("{}").next().unwrap().chars().count();
                    PlannedSentence {
                        body: template.replacen("{}", filler, 1),
                        is_header: false,
                        tag: Some((category, filler, prefix_chars)),
                    }
                } else {
                    // headers make up a fixed slice of the low-risk pool
                    let pool = LOW_SENTENCES.len() + LOW_HEADERS.len();
                    let pick_idx = rng.gen_range(0..pool);
                    if pick_idx < LOW_SENTENCES.len() {
                        PlannedSentence {
                            body: LOW_SENTENCES[pick_idx].to_string(),
                            is_header: false,
                            tag: None,
                        }
                    } else {
                        PlannedSentence {
                            body: LOW_HEADERS[pick_idx - LOW_SENTENCES.len()].to_string(),
                            is_header: true,
                            tag: None,
                        }
                    }
                }
            })
            .collect();

        // assembly: separators are whitespace only, newline-bound around
        // headers so each header owns its line
        let mut text = String::new();
        let mut offset = 0usize; // in characters
        let mut sentences = Vec::with_capacity(planned.len());
        let mut tags = Vec::new();
        for (i, p) in planned.iter().enumerate() {
            if i > 0 {
                let adjacent_header = p.is_header || planned[i - 1].is_header;
                let sep = if adjacent_header {
                    *pick(&["\n", "\n\n"], &mut rng)
                } else {
                    *pick(&[" ", " ", "  ", "\n", "\n\n", "\n  \n"], &mut rng)
                };
                text.push_str(sep);
                offset += sep.chars().count();
            }
            let terminator = if p.is_header {
                ""
            } else {
                *pick(&[".", ".", ".", "!", "?"], &mut rng)
            };
            let sentence_text = format!("{}{}", p.body, terminator);
            let start = offset;
            let end = start + sentence_text.chars().count();
            let mut sentence_tags = Vec::new();
            if let Some((category, filler, prefix_chars)) = p.tag {
                let tag_id = format!("P{}", tags.len());
                let tag_start = start + prefix_chars;
                let tag_end = tag_start + filler.chars().count();
                let tag = LedgerTag {
                    tag_id: tag_id.clone(),
                    category,
                    start: tag_start,
                    end: tag_end,
                    literal: filler.to_string(),
                };
                *tag_counts.entry(category).or_insert(0) += 1;
                tags.push(PhiTag {
                    tag_id,
                    category,
                    start: tag_start,
                    end: tag_end,
                    literal: filler.to_string(),
                });
                sentence_tags.push(tag);
            }
            if sentence_tags.is_empty() {
                low_total += 1;
            } else {
                high_total += 1;
            }
            sentences.push(LedgerSentence {
                index: i,
                start,
                end,
                text: sentence_text.clone(),
                label: u8::from(!sentence_tags.is_empty()),
                tags: sentence_tags,
            });
            text.push_str(&sentence_text);
            offset = end;
        }
        text.push('\n');

        let document = RawDocument {
            doc_id: doc_id.clone(),
            text,
            tags,
        };
        let xml = serialize_document(&document);
        documents.insert(doc_id.clone(), sentences);
        notes.push(GeneratedNote {
            doc_id,
            document,
            xml,
        });
    }

    Ok(SynthCorpus {
        notes,
        ledger: GroundTruthLedger {
            config: config.clone(),
            documents,
            tag_counts,
            label_counts: LabelSummary {
                low: low_total,
                high: high_total,
                total: low_total + high_total,
            },
        },
    })
}

fn pick<'a, T>(items: &'a [T], rng: &mut impl Rng) -> &'a T {
    &items[rng.gen_range(0..items.len())]
}

fn weighted_choice(weights: &[(PhiCategory, f64)], total: f64, rng: &mut impl Rng) -> PhiCategory {
    let mut draw = rng.gen_range(0.0..total);
    for &(category, w) in weights {
        if draw < w {
            return category;
        }
        draw -= w;
    }
    weights.last().expect("weights validated non-empty").0
}

/// Emits a test embedding file covering every token the generator can
/// produce. Low-pool tokens center at +2 on the first coordinate, high-pool
/// tokens at -2, with small per-token jitter drawn from the seed, so
/// averaged sentence vectors are linearly separable by construction.
pub fn generate_embeddings(config: &SynthConfig) -> Result<String, SynthError> {
    config.validate()?;
    let (low, high) = template_token_sets();
    let dim = config.embedding_dim;
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", low.len() + high.len(), dim));
    let write_token = |token: &str, center: f64, out: &mut String| {
        let mut rng = rng_for(config.seed, "embedding", fnv1a(token.as_bytes()));
        out.push_str(token);
        for coord in 0..dim {
            let base = if coord == 0 { center } else { 0.0 };
            let value = base + rng.gen_range(-0.3..0.3);
            out.push_str(&format!(" {value}"));
        }
        out.push('\n');
    };
    // sorted union keeps the file byte-stable; the sets are disjoint
    let mut tokens: Vec<(&String, f64)> = low.iter().map(|t| (t, 2.0)).collect();
    tokens.extend(high.iter().map(|t| (t, -2.0)));
    tokens.sort_by(|a, b| a.0.cmp(b.0));
    for (token, center) in tokens {
        write_token(token, center, &mut out);
    }
    Ok(out)
}

/// Writes `corpus/*.xml`, `ledger.json`, and `embeddings.txt` under `dir`.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<(), SynthError> {
    let corpus_dir = dir.join("corpus");
    std::fs::create_dir_all(&corpus_dir)?;
    for note in &corpus.notes {
        std::fs::write(corpus_dir.join(format!("{}.xml", note.doc_id)), &note.xml)?;
    }
    let mut ledger = serde_json::to_vec_pretty(&corpus.ledger).map_err(std::io::Error::from)?;
    ledger.push(b'\n');
    std::fs::write(dir.join("ledger.json"), ledger)?;
    let embeddings = generate_embeddings(&corpus.ledger.config)?;
    let mut f = std::fs::File::create(dir.join("embeddings.txt"))?;
    f.write_all(embeddings.as_bytes())?;
    Ok(())
}
