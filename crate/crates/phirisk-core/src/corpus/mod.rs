//! Gold-standard corpus ingestion.
//!
//! A corpus is a directory of XML documents, each holding the note body in a
//! `<TEXT><![CDATA[...]]></TEXT>` section and the gold PHI annotations in a
//! `<TAGS>` section whose child elements are named by leaf category and carry
//! `id`, `start`, `end`, `text` attributes (character offsets, end exclusive).

mod xml;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{normalize_newlines, CharIndex};

pub use xml::serialize_document;

/// The 20 leaf PHI tag categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PhiCategory {
    #[serde(rename = "EMAIL")]
    Email,
    #[serde(rename = "FAX")]
    Fax,
    #[serde(rename = "DEVICE")]
    Device,
    #[serde(rename = "LOCATION-OTHER")]
    LocationOther,
    #[serde(rename = "ORGANIZATION")]
    Organization,
    #[serde(rename = "USERNAME")]
    Username,
    #[serde(rename = "COUNTRY")]
    Country,
    #[serde(rename = "STREET")]
    Street,
    #[serde(rename = "ZIP")]
    Zip,
    #[serde(rename = "PROFESSION")]
    Profession,
    #[serde(rename = "STATE")]
    State,
    #[serde(rename = "IDNUM")]
    Idnum,
    #[serde(rename = "PHONE")]
    Phone,
    #[serde(rename = "CITY")]
    City,
    #[serde(rename = "MEDICALRECORD")]
    MedicalRecord,
    #[serde(rename = "AGE")]
    Age,
    #[serde(rename = "HOSPITAL")]
    Hospital,
    #[serde(rename = "PATIENT")]
    Patient,
    #[serde(rename = "DOCTOR")]
    Doctor,
    #[serde(rename = "DATE")]
    Date,
}

/// Parent groupings of the leaf categories.
///
/// The source taxonomy names seven parents for these 20 leaves; an eighth
/// slot exists in the scheme but is unnamed, so it ships here as an explicit
/// [`ParentCategory::Reserved`] placeholder that no leaf maps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ParentCategory {
    Age,
    Contact,
    Date,
    Location,
    Profession,
    Id,
    Name,
    Reserved,
}

impl PhiCategory {
    /// All categories, in a fixed order usable for report layouts.
    pub const ALL: [PhiCategory; 20] = [
        PhiCategory::Email,
        PhiCategory::Fax,
        PhiCategory::Device,
        PhiCategory::LocationOther,
        PhiCategory::Organization,
        PhiCategory::Username,
        PhiCategory::Country,
        PhiCategory::Street,
        PhiCategory::Zip,
        PhiCategory::Profession,
        PhiCategory::State,
        PhiCategory::Idnum,
        PhiCategory::Phone,
        PhiCategory::City,
        PhiCategory::MedicalRecord,
        PhiCategory::Age,
        PhiCategory::Hospital,
        PhiCategory::Patient,
        PhiCategory::Doctor,
        PhiCategory::Date,
    ];

    /// The tag name as it appears in the XML.
    pub fn as_str(&self) -> &'static str {
        match self {
            PhiCategory::Email => "EMAIL",
            PhiCategory::Fax => "FAX",
            PhiCategory::Device => "DEVICE",
            PhiCategory::LocationOther => "LOCATION-OTHER",
            PhiCategory::Organization => "ORGANIZATION",
            PhiCategory::Username => "USERNAME",
            PhiCategory::Country => "COUNTRY",
            PhiCategory::Street => "STREET",
            PhiCategory::Zip => "ZIP",
            PhiCategory::Profession => "PROFESSION",
            PhiCategory::State => "STATE",
            PhiCategory::Idnum => "IDNUM",
            PhiCategory::Phone => "PHONE",
            PhiCategory::City => "CITY",
            PhiCategory::MedicalRecord => "MEDICALRECORD",
            PhiCategory::Age => "AGE",
            PhiCategory::Hospital => "HOSPITAL",
            PhiCategory::Patient => "PATIENT",
            PhiCategory::Doctor => "DOCTOR",
            PhiCategory::Date => "DATE",
        }
    }

    /// Parses an XML tag name. Unknown names fail closed: a misspelled or
    /// out-of-schema tag must surface as an error, not fold into a catch-all.
    pub fn parse(name: &str) -> Option<PhiCategory> {
        PhiCategory::ALL.iter().copied().find(|c| c.as_str() == name)
    }

    /// Parent grouping; a pure function of the leaf category.
    pub fn parent(&self) -> ParentCategory {
        match self {
            PhiCategory::Age => ParentCategory::Age,
            PhiCategory::Email | PhiCategory::Fax | PhiCategory::Phone => ParentCategory::Contact,
            PhiCategory::Date => ParentCategory::Date,
            PhiCategory::LocationOther
            | PhiCategory::Organization
            | PhiCategory::Country
            | PhiCategory::Street
            | PhiCategory::Zip
            | PhiCategory::State
            | PhiCategory::City
            | PhiCategory::Hospital => ParentCategory::Location,
            PhiCategory::Profession => ParentCategory::Profession,
            PhiCategory::Idnum | PhiCategory::MedicalRecord | PhiCategory::Device => {
                ParentCategory::Id
            }
            PhiCategory::Patient | PhiCategory::Doctor | PhiCategory::Username => {
                ParentCategory::Name
            }
        }
    }
}

impl fmt::Display for PhiCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One gold PHI annotation: a character span of the note plus the literal
/// string the annotators recorded for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhiTag {
    pub tag_id: String,
    pub category: PhiCategory,
    /// Character offset, inclusive.
    pub start: usize,
    /// Character offset, exclusive.
    pub end: usize,
    pub literal: String,
}

impl PhiTag {
    pub fn parent_category(&self) -> ParentCategory {
        self.category.parent()
    }
}

/// One clinical note: normalized text plus its gold tags sorted by offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub doc_id: String,
    pub text: String,
    pub tags: Vec<PhiTag>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed xml: {0}")]
    MalformedXml(String),
    #[error("missing <{0}> section")]
    MissingSection(&'static str),
    #[error("tag {tag_id}: span [{start}, {end}) out of bounds for text of {text_len} characters")]
    OffsetOutOfBounds {
        tag_id: String,
        start: usize,
        end: usize,
        text_len: usize,
    },
    #[error("tag {tag_id}: recorded literal {literal:?} does not match text span {span:?}")]
    LiteralMismatch {
        tag_id: String,
        literal: String,
        span: String,
    },
    #[error("unknown tag category {0:?}")]
    UnknownCategory(String),
    #[error("tag {tag_id}: bad {attribute} attribute {value:?}")]
    BadAttribute {
        tag_id: String,
        attribute: &'static str,
        value: String,
    },
    #[error("no parseable documents in {dir}{}", failure_note(.failures))]
    EmptyCorpus {
        dir: PathBuf,
        failures: Vec<ParseFailure>,
    },
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn failure_note(failures: &[ParseFailure]) -> String {
    if failures.is_empty() {
        String::new()
    } else {
        format!(" ({} file(s) failed to parse)", failures.len())
    }
}

/// A per-file parse failure collected during corpus loading.
#[derive(Debug)]
pub struct ParseFailure {
    pub path: PathBuf,
    pub error: CorpusError,
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.error)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Keep tags whose literal disagrees with the text span, trusting the
    /// offsets and logging a warning, instead of failing the document.
    pub lenient_literals: bool,
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub parse: ParseOptions,
    /// File-name pattern for candidate documents; `*` matches any run of
    /// characters.
    pub glob: String,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            parse: ParseOptions::default(),
            glob: "*.xml".to_string(),
        }
    }
}

/// Result of loading a corpus directory: parsed documents in `doc_id` order
/// plus any per-file failures. Failures are reported, never silently dropped.
#[derive(Debug)]
pub struct CorpusLoad {
    pub documents: Vec<RawDocument>,
    pub failures: Vec<ParseFailure>,
}

/// Parses one gold-standard XML document with strict literal checking.
pub fn parse_document(xml_bytes: &[u8], doc_id: &str) -> Result<RawDocument, CorpusError> {
    parse_document_with(xml_bytes, doc_id, &ParseOptions::default())
}

/// Parses one gold-standard XML document.
///
/// Line endings in the note body and tag literals are normalized to `\n`
/// before offsets are validated; gold offsets are interpreted against the
/// normalized text. Tags come back sorted by `(start, end)` regardless of
/// file order.
pub fn parse_document_with(
    xml_bytes: &[u8],
    doc_id: &str,
    opts: &ParseOptions,
) -> Result<RawDocument, CorpusError> {
    let raw = xml::parse_sections(xml_bytes)?;
    let text = normalize_newlines(&raw.text).into_owned();
    let index = CharIndex::new(&text);

    let mut tags = Vec::with_capacity(raw.tags.len());
    for t in raw.tags {
        let category = PhiCategory::parse(&t.name)
            .ok_or_else(|| CorpusError::UnknownCategory(t.name.clone()))?;
        if t.start >= t.end || t.end > index.char_len() {
            return Err(CorpusError::OffsetOutOfBounds {
                tag_id: t.id,
                start: t.start,
                end: t.end,
                text_len: index.char_len(),
            });
        }
        let span = index
            .slice(&text, t.start, t.end)
            .expect("span bounds checked above");
        let literal = normalize_newlines(&t.text).into_owned();
        let literal = if literal == span {
            literal
        } else if opts.lenient_literals {
            log::warn!(
                "{doc_id}: tag {} literal {:?} does not match span {:?}; keeping span",
                t.id,
                literal,
                span
            );
            span.to_string()
        } else {
            return Err(CorpusError::LiteralMismatch {
                tag_id: t.id,
                literal,
                span: span.to_string(),
            });
        };
        tags.push(PhiTag {
            tag_id: t.id,
            category,
            start: t.start,
            end: t.end,
            literal,
        });
    }
    tags.sort_by_key(|a| (a.start, a.end));

    Ok(RawDocument {
        doc_id: doc_id.to_string(),
        text,
        tags,
    })
}

/// Loads every matching file in `directory` with default options.
pub fn load_corpus(directory: &Path) -> Result<CorpusLoad, CorpusError> {
    load_corpus_with(directory, &LoadOptions::default())
}

/// Loads a corpus directory. Files are parsed in parallel; the result is
/// sorted by `doc_id`, so output order never depends on scheduling.
pub fn load_corpus_with(directory: &Path, opts: &LoadOptions) -> Result<CorpusLoad, CorpusError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(directory)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches_glob(&opts.glob, &file_name(p)))
        .collect();
    paths.sort();

    let parsed: Vec<Result<RawDocument, ParseFailure>> = paths
        .par_iter()
        .map(|path| {
            let doc_id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            std::fs::read(path)
                .map_err(CorpusError::from)
                .and_then(|bytes| parse_document_with(&bytes, &doc_id, &opts.parse))
                .map_err(|error| ParseFailure {
                    path: path.clone(),
                    error,
                })
        })
        .collect();

    let mut documents = Vec::new();
    let mut failures = Vec::new();
    for item in parsed {
        match item {
            Ok(doc) => documents.push(doc),
            Err(failure) => failures.push(failure),
        }
    }
    documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    for pair in documents.windows(2) {
        if pair[0].doc_id == pair[1].doc_id {
            return Err(CorpusError::DuplicateDocId(pair[0].doc_id.clone()));
        }
    }
    if documents.is_empty() {
        return Err(CorpusError::EmptyCorpus {
            dir: directory.to_path_buf(),
            failures,
        });
    }
    Ok(CorpusLoad {
        documents,
        failures,
    })
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Minimal glob: `*` matches any (possibly empty) run of characters, all
/// other characters match literally.
fn matches_glob(pattern: &str, name: &str) -> bool {
    fn rec(p: &[char], n: &[char]) -> bool {
        match p.split_first() {
            None => n.is_empty(),
            Some(('*', rest)) => (0..=n.len()).any(|k| rec(rest, &n[k..])),
            Some((c, rest)) => n.first() == Some(c) && rec(rest, &n[1..]),
        }
    }
    let p: Vec<char> = pattern.chars().collect();
    let n: Vec<char> = name.chars().collect();
    rec(&p, &n)
}

/// Per-category tag counts over a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagCountReport {
    pub counts: BTreeMap<PhiCategory, u64>,
    pub total: u64,
}

impl TagCountReport {
    pub fn count(&self, category: PhiCategory) -> u64 {
        self.counts.get(&category).copied().unwrap_or(0)
    }

    /// Rows sorted by ascending count (ties by name), the layout the
    /// tag-count table is conventionally presented in.
    fn sorted_rows(&self) -> Vec<(PhiCategory, u64)> {
        let mut rows: Vec<(PhiCategory, u64)> =
            PhiCategory::ALL.iter().map(|&c| (c, self.count(c))).collect();
        rows.sort_by(|a, b| (a.1, a.0.as_str()).cmp(&(b.1, b.0.as_str())));
        rows
    }

    /// CSV with a `category,count` header and a final `TOTAL` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,count\n");
        for (cat, n) in self.sorted_rows() {
            out.push_str(&format!("{},{}\n", cat, n));
        }
        out.push_str(&format!("TOTAL,{}\n", self.total));
        out
    }

    /// Plain-text table for standard output.
    pub fn to_table(&self) -> String {
        let width = PhiCategory::ALL
            .iter()
            .map(|c| c.as_str().len())
            .max()
            .unwrap_or(8);
        let mut out = String::new();
        for (cat, n) in self.sorted_rows() {
            out.push_str(&format!("{:<width$}  {:>8}\n", cat.as_str(), n));
        }
        out.push_str(&format!("{:<width$}  {:>8}\n", "TOTAL", self.total));
        out
    }
}

/// Counts every tag occurrence by leaf category.
pub fn corpus_stats<'a, I>(docs: I) -> TagCountReport
where
    I: IntoIterator<Item = &'a RawDocument>,
{
    let mut counts: BTreeMap<PhiCategory, u64> = BTreeMap::new();
    let mut total = 0u64;
    for doc in docs {
        for tag in &doc.tags {
            *counts.entry(tag.category).or_insert(0) += 1;
            total += 1;
        }
    }
    TagCountReport { counts, total }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc_xml(text: &str, tags: &str) -> Vec<u8> {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\" ?>\n<deIdi2b2>\n<TEXT><![CDATA[{text}]]></TEXT>\n<TAGS>\n{tags}</TAGS>\n</deIdi2b2>\n"
        )
        .into_bytes()
    }

    #[test]
    fn minimal_document_with_one_date_tag() {
        // 40-char note, DATE tag at [10, 20).
        let text = "Admitted: 2142-07-19 for observation....";
        assert_eq!(text.chars().count(), 40);
        let xml = doc_xml(
            text,
            "<DATE id=\"P0\" start=\"10\" end=\"20\" text=\"2142-07-19\" TYPE=\"DATE\"/>\n",
        );
        let doc = parse_document(&xml, "note-1").unwrap();
        assert_eq!(doc.tags.len(), 1);
        assert_eq!(doc.tags[0].category, PhiCategory::Date);
        assert_eq!(doc.tags[0].literal, "2142-07-19");
        assert_eq!(doc.text, text);
    }

    #[test]
    fn literal_mismatch_is_an_error_and_reports_both_strings() {
        let xml = doc_xml(
            "Seen by Jones today",
            "<DOCTOR id=\"P0\" start=\"8\" end=\"13\" text=\"Smith\"/>\n",
        );
        let err = parse_document(&xml, "d").unwrap_err();
        match err {
            CorpusError::LiteralMismatch { literal, span, .. } => {
                assert_eq!(literal, "Smith");
                assert_eq!(span, "Jones");
            }
            other => panic!("expected LiteralMismatch, got {other:?}"),
        }
    }

    #[test]
    fn lenient_mode_keeps_the_span() {
        let xml = doc_xml(
            "Seen by Jones today",
            "<DOCTOR id=\"P0\" start=\"8\" end=\"13\" text=\"Smith\"/>\n",
        );
        let opts = ParseOptions {
            lenient_literals: true,
        };
        let doc = parse_document_with(&xml, "d", &opts).unwrap();
        assert_eq!(doc.tags[0].literal, "Jones");
    }

    #[test]
    fn offsets_out_of_bounds_and_inverted_spans_fail() {
        let xml = doc_xml("short", "<DATE id=\"P0\" start=\"2\" end=\"99\" text=\"x\"/>\n");
        assert!(matches!(
            parse_document(&xml, "d").unwrap_err(),
            CorpusError::OffsetOutOfBounds { .. }
        ));
        let xml = doc_xml("short", "<DATE id=\"P0\" start=\"3\" end=\"3\" text=\"\"/>\n");
        assert!(matches!(
            parse_document(&xml, "d").unwrap_err(),
            CorpusError::OffsetOutOfBounds { .. }
        ));
    }

    #[test]
    fn unknown_category_fails_closed() {
        let xml = doc_xml("abc def", "<GIZMO id=\"P0\" start=\"0\" end=\"3\" text=\"abc\"/>\n");
        assert!(matches!(
            parse_document(&xml, "d").unwrap_err(),
            CorpusError::UnknownCategory(name) if name == "GIZMO"
        ));
    }

    #[test]
    fn tags_are_sorted_by_offset_regardless_of_file_order() {
        let xml = doc_xml(
            "aa bb cc dd",
            "<DATE id=\"P1\" start=\"6\" end=\"8\" text=\"cc\"/>\n<AGE id=\"P0\" start=\"0\" end=\"2\" text=\"aa\"/>\n",
        );
        let doc = parse_document(&xml, "d").unwrap();
        assert_eq!(doc.tags[0].tag_id, "P0");
        assert_eq!(doc.tags[1].tag_id, "P1");
    }

    #[test]
    fn crlf_offsets_are_interpreted_against_normalized_text() {
        // "ab\r\ncd" normalizes to "ab\ncd"; the tag covers "cd" at [3, 5).
        let xml = doc_xml("ab\r\ncd", "<AGE id=\"P0\" start=\"3\" end=\"5\" text=\"cd\"/>\n");
        let doc = parse_document(&xml, "d").unwrap();
        assert_eq!(doc.text, "ab\ncd");
        assert_eq!(doc.tags[0].literal, "cd");
    }

    #[test]
    fn multibyte_text_uses_character_offsets() {
        let xml = doc_xml("héllo wörld", "<CITY id=\"P0\" start=\"6\" end=\"11\" text=\"wörld\"/>\n");
        let doc = parse_document(&xml, "d").unwrap();
        assert_eq!(doc.tags[0].literal, "wörld");
    }

    #[test]
    fn parse_is_deterministic() {
        let xml = doc_xml(
            "Admitted: 2142-07-19 for observation....",
            "<DATE id=\"P0\" start=\"10\" end=\"20\" text=\"2142-07-19\"/>\n",
        );
        assert_eq!(parse_document(&xml, "d").unwrap(), parse_document(&xml, "d").unwrap());
    }

    #[test]
    fn parent_category_is_total_over_all_leaves() {
        for c in PhiCategory::ALL {
            let _ = c.parent(); // must not panic
            assert_eq!(PhiCategory::parse(c.as_str()), Some(c));
        }
        assert_eq!(PhiCategory::Username.parent(), ParentCategory::Name);
        assert_eq!(PhiCategory::Device.parent(), ParentCategory::Id);
        assert_eq!(PhiCategory::Hospital.parent(), ParentCategory::Location);
    }

    #[test]
    fn stats_count_every_tag_and_match_direct_enumeration() {
        let xml1 = doc_xml(
            "aa bb cc dd",
            "<DATE id=\"P0\" start=\"0\" end=\"2\" text=\"aa\"/>\n<DATE id=\"P1\" start=\"3\" end=\"5\" text=\"bb\"/>\n",
        );
        let xml2 = doc_xml("aa bb", "<AGE id=\"P0\" start=\"0\" end=\"2\" text=\"aa\"/>\n");
        let docs = vec![
            parse_document(&xml1, "a").unwrap(),
            parse_document(&xml2, "b").unwrap(),
        ];
        let report = corpus_stats(&docs);
        assert_eq!(report.count(PhiCategory::Date), 2);
        assert_eq!(report.count(PhiCategory::Age), 1);
        assert_eq!(report.count(PhiCategory::Zip), 0);
        let direct: usize = docs.iter().map(|d| d.tags.len()).sum();
        assert_eq!(report.total, direct as u64);
    }

    #[test]
    fn empty_corpus_stats_are_all_zero() {
        let report = corpus_stats(std::iter::empty());
        assert_eq!(report.total, 0);
        for c in PhiCategory::ALL {
            assert_eq!(report.count(c), 0);
        }
    }

    #[test]
    fn csv_has_header_rows_and_total() {
        let xml = doc_xml("aa bb", "<AGE id=\"P0\" start=\"0\" end=\"2\" text=\"aa\"/>\n");
        let report = corpus_stats(std::iter::once(&parse_document(&xml, "a").unwrap()));
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "category,count");
        assert_eq!(lines.len(), 22); // header + 20 categories + TOTAL
        assert_eq!(*lines.last().unwrap(), "TOTAL,1");
        // ascending count order puts the one nonzero row last before TOTAL
        assert_eq!(lines[20], "AGE,1");
    }

    #[test]
    fn glob_matching() {
        assert!(matches_glob("*.xml", "a.xml"));
        assert!(!matches_glob("*.xml", "a.xml.bak"));
        assert!(matches_glob("note-*.xml", "note-0001.xml"));
        assert!(!matches_glob("note-*.xml", "other-0001.xml"));
        assert!(matches_glob("*", "anything"));
    }
}
