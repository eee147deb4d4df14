//! Offset-preserving sentence segmentation and risk labeling.
//!
//! Splitting is a fixed deterministic rule set rather than a statistical
//! model, so identical text yields identical spans on every platform:
//!
//! (a) a sentence ends at `.`, `!`, or `?` followed by whitespace and then an
//!     uppercase letter, a digit, or end of text;
//! (b) a blank line (two newlines with only spaces/tabs between) always ends
//!     a sentence;
//! (c) a fixed abbreviation list (`Dr`, `Mr`, `Mrs`, `Ms`, `St`, `vs`,
//!     `e.g`, `i.e`, `pt`, `hx`, `yo`, and single capital letters)
//!     suppresses rule (a) at a `.`;
//! (d) a short line ending in `:` (a section header) is its own sentence.
//!
//! Spans are trimmed to their non-whitespace extent; whitespace-only
//! candidates are dropped.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{PhiCategory, RawDocument};
use crate::text::CharIndex;

/// Abbreviations that suppress a sentence break at a following period.
const ABBREVIATIONS: [&str; 9] = ["dr", "mr", "mrs", "ms", "st", "vs", "pt", "hx", "yo"];
const DOTTED_ABBREVIATIONS: [&str; 2] = ["e.g", "i.e"];
/// Maximum trimmed length for a line to qualify as a section header.
const HEADER_MAX_CHARS: usize = 60;

/// A gold tag reduced to what labeling and downstream reporting need.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSpan {
    pub category: PhiCategory,
    pub start: usize,
    pub end: usize,
}

/// One sentence with its overlapping gold tags and binary risk label.
///
/// `label` is 1 (high risk) exactly when `tags` is non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub doc_id: String,
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub label: u8,
    pub tags: Vec<TagSpan>,
}

/// Sentence counts by label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub low: usize,
    pub high: usize,
    pub total: usize,
}

/// Splits text into sentence spans (character offsets, end exclusive).
///
/// Spans are disjoint, sorted, and cover every non-whitespace character.
pub fn split_sentences(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let mut spans = Vec::new();
    for (seg_start, seg_end, is_header) in segments(&chars) {
        if is_header {
            push_trimmed(&chars, seg_start, seg_end, &mut spans);
            continue;
        }
        let mut sent_start = seg_start;
        let mut i = seg_start;
        while i < seg_end {
            let c = chars[i];
            if (c == '.' || c == '!' || c == '?') && !(c == '.' && dot_suppressed(&chars, i, seg_start)) {
                if let Some(next_start) = boundary_after(&chars, i, seg_end) {
                    push_trimmed(&chars, sent_start, i + 1, &mut spans);
                    sent_start = next_start;
                    i = next_start;
                    continue;
                }
            }
            i += 1;
        }
        push_trimmed(&chars, sent_start, seg_end, &mut spans);
    }
    spans
}

/// Line-level pass: blank lines split the text into segments and header
/// lines become their own segments (rules (b) and (d)).
fn segments(chars: &[char]) -> Vec<(usize, usize, bool)> {
    #[derive(PartialEq)]
    enum Kind {
        Blank,
        Header,
        Normal,
    }
    let mut lines: Vec<(usize, usize, Kind)> = Vec::new();
    let mut line_start = 0;
    for pos in 0..=chars.len() {
        if pos == chars.len() || chars[pos] == '\n' {
            let (ls, le) = (line_start, pos);
            let mut t0 = ls;
            let mut t1 = le;
            while t0 < t1 && chars[t0].is_whitespace() {
                t0 += 1;
            }
            while t1 > t0 && chars[t1 - 1].is_whitespace() {
                t1 -= 1;
            }
            let kind = if t0 == t1 {
                Kind::Blank
            } else if t1 - t0 <= HEADER_MAX_CHARS && chars[t1 - 1] == ':' {
                Kind::Header
            } else {
                Kind::Normal
            };
            if pos == chars.len() && ls == le && !lines.is_empty() {
                break; // no trailing empty line after a final newline
            }
            lines.push((ls, le, kind));
            line_start = pos + 1;
        }
    }

    let mut segs = Vec::new();
    let mut open: Option<(usize, usize)> = None;
    for (ls, le, kind) in lines {
        match kind {
            Kind::Normal => {
                open = match open {
                    Some((s, _)) => Some((s, le)),
                    None => Some((ls, le)),
                };
            }
            Kind::Blank | Kind::Header => {
                if let Some((s, e)) = open.take() {
                    segs.push((s, e, false));
                }
                if kind == Kind::Header {
                    segs.push((ls, le, true));
                }
            }
        }
    }
    if let Some((s, e)) = open {
        segs.push((s, e, false));
    }
    segs
}

/// Rule (a) lookahead at terminator position `i`: returns the start of the
/// next sentence when a boundary fires here.
fn boundary_after(chars: &[char], i: usize, seg_end: usize) -> Option<usize> {
    let mut k = i + 1;
    if k >= seg_end {
        return Some(seg_end); // terminator at segment end
    }
    if !chars[k].is_whitespace() {
        return None;
    }
    while k < seg_end && chars[k].is_whitespace() {
        k += 1;
    }
    if k >= seg_end {
        return Some(seg_end); // only whitespace remains
    }
    if chars[k].is_uppercase() || chars[k].is_ascii_digit() {
        Some(k)
    } else {
        None
    }
}

/// Rule (c): abbreviation check for the token immediately before a period.
fn dot_suppressed(chars: &[char], i: usize, seg_start: usize) -> bool {
    let mut w = i;
    while w > seg_start && chars[w - 1].is_alphabetic() {
        w -= 1;
    }
    let run_len = i - w;
    if run_len == 1 && chars[w].is_uppercase() {
        return true; // single capital letter, e.g. a middle initial
    }
    if run_len > 0 && (w == seg_start || !chars[w - 1].is_alphanumeric()) {
        let token: String = chars[w..i].iter().collect::<String>().to_lowercase();
        if ABBREVIATIONS.contains(&token.as_str()) {
            return true;
        }
    }
    // dotted forms: scan back across letters and periods for e.g / i.e
    let mut v = i;
    while v > seg_start && (chars[v - 1].is_alphabetic() || chars[v - 1] == '.') {
        v -= 1;
    }
    let dotted: String = chars[v..i].iter().collect::<String>().to_lowercase();
    let dotted = dotted.trim_start_matches('.');
    DOTTED_ABBREVIATIONS.contains(&dotted)
}

fn push_trimmed(chars: &[char], mut start: usize, mut end: usize, out: &mut Vec<(usize, usize)>) {
    while start < end && chars[start].is_whitespace() {
        start += 1;
    }
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    if start < end {
        out.push((start, end));
    }
}

/// Splits a document into sentences and attaches every gold tag to each
/// sentence whose span it intersects; partial overlap counts, so a tag cut
/// by the splitter marks both fragments high risk.
pub fn label_sentences(doc: &RawDocument) -> Vec<SentenceRecord> {
    let index = CharIndex::new(&doc.text);
    split_sentences(&doc.text)
        .into_iter()
        .enumerate()
        .map(|(i, (start, end))| {
            let tags: Vec<TagSpan> = doc
                .tags
                .iter()
                .filter(|t| t.start < end && start < t.end)
                .map(|t| TagSpan {
                    category: t.category,
                    start: t.start,
                    end: t.end,
                })
                .collect();
            SentenceRecord {
                doc_id: doc.doc_id.clone(),
                index: i,
                start,
                end,
                text: index
                    .slice(&doc.text, start, end)
                    .expect("splitter spans are in bounds")
                    .to_string(),
                label: u8::from(!tags.is_empty()),
                tags,
            }
        })
        .collect()
}

/// Labels a whole corpus; documents are processed in parallel and records
/// come back in `(doc order, sentence index)` order.
pub fn label_corpus(docs: &[RawDocument]) -> Vec<SentenceRecord> {
    docs.par_iter().map(label_sentences).flatten().collect()
}

/// Counts records by label.
pub fn corpus_label_summary(records: &[SentenceRecord]) -> LabelSummary {
    let high = records.iter().filter(|r| r.label == 1).count();
    LabelSummary {
        low: records.len() - high,
        high,
        total: records.len(),
    }
}

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Record {
        line: usize,
        source: serde_json::Error,
    },
}

/// JSON Lines serialization of sentence records, one object per line.
pub mod jsonl {
    use std::io::{BufRead, Write};

    use super::{JsonlError, SentenceRecord};

    pub fn write_records<W: Write>(mut w: W, records: &[SentenceRecord]) -> Result<(), JsonlError> {
        for r in records {
            serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_records<R: BufRead>(r: R) -> Result<Vec<SentenceRecord>, JsonlError> {
        let mut out = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: SentenceRecord =
                serde_json::from_str(&line).map_err(|source| JsonlError::Record {
                    line: i + 1,
                    source,
                })?;
            out.push(record);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PhiTag;
    use proptest::prelude::*;

    fn spans_text(text: &str) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        split_sentences(text)
            .iter()
            .map(|&(s, e)| chars[s..e].iter().collect())
            .collect()
    }

    #[test]
    fn two_plain_sentences() {
        assert_eq!(
            spans_text("The patient is well. Follow up in 2 weeks."),
            vec!["The patient is well.", "Follow up in 2 weeks."]
        );
    }

    #[test]
    fn empty_and_whitespace_only_text_yield_nothing() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("  \n\n\t \n ").is_empty());
    }

    #[test]
    fn terminator_variants_split() {
        assert_eq!(
            spans_text("Any pain today? No! Resting now."),
            vec!["Any pain today?", "No!", "Resting now."]
        );
    }

    #[test]
    fn lowercase_after_period_does_not_split() {
        assert_eq!(
            spans_text("Dose was 2.5 mg. twice daily thereafter."),
            vec!["Dose was 2.5 mg. twice daily thereafter."]
        );
    }

    #[test]
    fn digit_after_period_splits() {
        assert_eq!(
            spans_text("Repeat in a week. 2 tabs nightly."),
            vec!["Repeat in a week.", "2 tabs nightly."]
        );
    }

    #[test]
    fn abbreviations_suppress_the_break() {
        assert_eq!(
            spans_text("Seen by Dr. Zorblatt today. Plan unchanged."),
            vec!["Seen by Dr. Zorblatt today.", "Plan unchanged."]
        );
        assert_eq!(
            spans_text("Compare vs. Tuesday results."),
            vec!["Compare vs. Tuesday results."]
        );
        assert_eq!(
            spans_text("Stable e.g. Monday and i.e. Friday."),
            vec!["Stable e.g. Monday and i.e. Friday."]
        );
    }

    #[test]
    fn single_capital_initial_is_suppressed() {
        assert_eq!(
            spans_text("Noted by J. Q. Vexley at bedside."),
            vec!["Noted by J. Q. Vexley at bedside."]
        );
    }

    #[test]
    fn non_abbreviation_word_still_splits() {
        assert_eq!(
            spans_text("Levels were stable. Trend is fine."),
            vec!["Levels were stable.", "Trend is fine."]
        );
    }

    #[test]
    fn blank_line_always_ends_a_sentence() {
        assert_eq!(
            spans_text("no terminator here\n\nNext paragraph."),
            vec!["no terminator here", "Next paragraph."]
        );
        // blank line with intervening spaces
        assert_eq!(
            spans_text("alpha beta\n   \ngamma delta"),
            vec!["alpha beta", "gamma delta"]
        );
    }

    #[test]
    fn single_newline_does_not_split_without_terminator() {
        assert_eq!(
            spans_text("wrapped line\ncontinues here."),
            vec!["wrapped line\ncontinues here."]
        );
    }

    #[test]
    fn section_header_is_its_own_sentence() {
        assert_eq!(
            spans_text("ASSESSMENT AND PLAN:\nDoing well. Home tomorrow."),
            vec!["ASSESSMENT AND PLAN:", "Doing well.", "Home tomorrow."]
        );
    }

    #[test]
    fn long_line_ending_in_colon_is_not_a_header() {
        let long = "x".repeat(70) + ":";
        let text = format!("{long}\nnext line here.");
        assert_eq!(spans_text(&text), vec![format!("{long}\nnext line here.")]);
    }

    fn doc(text: &str, tags: Vec<PhiTag>) -> RawDocument {
        RawDocument {
            doc_id: "d".to_string(),
            text: text.to_string(),
            tags,
        }
    }

    fn tag(category: PhiCategory, start: usize, end: usize) -> PhiTag {
        PhiTag {
            tag_id: format!("P{start}"),
            category,
            start,
            end,
            literal: String::new(),
        }
    }

    #[test]
    fn contained_tag_labels_high() {
        // sentence [0, 30) containing a DATE tag at [10, 20)
        let text = "Admitted: 2142-07-19 to ward. Stable overnight.";
        let d = doc(text, vec![tag(PhiCategory::Date, 10, 20)]);
        let records = label_sentences(&d);
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].label, 1);
        assert_eq!(records[0].tags.len(), 1);
        assert_eq!(records[1].label, 0);
        assert!(records[1].tags.is_empty());
    }

    #[test]
    fn straddling_tag_marks_both_sentences_high() {
        // two sentences; a tag crossing the boundary overlaps both
        let text = "First sentence ends now. Second one follows here.";
        let spans = split_sentences(text);
        assert_eq!(spans.len(), 2);
        let t = tag(PhiCategory::Idnum, spans[0].1 - 3, spans[1].0 + 3);
        let d = doc(text, vec![t]);
        let records = label_sentences(&d);
        assert_eq!(records[0].label, 1);
        assert_eq!(records[1].label, 1);
    }

    #[test]
    fn empty_document_yields_no_records() {
        assert!(label_sentences(&doc("", vec![])).is_empty());
    }

    #[test]
    fn label_summary_counts() {
        let text = "Admitted: 2142-07-19 to ward. Stable overnight.";
        let d = doc(text, vec![tag(PhiCategory::Date, 10, 20)]);
        let records = label_sentences(&d);
        let summary = corpus_label_summary(&records);
        assert_eq!((summary.low, summary.high, summary.total), (1, 1, 2));
        assert_eq!(
            corpus_label_summary(&[]),
            LabelSummary {
                low: 0,
                high: 0,
                total: 0
            }
        );
    }

    #[test]
    fn jsonl_round_trips_and_orders_fields() {
        let text = "Admitted: 2142-07-19 to ward. Stable overnight.";
        let d = doc(text, vec![tag(PhiCategory::Date, 10, 20)]);
        let records = label_sentences(&d);
        let mut buf = Vec::new();
        jsonl::write_records(&mut buf, &records).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        let first = line.lines().next().unwrap();
        assert!(first.starts_with("{\"doc_id\":"));
        assert!(first.contains("\"label\":1"));
        assert!(first.contains("\"category\":\"DATE\""));
        let back = jsonl::read_records(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, records);
    }

    /// Simple generator of note-ish text: words, terminators, newlines.
    fn note_text() -> impl Strategy<Value = String> {
        let word = prop::sample::select(vec![
            "alpha", "beta", "Gamma", "delta", "Dr", "mg", "St", "e.g", "B", "2142", "ward",
            "stable", "plan", "X",
        ]);
        let sep = prop::sample::select(vec![
            " ", ". ", "! ", "? ", ".\n", "\n", "\n\n", " \n \n", ": ", ":\n", ". ",
        ]);
        prop::collection::vec((word, sep), 0..40).prop_map(|pairs| {
            let mut s = String::new();
            for (w, p) in pairs {
                s.push_str(w);
                s.push_str(p);
            }
            s
        })
    }

    proptest! {
        /// Coverage invariant: spans are disjoint, sorted, and account for
        /// every non-whitespace character; gaps are whitespace only.
        #[test]
        fn spans_cover_exactly_the_non_whitespace(text in note_text()) {
            let chars: Vec<char> = text.chars().collect();
            let spans = split_sentences(&text);
            let mut prev_end = 0usize;
            for &(s, e) in &spans {
                prop_assert!(s < e);
                prop_assert!(s >= prev_end);
                prop_assert!(e <= chars.len());
                // gap before this span is pure whitespace
                for i in prev_end..s {
                    prop_assert!(chars[i].is_whitespace());
                }
                // span edges are non-whitespace (trimmed)
                prop_assert!(!chars[s].is_whitespace());
                prop_assert!(!chars[e - 1].is_whitespace());
                prev_end = e;
            }
            for i in prev_end..chars.len() {
                prop_assert!(chars[i].is_whitespace());
            }
        }

        /// Determinism: same text, same spans.
        #[test]
        fn splitting_is_deterministic(text in note_text()) {
            prop_assert_eq!(split_sentences(&text), split_sentences(&text));
        }

        /// Monotonicity: adding a tag never flips a sentence high -> low.
        #[test]
        fn adding_a_tag_never_lowers_risk(text in note_text(), extra_start in 0usize..60) {
            let n = text.chars().count();
            prop_assume!(n >= 2);
            let start = extra_start % (n - 1);
            let base = doc(&text, vec![]);
            let before = label_sentences(&base);
            let mut tags = vec![tag(PhiCategory::Zip, start, start + 1)];
            tags.sort_by_key(|t| (t.start, t.end));
            let with_tag = doc(&text, tags);
            let after = label_sentences(&with_tag);
            prop_assert_eq!(before.len(), after.len());
            for (b, a) in before.iter().zip(after.iter()) {
                prop_assert!(a.label >= b.label);
            }
        }
    }
}
