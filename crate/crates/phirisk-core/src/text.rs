//! Character-offset utilities shared by the corpus parser and the sentence
//! splitter.
//!
//! Gold tag offsets and sentence spans are *character* offsets (not bytes),
//! so slicing a `&str` by span needs a char-to-byte map.

use std::borrow::Cow;

/// Replaces CRLF and lone CR line endings with a single `\n`.
///
/// Gold offsets are interpreted against the normalized text; mixed line
/// endings would otherwise shift every offset after the first CR.
pub fn normalize_newlines(s: &str) -> Cow<'_, str> {
    if !s.contains('\r') {
        return Cow::Borrowed(s);
    }
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\r' {
            if chars.peek() == Some(&'\n') {
                chars.next();
            }
            out.push('\n');
        } else {
            out.push(c);
        }
    }
    Cow::Owned(out)
}

/// Char-offset to byte-offset map for one string, built once per document.
#[derive(Debug, Clone)]
pub struct CharIndex {
    /// `byte_at[i]` is the byte offset of character `i`; the last entry is
    /// the total byte length, so `byte_at.len() == char_len + 1`.
    byte_at: Vec<usize>,
}

impl CharIndex {
    pub fn new(text: &str) -> Self {
        let mut byte_at: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        byte_at.push(text.len());
        CharIndex { byte_at }
    }

    /// Number of characters in the indexed string.
    pub fn char_len(&self) -> usize {
        self.byte_at.len() - 1
    }

    /// Slices `text` by character span `[start, end)`. Returns `None` when
    /// the span is out of bounds or inverted. `text` must be the string the
    /// index was built from.
    pub fn slice<'a>(&self, text: &'a str, start: usize, end: usize) -> Option<&'a str> {
        if start > end || end > self.char_len() {
            return None;
        }
        Some(&text[self.byte_at[start]..self.byte_at[end]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_handles_all_three_endings() {
        assert_eq!(normalize_newlines("a\r\nb\rc\nd"), "a\nb\nc\nd");
        assert_eq!(normalize_newlines("plain"), "plain");
        assert_eq!(normalize_newlines("\r\r\n"), "\n\n");
    }

    #[test]
    fn char_index_slices_multibyte_text() {
        let text = "aé日b";
        let idx = CharIndex::new(text);
        assert_eq!(idx.char_len(), 4);
        assert_eq!(idx.slice(text, 0, 2), Some("aé"));
        assert_eq!(idx.slice(text, 1, 3), Some("é日"));
        assert_eq!(idx.slice(text, 4, 4), Some(""));
        assert_eq!(idx.slice(text, 3, 5), None);
        assert_eq!(idx.slice(text, 2, 1), None);
    }
}
