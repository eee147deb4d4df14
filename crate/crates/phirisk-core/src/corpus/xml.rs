//! XML layer: event parsing of the `<TEXT>`/`<TAGS>` layout and the matching
//! serializer used by the synthetic generator.

use quick_xml::events::Event;
use quick_xml::Reader;

use super::{CorpusError, RawDocument};

/// Tag element as read from the file, before category/offset validation.
pub(super) struct RawTagElement {
    pub name: String,
    pub id: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

pub(super) struct RawSections {
    pub text: String,
    pub tags: Vec<RawTagElement>,
}

/// Extracts the note body and the raw tag elements from one document.
pub(super) fn parse_sections(xml_bytes: &[u8]) -> Result<RawSections, CorpusError> {
    let source = std::str::from_utf8(xml_bytes)
        .map_err(|e| CorpusError::MalformedXml(format!("invalid utf-8: {e}")))?;
    let mut reader = Reader::from_str(source);

    let mut text: Option<String> = None;
    let mut tags: Option<Vec<RawTagElement>> = None;
    let mut in_text = false;
    let mut in_tags = false;
    let mut text_buf = String::new();

    loop {
        let event = reader
            .read_event()
            .map_err(|e| CorpusError::MalformedXml(e.to_string()))?;
        match event {
            Event::Start(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                if in_tags {
                    tags.as_mut().unwrap().push(read_tag_element(&e, name)?);
                } else if name == "TEXT" {
                    if text.is_some() {
                        return Err(CorpusError::MalformedXml(
                            "multiple <TEXT> sections".to_string(),
                        ));
                    }
                    in_text = true;
                    text_buf.clear();
                } else if name == "TAGS" {
                    if tags.is_some() {
                        return Err(CorpusError::MalformedXml(
                            "multiple <TAGS> sections".to_string(),
                        ));
                    }
                    in_tags = true;
                    tags = Some(Vec::new());
                }
            }
            Event::Empty(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                if in_tags {
                    tags.as_mut().unwrap().push(read_tag_element(&e, name)?);
                } else if name == "TAGS" {
                    // <TAGS/> — present but empty
                    if tags.is_some() {
                        return Err(CorpusError::MalformedXml(
                            "multiple <TAGS> sections".to_string(),
                        ));
                    }
                    tags = Some(Vec::new());
                }
            }
            Event::End(e) => match e.name().as_ref() {
                b"TEXT" if in_text => {
                    in_text = false;
                    text = Some(std::mem::take(&mut text_buf));
                }
                b"TAGS" => in_tags = false,
                _ => {}
            },
            Event::CData(e) => {
                if in_text {
                    text_buf.push_str(&String::from_utf8_lossy(&e.into_inner()));
                }
            }
            Event::Text(e) => {
                if in_text {
                    let piece = e
                        .unescape()
                        .map_err(|err| CorpusError::MalformedXml(err.to_string()))?;
                    text_buf.push_str(&piece);
                }
            }
            Event::Eof => {
                if in_text || in_tags {
                    return Err(CorpusError::MalformedXml(
                        "unexpected end of file inside an open section".to_string(),
                    ));
                }
                break;
            }
            _ => {}
        }
    }

    let text = text.ok_or(CorpusError::MissingSection("TEXT"))?;
    let tags = tags.ok_or(CorpusError::MissingSection("TAGS"))?;
    Ok(RawSections { text, tags })
}

fn read_tag_element(
    e: &quick_xml::events::BytesStart<'_>,
    name: String,
) -> Result<RawTagElement, CorpusError> {
    let mut id = None;
    let mut start = None;
    let mut end = None;
    let mut text = None;
    for attr in e.attributes() {
        let attr = attr.map_err(|err| CorpusError::MalformedXml(err.to_string()))?;
        let value = attr
            .unescape_value()
            .map_err(|err| CorpusError::MalformedXml(err.to_string()))?
            .into_owned();
        match attr.key.as_ref() {
            b"id" => id = Some(value),
            b"start" => start = Some(value),
            b"end" => end = Some(value),
            b"text" => text = Some(value),
            _ => {} // TYPE, comment, and anything else are ignored
        }
    }
    let id = id.ok_or_else(|| CorpusError::BadAttribute {
        tag_id: format!("<{name}>"),
        attribute: "id",
        value: "<missing>".to_string(),
    })?;
    let parse_offset = |attribute: &'static str,
                        raw: Option<String>|
     -> Result<usize, CorpusError> {
        let raw = raw.ok_or_else(|| CorpusError::BadAttribute {
            tag_id: id.clone(),
            attribute,
            value: "<missing>".to_string(),
        })?;
        raw.trim().parse::<usize>().map_err(|_| CorpusError::BadAttribute {
            tag_id: id.clone(),
            attribute,
            value: raw,
        })
    };
    let start = parse_offset("start", start)?;
    let end = parse_offset("end", end)?;
    let text = text.ok_or_else(|| CorpusError::BadAttribute {
        tag_id: id.clone(),
        attribute: "text",
        value: "<missing>".to_string(),
    })?;
    Ok(RawTagElement {
        name,
        id,
        start,
        end,
        text,
    })
}

/// Serializes a document to the same XML layout the parser consumes.
///
/// `doc.text` is assumed newline-normalized (as all parsed or generated
/// documents are); round-tripping through [`super::parse_document`] then
/// reproduces the document field for field.
pub fn serialize_document(doc: &RawDocument) -> String {
    let mut out = String::with_capacity(doc.text.len() + 256);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" ?>\n<deIdi2b2>\n<TEXT><![CDATA[");
    out.push_str(&escape_cdata(&doc.text));
    out.push_str("]]></TEXT>\n<TAGS>\n");
    for tag in &doc.tags {
        out.push_str(&format!(
            "<{cat} id=\"{id}\" start=\"{start}\" end=\"{end}\" text=\"{text}\" TYPE=\"{cat}\"/>\n",
            cat = tag.category,
            id = escape_attr(&tag.tag_id),
            start = tag.start,
            end = tag.end,
            text = escape_attr(&tag.literal),
        ));
    }
    out.push_str("</TAGS>\n</deIdi2b2>\n");
    out
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// A literal `]]>` inside the body would close the CDATA section early; the
/// standard fix is to split it across two sections.
fn escape_cdata(s: &str) -> String {
    s.replace("]]>", "]]]]><![CDATA[>")
}
