//! Sectioned paper documents and figure-mention lookup.
//!
//! Input papers use a small XML dialect:
//!
//! ```xml
//! <article doi="10.5555/example.001">
//!   <figure id="Fig. 2" panels="a,b" graphic="fig2.png">
//!     <caption>Fig. 2. (a) Voltage profiles. (b) Cycling performance at 0.5C.</caption>
//!   </figure>
//!   <section type="result"><p id="r1">As shown in Fig. 2b ...</p></section>
//!   <section type="method"><p id="m1">The electrolyte was ...</p></section>
//! </article>
//! ```
//!
//! Sections whose `type` is `method`, `methods`, `experimental` or
//! `materials and methods` produce method paragraphs; every other body section
//! produces result paragraphs.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("malformed markup: {0}")]
    MalformedMarkup(String),
    #[error("document has no DOI")]
    MissingDoi,
    #[error("figure {figure_id:?} does not appear in document {doi}")]
    UnknownFigure { doi: String, figure_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Result,
    Method,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub id: String,
    pub section: Section,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caption {
    pub figure_id: String,
    pub panel_labels: Vec<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FigureRef {
    pub figure_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graphic: Option<String>,
}

/// Identifies one graph panel inside a paper. An empty `panel_label` means
/// the figure has no panel letters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphMetadata {
    pub doi: String,
    pub figure_id: String,
    pub panel_label: String,
}

impl GraphMetadata {
    pub fn new(doi: impl Into<String>, figure_id: impl Into<String>, panel: impl Into<String>) -> Self {
        Self { doi: doi.into(), figure_id: figure_id.into(), panel_label: panel.into() }
    }

    /// File-name friendly key, e.g. `10.5555_x.001__fig2b`.
    pub fn file_stem(&self) -> String {
        let fig = figure_number(&self.figure_id)
            .unwrap_or_else(|| self.figure_id.chars().filter(|c| c.is_ascii_alphanumeric()).collect());
        format!("{}__fig{}{}", doi_to_file_stem(&self.doi), fig.to_ascii_lowercase(), self.panel_label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doi: String,
    pub captions: Vec<Caption>,
    pub result_paragraphs: Vec<Paragraph>,
    pub method_paragraphs: Vec<Paragraph>,
    pub figures: Vec<FigureRef>,
}

impl Document {
    pub fn caption(&self, figure_id: &str) -> Option<&Caption> {
        let wanted = figure_number(figure_id)?;
        self.captions.iter().find(|c| figure_number(&c.figure_id).as_deref() == Some(wanted.as_str()))
    }

    pub fn paragraph(&self, id: &str) -> Option<&Paragraph> {
        self.result_paragraphs.iter().chain(&self.method_paragraphs).find(|p| p.id == id)
    }

    /// Canonical JSON form with stable key order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    /// Re-emits the document in the fixture dialect.
    pub fn to_markup(&self) -> String {
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        out.push_str(&format!("<article doi=\"{}\">\n", escape(self.doi.as_str())));
        for fig in &self.figures {
            let caption = self.captions.iter().find(|c| c.figure_id == fig.figure_id);
            out.push_str(&format!("  <figure id=\"{}\"", escape(fig.figure_id.as_str())));
            if let Some(c) = caption {
                out.push_str(&format!(" panels=\"{}\"", c.panel_labels.join(",")));
            }
            if let Some(g) = &fig.graphic {
                out.push_str(&format!(" graphic=\"{}\"", escape(g.as_str())));
            }
            out.push_str(">\n");
            if let Some(c) = caption {
                out.push_str(&format!("    <caption>{}</caption>\n", escape(c.text.as_str())));
            }
            out.push_str("  </figure>\n");
        }
        for (kind, paras) in [("result", &self.result_paragraphs), ("method", &self.method_paragraphs)] {
            if paras.is_empty() {
                continue;
            }
            out.push_str(&format!("  <section type=\"{kind}\">\n"));
            for p in paras {
                out.push_str(&format!("    <p id=\"{}\">{}</p>\n", escape(p.id.as_str()), escape(p.text.as_str())));
            }
            out.push_str("  </section>\n");
        }
        out.push_str("</article>\n");
        out
    }
}

/// A publisher markup dialect that can be turned into a [`Document`].
pub trait MarkupDialect {
    fn parse(&self, raw: &str, doi: &str) -> Result<Document, CorpusError>;
}

/// The bundled fixture dialect described in the module docs.
#[derive(Debug, Default, Clone, Copy)]
pub struct FixtureDialect;

impl MarkupDialect for FixtureDialect {
    fn parse(&self, raw: &str, doi: &str) -> Result<Document, CorpusError> {
        parse_fixture(raw, doi)
    }
}

pub fn parse_document(raw: &str, doi: &str) -> Result<Document, CorpusError> {
    FixtureDialect.parse(raw, doi)
}

/// `10.5555/abc.1` -> `10.5555_abc.1`
pub fn doi_to_file_stem(doi: &str) -> String {
    doi.replace('/', "_")
}

/// Inverse of [`doi_to_file_stem`]. DOI prefixes never contain `_`, so only
/// the first underscore is restored.
pub fn file_stem_to_doi(stem: &str) -> String {
    stem.replacen('_', "/", 1)
}

pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

enum Open {
    Figure,
    Caption,
    Section(Section),
    Paragraph,
    Other,
}

struct PendingFigure {
    id: String,
    panels: Option<Vec<String>>,
    graphic: Option<String>,
    caption: Option<String>,
}

fn attr(e: &BytesStart<'_>, name: &str) -> Result<Option<String>, CorpusError> {
    for a in e.attributes() {
        let a = a.map_err(|err| CorpusError::MalformedMarkup(err.to_string()))?;
        if a.key.as_ref() == name.as_bytes() {
            let v = a.unescape_value().map_err(|err| CorpusError::MalformedMarkup(err.to_string()))?;
            return Ok(Some(v.into_owned()));
        }
    }
    Ok(None)
}

fn section_kind(kind: Option<&str>) -> Section {
    match kind.map(|k| normalize_whitespace(k).to_lowercase()).as_deref() {
        Some("method" | "methods" | "experimental" | "experimental section" | "materials and methods") => {
            Section::Method
        }
        _ => Section::Result,
    }
}

fn parse_fixture(raw: &str, doi_arg: &str) -> Result<Document, CorpusError> {
    let mut reader = Reader::from_str(raw);
    reader.config_mut().check_end_names = true;

    let mut stack: Vec<Open> = Vec::new();
    let mut saw_article = false;
    let mut article_doi: Option<String> = None;
    let mut figures: Vec<PendingFigure> = Vec::new();
    let mut results = Vec::new();
    let mut methods = Vec::new();
    let mut text_buf = String::new();
    let mut para_id: Option<String> = None;
    let mut para_section = Section::Result;

    loop {
        let event = reader
            .read_event()
            .map_err(|e| CorpusError::MalformedMarkup(format!("at byte {}: {e}", reader.buffer_position())))?;
        match event {
            Event::Start(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).to_string();
                let in_text = matches!(stack.last(), Some(Open::Caption | Open::Paragraph));
                let open = match name.as_str() {
                    _ if in_text => Open::Other,
                    "article" => {
                        if saw_article {
                            return Err(CorpusError::MalformedMarkup("nested <article>".into()));
                        }
                        saw_article = true;
                        article_doi = attr(&e, "doi")?;
                        Open::Other
                    }
                    "figure" => {
                        let id = attr(&e, "id")?
                            .ok_or_else(|| CorpusError::MalformedMarkup("<figure> without id".into()))?;
                        let panels = attr(&e, "panels")?
                            .map(|p| p.split(',').map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()).collect());
                        figures.push(PendingFigure {
                            id: normalize_whitespace(&id),
                            panels,
                            graphic: attr(&e, "graphic")?,
                            caption: None,
                        });
                        Open::Figure
                    }
                    "caption" => {
                        if !matches!(stack.last(), Some(Open::Figure)) {
                            return Err(CorpusError::MalformedMarkup("<caption> outside <figure>".into()));
                        }
                        text_buf.clear();
                        Open::Caption
                    }
                    "section" => Open::Section(section_kind(attr(&e, "type")?.as_deref())),
                    "p" => {
                        para_section = stack
                            .iter()
                            .rev()
                            .find_map(|o| match o {
                                Open::Section(s) => Some(*s),
                                _ => None,
                            })
                            .unwrap_or(Section::Result);
                        para_id = attr(&e, "id")?;
                        text_buf.clear();
                        Open::Paragraph
                    }
                    _ => Open::Other,
                };
                stack.push(open);
            }
            Event::End(_) => {
                let open = stack.pop().ok_or_else(|| CorpusError::MalformedMarkup("unbalanced end tag".into()))?;
                match open {
                    Open::Caption => {
                        let fig = figures.last_mut().expect("caption is inside a figure");
                        fig.caption = Some(normalize_whitespace(&text_buf));
                    }
                    Open::Paragraph => {
                        let text = normalize_whitespace(&text_buf);
                        if !text.is_empty() {
                            let list = match para_section {
                                Section::Result => &mut results,
                                Section::Method => &mut methods,
                            };
                            let id = para_id.take().unwrap_or_else(|| {
                                let prefix = match para_section {
                                    Section::Result => "result",
                                    Section::Method => "method",
                                };
                                format!("{prefix}-{}", list.len() + 1)
                            });
                            list.push(Paragraph { id, section: para_section, text });
                        }
                    }
                    _ => {}
                }
            }
            Event::Empty(e) => {
                if e.name().as_ref() == b"figure" {
                    let id =
                        attr(&e, "id")?.ok_or_else(|| CorpusError::MalformedMarkup("<figure> without id".into()))?;
                    figures.push(PendingFigure {
                        id: normalize_whitespace(&id),
                        panels: None,
                        graphic: attr(&e, "graphic")?,
                        caption: None,
                    });
                } else if matches!(stack.last(), Some(Open::Caption | Open::Paragraph)) {
                    // <br/> and friends inside running text
                    text_buf.push(' ');
                }
            }
            Event::Text(t) => {
                if matches!(stack.last(), Some(Open::Caption | Open::Paragraph))
                    || stack.iter().any(|o| matches!(o, Open::Caption | Open::Paragraph))
                {
                    let s = t.unescape().map_err(|e| CorpusError::MalformedMarkup(e.to_string()))?;
                    text_buf.push_str(&s);
                }
            }
            Event::CData(t) => {
                if stack.iter().any(|o| matches!(o, Open::Caption | Open::Paragraph)) {
                    text_buf.push_str(&String::from_utf8_lossy(&t));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }

    if !stack.is_empty() {
        return Err(CorpusError::MalformedMarkup("unexpected end of input".into()));
    }
    if !saw_article {
        return Err(CorpusError::MalformedMarkup("no <article> element".into()));
    }

    let doi = if doi_arg.trim().is_empty() { article_doi.unwrap_or_default() } else { doi_arg.trim().to_string() };
    if doi.trim().is_empty() {
        return Err(CorpusError::MissingDoi);
    }

    let mut seen_figs = BTreeSet::new();
    let mut captions = Vec::new();
    let mut figure_refs = Vec::new();
    for fig in figures {
        if !seen_figs.insert(fig.id.clone()) {
            return Err(CorpusError::MalformedMarkup(format!("duplicate figure id {:?}", fig.id)));
        }
        if let Some(text) = fig.caption {
            let mut panels = fig.panels.unwrap_or_else(|| panels_in_caption(&text));
            let mut seen = BTreeSet::new();
            panels.retain(|p| seen.insert(p.clone()));
            captions.push(Caption { figure_id: fig.id.clone(), panel_labels: panels, text });
        }
        figure_refs.push(FigureRef { figure_id: fig.id, graphic: fig.graphic });
    }

    let mut ids = BTreeSet::new();
    for p in results.iter().chain(&methods) {
        if !ids.insert(p.id.as_str()) {
            return Err(CorpusError::MalformedMarkup(format!("duplicate paragraph id {:?}", p.id)));
        }
    }

    Ok(Document { doi, captions, result_paragraphs: results, method_paragraphs: methods, figures: figure_refs })
}

static CAPTION_PANEL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(([a-z])\)").unwrap());

fn panels_in_caption(text: &str) -> Vec<String> {
    CAPTION_PANEL.captures_iter(text).map(|c| c[1].to_string()).collect()
}

static FIG_NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bfig(?:ure)?s?\b\.?\s*(s?\d+)").unwrap());

/// Figure number of an id such as `"Fig. 3"` or `"Figure S2"`, upper-cased.
pub fn figure_number(figure_id: &str) -> Option<String> {
    if let Some(c) = FIG_NUMBER.captures(figure_id) {
        return Some(c[1].to_uppercase());
    }
    let t = figure_id.trim();
    if !t.is_empty() && t.chars().all(|c| c.is_ascii_alphanumeric()) {
        return Some(t.to_uppercase());
    }
    None
}

/// One normalized figure reference found in running text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FigureMention {
    pub number: String,
    /// Empty when the mention names no panel.
    pub panels: Vec<String>,
}

/// Finds all figure mentions in `text`, e.g. `Fig. 3a`, `Figure 3(a)`,
/// `FIG 3(A)`, `Fig. 2a-c`, `Fig. 4`.
pub fn figure_mentions(text: &str) -> Vec<FigureMention> {
    FIG_NUMBER
        .captures_iter(text)
        .map(|c| {
            let m = c.get(1).unwrap();
            FigureMention { number: m.as_str().to_uppercase(), panels: parse_panel_suffix(&text[m.end()..]) }
        })
        .collect()
}

fn expand_range(a: char, b: char, out: &mut Vec<String>) {
    if a <= b && (b as u32 - a as u32) < 26 {
        for c in a..=b {
            out.push(c.to_string());
        }
    } else {
        out.push(a.to_string());
        out.push(b.to_string());
    }
}

fn parse_panel_suffix(rest: &str) -> Vec<String> {
    let chars: Vec<char> = rest.chars().collect();
    let mut i = 0;
    let mut panels = Vec::new();
    let letter_at = |i: usize| -> Option<char> {
        let c = *chars.get(i)?;
        if c.is_ascii_alphabetic() && !chars.get(i + 1).is_some_and(|n| n.is_alphabetic()) {
            Some(c.to_ascii_lowercase())
        } else {
            None
        }
    };
    let skip_spaces = |mut i: usize| {
        while chars.get(i).is_some_and(|c| *c == ' ') {
            i += 1;
        }
        i
    };

    let j = skip_spaces(0);
    if chars.get(j) == Some(&'(') {
        // parenthesized list: (a), (a,b), (a-c), (a and b)
        let close = match chars[j..].iter().position(|c| *c == ')') {
            Some(p) => j + p,
            None => return Vec::new(),
        };
        let inner: String = chars[j + 1..close].iter().collect();
        let inner = inner.to_lowercase().replace(" and ", ",").replace('&', ",");
        for part in inner.split(',') {
            let part = part.trim();
            let pieces: Vec<&str> = part.split(['-', '–', '—']).map(str::trim).collect();
            let single = |s: &str| {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) if c.is_ascii_alphabetic() => Some(c),
                    _ => None,
                }
            };
            match pieces.as_slice() {
                [one] => match single(one) {
                    Some(c) => panels.push(c.to_string()),
                    None => return Vec::new(),
                },
                [a, b] => match (single(a), single(b)) {
                    (Some(a), Some(b)) => expand_range(a, b, &mut panels),
                    _ => return Vec::new(),
                },
                _ => return Vec::new(),
            }
        }
        return panels;
    }

    // attached letters: 3a, 3a,b, 3a-c, 3a and b
    let Some(first) = letter_at(i) else {
        return panels;
    };
    panels.push(first.to_string());
    i += 1;
    loop {
        let k = skip_spaces(i);
        let (sep_end, is_range) = match chars.get(k) {
            Some(',') | Some('&') => (k + 1, false),
            Some('-') | Some('–') | Some('—') => (k + 1, true),
            Some('a') if chars.get(k + 1) == Some(&'n') && chars.get(k + 2) == Some(&'d') && k > i => (k + 3, false),
            _ => break,
        };
        let n = skip_spaces(sep_end);
        let Some(c) = letter_at(n) else { break };
        if is_range {
            let start = panels.pop().unwrap().chars().next().unwrap();
            expand_range(start, c, &mut panels);
        } else {
            panels.push(c.to_string());
        }
        i = n + 1;
    }
    panels
}

/// Ids of result paragraphs that mention the figure panel in `meta`, in
/// document order. A mention without a panel letter matches every panel of
/// that figure.
pub fn locate_related_paragraphs(doc: &Document, meta: &GraphMetadata) -> Result<Vec<String>, CorpusError> {
    let unknown = || CorpusError::UnknownFigure { doi: doc.doi.clone(), figure_id: meta.figure_id.clone() };
    let number = figure_number(&meta.figure_id).ok_or_else(unknown)?;
    if doc.caption(&meta.figure_id).is_none()
        && !doc.figures.iter().any(|f| figure_number(&f.figure_id).as_deref() == Some(number.as_str()))
    {
        return Err(unknown());
    }
    let panel = meta.panel_label.to_lowercase();
    Ok(doc
        .result_paragraphs
        .iter()
        .filter(|p| {
            figure_mentions(&p.text)
                .iter()
                .any(|m| m.number == number && (m.panels.is_empty() || panel.is_empty() || m.panels.contains(&panel)))
        })
        .map(|p| p.id.clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"<?xml version="1.0"?>
<article doi="10.5555/t.1">
  <figure id="Fig. 3" panels="a,b"><caption>Fig. 3. (a) SEM. (b) Cycling at 1C.</caption></figure>
  <section type="results">
    <p id="r1">Nothing here.</p>
    <p id="r2">Figure 3a shows cycling.</p>
    <p id="r3">As summarized in Fig. 3, the cells differ.</p>
  </section>
</article>"#;

    #[test]
    fn direct_panel_mention() {
        let doc = parse_document(SMALL, "").unwrap();
        let meta = GraphMetadata::new("10.5555/t.1", "Fig. 3", "a");
        assert_eq!(locate_related_paragraphs(&doc, &meta).unwrap(), ["r2", "r3"]);
    }

    #[test]
    fn other_panel_only_gets_panelless_mentions() {
        let doc = parse_document(SMALL, "").unwrap();
        let meta = GraphMetadata::new("10.5555/t.1", "Fig. 3", "b");
        assert_eq!(locate_related_paragraphs(&doc, &meta).unwrap(), ["r3"]);
    }

    #[test]
    fn unknown_figure() {
        let doc = parse_document(SMALL, "").unwrap();
        let meta = GraphMetadata::new("10.5555/t.1", "Fig. 9", "a");
        assert!(matches!(locate_related_paragraphs(&doc, &meta), Err(CorpusError::UnknownFigure { .. })));
    }

    #[test]
    fn no_method_sections() {
        let doc = parse_document(SMALL, "").unwrap();
        assert!(doc.method_paragraphs.is_empty());
        assert_eq!(doc.result_paragraphs.len(), 3);
    }

    #[test]
    fn truncated_input_is_malformed() {
        let cut = &SMALL[..SMALL.len() - 40];
        assert!(matches!(parse_document(cut, ""), Err(CorpusError::MalformedMarkup(_))));
    }

    #[test]
    fn missing_doi() {
        let raw = "<article><section><p>x</p></section></article>";
        assert_eq!(parse_document(raw, ""), Err(CorpusError::MissingDoi));
        assert!(parse_document(raw, "10.5555/given").is_ok());
    }

    #[test]
    fn duplicate_paragraph_ids_rejected() {
        let raw = r#"<article doi="d"><section><p id="x">a</p><p id="x">b</p></section></article>"#;
        assert!(matches!(parse_document(raw, ""), Err(CorpusError::MalformedMarkup(_))));
    }

    #[test]
    fn panels_fall_back_to_caption_letters() {
        let raw = r#"<article doi="d"><figure id="Fig. 1"><caption>(a) x (b) y (a) z</caption></figure></article>"#;
        let doc = parse_document(raw, "").unwrap();
        assert_eq!(doc.captions[0].panel_labels, ["a", "b"]);
    }

    #[test]
    fn inline_markup_is_flattened() {
        let raw =
            r#"<article doi="d"><section type="method"><p id="m">1 M LiPF<sub>6</sub> in   EC</p></section></article>"#;
        let doc = parse_document(raw, "").unwrap();
        assert_eq!(doc.method_paragraphs[0].text, "1 M LiPF6 in EC");
    }

    #[test]
    fn mention_forms() {
        let m = |s: &str| figure_mentions(s);
        assert_eq!(m("Fig. 3a")[0].panels, ["a"]);
        assert_eq!(m("Figure 3(a)")[0].panels, ["a"]);
        assert_eq!(m("Fig 3a")[0].panels, ["a"]);
        assert_eq!(m("FIG 3(A)"), m("Fig. 3a"));
        assert_eq!(m("Figs. 2a-c")[0].panels, ["a", "b", "c"]);
        assert_eq!(m("Fig. 2a and b")[0].panels, ["a", "b"]);
        assert_eq!(m("Fig. 2 (a, c)")[0].panels, ["a", "c"]);
        assert!(m("Fig. 4 shows")[0].panels.is_empty());
        assert!(m("In Fig. 4 a comparison")[0].panels.is_empty());
        assert_eq!(m("Fig. S2b")[0].number, "S2");
    }

    #[test]
    fn file_stem_round_trip() {
        let doi = "10.5555/cellmine.2024_001";
        assert_eq!(file_stem_to_doi(&doi_to_file_stem(doi)), doi);
    }
}
