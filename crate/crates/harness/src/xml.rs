//! Small XML tree used for every document the harness writes, plus read
//! helpers over `roxmltree`.
//!
//! Output is canonical: attributes and children in insertion order, two
//! space indentation, LF line endings, shortest round-trip floats.

use std::fmt::Write as _;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime};
use mission_eval_core::model::Timestamp;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Element(Element),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Node>,
}

impl Element {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            attrs: Vec::new(),
            children: Vec::new(),
        }
    }

    /// `<name>text</name>`
    pub fn text(name: &str, text: impl Into<String>) -> Self {
        let mut e = Self::new(name);
        e.children.push(Node::Text(text.into()));
        e
    }

    pub fn attr(mut self, key: &str, value: impl Into<String>) -> Self {
        self.attrs.push((key.to_owned(), value.into()));
        self
    }

    pub fn child(mut self, child: Element) -> Self {
        self.children.push(Node::Element(child));
        self
    }

    pub fn push(&mut self, child: Element) {
        self.children.push(Node::Element(child));
    }

    pub fn children(mut self, children: impl IntoIterator<Item = Element>) -> Self {
        self.children.extend(children.into_iter().map(Node::Element));
        self
    }

    /// Complete document with declaration and trailing newline.
    pub fn to_document(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        self.write(&mut out, 0);
        out
    }

    fn write(&self, out: &mut String, depth: usize) {
        for _ in 0..depth {
            out.push_str("  ");
        }
        out.push('<');
        out.push_str(&self.name);
        for (k, v) in &self.attrs {
            let _ = write!(out, " {k}=\"{}\"", escape(v));
        }
        match self.children.as_slice() {
            [] => out.push_str("/>\n"),
            [Node::Text(t)] => {
                let _ = writeln!(out, ">{}</{}>", escape(t), self.name);
            }
            children => {
                out.push_str(">\n");
                for c in children {
                    match c {
                        Node::Element(e) => e.write(out, depth + 1),
                        Node::Text(t) => {
                            for _ in 0..=depth {
                                out.push_str("  ");
                            }
                            out.push_str(&escape(t));
                            out.push('\n');
                        }
                    }
                }
                for _ in 0..depth {
                    out.push_str("  ");
                }
                let _ = writeln!(out, "</{}>", self.name);
            }
        }
    }
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Shortest decimal that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn fmt_f32(x: f32) -> String {
    format!("{x:?}")
}

pub fn fmt_bool(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

pub fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

const TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

pub fn fmt_timestamp(t: Timestamp) -> String {
    match DateTime::from_timestamp(t.0, 0) {
        Some(dt) => dt.format(TS_FORMAT).to_string(),
        None => t.0.to_string(),
    }
}

pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    NaiveDateTime::parse_from_str(s, TS_FORMAT)
        .ok()
        .map(|dt| Timestamp(dt.and_utc().timestamp()))
}

/// Finite floats only; `NaN` and `inf` spellings are rejected.
pub fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{context}: {message}")]
pub struct FormatError {
    pub context: String,
    pub message: String,
}

impl FormatError {
    pub fn new(context: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            context: context.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error("malformed XML: {0}")]
    Parse(#[from] roxmltree::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
}

pub type Doc<'a> = roxmltree::Document<'a>;
pub type XNode<'a, 'i> = roxmltree::Node<'a, 'i>;

pub fn parse_document(text: &str) -> Result<Doc<'_>, roxmltree::Error> {
    roxmltree::Document::parse(text)
}

/// Root element, which must be named `name`.
pub fn root<'a, 'i>(doc: &'a Doc<'i>, name: &str) -> Result<XNode<'a, 'i>, FormatError> {
    let r = doc.root_element();
    if r.tag_name().name() == name {
        Ok(r)
    } else {
        Err(FormatError::new(name, format!("root element is <{}>", r.tag_name().name())))
    }
}

pub fn child<'a, 'i>(node: XNode<'a, 'i>, name: &str) -> Option<XNode<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == name)
}

pub fn children<'a, 'i>(node: XNode<'a, 'i>, name: &'a str) -> impl Iterator<Item = XNode<'a, 'i>> + 'a {
    node.children().filter(move |c| c.is_element() && c.tag_name().name() == name)
}

pub fn req_child<'a, 'i>(node: XNode<'a, 'i>, name: &str) -> Result<XNode<'a, 'i>, FormatError> {
    child(node, name).ok_or_else(|| FormatError::new(node.tag_name().name(), format!("missing <{name}>")))
}

pub fn req_attr<'a>(node: XNode<'a, '_>, name: &str) -> Result<&'a str, FormatError> {
    node.attribute(name)
        .ok_or_else(|| FormatError::new(node.tag_name().name(), format!("missing attribute {name}")))
}

pub fn text_of<'a>(node: XNode<'a, '_>) -> &'a str {
    node.text().unwrap_or("").trim()
}

pub fn req_text<'a>(node: XNode<'a, '_>, name: &str) -> Result<&'a str, FormatError> {
    req_child(node, name).map(text_of)
}

pub fn parse_as<T: FromStr>(s: &str, context: &str) -> Result<T, FormatError> {
    s.parse::<T>()
        .map_err(|_| FormatError::new(context, format!("cannot parse {s:?}")))
}

pub fn parse_f64(s: &str, context: &str) -> Result<f64, FormatError> {
    parse_finite(s).ok_or_else(|| FormatError::new(context, format!("not a finite number: {s:?}")))
}

pub fn parse_enum<T>(s: &str, context: &str, f: impl Fn(&str) -> Option<T>) -> Result<T, FormatError> {
    f(s).ok_or_else(|| FormatError::new(context, format!("unknown value {s:?}")))
}

pub fn text_f64(node: XNode<'_, '_>, name: &str) -> Result<f64, FormatError> {
    parse_f64(req_text(node, name)?, name)
}

pub fn attr_f64(node: XNode<'_, '_>, name: &str) -> Result<f64, FormatError> {
    parse_f64(req_attr(node, name)?, name)
}

pub fn text_ts(node: XNode<'_, '_>, name: &str) -> Result<Timestamp, FormatError> {
    let s = req_text(node, name)?;
    parse_timestamp(s).ok_or_else(|| FormatError::new(name, format!("bad timestamp {s:?}")))
}

pub fn attr_ts(node: XNode<'_, '_>, name: &str) -> Result<Timestamp, FormatError> {
    let s = req_attr(node, name)?;
    parse_timestamp(s).ok_or_else(|| FormatError::new(name, format!("bad timestamp {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_nested_and_empty_elements() {
        let doc = Element::new("a")
            .attr("k", "x<y")
            .child(Element::text("b", "1 & 2"))
            .child(Element::new("c"))
            .to_document();
        assert_eq!(
            doc,
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<a k=\"x&lt;y\">\n  <b>1 &amp; 2</b>\n  <c/>\n</a>\n"
        );
        let parsed = parse_document(&doc).unwrap();
        assert_eq!(parsed.root_element().attribute("k"), Some("x<y"));
        assert_eq!(req_text(parsed.root_element(), "b").unwrap(), "1 & 2");
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0, 1e-14, 3.8, -110.1, 1e300, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1e-14), "1e-14");
        assert_eq!(fmt_f64(75.0), "75.0");
    }

    #[test]
    fn non_finite_rejected() {
        for s in ["NaN", "inf", "-infinity", "1e999", "", "1.2.3"] {
            assert_eq!(parse_finite(s), None, "{s}");
        }
    }

    #[test]
    fn timestamps() {
        let t = Timestamp(1_717_419_600 + 3 * 60 + 45);
        assert_eq!(fmt_timestamp(t), "2024-06-03T13:03:45Z");
        assert_eq!(parse_timestamp("2024-06-03T13:03:45Z"), Some(t));
        assert_eq!(parse_timestamp("2024-06-03 13:03:45"), None);
    }
}
