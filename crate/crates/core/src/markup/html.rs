//! Error-tolerant HTML tree builder.
//!
//! Not an HTML5 parser. It implements a fixed, small set of recovery rules
//! that make real newspaper markup usable:
//!
//! * end tags close the nearest open element with that name, implicitly
//!   closing anything opened inside it; stray end tags are dropped
//! * `p`, `li`, `dt`/`dd`, `tr`, `td`/`th` and `option` close an open sibling
//!   of the same family, and block-level start tags close an open `p`
//! * void elements never take children
//! * comments and `script`/`style` bodies become opaque text nodes

use super::{DomNode, Element, TextNode};

pub const ROOT_TAG: &str = "#document";

const VOID: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "source", "track",
    "wbr",
];

const RAW_TEXT: &[&str] = &["script", "style"];

/// Start tags that close an open `p`.
const CLOSES_P: &[&str] = &[
    "address", "article", "aside", "blockquote", "details", "div", "dl", "fieldset", "figure",
    "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "main", "nav", "ol", "p",
    "pre", "section", "table", "ul",
];

/// Elements an implicit close never walks past.
const SCOPE_BOUNDARY: &[&str] = &[
    ROOT_TAG, "html", "body", "div", "section", "article", "main", "header", "footer", "nav",
    "aside", "ul", "ol", "dl", "table", "tbody", "thead", "tfoot", "tr", "td", "th", "li",
    "blockquote", "form", "figure", "select",
];

fn implicitly_closes(new_tag: &str) -> &'static [&'static str] {
    match new_tag {
        "li" => &["li"],
        "dt" | "dd" => &["dt", "dd"],
        "tr" => &["tr", "td", "th"],
        "td" | "th" => &["td", "th"],
        "option" => &["option"],
        t if CLOSES_P.contains(&t) => &["p"],
        _ => &[],
    }
}

pub fn parse_html(text: &str) -> DomNode {
    let mut builder = TreeBuilder::new();
    Tokenizer::new(text).run(&mut builder);
    DomNode::Element(builder.finish())
}

struct TreeBuilder {
    stack: Vec<Element>,
}

impl TreeBuilder {
    fn new() -> Self {
        Self {
            stack: vec![Element::new(ROOT_TAG)],
        }
    }

    fn current(&mut self) -> &mut Element {
        self.stack.last_mut().expect("root is never popped")
    }

    fn text(&mut self, text: String, opaque: bool) {
        if text.is_empty() {
            return;
        }
        let children = &mut self.current().children;
        if !opaque {
            if let Some(DomNode::Text(last)) = children.last_mut() {
                if !last.opaque {
                    last.text.push_str(&text);
                    return;
                }
            }
        }
        children.push(DomNode::Text(TextNode { text, opaque }));
    }

    /// Pop the top element and attach it to its parent.
    fn pop(&mut self) {
        if self.stack.len() > 1 {
            let done = self.stack.pop().unwrap();
            self.current().children.push(DomNode::Element(done));
        }
    }

    fn pop_through(&mut self, index: usize) {
        while self.stack.len() > index {
            self.pop();
        }
    }

    fn start(&mut self, element: Element, self_closing: bool) {
        let closes = implicitly_closes(&element.tag);
        if !closes.is_empty() {
            for i in (1..self.stack.len()).rev() {
                let tag = self.stack[i].tag.as_str();
                if closes.contains(&tag) {
                    self.pop_through(i);
                    break;
                }
                if SCOPE_BOUNDARY.contains(&tag) {
                    break;
                }
            }
        }
        if self_closing || VOID.contains(&element.tag.as_str()) {
            self.current().children.push(DomNode::Element(element));
        } else {
            self.stack.push(element);
        }
    }

    fn end(&mut self, tag: &str) {
        if let Some(i) = (1..self.stack.len()).rev().find(|&i| self.stack[i].tag == tag) {
            self.pop_through(i);
        }
    }

    fn finish(mut self) -> Element {
        self.pop_through(1);
        self.stack.pop().unwrap()
    }
}

struct Tokenizer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Tokenizer<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn run(mut self, out: &mut TreeBuilder) {
        let mut text = String::new();
        while self.pos < self.src.len() {
            let rest = self.rest();
            if !rest.starts_with('<') {
                let end = rest.find('<').unwrap_or(rest.len());
                text.push_str(&rest[..end]);
                self.pos += end;
                continue;
            }

            if let Some(body) = rest.strip_prefix("<!--") {
                flush(out, &mut text);
                let (comment, consumed) = match body.find("-->") {
                    Some(i) => (&body[..i], 4 + i + 3),
                    None => (body, rest.len()),
                };
                out.text(comment.to_string(), true);
                self.pos += consumed;
                continue;
            }

            if rest.starts_with("<!") || rest.starts_with("<?") {
                flush(out, &mut text);
                self.pos += rest.find('>').map_or(rest.len(), |i| i + 1);
                continue;
            }

            if let Some(after) = rest.strip_prefix("</") {
                if after.starts_with(|c: char| c.is_ascii_alphabetic()) {
                    flush(out, &mut text);
                    let name_len = tag_name_len(after);
                    let name = after[..name_len].to_ascii_lowercase();
                    self.pos += 2 + after.find('>').map_or(after.len(), |i| i + 1);
                    out.end(&name);
                    continue;
                }
                // "</>" or "</ " etc: literal text
                text.push('<');
                self.pos += 1;
                continue;
            }

            let after = &rest[1..];
            if !after.starts_with(|c: char| c.is_ascii_alphabetic()) {
                text.push('<');
                self.pos += 1;
                continue;
            }

            flush(out, &mut text);
            self.pos += 1;
            let (element, self_closing) = self.start_tag();
            let raw = RAW_TEXT.contains(&element.tag.as_str()) && !self_closing;
            let tag = element.tag.clone();
            out.start(element, self_closing);
            if raw {
                let body = self.raw_text_until(&tag);
                out.text(body, true);
                out.end(&tag);
            }
        }
        flush(out, &mut text);
    }

    /// Parse a start tag; `pos` is just past the `<`.
    fn start_tag(&mut self) -> (Element, bool) {
        let rest = self.rest();
        let name_len = tag_name_len(rest);
        let mut element = Element::new(&rest[..name_len].to_ascii_lowercase());
        self.pos += name_len;

        loop {
            self.skip_ws();
            let rest = self.rest();
            if rest.is_empty() {
                return (element, false);
            }
            if rest.starts_with("/>") {
                self.pos += 2;
                return (element, true);
            }
            if rest.starts_with('>') {
                self.pos += 1;
                return (element, false);
            }
            if rest.starts_with('/') {
                self.pos += 1;
                continue;
            }

            let name_len = rest
                .find(|c: char| c.is_whitespace() || c == '=' || c == '>' || c == '/')
                .unwrap_or(rest.len())
                .max(1);
            let name_len = next_char_boundary(rest, name_len);
            let name = rest[..name_len].to_lowercase();
            self.pos += name_len;
            self.skip_ws();

            let value = if self.rest().starts_with('=') {
                self.pos += 1;
                self.skip_ws();
                self.attribute_value()
            } else {
                String::new()
            };
            if !element.attributes.iter().any(|(n, _)| *n == name) {
                element.attributes.push((name, value));
            }
        }
    }

    fn attribute_value(&mut self) -> String {
        let rest = self.rest();
        let quote = rest.chars().next();
        match quote {
            Some(q @ ('"' | '\'')) => {
                let body = &rest[1..];
                let end = body.find(q).unwrap_or(body.len());
                self.pos += 1 + end + usize::from(end < body.len());
                decode_entities(&body[..end])
            }
            _ => {
                let end = rest
                    .find(|c: char| c.is_whitespace() || c == '>')
                    .unwrap_or(rest.len());
                self.pos += end;
                decode_entities(&rest[..end])
            }
        }
    }

    fn raw_text_until(&mut self, tag: &str) -> String {
        let rest = self.rest();
        let closing = format!("</{tag}");
        let lower = rest.to_ascii_lowercase();
        let end = lower.find(&closing).unwrap_or(rest.len());
        let body = rest[..end].to_string();
        self.pos += end;
        let after = self.rest();
        if !after.is_empty() {
            self.pos += after.find('>').map_or(after.len(), |i| i + 1);
        }
        body
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }
}

fn flush(out: &mut TreeBuilder, text: &mut String) {
    if !text.is_empty() {
        out.text(decode_entities(text), false);
        text.clear();
    }
}

fn tag_name_len(s: &str) -> usize {
    s.find(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == ':'))
        .unwrap_or(s.len())
}

fn next_char_boundary(s: &str, mut i: usize) -> usize {
    while i < s.len() && !s.is_char_boundary(i) {
        i += 1;
    }
    i
}

const NAMED_ENTITIES: &[(&str, &str)] = &[
    ("amp", "&"),
    ("lt", "<"),
    ("gt", ">"),
    ("quot", "\""),
    ("apos", "'"),
    ("nbsp", "\u{a0}"),
    ("ndash", "\u{2013}"),
    ("mdash", "\u{2014}"),
    ("lsquo", "\u{2018}"),
    ("rsquo", "\u{2019}"),
    ("ldquo", "\u{201c}"),
    ("rdquo", "\u{201d}"),
    ("hellip", "\u{2026}"),
    ("copy", "\u{a9}"),
    ("reg", "\u{ae}"),
    ("deg", "\u{b0}"),
    ("middot", "\u{b7}"),
    ("bull", "\u{2022}"),
    ("laquo", "\u{ab}"),
    ("raquo", "\u{bb}"),
];

/// Decode the common named entities and all numeric character references.
/// Unknown or malformed references are left as written.
pub fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let Some(semi) = rest[1..].find(';').map(|i| i + 1).filter(|&i| i <= 12) else {
            out.push('&');
            rest = &rest[1..];
            continue;
        };
        let name = &rest[1..semi];
        let decoded = if let Some(num) = name.strip_prefix('#') {
            let code = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok(),
                None => num.parse::<u32>().ok(),
            };
            code.map(|c| char::from_u32(c).unwrap_or('\u{fffd}').to_string())
        } else {
            NAMED_ENTITIES
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| v.to_string())
        };
        match decoded {
            Some(text) => {
                out.push_str(&text);
                rest = &rest[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}
