//! Lenient HTML parsing into an owned node tree, plus a small selector
//! language for locating titles, links, dates and article bodies.

mod html;
mod selector;

pub use html::{decode_entities, parse_html, ROOT_TAG};
pub use selector::{parse_selector, select, Accessor, Selector, SelectorError, Step};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextNode {
    pub text: String,
    /// Comments and script/style bodies. Kept in the tree, never extracted.
    pub opaque: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    /// Lowercase tag name; the synthetic root uses [`ROOT_TAG`].
    pub tag: String,
    /// Lowercase names, document order, first occurrence wins.
    pub attributes: Vec<(String, String)>,
    pub children: Vec<DomNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomNode {
    Element(Element),
    Text(TextNode),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("element has no attribute {0:?}")]
    MissingAttribute(String),
}

impl DomNode {
    pub fn text(text: &str) -> Self {
        DomNode::Text(TextNode {
            text: text.to_string(),
            opaque: false,
        })
    }

    pub fn as_element(&self) -> Option<&Element> {
        match self {
            DomNode::Element(e) => Some(e),
            DomNode::Text(_) => None,
        }
    }
}

impl Element {
    pub fn new(tag: &str) -> Self {
        Self {
            tag: tag.to_string(),
            attributes: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.attr("class").unwrap_or("").split_whitespace()
    }

    pub fn child_elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(DomNode::as_element)
    }

    /// All descendant elements in document order, excluding `self`.
    pub fn descendants(&self) -> Vec<&Element> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a Element, out: &mut Vec<&'a Element>) {
            for child in e.child_elements() {
                out.push(child);
                walk(child, out);
            }
        }
        walk(self, &mut out);
        out
    }

    /// Every text node below this element, opaque ones included.
    pub fn descendant_texts(&self) -> impl Iterator<Item = &TextNode> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a Element, out: &mut Vec<&'a TextNode>) {
            for child in &e.children {
                match child {
                    DomNode::Element(c) => walk(c, out),
                    DomNode::Text(t) => out.push(t),
                }
            }
        }
        walk(self, &mut out);
        out.into_iter()
    }

    /// Visible descendant text, whitespace runs collapsed, trimmed.
    pub fn text_content(&self) -> String {
        let raw: String = self
            .descendant_texts()
            .filter(|t| !t.opaque)
            .map(|t| t.text.as_str())
            .collect();
        collapse_whitespace(&raw)
    }
}

/// Collapse every run of whitespace to one ASCII space and trim.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Read the value an accessor names from `node`.
pub fn extract_value(node: &Element, accessor: &Accessor) -> Result<String, ExtractError> {
    match accessor {
        Accessor::TextContent => Ok(node.text_content()),
        Accessor::Attribute(name) => node
            .attr(name)
            .map(str::to_string)
            .ok_or_else(|| ExtractError::MissingAttribute(name.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_a(html: &str) -> Element {
        let DomNode::Element(root) = parse_html(html) else {
            unreachable!()
        };
        root.descendants()
            .into_iter()
            .find(|e| e.tag == "a")
            .unwrap()
            .clone()
    }

    #[test]
    fn extract_text_and_attributes() {
        let a = first_a(r#"<a href="/x">  Two   killed </a>"#);
        assert_eq!(extract_value(&a, &Accessor::TextContent).unwrap(), "Two killed");
        assert_eq!(
            extract_value(&a, &Accessor::Attribute("href".into())).unwrap(),
            "/x"
        );
        assert_eq!(
            extract_value(&a, &Accessor::Attribute("id".into())),
            Err(ExtractError::MissingAttribute("id".into()))
        );
    }

    #[test]
    fn collapse_is_idempotent() {
        let once = collapse_whitespace(" a \n\t b  c ");
        assert_eq!(once, "a b c");
        assert_eq!(collapse_whitespace(&once), once);
    }
}
