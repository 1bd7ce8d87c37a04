//! A small path language for site configs.
//!
//! ```text
//! selector := step (WS step)* accessor?
//! step     := (ident | "*")? modifier*
//! modifier := "." ident | "#" ident | "[" ident "=" value "]" | "[" n "]"
//! accessor := "::text" | "::attr(" ident ")"
//! ```
//!
//! Whitespace between steps means "descendant of". `[n]` keeps only the
//! n-th match (1-based) under each context node. A step without a tag name
//! matches any tag.

use std::collections::HashMap;
use std::fmt;

use super::Element;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("selector syntax error at {position}: {message}")]
pub struct SelectorError {
    /// Byte offset into the selector text.
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Step {
    /// `None` is the `*` wildcard.
    pub tag: Option<String>,
    pub classes: Vec<String>,
    pub id: Option<String>,
    pub attrs: Vec<(String, String)>,
    /// 1-based ordinal.
    pub index: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Accessor {
    #[default]
    TextContent,
    Attribute(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    pub steps: Vec<Step>,
    pub accessor: Accessor,
}

impl Step {
    pub fn matches(&self, element: &Element) -> bool {
        if let Some(tag) = &self.tag {
            if *tag != element.tag {
                return false;
            }
        }
        if let Some(id) = &self.id {
            if element.attr("id") != Some(id.as_str()) {
                return false;
            }
        }
        if !self
            .classes
            .iter()
            .all(|c| element.classes().any(|have| have == c))
        {
            return false;
        }
        self.attrs
            .iter()
            .all(|(name, value)| element.attr(name) == Some(value.as_str()))
    }
}

impl std::str::FromStr for Selector {
    type Err = SelectorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_selector(s)
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '_'
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, SelectorError> {
        Err(SelectorError {
            position: self.pos,
            message: message.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn eat(&mut self, prefix: &str) -> bool {
        if self.rest().starts_with(prefix) {
            self.pos += prefix.len();
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) -> bool {
        let before = self.pos;
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
        self.pos > before
    }

    fn ident(&mut self, what: &str) -> Result<String, SelectorError> {
        let start = self.pos;
        while self.peek().is_some_and(is_ident_char) {
            self.bump();
        }
        if self.pos == start {
            return self.err(format!("expected {what}"));
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn step(&mut self) -> Result<Step, SelectorError> {
        let start = self.pos;
        let mut step = Step::default();
        if self.eat("*") {
            // wildcard
        } else if self.peek().is_some_and(is_ident_char) {
            step.tag = Some(self.ident("tag name")?.to_lowercase());
        }

        loop {
            match self.peek() {
                Some('.') => {
                    self.bump();
                    step.classes.push(self.ident("class name")?);
                }
                Some('#') => {
                    self.bump();
                    if step.id.is_some() {
                        return self.err("a step may carry only one #id");
                    }
                    step.id = Some(self.ident("id")?);
                }
                Some('[') => {
                    self.bump();
                    self.bracket(&mut step)?;
                }
                _ => break,
            }
        }

        if self.pos == start {
            return self.err("expected a step");
        }
        Ok(step)
    }

    fn bracket(&mut self, step: &mut Step) -> Result<(), SelectorError> {
        self.skip_ws();
        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
            let n: usize = match self.src[start..self.pos].parse() {
                Ok(n) => n,
                Err(_) => return self.err("ordinal out of range"),
            };
            if n == 0 {
                self.pos = start;
                return self.err("ordinals start at 1");
            }
            if step.index.is_some() {
                return self.err("a step may carry only one [n] ordinal");
            }
            step.index = Some(n);
        } else {
            let name = self.ident("attribute name")?.to_lowercase();
            self.skip_ws();
            if !self.eat("=") {
                return self.err("expected '=' in attribute test");
            }
            self.skip_ws();
            let value = self.value()?;
            step.attrs.push((name, value));
        }
        self.skip_ws();
        if !self.eat("]") {
            return self.err("expected ']'");
        }
        Ok(())
    }

    fn value(&mut self) -> Result<String, SelectorError> {
        match self.peek() {
            Some(q @ ('"' | '\'')) => {
                self.bump();
                let mut out = String::new();
                loop {
                    match self.bump() {
                        None => return self.err("unterminated quoted value"),
                        Some('\\') => match self.bump() {
                            Some(c) => out.push(c),
                            None => return self.err("unterminated escape"),
                        },
                        Some(c) if c == q => return Ok(out),
                        Some(c) => out.push(c),
                    }
                }
            }
            _ => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c != ']') {
                    self.bump();
                }
                Ok(self.src[start..self.pos].trim_end().to_string())
            }
        }
    }

    fn accessor(&mut self) -> Result<Accessor, SelectorError> {
        if self.eat("text") {
            return Ok(Accessor::TextContent);
        }
        if self.eat("attr") {
            self.skip_ws();
            if !self.eat("(") {
                return self.err("expected '(' after ::attr");
            }
            self.skip_ws();
            let name = self.ident("attribute name")?.to_lowercase();
            self.skip_ws();
            if !self.eat(")") {
                return self.err("expected ')'");
            }
            return Ok(Accessor::Attribute(name));
        }
        self.err("expected ::text or ::attr(name)")
    }
}

pub fn parse_selector(text: &str) -> Result<Selector, SelectorError> {
    let mut p = Parser { src: text, pos: 0 };
    let mut steps = Vec::new();
    let mut accessor = Accessor::TextContent;

    p.skip_ws();
    loop {
        if p.eat("::") {
            if steps.is_empty() {
                return p.err("accessor without a step");
            }
            accessor = p.accessor()?;
            p.skip_ws();
            if p.peek().is_some() {
                return p.err("unexpected input after accessor");
            }
            break;
        }
        steps.push(p.step()?);
        let had_ws = p.skip_ws();
        if p.peek().is_none() {
            break;
        }
        if !had_ws && !p.rest().starts_with("::") {
            return p.err(format!("unexpected character {:?}", p.peek().unwrap()));
        }
    }

    if steps.is_empty() {
        return p.err("empty selector");
    }
    Ok(Selector { steps, accessor })
}

fn write_quoted(f: &mut fmt::Formatter<'_>, value: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in value.chars() {
        if c == '"' || c == '\\' {
            f.write_str("\\")?;
        }
        write!(f, "{c}")?;
    }
    f.write_str("\"")
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag.as_deref().unwrap_or("*"))?;
        for class in &self.classes {
            write!(f, ".{class}")?;
        }
        if let Some(id) = &self.id {
            write!(f, "#{id}")?;
        }
        for (name, value) in &self.attrs {
            write!(f, "[{name}=")?;
            write_quoted(f, value)?;
            f.write_str("]")?;
        }
        if let Some(n) = self.index {
            write!(f, "[{n}]")?;
        }
        Ok(())
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{step}")?;
        }
        match &self.accessor {
            Accessor::TextContent => Ok(()),
            Accessor::Attribute(name) => write!(f, "::attr({name})"),
        }
    }
}

/// Evaluate `sel` under `root`. Results are in document order without
/// duplicates. The root itself never matches.
pub fn select<'a>(root: &'a Element, sel: &Selector) -> Vec<&'a Element> {
    let order: HashMap<*const Element, usize> = std::iter::once(root)
        .chain(root.descendants())
        .enumerate()
        .map(|(i, e)| (e as *const Element, i))
        .collect();

    let mut contexts: Vec<&Element> = vec![root];
    for step in &sel.steps {
        let mut next: Vec<&Element> = Vec::new();
        for ctx in &contexts {
            let matches = ctx.descendants().into_iter().filter(|e| step.matches(e));
            match step.index {
                Some(n) => next.extend(matches.skip(n - 1).take(1)),
                None => next.extend(matches),
            }
        }
        next.sort_by_key(|e| order[&(*e as *const Element)]);
        next.dedup_by(|a, b| std::ptr::eq(*a, *b));
        contexts = next;
        if contexts.is_empty() {
            break;
        }
    }
    contexts
}
