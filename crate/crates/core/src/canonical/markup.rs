//! The markup tree underlying every TDO/1 document.
//!
//! The writer emits exactly one byte sequence per tree. The reader accepts a
//! wider, well-formed superset (whitespace, comments, any attribute order,
//! self-closing tags, numeric character references) so that it can tell a
//! *malformed* document apart from a *well-formed but non-canonical* one;
//! [`decode_canonical`] then rejects anything the writer would not produce.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

const MAX_DEPTH: usize = 64;

/// A markup element. Text and child elements are mutually exclusive.
#[derive(Debug, Clone, Default)]
pub struct Element {
    pub name: String,
    pub attrs: BTreeMap<String, String>,
    pub children: Vec<Element>,
    pub text: String,
    /// Byte offset of the opening `<` in the parsed input (0 for built trees).
    pub offset: usize,
}

impl PartialEq for Element {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.attrs == other.attrs
            && self.children == other.children
            && self.text == other.text
    }
}

impl Eq for Element {}

impl Element {
    pub fn new(name: &str) -> Self {
        Element {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn attr(mut self, key: &str, value: impl Into<String>) -> Self {
        self.attrs.insert(key.to_string(), value.into());
        self
    }

    pub fn attr_opt(self, key: &str, value: Option<impl Into<String>>) -> Self {
        match value {
            Some(v) => self.attr(key, v),
            None => self,
        }
    }

    pub fn child(mut self, child: Element) -> Self {
        self.children.push(child);
        self
    }

    pub fn children(mut self, children: impl IntoIterator<Item = Element>) -> Self {
        self.children.extend(children);
        self
    }

    pub fn text(mut self, text: impl Into<String>) -> Self {
        self.text = text.into();
        self
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        self.write(&mut out);
        out.into_bytes()
    }

    pub fn write(&self, out: &mut String) {
        out.push('<');
        out.push_str(&self.name);
        for (k, v) in &self.attrs {
            out.push(' ');
            out.push_str(k);
            out.push_str("=\"");
            escape_into(v, out);
            out.push('"');
        }
        out.push('>');
        escape_into(&self.text, out);
        for c in &self.children {
            c.write(out);
        }
        out.push_str("</");
        out.push_str(&self.name);
        out.push('>');
    }

    // -- schema helpers --------------------------------------------------

    pub fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(self.offset, format!("<{}>: {}", self.name, message.into()))
    }

    pub fn expect_name(&self, name: &str) -> Result<()> {
        if self.name == name {
            Ok(())
        } else {
            Err(Error::parse(
                self.offset,
                format!("expected <{name}>, found <{}>", self.name),
            ))
        }
    }

    /// Fail if any attribute is outside `allowed`.
    pub fn only_attrs(&self, allowed: &[&str]) -> Result<()> {
        match self.attrs.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(self.err(format!("unexpected attribute `{k}`"))),
            None => Ok(()),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.attrs.get(key).map(String::as_str)
    }

    pub fn req(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| self.err(format!("missing attribute `{key}`")))
    }

    pub fn parse_req<T>(&self, key: &str) -> Result<T>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        let raw = self.req(key)?;
        raw.parse()
            .map_err(|e: T::Err| self.err(format!("attribute `{key}`: {e}")))
    }

    pub fn parse_opt<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(_) => self.parse_req(key).map(Some),
        }
    }

    pub fn no_children(&self) -> Result<()> {
        match self.children.first() {
            Some(c) => Err(c.err("unexpected element")),
            None => Ok(()),
        }
    }

    pub fn no_text(&self) -> Result<()> {
        if self.text.is_empty() {
            Ok(())
        } else {
            Err(self.err("unexpected text content"))
        }
    }

    /// Children that must all be named `name`.
    pub fn children_named(&self, name: &str) -> Result<&[Element]> {
        self.no_text()?;
        for c in &self.children {
            c.expect_name(name)?;
        }
        Ok(&self.children)
    }
}

fn escape_into(s: &str, out: &mut String) {
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' | '\t' => out.push(ch),
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                out.push_str(&format!("&#x{:02x};", c as u32));
            }
            c => out.push(c),
        }
    }
}

/// Parse and require the exact canonical byte form.
pub fn decode_canonical(bytes: &[u8]) -> Result<Element> {
    let root = parse(bytes)?;
    let canonical = root.to_bytes();
    if canonical != bytes {
        let offset = canonical
            .iter()
            .zip(bytes)
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| canonical.len().min(bytes.len()));
        return Err(Error::Canonicality { offset });
    }
    Ok(root)
}

/// Parse a well-formed document without the canonical-form requirement.
pub fn parse(bytes: &[u8]) -> Result<Element> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::parse(e.valid_up_to(), "invalid UTF-8"))?;
    let mut p = Parser { src: text, pos: 0 };
    if p.rest().starts_with('\u{feff}') {
        p.pos += '\u{feff}'.len_utf8();
    }
    p.skip_misc()?;
    if !p.rest().starts_with('<') {
        return Err(p.err("expected root element"));
    }
    let root = p.element(0)?;
    p.skip_misc()?;
    if p.pos != text.len() {
        return Err(p.err("trailing content after root element"));
    }
    Ok(root)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn err(&self, message: &str) -> Error {
        Error::parse(self.pos, message)
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<()> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{s}`")))
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if matches!(c, ' ' | '\t' | '\n' | '\r') {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn skip_comment(&mut self) -> Result<bool> {
        if !self.rest().starts_with("<!--") {
            return Ok(false);
        }
        match self.rest()[4..].find("-->") {
            Some(end) => {
                self.pos += 4 + end + 3;
                Ok(true)
            }
            None => Err(self.err("unterminated comment")),
        }
    }

    fn skip_misc(&mut self) -> Result<()> {
        loop {
            self.skip_ws();
            if !self.skip_comment()? {
                return Ok(());
            }
        }
    }

    fn name(&mut self) -> Result<String> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        if start >= bytes.len() || !bytes[start].is_ascii_lowercase() {
            return Err(self.err("expected a name"));
        }
        let mut end = start + 1;
        while end < bytes.len()
            && (bytes[end].is_ascii_lowercase() || bytes[end].is_ascii_digit() || bytes[end] == b'-')
        {
            end += 1;
        }
        self.pos = end;
        Ok(self.src[start..end].to_string())
    }

    fn reference(&mut self, out: &mut String) -> Result<()> {
        let start = self.pos;
        self.pos += 1; // '&'
        let end = self.rest().find(';').filter(|&e| e <= 12);
        let Some(end) = end else {
            self.pos = start;
            return Err(self.err("malformed character reference"));
        };
        let body = &self.rest()[..end];
        let ch = match body {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            _ => {
                let code = if let Some(h) = body.strip_prefix("#x") {
                    u32::from_str_radix(h, 16).ok()
                } else if let Some(d) = body.strip_prefix('#') {
                    d.parse::<u32>().ok()
                } else {
                    None
                };
                code.and_then(char::from_u32)
            }
        };
        match ch {
            Some(c) => {
                out.push(c);
                self.pos += end + 1;
                Ok(())
            }
            None => {
                self.pos = start;
                Err(self.err("malformed character reference"))
            }
        }
    }

    fn attr_value(&mut self) -> Result<String> {
        let quote = match self.peek() {
            Some(q @ ('"' | '\'')) => q,
            _ => return Err(self.err("expected quoted attribute value")),
        };
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(self.err("unterminated attribute value")),
                Some(c) if c == quote => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some('<') => return Err(self.err("`<` in attribute value")),
                Some('&') => self.reference(&mut out)?,
                Some(c) => {
                    out.push(c);
                    self.pos += c.len_utf8();
                }
            }
        }
    }

    fn element(&mut self, depth: usize) -> Result<Element> {
        if depth > MAX_DEPTH {
            return Err(self.err("nesting too deep"));
        }
        let offset = self.pos;
        self.expect("<")?;
        let name = self.name()?;
        let mut el = Element {
            name,
            offset,
            ..Default::default()
        };
        loop {
            let before = self.pos;
            self.skip_ws();
            if self.eat("/>") {
                return Ok(el);
            }
            if self.eat(">") {
                break;
            }
            if self.pos == before {
                return Err(self.err("expected whitespace before attribute"));
            }
            let key_pos = self.pos;
            let key = self.name()?;
            self.skip_ws();
            self.expect("=")?;
            self.skip_ws();
            let value = self.attr_value()?;
            if el.attrs.insert(key.clone(), value).is_some() {
                return Err(Error::parse(key_pos, format!("duplicate attribute `{key}`")));
            }
        }

        let mut text = String::new();
        let mut text_start = None;
        loop {
            if self.rest().starts_with("</") {
                let close_at = self.pos;
                self.pos += 2;
                let close = self.name()?;
                if close != el.name {
                    return Err(Error::parse(
                        close_at,
                        format!("mismatched closing tag </{close}> for <{}>", el.name),
                    ));
                }
                self.skip_ws();
                self.expect(">")?;
                break;
            }
            if self.skip_comment()? {
                continue;
            }
            match self.peek() {
                None => return Err(self.err(&format!("unterminated element <{}>", el.name))),
                Some('<') => el.children.push(self.element(depth + 1)?),
                Some('&') => {
                    text_start.get_or_insert(self.pos);
                    self.reference(&mut text)?;
                }
                Some(c) => {
                    text_start.get_or_insert(self.pos);
                    text.push(c);
                    self.pos += c.len_utf8();
                }
            }
        }
        if el.children.is_empty() {
            el.text = text;
        } else if !text.chars().all(|c| matches!(c, ' ' | '\t' | '\n' | '\r')) {
            return Err(Error::parse(
                text_start.unwrap_or(offset),
                "mixed text and element content",
            ));
        }
        Ok(el)
    }
}
