//! Recursive-descent parser for the supported USDA subset.
//!
//! Supported: layer metadata (including `subLayers`), `def`/`over`/`class`
//! prims with optional type and metadata, typed attributes (optionally
//! `custom`/`uniform`, with attribute metadata), relationships, list-op
//! metadata such as `prepend apiSchemas`, and dictionary values. Time samples,
//! connections and variant sets are rejected with a location.

use std::collections::BTreeMap;

use thiserror::Error;

use super::document::{
    Attribute, DictEntry, ListOp, MetadataEntry, Property, Specifier, UsdValue, UsdaPrim, UsdaStage,
};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {column}: {message}")]
pub struct UsdaError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Path(String),
    Asset(String),
    Punct(char),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            src: text.as_bytes(),
            text,
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn err(&self, message: impl Into<String>) -> UsdaError {
        UsdaError {
            line: self.line,
            column: self.col,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, k: usize) -> Option<u8> {
        self.src.get(self.pos + k).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else if c & 0xC0 != 0x80 {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() {
                self.bump();
            } else if c == b'#' {
                while let Some(c) = self.peek() {
                    if c == b'\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn tokens(mut self) -> Result<Vec<Token>, UsdaError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            let (line, column) = (self.line, self.col);
            let Some(c) = self.peek() else {
                out.push(Token {
                    tok: Tok::Eof,
                    line,
                    column,
                });
                return Ok(out);
            };
            let tok = match c {
                b'(' | b')' | b'[' | b']' | b'{' | b'}' | b'=' | b',' | b';' => {
                    self.bump();
                    Tok::Punct(c as char)
                }
                b'"' | b'\'' => Tok::Str(self.string(c)?),
                b'<' => {
                    self.bump();
                    let start = self.pos;
                    while self.peek().is_some_and(|c| c != b'>' && c != b'\n') {
                        self.bump();
                    }
                    if self.peek() != Some(b'>') {
                        return Err(self.err("unterminated path"));
                    }
                    let p = self.text[start..self.pos].to_string();
                    self.bump();
                    Tok::Path(p)
                }
                b'@' => {
                    let delim = if self.text[self.pos..].starts_with("@@@") { 3 } else { 1 };
                    for _ in 0..delim {
                        self.bump();
                    }
                    let start = self.pos;
                    let close = if delim == 3 { "@@@" } else { "@" };
                    match self.text[start..].find(close) {
                        Some(len) if !self.text[start..start + len].contains('\n') => {
                            for _ in 0..len + delim {
                                self.bump();
                            }
                            Tok::Asset(self.text[start..start + len].to_string())
                        }
                        _ => return Err(self.err("unterminated asset path")),
                    }
                }
                c if c.is_ascii_digit()
                    || ((c == b'-' || c == b'+' || c == b'.')
                        && self.peek_at(1).is_some_and(|d| d.is_ascii_digit() || d == b'.')) =>
                {
                    Tok::Number(self.number())
                }
                b'-' if self.peek_at(1).is_some_and(|d| d.is_ascii_alphabetic()) => {
                    self.bump();
                    let rest = self.ident();
                    Tok::Ident(format!("-{rest}"))
                }
                c if c.is_ascii_alphabetic() || c == b'_' => Tok::Ident(self.ident()),
                _ => {
                    let ch = self.text[self.pos..].chars().next().unwrap_or('?');
                    return Err(self.err(format!("unexpected character `{ch}`")));
                }
            };
            out.push(Token { tok, line, column });
        }
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b':' || c == b'.')
        {
            self.bump();
        }
        self.text[start..self.pos].to_string()
    }

    fn number(&mut self) -> String {
        let start = self.pos;
        if matches!(self.peek(), Some(b'-' | b'+')) {
            self.bump();
        }
        while let Some(c) = self.peek() {
            let exp_sign =
                (c == b'-' || c == b'+') && matches!(self.src.get(self.pos.wrapping_sub(1)), Some(b'e' | b'E'));
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.bump();
            } else {
                break;
            }
        }
        self.text[start..self.pos].to_string()
    }

    fn string(&mut self, quote: u8) -> Result<String, UsdaError> {
        let triple = self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote);
        let n = if triple { 3 } else { 1 };
        for _ in 0..n {
            self.bump();
        }
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(self.err("unterminated string"));
            };
            if c == quote && (!triple || (self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote))) {
                for _ in 0..n {
                    self.bump();
                }
                return Ok(out);
            }
            if c == b'\n' && !triple {
                return Err(self.err("newline in string"));
            }
            if c == b'\\' {
                self.bump();
                let e = self.bump().ok_or_else(|| self.err("unterminated escape"))?;
                match e {
                    b'n' => out.push('\n'),
                    b't' => out.push('\t'),
                    b'r' => out.push('\r'),
                    b'\\' => out.push('\\'),
                    b'"' => out.push('"'),
                    b'\'' => out.push('\''),
                    b'x' => {
                        let hex: String = (0..2).filter_map(|_| self.bump().map(|b| b as char)).collect();
                        let v = u32::from_str_radix(&hex, 16).map_err(|_| self.err("bad \\x escape"))?;
                        out.push(char::from_u32(v).unwrap_or('\u{fffd}'));
                    }
                    other => {
                        out.push('\\');
                        out.push(other as char);
                    }
                }
                continue;
            }
            // Copy one UTF-8 character.
            let ch = self.text[self.pos..].chars().next().expect("in bounds");
            for _ in 0..ch.len_utf8() {
                self.bump();
            }
            out.push(ch);
        }
    }
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    last: usize,
}

const SPECIFIERS: [&str; 3] = ["def", "over", "class"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let idx = (self.i + k).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        self.last = self.i;
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn back(&mut self) {
        if *self.peek() != Tok::Eof || self.i + 1 < self.toks.len() {
            self.i = self.i.saturating_sub(1);
        }
    }

    fn err(&self, message: impl Into<String>) -> UsdaError {
        let t = &self.toks[self.i];
        UsdaError {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    /// Error located at the most recently consumed token.
    fn err_last(&self, message: impl Into<String>) -> UsdaError {
        let t = &self.toks[self.last];
        UsdaError {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn describe(t: &Tok) -> String {
        match t {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Str(_) => "string".into(),
            Tok::Path(p) => format!("path <{p}>"),
            Tok::Asset(a) => format!("asset @{a}@"),
            Tok::Punct(c) => format!("`{c}`"),
            Tok::Eof => "end of file".into(),
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), UsdaError> {
        if *self.peek() == Tok::Punct(c) {
            self.next();
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`, found {}", Self::describe(self.peek()))))
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Punct(c) {
            self.next();
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, UsdaError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => Err(self.err_last(format!("expected {what}, found {}", Self::describe(&other)))),
        }
    }

    fn stage(&mut self) -> Result<UsdaStage, UsdaError> {
        let mut stage = UsdaStage::default();
        if self.eat_punct('(') {
            stage.metadata = self.metadata_block()?;
        }
        loop {
            match self.peek() {
                Tok::Eof => return Ok(stage),
                Tok::Ident(s) if SPECIFIERS.contains(&s.as_str()) => stage.prims.push(self.prim()?),
                other => return Err(self.err(format!("expected prim definition, found {}", Self::describe(other)))),
            }
        }
    }

    /// Entries up to and including the closing `)`.
    fn metadata_block(&mut self) -> Result<Vec<MetadataEntry>, UsdaError> {
        let mut out = Vec::new();
        loop {
            if self.eat_punct(')') {
                return Ok(out);
            }
            if self.eat_punct(';') {
                continue;
            }
            if let Tok::Str(s) = self.peek().clone() {
                self.next();
                out.push(MetadataEntry::new("doc", UsdValue::Str(s)));
                continue;
            }
            let mut key = self.ident("metadata key")?;
            let op = match key.as_str() {
                "prepend" => ListOp::Prepend,
                "append" => ListOp::Append,
                "add" => ListOp::Add,
                "delete" => ListOp::Delete,
                "reorder" => return Err(self.err("`reorder` list edits are not supported")),
                _ => ListOp::Explicit,
            };
            if op != ListOp::Explicit {
                key = self.ident("metadata key")?;
            }
            self.expect_punct('=')?;
            let value = self.value()?;
            out.push(MetadataEntry { op, key, value });
        }
    }

    fn prim(&mut self) -> Result<UsdaPrim, UsdaError> {
        let spec = match self.peek() {
            Tok::Ident(s) if s == "def" => Specifier::Def,
            Tok::Ident(s) if s == "over" => Specifier::Over,
            Tok::Ident(s) if s == "class" => Specifier::Class,
            other => return Err(self.err(format!("expected prim specifier, found {}", Self::describe(other)))),
        };
        self.next();
        let type_name = match self.peek().clone() {
            Tok::Ident(t) => {
                self.next();
                Some(t)
            }
            _ => None,
        };
        let name = match self.next() {
            Tok::Str(s) => s,
            other => {
                self.back();
                return Err(self.err_last(format!("expected prim name, found {}", Self::describe(&other))));
            }
        };
        let mut prim = UsdaPrim::new(spec, type_name.as_deref(), &name);
        if self.eat_punct('(') {
            prim.metadata = self.metadata_block()?;
        }
        self.expect_punct('{')?;
        loop {
            if self.eat_punct('}') {
                return Ok(prim);
            }
            if self.eat_punct(';') {
                continue;
            }
            match self.peek().clone() {
                Tok::Ident(s) if SPECIFIERS.contains(&s.as_str()) => prim.children.push(self.prim()?),
                Tok::Ident(s) if s == "variantSet" => return Err(self.err("variant sets are not supported")),
                Tok::Ident(_) => {
                    let (name, prop) = self.property()?;
                    prim.properties.insert(name, prop);
                }
                other => {
                    return Err(self.err_last(format!("expected property or prim, found {}", Self::describe(&other))))
                }
            }
        }
    }

    fn property(&mut self) -> Result<(String, Property), UsdaError> {
        let mut custom = false;
        let mut uniform = false;
        let mut word = self.ident("property")?;
        loop {
            match word.as_str() {
                "custom" => custom = true,
                "uniform" => uniform = true,
                "varying" | "config" => {}
                _ => break,
            }
            word = self.ident("property type")?;
        }
        if word == "rel" {
            let name = self.property_name()?;
            let targets = if self.eat_punct('=') {
                Some(match self.next() {
                    Tok::Path(p) => vec![p],
                    Tok::Ident(s) if s == "None" => Vec::new(),
                    Tok::Punct('[') => {
                        let mut t = Vec::new();
                        loop {
                            match self.next() {
                                Tok::Punct(']') => break,
                                Tok::Punct(',') => {}
                                Tok::Path(p) => t.push(p),
                                other => {
                                    self.back();
                                    return Err(self.err_last(format!(
                                        "expected relationship target, found {}",
                                        Self::describe(&other)
                                    )));
                                }
                            }
                        }
                        t
                    }
                    other => {
                        self.back();
                        return Err(self.err_last(format!(
                            "expected relationship target, found {}",
                            Self::describe(&other)
                        )));
                    }
                })
            } else {
                None
            };
            let metadata = if self.eat_punct('(') {
                self.metadata_block()?
            } else {
                Vec::new()
            };
            return Ok((
                name,
                Property::Relationship {
                    custom,
                    targets,
                    metadata,
                },
            ));
        }
        let mut type_name = word;
        if *self.peek() == Tok::Punct('[') && *self.peek_at(1) == Tok::Punct(']') {
            self.next();
            self.next();
            type_name.push_str("[]");
        }
        let name = self.property_name()?;
        let value = if self.eat_punct('=') { Some(self.value()?) } else { None };
        let metadata = if self.eat_punct('(') {
            self.metadata_block()?
        } else {
            Vec::new()
        };
        Ok((
            name,
            Property::Attribute(Attribute {
                type_name,
                custom,
                uniform,
                value,
                metadata,
            }),
        ))
    }

    fn property_name(&mut self) -> Result<String, UsdaError> {
        let name = self.ident("property name")?;
        for suffix in [".timeSamples", ".connect", ".spline"] {
            if name.ends_with(suffix) {
                return Err(self.err(format!("`{suffix}` is not supported")));
            }
        }
        Ok(name)
    }

    fn value(&mut self) -> Result<UsdValue, UsdaError> {
        match self.next() {
            Tok::Number(n) => Ok(UsdValue::Number(n)),
            Tok::Str(s) => Ok(UsdValue::Str(s)),
            Tok::Ident(s) => Ok(UsdValue::Ident(s)),
            Tok::Path(p) => Ok(UsdValue::Path(p)),
            Tok::Asset(a) => Ok(UsdValue::Asset(a)),
            Tok::Punct('(') => Ok(UsdValue::Tuple(self.items(')')?)),
            Tok::Punct('[') => Ok(UsdValue::List(self.items(']')?)),
            Tok::Punct('{') => self.dict(),
            other => {
                self.back();
                Err(self.err_last(format!("expected value, found {}", Self::describe(&other))))
            }
        }
    }

    fn items(&mut self, close: char) -> Result<Vec<UsdValue>, UsdaError> {
        let mut out = Vec::new();
        loop {
            if self.eat_punct(close) {
                return Ok(out);
            }
            out.push(self.value()?);
            if !self.eat_punct(',') {
                self.expect_punct(close)?;
                return Ok(out);
            }
        }
    }

    fn dict(&mut self) -> Result<UsdValue, UsdaError> {
        let mut entries = Vec::new();
        loop {
            if self.eat_punct('}') {
                return Ok(UsdValue::Dict(entries));
            }
            if self.eat_punct(';') {
                continue;
            }
            let mut type_name = self.ident("dictionary value type")?;
            if *self.peek() == Tok::Punct('[') && *self.peek_at(1) == Tok::Punct(']') {
                self.next();
                self.next();
                type_name.push_str("[]");
            }
            let key = match self.next() {
                Tok::Ident(k) | Tok::Str(k) => k,
                other => {
                    self.back();
                    return Err(self.err_last(format!("expected dictionary key, found {}", Self::describe(&other))));
                }
            };
            self.expect_punct('=')?;
            let value = self.value()?;
            entries.push(DictEntry { type_name, key, value });
        }
    }
}

/// Parses a complete layer. The first line must be `#usda 1.0`.
pub fn parse(text: &str) -> Result<UsdaStage, UsdaError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let first = text.lines().next().unwrap_or("");
    if !first.trim_end().starts_with("#usda 1.0") {
        return Err(UsdaError {
            line: 1,
            column: 1,
            message: "missing `#usda 1.0` header".into(),
        });
    }
    let toks = Lexer::new(text).tokens()?;
    Parser { toks, i: 0, last: 0 }.stage()
}

/// Parses a single prim definition (used for passthrough text).
pub fn parse_prim(text: &str) -> Result<UsdaPrim, UsdaError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser { toks, i: 0, last: 0 };
    let prim = p.prim()?;
    if *p.peek() != Tok::Eof {
        return Err(p.err("trailing input after prim"));
    }
    Ok(prim)
}

/// Parses the inside of a prim body: property lines and child prims.
pub fn parse_items(text: &str) -> Result<(BTreeMap<String, Property>, Vec<UsdaPrim>), UsdaError> {
    let toks = Lexer::new(text).tokens()?;
    let mut p = Parser { toks, i: 0, last: 0 };
    let mut props = BTreeMap::new();
    let mut prims = Vec::new();
    loop {
        match p.peek().clone() {
            Tok::Eof => return Ok((props, prims)),
            Tok::Ident(s) if SPECIFIERS.contains(&s.as_str()) => prims.push(p.prim()?),
            _ => {
                let (name, prop) = p.property()?;
                props.insert(name, prop);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::usda::writer::emit;

    const SAMPLE: &str = r#"#usda 1.0
(
    defaultPrim = "World"
    metersPerUnit = 1
    subLayers = [
        @./scene.semantic.usda@
    ]
)

def Xform "World" (
    prepend apiSchemas = ["PhysicsMassAPI"]
    displayName = "my world"
)
{
    double physics:mass = 2.5e-3 # trailing comment
    uniform token[] xformOpOrder = ["xformOp:translate"]
    texCoord2f[] primvars:st = [(0, 1), (.5, -1e+2)] (
        interpolation = "vertex"
    )
    rel physics:body0 = </World/a>
    custom dictionary extra = { string a = "x"; double[] b = [1, 2] }

    over "child"
    {
    }
}
"#;

    #[test]
    fn parses_sample() {
        let stage = parse(SAMPLE).unwrap();
        assert_eq!(stage.default_prim(), Some("World"));
        assert_eq!(stage.sublayers(), vec!["./scene.semantic.usda"]);
        let w = &stage.prims[0];
        assert_eq!(w.api_schemas(), vec!["PhysicsMassAPI"]);
        assert_eq!(w.value("physics:mass").unwrap().as_f64(), Some(2.5e-3));
        assert_eq!(w.targets("physics:body0").unwrap(), ["/World/a"]);
        assert_eq!(w.attribute("primvars:st").unwrap().type_name, "texCoord2f[]");
        assert_eq!(w.children[0].specifier, Specifier::Over);
    }

    #[test]
    fn emit_parse_emit_is_stable() {
        let stage = parse(SAMPLE).unwrap();
        let text = emit(&stage);
        let again = parse(&text).unwrap();
        assert_eq!(again, stage);
        assert_eq!(emit(&again), text);
    }

    #[test]
    fn errors_carry_location() {
        let err = parse("#usda 1.0\ndef Xform \"a\" {\n    double x = \n}\n").unwrap_err();
        assert_eq!(err.line, 4);
        let err = parse("def Xform \"a\" {}").unwrap_err();
        assert_eq!(err.line, 1);
        let err = parse("#usda 1.0\ndef \"a\" {\n  float x.timeSamples = {}\n}").unwrap_err();
        assert!(err.message.contains("timeSamples"));
    }

    #[test]
    fn strings_with_escapes_and_unicode() {
        let stage = parse("#usda 1.0\ndef \"a\" (\n displayName = \"Tisch (gro\\\"ß)\"\n)\n{\n}\n").unwrap();
        assert_eq!(stage.prims[0].display_name(), Some("Tisch (gro\"ß)"));
        let again = parse(&emit(&stage)).unwrap();
        assert_eq!(again, stage);
    }
}
