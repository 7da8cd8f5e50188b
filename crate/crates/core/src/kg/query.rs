//! Competency-question patterns.
//!
//! ```text
//! ?X : instanceOf(?X, 'breakfast_food'),
//! or (hasPartType(?X, ?C),
//!     subclassOf(?C, 'breakfast_food'))
//! ```
//!
//! The head lists the answer variables. The body is a conjunction of atoms
//! followed by any number of `or (...)` blocks, each an alternative
//! conjunction. Answers are the union over all alternatives.

use std::collections::BTreeMap;
use std::fmt;

/// Predicates a pattern may use.
pub const PREDICATES: [(&str, usize); 8] = [
    ("instanceOf", 2),
    ("subclassOf", 2),
    ("hasPart", 2),
    ("hasPartType", 2),
    ("hasDisposition", 2),
    ("useMatch", 3),
    ("contains", 2),
    ("designedToContain", 2),
];

/// Prefix given to quoted constants written without one.
pub const DEFAULT_PREFIX: &str = "dfl";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
    Param(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => write!(f, "'{c}'"),
            Term::Param(p) => write!(f, "${p}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub head: Vec<String>,
    /// Alternatives; each is a conjunction.
    pub branches: Vec<Vec<Atom>>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QueryError {
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("`{predicate}` takes {expected} arguments, got {got}")]
    Arity {
        predicate: String,
        expected: usize,
        got: usize,
    },
    #[error("answer variable ?{var} is not bound by alternative {branch}")]
    Unbound { var: String, branch: usize },
    #[error("parameter ${0} has no value")]
    MissingParam(String),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Var(String),
    Param(String),
    Quoted(String),
    Ident(String),
    Punct(char),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, message: impl Into<String>) -> QueryError {
        QueryError::Parse {
            line: self.line,
            column: self.col,
            message: message.into(),
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_char()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn word(&mut self) -> String {
        let mut w = String::new();
        while let Some(c) = self.peek_char() {
            if c.is_alphanumeric() || c == '_' {
                w.push(c);
                self.bump();
            } else {
                break;
            }
        }
        w
    }

    /// All tokens with the (line, column) they start at.
    fn tokens(mut self) -> Result<Vec<(Tok, usize, usize)>, QueryError> {
        let mut out = Vec::new();
        loop {
            while self.peek_char().is_some_and(char::is_whitespace) {
                self.bump();
            }
            if self.peek_char() == Some('#') {
                while self.peek_char().is_some_and(|c| c != '\n') {
                    self.bump();
                }
                continue;
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek_char() else { break };
            let tok = match c {
                '?' | '$' => {
                    self.bump();
                    let w = self.word();
                    if w.is_empty() {
                        return Err(self.err(format!("bad name after `{c}`")));
                    }
                    if c == '?' {
                        Tok::Var(w)
                    } else {
                        Tok::Param(w)
                    }
                }
                '\'' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            Some('\'') => break,
                            Some('\n') | None => {
                                return Err(QueryError::Parse {
                                    line,
                                    column: col,
                                    message: "unterminated quoted constant".into(),
                                })
                            }
                            Some(c) => s.push(c),
                        }
                    }
                    if s.is_empty() || s.chars().any(char::is_whitespace) {
                        return Err(QueryError::Parse {
                            line,
                            column: col,
                            message: "constants must be non-empty and without spaces".into(),
                        });
                    }
                    Tok::Quoted(s)
                }
                ',' | '(' | ')' | ':' => {
                    self.bump();
                    Tok::Punct(c)
                }
                c if c.is_alphabetic() => Tok::Ident(self.word()),
                c => return Err(self.err(format!("unexpected character `{c}`"))),
            };
            out.push((tok, line, col));
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    i: usize,
    end: (usize, usize),
}

impl Parser {
    fn err_at(&self, message: impl Into<String>) -> QueryError {
        let (line, column) = self.toks.get(self.i).map(|t| (t.1, t.2)).unwrap_or(self.end);
        QueryError::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.0)
    }

    fn expect(&mut self, c: char) -> Result<(), QueryError> {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.i += 1;
            Ok(())
        } else {
            Err(self.err_at(format!("expected `{c}`")))
        }
    }

    fn atom(&mut self) -> Result<Atom, QueryError> {
        let Some(Tok::Ident(name)) = self.peek().cloned() else {
            return Err(self.err_at("expected a predicate"));
        };
        let Some(&(_, expected)) = PREDICATES.iter().find(|(p, _)| *p == name) else {
            return Err(self.err_at(format!("unknown predicate `{name}`")));
        };
        self.i += 1;
        self.expect('(')?;
        let mut args = Vec::new();
        loop {
            let term = match self.peek().cloned() {
                Some(Tok::Var(v)) => Term::Var(v),
                Some(Tok::Param(p)) => Term::Param(p),
                Some(Tok::Quoted(c)) => Term::Const(resolve_constant(&c)),
                _ => return Err(self.err_at("expected ?variable, $parameter or 'constant'")),
            };
            self.i += 1;
            args.push(term);
            match self.peek() {
                Some(Tok::Punct(',')) => self.i += 1,
                Some(Tok::Punct(')')) => {
                    self.i += 1;
                    break;
                }
                _ => return Err(self.err_at("expected `,` or `)`")),
            }
        }
        if args.len() != expected {
            return Err(QueryError::Arity {
                predicate: name,
                expected,
                got: args.len(),
            });
        }
        Ok(Atom { predicate: name, args })
    }

    fn is_or(&self) -> bool {
        matches!(self.peek(), Some(Tok::Ident(w)) if w == "or")
    }

    /// Atoms separated by commas; stops before `or`, `)` or the end.
    fn conjunction(&mut self) -> Result<Vec<Atom>, QueryError> {
        let mut atoms = vec![self.atom()?];
        while self.peek() == Some(&Tok::Punct(',')) {
            self.i += 1;
            if self.is_or() {
                break;
            }
            atoms.push(self.atom()?);
        }
        Ok(atoms)
    }
}

/// `'breakfast_food'` means `dfl:breakfast_food`; prefixed constants are kept.
pub fn resolve_constant(c: &str) -> String {
    if c.contains(':') {
        c.to_string()
    } else {
        format!("{DEFAULT_PREFIX}:{c}")
    }
}

impl Query {
    pub fn parse(text: &str) -> Result<Self, QueryError> {
        let lexer = Lexer {
            src: text,
            pos: 0,
            line: 1,
            col: 1,
        };
        let toks = lexer.tokens()?;
        let end = {
            let line = text.lines().count().max(1);
            let col = text.lines().last().map_or(0, |l| l.chars().count()) + 1;
            (line, col)
        };
        let mut p = Parser { toks, i: 0, end };
        let mut head = Vec::new();
        loop {
            match p.peek().cloned() {
                Some(Tok::Var(v)) => {
                    p.i += 1;
                    if !head.contains(&v) {
                        head.push(v);
                    }
                }
                _ => return Err(p.err_at("expected an answer variable")),
            }
            match p.peek() {
                Some(Tok::Punct(',')) => p.i += 1,
                Some(Tok::Punct(':')) => {
                    p.i += 1;
                    break;
                }
                _ => return Err(p.err_at("expected `,` or ` : ` after answer variables")),
            }
        }
        let mut branches = vec![p.conjunction()?];
        while p.is_or() {
            p.i += 1;
            p.expect('(')?;
            branches.push(p.conjunction()?);
            p.expect(')')?;
        }
        if p.peek().is_some() {
            return Err(p.err_at("expected `or (` or the end of the query"));
        }
        let q = Query { head, branches };
        q.check()?;
        Ok(q)
    }

    fn check(&self) -> Result<(), QueryError> {
        for (k, branch) in self.branches.iter().enumerate() {
            for v in &self.head {
                let bound = branch
                    .iter()
                    .any(|a| a.args.iter().any(|t| matches!(t, Term::Var(x) if x == v)));
                if !bound {
                    return Err(QueryError::Unbound {
                        var: v.clone(),
                        branch: k + 1,
                    });
                }
            }
        }
        Ok(())
    }

    /// Parameter names used anywhere in the pattern, sorted.
    pub fn params(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .branches
            .iter()
            .flatten()
            .flat_map(|a| &a.args)
            .filter_map(|t| match t {
                Term::Param(p) => Some(p.clone()),
                _ => None,
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Replaces `$NAME` terms with constants. Values follow the same
    /// prefix rule as quoted constants.
    pub fn bind(&self, values: &BTreeMap<String, String>) -> Result<Query, QueryError> {
        let mut q = self.clone();
        for atom in q.branches.iter_mut().flatten() {
            for t in &mut atom.args {
                if let Term::Param(p) = t {
                    let v = values
                        .get(p.as_str())
                        .ok_or_else(|| QueryError::MissingParam(p.clone()))?;
                    *t = Term::Const(resolve_constant(v));
                }
            }
        }
        Ok(q)
    }
}
