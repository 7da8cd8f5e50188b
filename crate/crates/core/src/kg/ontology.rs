//! Ontology fixtures: class hierarchy plus part-type, disposition,
//! containment and use-match axioms, in a small line-oriented text format.
//!
//! ```text
//! # comment
//! prefix dfl: <http://www.ease-crc.org/ont/SOMA_DFL.owl#> .
//! class dfl:cup.n, dfl:tableware .
//! disposition dfl:grasp.Theme .
//! task dfl:eat .
//! dfl:cup.n subclassOf dfl:tableware .
//! dfl:cup.n hasDisposition dfl:grasp.Theme .
//! useMatch(dfl:eat, dfl:spoon.n, dfl:cereal.n) .
//! ```

use std::collections::{BTreeMap, BTreeSet};

/// Relations allowed between two classes (or class and disposition).
pub const CLASS_RELATIONS: [&str; 4] = ["subclassOf", "hasPartType", "hasDisposition", "designedToContain"];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OntologyError {
    #[error("ontology line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("ontology line {line}: `{term}` is not a declared {kind}")]
    Undeclared {
        line: usize,
        term: String,
        kind: &'static str,
    },
    #[error("subclass cycle through {0}")]
    Cycle(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct UseMatch {
    pub task: String,
    pub instrument: String,
    pub patient: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ontology {
    /// Compact prefix → namespace IRI.
    pub prefixes: BTreeMap<String, String>,
    pub classes: BTreeSet<String>,
    pub dispositions: BTreeSet<String>,
    pub tasks: BTreeSet<String>,
    /// Direct (class, superclass) axioms.
    pub subclass_of: BTreeSet<(String, String)>,
    pub has_part_type: BTreeSet<(String, String)>,
    pub has_disposition: BTreeSet<(String, String)>,
    pub designed_to_contain: BTreeSet<(String, String)>,
    pub use_matches: BTreeSet<UseMatch>,
    /// Reflexive-transitive superclasses of every class.
    supers: BTreeMap<String, BTreeSet<String>>,
    subs: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Debug, PartialEq)]
enum Tok {
    Name(String),
    Iri(String),
    Punct(char),
    End,
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<Tok>, OntologyError> {
    let err = |message: String| OntologyError::Syntax { line: line_no, message };
    let mut out = Vec::new();
    let mut chars = line.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        match c {
            '#' => break,
            c if c.is_whitespace() => {
                chars.next();
            }
            ',' | '(' | ')' => {
                out.push(Tok::Punct(c));
                chars.next();
            }
            '<' => {
                let rest = &line[i + 1..];
                let close = rest.find('>').ok_or_else(|| err("unterminated <IRI>".into()))?;
                out.push(Tok::Iri(rest[..close].to_string()));
                for _ in 0..close + 2 {
                    chars.next();
                }
            }
            '.' => {
                out.push(Tok::End);
                chars.next();
            }
            _ => {
                let mut word = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_whitespace() || matches!(c, ',' | '(' | ')' | '#' | '<') {
                        break;
                    }
                    word.push(c);
                    chars.next();
                }
                match word.strip_suffix('.') {
                    Some(w) => {
                        out.push(Tok::Name(w.to_string()));
                        out.push(Tok::End);
                    }
                    None => out.push(Tok::Name(word)),
                }
            }
        }
    }
    Ok(out)
}

fn is_term(name: &str) -> bool {
    match name.split_once(':') {
        Some((p, l)) => {
            p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                && !l.is_empty()
                && l.chars().all(|c| c.is_alphanumeric() || matches!(c, '_' | '.' | '-'))
        }
        None => false,
    }
}

impl Ontology {
    pub fn parse(text: &str) -> Result<Self, OntologyError> {
        let mut o = Ontology::default();
        // Axioms are checked against declarations after the whole file is read.
        let mut pending: Vec<(usize, &'static str, String)> = Vec::new();
        let mut statement: Vec<Tok> = Vec::new();
        let mut start_line = 1;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            for tok in tokenize(line, line_no)? {
                if statement.is_empty() {
                    start_line = line_no;
                }
                if tok == Tok::End {
                    o.statement(std::mem::take(&mut statement), start_line, &mut pending)?;
                } else {
                    statement.push(tok);
                }
            }
        }
        if !statement.is_empty() {
            return Err(OntologyError::Syntax {
                line: start_line,
                message: "statement is missing its final `.`".into(),
            });
        }
        for (line, kind, term) in pending {
            let known = match kind {
                "class" => o.classes.contains(&term),
                "disposition" => o.dispositions.contains(&term),
                _ => o.tasks.contains(&term),
            };
            if !known {
                return Err(OntologyError::Undeclared { line, term, kind });
            }
        }
        o.close()?;
        Ok(o)
    }

    fn statement(
        &mut self,
        toks: Vec<Tok>,
        line: usize,
        pending: &mut Vec<(usize, &'static str, String)>,
    ) -> Result<(), OntologyError> {
        let err = |message: &str| OntologyError::Syntax {
            line,
            message: message.to_string(),
        };
        let names = |toks: &[Tok]| -> Result<Vec<String>, OntologyError> {
            let mut out = Vec::new();
            for (k, t) in toks.iter().enumerate() {
                match (k % 2, t) {
                    (0, Tok::Name(n)) if is_term(n) => out.push(n.clone()),
                    (1, Tok::Punct(',')) => {}
                    _ => return Err(err("expected a comma-separated list of prefixed names")),
                }
            }
            if out.is_empty() || toks.len() % 2 == 0 {
                return Err(err("expected a comma-separated list of prefixed names"));
            }
            Ok(out)
        };
        match &toks[..] {
            [] => Err(err("empty statement")),
            [Tok::Name(kw), Tok::Name(p), Tok::Iri(iri)] if kw == "prefix" => {
                let p = p
                    .strip_suffix(':')
                    .ok_or_else(|| err("prefix name must end with `:`"))?;
                self.prefixes.insert(p.to_string(), iri.clone());
                Ok(())
            }
            [Tok::Name(kw), rest @ ..] if kw == "class" || kw == "disposition" || kw == "task" => {
                let set = match kw.as_str() {
                    "class" => &mut self.classes,
                    "disposition" => &mut self.dispositions,
                    _ => &mut self.tasks,
                };
                set.extend(names(rest)?);
                Ok(())
            }
            [Tok::Name(kw), Tok::Punct('('), Tok::Name(t), Tok::Punct(','), Tok::Name(i), Tok::Punct(','), Tok::Name(p), Tok::Punct(')')]
                if kw == "useMatch" =>
            {
                for (kind, term) in [("task", t), ("class", i), ("class", p)] {
                    if !is_term(term) {
                        return Err(err("useMatch arguments must be prefixed names"));
                    }
                    pending.push((line, kind, term.clone()));
                }
                self.use_matches.insert(UseMatch {
                    task: t.clone(),
                    instrument: i.clone(),
                    patient: p.clone(),
                });
                Ok(())
            }
            [Tok::Name(s), Tok::Name(rel), Tok::Name(obj)] if CLASS_RELATIONS.contains(&rel.as_str()) => {
                if !is_term(s) || !is_term(obj) {
                    return Err(err("axiom terms must be prefixed names"));
                }
                pending.push((line, "class", s.clone()));
                let obj_kind = if rel == "hasDisposition" {
                    "disposition"
                } else {
                    "class"
                };
                pending.push((line, obj_kind, obj.clone()));
                let set = match rel.as_str() {
                    "subclassOf" => &mut self.subclass_of,
                    "hasPartType" => &mut self.has_part_type,
                    "hasDisposition" => &mut self.has_disposition,
                    _ => &mut self.designed_to_contain,
                };
                set.insert((s.clone(), obj.clone()));
                Ok(())
            }
            [Tok::Name(_), Tok::Name(rel), Tok::Name(_)] => Err(err(&format!("unknown relation `{rel}`"))),
            _ => Err(err("cannot read statement")),
        }
    }

    /// Recomputes the subclass closure; fails on cycles.
    pub fn close(&mut self) -> Result<(), OntologyError> {
        let mut direct: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (a, b) in &self.subclass_of {
            direct.entry(a).or_default().push(b);
        }
        // Depth-first with colouring to find cycles.
        fn visit<'a>(
            c: &'a str,
            direct: &BTreeMap<&'a str, Vec<&'a str>>,
            state: &mut BTreeMap<&'a str, u8>,
            supers: &mut BTreeMap<String, BTreeSet<String>>,
        ) -> Result<(), OntologyError> {
            match state.get(c) {
                Some(2) => return Ok(()),
                Some(1) => return Err(OntologyError::Cycle(c.to_string())),
                _ => {}
            }
            state.insert(c, 1);
            let mut all = BTreeSet::from([c.to_string()]);
            for &p in direct.get(c).map(Vec::as_slice).unwrap_or_default() {
                visit(p, direct, state, supers)?;
                all.extend(supers[p].iter().cloned());
            }
            supers.insert(c.to_string(), all);
            state.insert(c, 2);
            Ok(())
        }
        let mut state = BTreeMap::new();
        let mut supers = BTreeMap::new();
        for c in &self.classes {
            visit(c, &direct, &mut state, &mut supers)?;
        }
        let mut subs: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (c, ss) in &supers {
            for s in ss {
                subs.entry(s.clone()).or_default().insert(c.clone());
            }
        }
        self.supers = supers;
        self.subs = subs;
        Ok(())
    }

    /// `class` and all its superclasses.
    pub fn superclasses(&self, class: &str) -> impl Iterator<Item = &String> {
        self.supers.get(class).into_iter().flatten()
    }

    /// `class` and all its subclasses.
    pub fn subclasses(&self, class: &str) -> impl Iterator<Item = &String> {
        self.subs.get(class).into_iter().flatten()
    }

    pub fn is_subclass(&self, sub: &str, sup: &str) -> bool {
        self.supers.get(sub).is_some_and(|s| s.contains(sup))
    }

    /// Whether instances of `class` are meant to hold things.
    pub fn is_container(&self, class: &str) -> bool {
        self.superclasses(class)
            .any(|c| self.designed_to_contain.iter().any(|(s, _)| s == c))
    }

    /// Triples describing the ontology itself, as (subject, predicate, object).
    pub fn axiom_triples(&self) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        let t = |s: &str, p: &str, o: &str| (s.to_string(), p.to_string(), o.to_string());
        for c in &self.classes {
            out.push(t(c, "rdf:type", "owl:Class"));
        }
        for d in &self.dispositions {
            out.push(t(d, "rdf:type", "kg:Disposition"));
        }
        for k in &self.tasks {
            out.push(t(k, "rdf:type", "kg:Task"));
        }
        for (a, b) in &self.subclass_of {
            out.push(t(a, "rdfs:subClassOf", b));
        }
        for (rel, set) in [
            ("kg:hasPartType", &self.has_part_type),
            ("kg:hasDisposition", &self.has_disposition),
            ("kg:designedToContain", &self.designed_to_contain),
        ] {
            for (a, b) in set {
                out.push(t(a, rel, b));
            }
        }
        for m in &self.use_matches {
            let node = use_match_node(m);
            out.push(t(&node, "rdf:type", "kg:UseMatch"));
            out.push(t(&node, "kg:task", &m.task));
            out.push(t(&node, "kg:instrument", &m.instrument));
            out.push(t(&node, "kg:patient", &m.patient));
        }
        out
    }
}

/// Deterministic name of the node standing for one use-match fact.
pub fn use_match_node(m: &UseMatch) -> String {
    let part = |s: &str| s.replace([':', '.'], "_");
    format!(
        "kg:useMatch_{}__{}__{}",
        part(&m.task),
        part(&m.instrument),
        part(&m.patient)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "
prefix dfl: <http://www.ease-crc.org/ont/SOMA_DFL.owl#> .
class dfl:food, dfl:breakfast_food, dfl:cereal.n, dfl:cereal_box.n . # trailing comment
class dfl:spoon.n.
task dfl:eat .
disposition dfl:grasp.Theme .
dfl:breakfast_food subclassOf dfl:food .
dfl:cereal.n subclassOf dfl:breakfast_food .
dfl:cereal_box.n hasPartType dfl:cereal.n .
dfl:spoon.n hasDisposition dfl:grasp.Theme .
useMatch(dfl:eat, dfl:spoon.n, dfl:cereal.n) .
";

    #[test]
    fn parses_and_closes() {
        let o = Ontology::parse(SMALL).unwrap();
        assert_eq!(o.classes.len(), 5);
        assert!(o.is_subclass("dfl:cereal.n", "dfl:food"));
        assert!(o.is_subclass("dfl:cereal.n", "dfl:cereal.n"));
        assert!(!o.is_subclass("dfl:food", "dfl:cereal.n"));
        let subs: Vec<&String> = o.subclasses("dfl:food").collect();
        assert_eq!(subs, ["dfl:breakfast_food", "dfl:cereal.n", "dfl:food"]);
        assert_eq!(o.use_matches.len(), 1);
        assert_eq!(o.prefixes["dfl"], "http://www.ease-crc.org/ont/SOMA_DFL.owl#");
    }

    #[test]
    fn errors_carry_lines() {
        let cases = [
            ("class dfl:a .\ndfl:a subclassOf dfl:b .\n", 2),
            ("class dfl:a .\ndfl:a likes dfl:a .\n", 2),
            ("class dfl:a\n", 1),
            ("class dfl:a .\n\ndfl:a hasDisposition dfl:a .\n", 3),
            ("useMatch(dfl:eat, dfl:a) .\n", 1),
        ];
        for (text, line) in cases {
            let e = Ontology::parse(text).unwrap_err();
            let got = match e {
                OntologyError::Syntax { line, .. } | OntologyError::Undeclared { line, .. } => line,
                OntologyError::Cycle(_) => 0,
            };
            assert_eq!(got, line, "{text:?}: {e}");
        }
    }

    #[test]
    fn cycles_are_rejected() {
        let text = "class dfl:a, dfl:b .\ndfl:a subclassOf dfl:b .\ndfl:b subclassOf dfl:a .\n";
        assert!(matches!(Ontology::parse(text), Err(OntologyError::Cycle(_))));
    }
}
