//! Top-down evaluation of patterns against a knowledge graph.
//!
//! Class-level relations (`hasPartType`, `hasDisposition`,
//! `designedToContain`) hold for a scene individual when they are stated
//! for any of its classes or their superclasses. `useMatch(task, x, z)`
//! holds when the classes of `x` and `z` cover a stated use match for the
//! task. `instanceOf` and `subclassOf` follow the reflexive-transitive
//! subclass closure.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::{json, Value};

use super::query::{Atom, Query, QueryError, Term};
use super::store::{KnowledgeGraph, CONTAINS, HAS_PART, INSTANCE_OF};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryResult {
    pub vars: Vec<String>,
    /// Sorted, duplicate-free rows in `vars` order.
    pub rows: Vec<Vec<String>>,
}

impl QueryResult {
    /// Column-aligned text table with a `?var` header.
    pub fn to_table(&self) -> String {
        let header: Vec<String> = self.vars.iter().map(|v| format!("?{v}")).collect();
        let mut widths: Vec<usize> = header.iter().map(String::len).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            format!("{}\n", padded.join("  ").trim_end())
        };
        let mut out = line(&header);
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                Value::Object(
                    self.vars
                        .iter()
                        .zip(r)
                        .map(|(v, c)| (v.clone(), Value::String(c.clone())))
                        .collect(),
                )
            })
            .collect();
        json!({ "vars": self.vars, "rows": rows })
    }

    /// Values of one variable, in row order.
    pub fn column(&self, var: &str) -> Vec<&str> {
        let Some(k) = self.vars.iter().position(|v| v == var) else {
            return Vec::new();
        };
        self.rows.iter().map(|r| r[k].as_str()).collect()
    }
}

/// Query evaluator with the subclass closure applied to every individual.
pub struct Evaluator<'a> {
    kg: &'a KnowledgeGraph,
    /// Individual → all its classes, superclasses included.
    types: BTreeMap<&'a str, BTreeSet<&'a str>>,
    /// Class → individuals of it or any subclass.
    members: BTreeMap<&'a str, BTreeSet<&'a str>>,
}

type Bindings = BTreeMap<String, String>;

impl<'a> Evaluator<'a> {
    pub fn new(kg: &'a KnowledgeGraph) -> Self {
        let mut types: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut members: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for t in kg.with_predicate(INSTANCE_OF) {
            let set = types.entry(t.subject.as_str()).or_default();
            set.insert(t.object.as_str());
            set.extend(kg.ontology.superclasses(&t.object).map(String::as_str));
        }
        for (x, classes) in &types {
            for c in classes {
                members.entry(c).or_default().insert(x);
            }
        }
        Self { kg, types, members }
    }

    fn types_of(&self, x: &str) -> impl Iterator<Item = &'a str> + '_ {
        self.types.get(x).into_iter().flatten().copied()
    }

    fn members_of(&self, c: &str) -> impl Iterator<Item = &'a str> + '_ {
        self.members.get(c).into_iter().flatten().copied()
    }

    pub fn evaluate(&self, query: &Query) -> Result<QueryResult, QueryError> {
        let mut rows = BTreeSet::new();
        for branch in &query.branches {
            for atom in branch {
                for t in &atom.args {
                    if let Term::Param(p) = t {
                        return Err(QueryError::MissingParam(p.clone()));
                    }
                }
                if !super::query::PREDICATES.iter().any(|(p, _)| *p == atom.predicate) {
                    return Err(QueryError::UnknownPredicate(atom.predicate.clone()));
                }
            }
            let mut remaining: Vec<&Atom> = branch.iter().collect();
            self.solve(&mut remaining, &mut Bindings::new(), &mut |b| {
                if let Some(row) = query.head.iter().map(|v| b.get(v).cloned()).collect::<Option<Vec<_>>>() {
                    rows.insert(row);
                }
            });
        }
        Ok(QueryResult {
            vars: query.head.clone(),
            rows: rows.into_iter().collect(),
        })
    }

    fn solve(&self, remaining: &mut Vec<&Atom>, b: &mut Bindings, emit: &mut dyn FnMut(&Bindings)) {
        if remaining.is_empty() {
            emit(b);
            return;
        }
        // Most-constrained atom first.
        let bound = |a: &Atom| {
            a.args
                .iter()
                .filter(|t| match t {
                    Term::Var(v) => b.contains_key(v),
                    _ => true,
                })
                .count()
        };
        let pick = (0..remaining.len())
            .max_by_key(|&i| (bound(remaining[i]), std::cmp::Reverse(i)))
            .unwrap_or_default();
        let atom = remaining.remove(pick);
        let args: Vec<Option<String>> = atom
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => b.get(v).cloned(),
                Term::Const(c) => Some(c.clone()),
                Term::Param(_) => None,
            })
            .collect();
        for tuple in self.matches(&atom.predicate, &args) {
            let mut added = Vec::new();
            let mut ok = true;
            for (t, value) in atom.args.iter().zip(&tuple) {
                if let Term::Var(v) = t {
                    match b.get(v) {
                        Some(existing) if existing != value => {
                            ok = false;
                            break;
                        }
                        Some(_) => {}
                        None => {
                            b.insert(v.clone(), value.clone());
                            added.push(v.clone());
                        }
                    }
                }
            }
            if ok {
                self.solve(remaining, b, emit);
            }
            for v in added {
                b.remove(&v);
            }
        }
        remaining.insert(pick, atom);
    }

    /// Ground tuples of `predicate` agreeing with the bound positions.
    fn matches(&self, predicate: &str, args: &[Option<String>]) -> Vec<Vec<String>> {
        let arg = |i: usize| args[i].as_deref();
        let pair = |a: &str, b: &str| vec![a.to_string(), b.to_string()];
        let onto = &self.kg.ontology;
        let mut out: Vec<Vec<String>> = match predicate {
            "instanceOf" => match (arg(0), arg(1)) {
                (Some(x), _) => self.types_of(x).map(|c| pair(x, c)).collect(),
                (None, Some(c)) => self.members_of(c).map(|x| pair(x, c)).collect(),
                (None, None) => self
                    .types
                    .iter()
                    .flat_map(|(x, cs)| cs.iter().map(move |c| pair(x, c)))
                    .collect(),
            },
            "subclassOf" => match (arg(0), arg(1)) {
                (Some(a), _) => onto.superclasses(a).map(|s| pair(a, s)).collect(),
                (None, Some(s)) => onto.subclasses(s).map(|a| pair(a, s)).collect(),
                (None, None) => onto
                    .classes
                    .iter()
                    .flat_map(|a| onto.superclasses(a).map(move |s| pair(a, s)))
                    .collect(),
            },
            p @ (HAS_PART | CONTAINS) => match (arg(0), arg(1)) {
                (Some(x), _) => self.kg.objects(p, x).map(|y| pair(x, y)).collect(),
                (None, Some(y)) => self.kg.subjects(p, y).map(|x| pair(x, y)).collect(),
                (None, None) => self.kg.with_predicate(p).map(|t| pair(&t.subject, &t.object)).collect(),
            },
            p @ ("hasPartType" | "hasDisposition" | "designedToContain") => {
                let axioms = match p {
                    "hasPartType" => &onto.has_part_type,
                    "hasDisposition" => &onto.has_disposition,
                    _ => &onto.designed_to_contain,
                };
                match arg(0) {
                    Some(x) => {
                        let classes: BTreeSet<&str> = self.types_of(x).collect();
                        axioms
                            .iter()
                            .filter(|(c, _)| classes.contains(c.as_str()))
                            .map(|(_, v)| pair(x, v))
                            .collect()
                    }
                    None => axioms
                        .iter()
                        .filter(|(_, v)| arg(1).is_none_or(|want| want == v))
                        .flat_map(|(c, v)| self.members_of(c).map(move |x| pair(x, v)))
                        .collect(),
                }
            }
            "useMatch" => {
                let mut out = Vec::new();
                for m in &onto.use_matches {
                    if arg(0).is_some_and(|k| k != m.task) {
                        continue;
                    }
                    let side = |bound: Option<&str>, class: &str| -> Vec<String> {
                        match bound {
                            Some(x) if self.types_of(x).any(|c| c == class) => vec![x.to_string()],
                            Some(_) => Vec::new(),
                            None => self.members_of(class).map(str::to_string).collect(),
                        }
                    };
                    for x in side(arg(1), &m.instrument) {
                        for z in side(arg(2), &m.patient) {
                            out.push(vec![m.task.clone(), x.clone(), z.clone()]);
                        }
                    }
                }
                out
            }
            _ => Vec::new(),
        };
        out.retain(|t| t.iter().zip(args).all(|(v, a)| a.as_ref().is_none_or(|a| a == v)));
        out.sort();
        out.dedup();
        out
    }
}

impl KnowledgeGraph {
    pub fn evaluate(&self, query: &Query) -> Result<QueryResult, QueryError> {
        Evaluator::new(self).evaluate(query)
    }
}
