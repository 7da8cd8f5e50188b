//! Query answers by exhaustive assignment.
//!
//! The subclass closure is materialized by fixpoint iteration, every
//! predicate is a plain set of ground tuples, and each branch is solved by
//! trying every domain value for every variable in order, checking an atom
//! as soon as all its variables are bound.

use std::collections::{BTreeMap, BTreeSet};

use scenegraph_core::kg::{Atom, KnowledgeGraph, Query, Term, CONTAINS, HAS_PART, INSTANCE_OF};

type Tuple = Vec<String>;

/// Ground relations of a knowledge graph under the query semantics.
pub struct NaiveModel {
    relations: BTreeMap<&'static str, BTreeSet<Tuple>>,
    domain: Vec<String>,
}

fn pair(a: &str, b: &str) -> Tuple {
    vec![a.to_string(), b.to_string()]
}

impl NaiveModel {
    pub fn new(kg: &KnowledgeGraph) -> Self {
        let onto = &kg.ontology;

        // Reflexive-transitive subclass relation over declared classes.
        let mut sub: BTreeSet<(String, String)> = onto.classes.iter().map(|c| (c.clone(), c.clone())).collect();
        sub.extend(onto.subclass_of.iter().cloned());
        loop {
            let mut grown = sub.clone();
            for (a, b) in &sub {
                for (c, d) in &sub {
                    if b == c {
                        grown.insert((a.clone(), d.clone()));
                    }
                }
            }
            if grown.len() == sub.len() {
                break;
            }
            sub = grown;
        }

        let labels: BTreeSet<(String, String)> = kg
            .facts()
            .iter()
            .filter(|t| t.predicate == INSTANCE_OF)
            .map(|t| (t.subject.clone(), t.object.clone()))
            .collect();
        let mut instance: BTreeSet<Tuple> = BTreeSet::new();
        for (x, l) in &labels {
            instance.insert(pair(x, l));
            for (a, b) in &sub {
                if a == l {
                    instance.insert(pair(x, b));
                }
            }
        }

        let class_level = |axioms: &BTreeSet<(String, String)>| -> BTreeSet<Tuple> {
            let mut out = BTreeSet::new();
            for t in &instance {
                for (c, v) in axioms {
                    if &t[1] == c {
                        out.insert(pair(&t[0], v));
                    }
                }
            }
            out
        };

        let mut use_match = BTreeSet::new();
        for m in &onto.use_matches {
            for a in &instance {
                for b in &instance {
                    if a[1] == m.instrument && b[1] == m.patient {
                        use_match.insert(vec![m.task.clone(), a[0].clone(), b[0].clone()]);
                    }
                }
            }
        }

        let direct = |p: &str| -> BTreeSet<Tuple> {
            kg.facts()
                .iter()
                .filter(|t| t.predicate == p)
                .map(|t| pair(&t.subject, &t.object))
                .collect()
        };

        let relations = BTreeMap::from([
            ("instanceOf", instance.clone()),
            ("subclassOf", sub.iter().map(|(a, b)| pair(a, b)).collect()),
            ("hasPart", direct(HAS_PART)),
            ("contains", direct(CONTAINS)),
            ("hasPartType", class_level(&onto.has_part_type)),
            ("hasDisposition", class_level(&onto.has_disposition)),
            ("designedToContain", class_level(&onto.designed_to_contain)),
            ("useMatch", use_match),
        ]);
        let domain: BTreeSet<String> = relations.values().flatten().flatten().cloned().collect();
        Self {
            relations,
            domain: domain.into_iter().collect(),
        }
    }

    /// Number of ground tuples over all relations.
    pub fn size(&self) -> usize {
        self.relations.values().map(BTreeSet::len).sum()
    }

    fn holds(&self, atom: &Atom, b: &BTreeMap<&str, &str>) -> Option<bool> {
        let mut tuple = Vec::with_capacity(atom.args.len());
        for t in &atom.args {
            match t {
                Term::Var(v) => tuple.push(b.get(v.as_str())?.to_string()),
                Term::Const(c) => tuple.push(c.clone()),
                Term::Param(p) => panic!("unbound parameter ${p}"),
            }
        }
        Some(
            self.relations
                .get(atom.predicate.as_str())
                .is_some_and(|r| r.contains(&tuple)),
        )
    }

    /// Sorted, duplicate-free answer rows in head order.
    pub fn evaluate(&self, query: &Query) -> Vec<Vec<String>> {
        let mut rows = BTreeSet::new();
        for branch in &query.branches {
            let mut vars: Vec<&str> = Vec::new();
            for a in branch {
                for t in &a.args {
                    if let Term::Var(v) = t {
                        if !vars.contains(&v.as_str()) {
                            vars.push(v);
                        }
                    }
                }
            }
            let mut b = BTreeMap::new();
            self.assign(branch, &vars, &mut b, &mut |b| {
                rows.insert(query.head.iter().map(|h| b[h.as_str()].to_string()).collect::<Vec<_>>());
            });
        }
        rows.into_iter().collect()
    }

    fn assign<'a>(
        &'a self,
        branch: &[Atom],
        vars: &[&'a str],
        b: &mut BTreeMap<&'a str, &'a str>,
        emit: &mut dyn FnMut(&BTreeMap<&'a str, &'a str>),
    ) {
        if branch.iter().any(|a| self.holds(a, b) == Some(false)) {
            return;
        }
        let Some((&v, rest)) = vars.split_first() else {
            emit(b);
            return;
        };
        for value in &self.domain {
            b.insert(v, value);
            self.assign(branch, rest, b, emit);
        }
        b.remove(v);
    }
}
