//! Triple store: scene facts plus the ontology, with N-Triples I/O.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rio_api::model::{Subject, Term as RioTerm};
use rio_api::parser::TriplesParser;

use super::ontology::{use_match_node, Ontology, OntologyError, UseMatch};
use crate::diag::Diagnostic;
use crate::semantics;
use crate::usda::UsdaStage;

/// Scene-level predicates stored as triples.
pub const INSTANCE_OF: &str = "instanceOf";
pub const HAS_PART: &str = "hasPart";
pub const CONTAINS: &str = "contains";

/// Namespaces always known to export and import.
pub const DEFAULT_PREFIXES: [(&str, &str); 10] = [
    ("conceptnet", "http://conceptnet.io/c/"),
    ("cskg", "urn:scenegraph:cskg:"),
    ("dbpedia", "http://dbpedia.org/resource/"),
    ("dfl", "http://www.ease-crc.org/ont/SOMA_DFL.owl#"),
    ("kg", "urn:scenegraph:kg#"),
    ("owl", "http://www.w3.org/2002/07/owl#"),
    ("rdf", "http://www.w3.org/1999/02/22-rdf-syntax-ns#"),
    ("rdfs", "http://www.w3.org/2000/01/rdf-schema#"),
    ("scene", "urn:scenegraph:scene:"),
    ("wd", "http://www.wikidata.org/entity/"),
];

#[derive(Debug, thiserror::Error)]
pub enum KgError {
    #[error("`{0}` uses an unknown prefix")]
    UnknownPrefix(String),
    #[error("IRI <{0}> is outside every known namespace")]
    UnknownNamespace(String),
    #[error("N-Triples: {0}")]
    Syntax(String),
    #[error("N-Triples: {0}")]
    Shape(String),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triple {
    pub fn new(s: &str, p: &str, o: &str) -> Self {
        Self {
            subject: s.to_string(),
            predicate: p.to_string(),
            object: o.to_string(),
        }
    }
}

/// Scene facts (`instanceOf`, `hasPart`, `contains`) over an ontology.
#[derive(Clone, Debug, Default)]
pub struct KnowledgeGraph {
    pub ontology: Ontology,
    facts: BTreeSet<Triple>,
    by_subject: HashMap<(String, String), BTreeSet<String>>,
    by_object: HashMap<(String, String), BTreeSet<String>>,
}

impl KnowledgeGraph {
    pub fn new(ontology: Ontology) -> Self {
        Self {
            ontology,
            ..Default::default()
        }
    }

    /// Adds a scene fact; returns false if it was already present.
    pub fn add(&mut self, t: Triple) -> bool {
        if !self.facts.insert(t.clone()) {
            return false;
        }
        self.by_subject
            .entry((t.predicate.clone(), t.subject.clone()))
            .or_default()
            .insert(t.object.clone());
        self.by_object
            .entry((t.predicate, t.object))
            .or_default()
            .insert(t.subject);
        true
    }

    pub fn facts(&self) -> &BTreeSet<Triple> {
        &self.facts
    }

    pub fn objects(&self, predicate: &str, subject: &str) -> impl Iterator<Item = &String> {
        self.by_subject
            .get(&(predicate.to_string(), subject.to_string()))
            .into_iter()
            .flatten()
    }

    pub fn subjects(&self, predicate: &str, object: &str) -> impl Iterator<Item = &String> {
        self.by_object
            .get(&(predicate.to_string(), object.to_string()))
            .into_iter()
            .flatten()
    }

    pub fn with_predicate<'a>(&'a self, predicate: &'a str) -> impl Iterator<Item = &'a Triple> + 'a {
        self.facts.iter().filter(move |t| t.predicate == predicate)
    }

    /// Scene facts and ontology axioms in compact form, predicates mapped
    /// to their RDF names.
    pub fn all_triples(&self) -> Vec<Triple> {
        let mut out: Vec<Triple> = self
            .ontology
            .axiom_triples()
            .into_iter()
            .map(|(s, p, o)| Triple::new(&s, &p, &o))
            .collect();
        for t in &self.facts {
            let p = match t.predicate.as_str() {
                INSTANCE_OF => "rdf:type".to_string(),
                other => format!("kg:{other}"),
            };
            out.push(Triple::new(&t.subject, &p, &t.object));
        }
        out.sort();
        out.dedup();
        out
    }

    fn namespaces(&self) -> BTreeMap<String, String> {
        let mut ns: BTreeMap<String, String> = DEFAULT_PREFIXES
            .iter()
            .map(|(p, i)| (p.to_string(), i.to_string()))
            .collect();
        ns.extend(self.ontology.prefixes.clone());
        ns
    }

    /// Sorted N-Triples, one line per triple.
    pub fn to_ntriples(&self) -> Result<String, KgError> {
        let ns = self.namespaces();
        let expand = |c: &str| -> Result<String, KgError> {
            let (p, local) = c.split_once(':').ok_or_else(|| KgError::UnknownPrefix(c.to_string()))?;
            let base = ns.get(p).ok_or_else(|| KgError::UnknownPrefix(c.to_string()))?;
            Ok(format!("<{}>", escape_iri(&format!("{base}{local}"))))
        };
        let mut lines = Vec::new();
        for t in self.all_triples() {
            lines.push(format!(
                "{} {} {} .\n",
                expand(&t.subject)?,
                expand(&t.predicate)?,
                expand(&t.object)?
            ));
        }
        lines.sort();
        lines.dedup();
        Ok(lines.concat())
    }

    /// Reads what [`to_ntriples`](Self::to_ntriples) writes. `prefixes`
    /// adds namespaces beyond the defaults and becomes the ontology's map.
    pub fn from_ntriples(text: &str, prefixes: &BTreeMap<String, String>) -> Result<Self, KgError> {
        let mut ns: Vec<(String, String)> = DEFAULT_PREFIXES
            .iter()
            .map(|(p, i)| (p.to_string(), i.to_string()))
            .collect();
        for (p, i) in prefixes {
            ns.retain(|(q, _)| q != p);
            ns.push((p.clone(), i.clone()));
        }
        // Longest namespace wins when one is a prefix of another.
        ns.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
        let compact = |iri: &str| -> Result<String, KgError> {
            ns.iter()
                .find_map(|(p, base)| {
                    iri.strip_prefix(base.as_str())
                        .filter(|l| !l.is_empty())
                        .map(|l| format!("{p}:{l}"))
                })
                .ok_or_else(|| KgError::UnknownNamespace(iri.to_string()))
        };
        let mut raw = Vec::new();
        let mut parser = rio_turtle::NTriplesParser::new(text.as_bytes());
        parser.parse_all(&mut |t| -> Result<(), KgError> {
            let s = match t.subject {
                Subject::NamedNode(n) => compact(n.iri)?,
                _ => return Err(KgError::Shape("blank-node subjects are not used".into())),
            };
            let o = match t.object {
                RioTerm::NamedNode(n) => compact(n.iri)?,
                _ => return Err(KgError::Shape("objects must be IRIs".into())),
            };
            raw.push(Triple::new(&s, &compact(t.predicate.iri)?, &o));
            Ok(())
        })?;

        let mut o = Ontology::default();
        o.prefixes = prefixes.clone();
        let mut matches: BTreeMap<String, [Option<String>; 3]> = BTreeMap::new();
        let mut facts = Vec::new();
        for t in raw {
            let (s, obj) = (t.subject, t.object);
            match (t.predicate.as_str(), obj.as_str()) {
                ("rdf:type", "owl:Class") => {
                    o.classes.insert(s);
                }
                ("rdf:type", "kg:Disposition") => {
                    o.dispositions.insert(s);
                }
                ("rdf:type", "kg:Task") => {
                    o.tasks.insert(s);
                }
                ("rdf:type", "kg:UseMatch") => {
                    matches.entry(s).or_default();
                }
                ("rdf:type", _) => facts.push(Triple::new(&s, INSTANCE_OF, &obj)),
                ("rdfs:subClassOf", _) => {
                    o.subclass_of.insert((s, obj));
                }
                ("kg:hasPartType", _) => {
                    o.has_part_type.insert((s, obj));
                }
                ("kg:hasDisposition", _) => {
                    o.has_disposition.insert((s, obj));
                }
                ("kg:designedToContain", _) => {
                    o.designed_to_contain.insert((s, obj));
                }
                (role @ ("kg:task" | "kg:instrument" | "kg:patient"), _) => {
                    let k = ["kg:task", "kg:instrument", "kg:patient"]
                        .iter()
                        .position(|r| *r == role)
                        .unwrap_or_default();
                    matches.entry(s).or_default()[k] = Some(obj);
                }
                ("kg:hasPart", _) => facts.push(Triple::new(&s, HAS_PART, &obj)),
                ("kg:contains", _) => facts.push(Triple::new(&s, CONTAINS, &obj)),
                (p, _) => return Err(KgError::Shape(format!("unexpected predicate {p}"))),
            }
        }
        for (node, [task, instrument, patient]) in matches {
            let (Some(task), Some(instrument), Some(patient)) = (task, instrument, patient) else {
                return Err(KgError::Shape(format!("use match {node} is incomplete")));
            };
            let m = UseMatch {
                task,
                instrument,
                patient,
            };
            if use_match_node(&m) != node {
                return Err(KgError::Shape(format!("use match {node} has a non-canonical name")));
            }
            o.use_matches.insert(m);
        }
        o.close()?;
        let mut kg = KnowledgeGraph::new(o);
        for f in facts {
            kg.add(f);
        }
        Ok(kg)
    }
}

impl From<rio_turtle::TurtleError> for KgError {
    fn from(e: rio_turtle::TurtleError) -> Self {
        KgError::Syntax(e.to_string())
    }
}

fn escape_iri(iri: &str) -> String {
    let mut out = String::with_capacity(iri.len());
    for c in iri.chars() {
        if c <= ' ' || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') {
            out.push_str(&format!("\\u{:04X}", c as u32));
        } else {
            out.push(c);
        }
    }
    out
}

/// `/World/Cup_1` becomes `scene:World_Cup_1`.
pub fn prim_iri(path: &str) -> String {
    format!("scene:{}", path.trim_start_matches('/').replace('/', "_"))
}

/// Compiles the labels on a stage into scene facts.
///
/// Every label gives `instanceOf(prim, label)`. A labeled prim below a
/// labeled container gives `contains(container, prim)` unless the
/// container's classes list it as a part type; other labeled parent/child
/// pairs give `hasPart(parent, child)`.
pub fn build_kg(stage: &UsdaStage, ontology: &Ontology) -> (KnowledgeGraph, Vec<Diagnostic>) {
    let mut kg = KnowledgeGraph::new(ontology.clone());
    let mut diags = Vec::new();
    let mut tagged: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (path, _) in stage.walk() {
        let labels = semantics::labels(stage, &path).unwrap_or_default();
        if !labels.is_empty() {
            tagged.insert(path, labels);
        }
    }

    let mut iris: BTreeMap<String, String> = BTreeMap::new();
    let mut taken: BTreeMap<String, String> = BTreeMap::new();
    for path in tagged.keys() {
        let base = prim_iri(path);
        let mut iri = base.clone();
        let mut k = 2;
        while let Some(other) = taken.get(&iri) {
            if k == 2 {
                diags.push(
                    Diagnostic::warning(
                        "iri-collision",
                        format!("{path} and {other} map to the same IRI; using a suffix"),
                    )
                    .with_subject(path.clone()),
                );
            }
            iri = format!("{base}__{k}");
            k += 1;
        }
        taken.insert(iri.clone(), path.clone());
        iris.insert(path.clone(), iri);
    }

    let mut undeclared = BTreeSet::new();
    for (path, labels) in &tagged {
        for l in labels {
            if !ontology.classes.contains(l) && undeclared.insert(l.clone()) {
                diags.push(
                    Diagnostic::warning("undeclared-class", format!("label {l} is not declared in the ontology"))
                        .with_subject(path.clone()),
                );
            }
            kg.add(Triple::new(&iris[path], INSTANCE_OF, l));
        }
    }

    let is_part_type = |outer: &[String], inner: &[String]| {
        outer.iter().any(|oc| {
            ontology.superclasses(oc).any(|s| {
                ontology
                    .has_part_type
                    .iter()
                    .any(|(c, pt)| c == s && inner.iter().any(|ic| ontology.is_subclass(ic, pt)))
            })
        })
    };
    for (path, labels) in &tagged {
        let mut ancestor = path.as_str();
        let mut direct = true;
        while let Some(cut) = ancestor.rfind('/').filter(|&c| c > 0) {
            ancestor = &ancestor[..cut];
            if let Some(outer) = tagged.get(ancestor) {
                let container = outer.iter().any(|c| ontology.is_container(c));
                if container && !is_part_type(outer, labels) {
                    kg.add(Triple::new(&iris[ancestor], CONTAINS, &iris[path]));
                } else if direct {
                    kg.add(Triple::new(&iris[ancestor], HAS_PART, &iris[path]));
                }
            }
            direct = false;
        }
    }
    (kg, diags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::usda;

    const ONTO: &str = "
class dfl:fridge.n, dfl:handle.n, dfl:milk_box.n, dfl:food .
dfl:fridge.n designedToContain dfl:food .
dfl:fridge.n hasPartType dfl:handle.n .
disposition dfl:grasp.Theme .
task dfl:eat .
dfl:handle.n hasDisposition dfl:grasp.Theme .
useMatch(dfl:eat, dfl:handle.n, dfl:food) .
";

    const STAGE: &str = r#"#usda 1.0

def Xform "World"
{
    def Xform "Fridge"
    {
        string[] semanticTag:semanticLabels = ["dfl:fridge.n"]

        def Xform "Handle"
        {
            string[] semanticTag:semanticLabels = ["dfl:handle.n"]
        }

        def Xform "Shelf"
        {
            def Xform "Milk"
            {
                string[] semanticTag:semanticLabels = ["dfl:milk_box.n", "dfl:unknown.n"]
            }
        }
    }
}
"#;

    fn kg() -> (KnowledgeGraph, Vec<Diagnostic>) {
        let stage = usda::parse(STAGE).unwrap();
        build_kg(&stage, &Ontology::parse(ONTO).unwrap())
    }

    #[test]
    fn builds_facts_from_labels() {
        let (kg, diags) = kg();
        let facts: Vec<String> = kg
            .facts()
            .iter()
            .map(|t| format!("{} {} {}", t.subject, t.predicate, t.object))
            .collect();
        assert_eq!(
            facts,
            [
                "scene:World_Fridge contains scene:World_Fridge_Shelf_Milk",
                "scene:World_Fridge hasPart scene:World_Fridge_Handle",
                "scene:World_Fridge instanceOf dfl:fridge.n",
                "scene:World_Fridge_Handle instanceOf dfl:handle.n",
                "scene:World_Fridge_Shelf_Milk instanceOf dfl:milk_box.n",
                "scene:World_Fridge_Shelf_Milk instanceOf dfl:unknown.n",
            ]
        );
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, "undeclared-class");
        assert_eq!(kg.objects(HAS_PART, "scene:World_Fridge").count(), 1);
        assert_eq!(kg.subjects(INSTANCE_OF, "dfl:fridge.n").count(), 1);
    }

    #[test]
    fn ntriples_round_trip_is_lossless() {
        let (kg, _) = kg();
        let nt = kg.to_ntriples().unwrap();
        assert!(nt.lines().all(|l| l.starts_with('<') && l.ends_with(" .")));
        let mut sorted: Vec<&str> = nt.lines().collect();
        sorted.sort();
        assert_eq!(sorted, nt.lines().collect::<Vec<_>>());
        let back = KnowledgeGraph::from_ntriples(&nt, &kg.ontology.prefixes).unwrap();
        assert_eq!(back.facts(), kg.facts());
        assert_eq!(back.ontology, kg.ontology);
        assert_eq!(back.to_ntriples().unwrap(), nt);
    }

    #[test]
    fn foreign_namespaces_are_rejected() {
        let nt = "<http://other.org/a> <urn:scenegraph:kg#hasPart> <urn:scenegraph:scene:b> .\n";
        assert!(matches!(
            KnowledgeGraph::from_ntriples(nt, &BTreeMap::new()),
            Err(KgError::UnknownNamespace(_))
        ));
    }
}
