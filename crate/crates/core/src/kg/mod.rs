//! Knowledge graph over labeled scenes and the five competency questions.

mod cq;
mod eval;
mod ontology;
mod query;
mod store;

pub use cq::{competency_question, CompetencyQuestion, COMPETENCY_QUESTIONS};
pub use eval::{Evaluator, QueryResult};
pub use ontology::{use_match_node, Ontology, OntologyError, UseMatch, CLASS_RELATIONS};
pub use query::{resolve_constant, Atom, Query, QueryError, Term, DEFAULT_PREFIX, PREDICATES};
pub use store::{
    build_kg, prim_iri, KgError, KnowledgeGraph, Triple, CONTAINS, DEFAULT_PREFIXES, HAS_PART, INSTANCE_OF,
};
