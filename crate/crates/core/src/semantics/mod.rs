//! Semantic reports and labels.
//!
//! Each body prim gets a report listing candidate concepts for its name,
//! found by a text-to-triples service (when one is configured) or by
//! matching the name against a lexicon. People then choose labels from the
//! candidates, or add their own, on the semantic layer.

mod client;
mod lexicon;
mod preprocess;
mod report;
mod stage;

pub use client::{
    candidates_from_turtle, fixture_file_name, link_via_text_to_triples, ClientError, FixtureClient, LiveClient,
    TextToTriplesClient, TEXT_TO_TRIPLES_SCORE,
};
pub use lexicon::{link_via_lexicon, rank_matches, Lexicon, LexiconEntry, LexiconError, PhraseMatch, BUILTIN_TSV};
pub use preprocess::{name_tokens, normalized_tokens, preprocess_name, singular, strip_template};
pub use report::{
    split_iri, Candidate, ChosenLabel, Enrichment, Evidence, ReportJsonError, Repository, SemanticReport,
    REPORT_VERSION,
};
pub use stage::{
    add_label, apply_label_ops, body_prim_paths, generate_reports, init_semantic_layer, is_body_prim, labels,
    parse_label_script, read_reports, remove_label, report, tag_state, write_reports, LabelOp, SemanticError, TagState,
};
