//! Reports and labels on a USDA stage.
//!
//! Reports live in `semanticTag:semanticReports` (one JSON document per
//! entry) and labels in `semanticTag:semanticLabels`, both `string[]`, on
//! prims with `SemanticTagAPI` applied. The label list is the only record of
//! chosen labels; report JSON on the stage leaves `chosen_labels` out.

use rayon::prelude::*;

use crate::usda::schema::{SEMANTIC_LABELS, SEMANTIC_REPORTS, SEMANTIC_TAG_API};
use crate::usda::{Specifier, UsdValue, UsdaPrim, UsdaStage};

use super::client::{link_via_text_to_triples, ClientError, TextToTriplesClient};
use super::lexicon::{link_via_lexicon, Lexicon};
use super::preprocess::preprocess_name;
use super::report::{ReportJsonError, SemanticReport};

const GEOM_TYPES: [&str; 4] = ["Cube", "Sphere", "Cylinder", "Mesh"];

#[derive(Debug, thiserror::Error)]
pub enum SemanticError {
    #[error("no prim at {0}")]
    DanglingPath(String),
    #[error("{path}: {source}")]
    Report { path: String, source: ReportJsonError },
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("label script line {line}: {message}")]
    Script { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TagState {
    Untaggable,
    Taggable,
    Tagged,
}

/// Whether `prim` is a body: a defined Xform with at least one geometry child.
pub fn is_body_prim(prim: &UsdaPrim) -> bool {
    prim.specifier == Specifier::Def
        && prim.type_name() == "Xform"
        && prim.children.iter().any(|c| GEOM_TYPES.contains(&c.type_name()))
}

/// Paths of all body prims, depth-first.
pub fn body_prim_paths(stage: &UsdaStage) -> Vec<String> {
    stage
        .walk()
        .into_iter()
        .filter(|(_, p)| is_body_prim(p))
        .map(|(path, _)| path)
        .collect()
}

/// Original element name of a prim: its display name, else the prim name.
fn source_name(prim: &UsdaPrim) -> &str {
    prim.display_name().unwrap_or(&prim.name)
}

/// Builds one report per body prim. With a client, its candidates are used
/// when non-empty and the lexicon is the fallback; without one only the
/// lexicon is consulted.
pub fn generate_reports(
    stage: &UsdaStage,
    lexicon: &Lexicon,
    client: Option<&dyn TextToTriplesClient>,
) -> Result<Vec<SemanticReport>, SemanticError> {
    let bodies: Vec<(String, &UsdaPrim)> = stage.walk().into_iter().filter(|(_, p)| is_body_prim(p)).collect();
    bodies
        .par_iter()
        .map(|(path, prim)| {
            let name = source_name(prim);
            let mut candidates = match client {
                Some(c) => link_via_text_to_triples(&preprocess_name(name), c)?,
                None => Vec::new(),
            };
            if candidates.is_empty() {
                candidates = link_via_lexicon(name, lexicon);
            }
            Ok(SemanticReport::new(path, candidates))
        })
        .collect()
}

fn prim_mut<'s>(stage: &'s mut UsdaStage, path: &str) -> Result<&'s mut UsdaPrim, SemanticError> {
    stage
        .prim_at_path_mut(path)
        .ok_or_else(|| SemanticError::DanglingPath(path.to_string()))
}

fn strings(prim: &UsdaPrim, name: &str) -> Vec<String> {
    prim.value(name).and_then(UsdValue::as_strings).unwrap_or_default()
}

fn ensure_labels(prim: &mut UsdaPrim) {
    prim.add_api_schemas([SEMANTIC_TAG_API]);
    if prim.attribute(SEMANTIC_LABELS).is_none() {
        prim.set_value(SEMANTIC_LABELS, "string[]", UsdValue::strings(Vec::<String>::new()));
    }
}

/// Gives every body prim `SemanticTagAPI` and an empty label list, so that
/// adding and then removing a label restores the prim exactly.
pub fn init_semantic_layer(stage: &mut UsdaStage) {
    for path in body_prim_paths(stage) {
        if let Some(p) = stage.prim_at_path_mut(&path) {
            ensure_labels(p);
        }
    }
}

/// Stores reports on their subject prims, replacing earlier reports.
pub fn write_reports(stage: &mut UsdaStage, reports: &[SemanticReport]) -> Result<(), SemanticError> {
    for r in reports {
        let prim = prim_mut(stage, &r.subject)?;
        let mut stored = r.clone();
        stored.chosen_labels.clear();
        ensure_labels(prim);
        prim.set_value(SEMANTIC_REPORTS, "string[]", UsdValue::strings([stored.to_json()]));
    }
    Ok(())
}

fn report_at(path: &str, prim: &UsdaPrim) -> Result<Option<SemanticReport>, SemanticError> {
    let Some(json) = strings(prim, SEMANTIC_REPORTS).into_iter().next() else {
        return Ok(None);
    };
    let mut r = SemanticReport::from_json(&json).map_err(|source| SemanticError::Report {
        path: path.to_string(),
        source,
    })?;
    r.subject = path.to_string();
    r.set_chosen(&strings(prim, SEMANTIC_LABELS));
    Ok(Some(r))
}

/// All reports on the stage with their chosen labels filled in.
pub fn read_reports(stage: &UsdaStage) -> Result<Vec<SemanticReport>, SemanticError> {
    let mut out = Vec::new();
    for (path, prim) in stage.walk() {
        if let Some(r) = report_at(&path, prim)? {
            out.push(r);
        }
    }
    Ok(out)
}

pub fn report(stage: &UsdaStage, path: &str) -> Result<Option<SemanticReport>, SemanticError> {
    let prim = stage
        .prim_at_path(path)
        .ok_or_else(|| SemanticError::DanglingPath(path.to_string()))?;
    report_at(path, prim)
}

pub fn labels(stage: &UsdaStage, path: &str) -> Result<Vec<String>, SemanticError> {
    let prim = stage
        .prim_at_path(path)
        .ok_or_else(|| SemanticError::DanglingPath(path.to_string()))?;
    Ok(strings(prim, SEMANTIC_LABELS))
}

/// Adds `iri` to the prim's labels; adding a present label changes nothing.
pub fn add_label(stage: &mut UsdaStage, path: &str, iri: &str) -> Result<(), SemanticError> {
    let prim = prim_mut(stage, path)?;
    let mut list = strings(prim, SEMANTIC_LABELS);
    ensure_labels(prim);
    if !list.iter().any(|l| l == iri) {
        list.push(iri.to_string());
        prim.set_value(SEMANTIC_LABELS, "string[]", UsdValue::strings(list));
    }
    Ok(())
}

/// Removes `iri`; the schema and an empty list stay behind.
pub fn remove_label(stage: &mut UsdaStage, path: &str, iri: &str) -> Result<(), SemanticError> {
    let prim = prim_mut(stage, path)?;
    let mut list = strings(prim, SEMANTIC_LABELS);
    let before = list.len();
    list.retain(|l| l != iri);
    if list.len() != before {
        prim.set_value(SEMANTIC_LABELS, "string[]", UsdValue::strings(list));
    }
    Ok(())
}

pub fn tag_state(stage: &UsdaStage, path: &str) -> Result<TagState, SemanticError> {
    let prim = stage
        .prim_at_path(path)
        .ok_or_else(|| SemanticError::DanglingPath(path.to_string()))?;
    if !strings(prim, SEMANTIC_LABELS).is_empty() {
        return Ok(TagState::Tagged);
    }
    match report_at(path, prim)? {
        Some(r) if !r.candidates.is_empty() => Ok(TagState::Taggable),
        _ => Ok(TagState::Untaggable),
    }
}

/// One step of a label script.
#[derive(Clone, Debug, PartialEq)]
pub enum LabelOp {
    Add {
        path: String,
        iri: String,
    },
    Remove {
        path: String,
        iri: String,
    },
    /// Accept the best candidate of one prim.
    Accept {
        path: String,
    },
    /// Accept the best candidate of every untagged prim with a report.
    AcceptAll,
}

/// Parses a label script: one `add <path> <iri>`, `remove <path> <iri>`,
/// `accept <path>` or `accept-all` per line; `#` starts a comment.
pub fn parse_label_script(text: &str) -> Result<Vec<LabelOp>, SemanticError> {
    let mut ops = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let op = match words[..] {
            ["add", path, iri] => LabelOp::Add {
                path: path.into(),
                iri: iri.into(),
            },
            ["remove", path, iri] => LabelOp::Remove {
                path: path.into(),
                iri: iri.into(),
            },
            ["accept", path] => LabelOp::Accept { path: path.into() },
            ["accept-all"] => LabelOp::AcceptAll,
            _ => {
                return Err(SemanticError::Script {
                    line: i + 1,
                    message: format!("cannot read `{line}`"),
                })
            }
        };
        ops.push(op);
    }
    Ok(ops)
}

/// Applies label operations in order. Returns how many labels were added.
pub fn apply_label_ops(stage: &mut UsdaStage, ops: &[LabelOp]) -> Result<usize, SemanticError> {
    let mut added = 0;
    let mut add = |stage: &mut UsdaStage, path: &str, iri: &str| -> Result<(), SemanticError> {
        let before = labels(stage, path)?.len();
        add_label(stage, path, iri)?;
        added += labels(stage, path)?.len() - before;
        Ok(())
    };
    for op in ops {
        match op {
            LabelOp::Add { path, iri } => add(stage, path, iri)?,
            LabelOp::Remove { path, iri } => remove_label(stage, path, iri)?,
            LabelOp::Accept { path } => {
                let best = report(stage, path)?.and_then(|r| r.candidates.first().and_then(|c| c.preferred_iri()));
                if let Some(iri) = best {
                    add(stage, path, &iri)?;
                }
            }
            LabelOp::AcceptAll => {
                for r in read_reports(stage)? {
                    if !r.chosen_labels.is_empty() {
                        continue;
                    }
                    if let Some(iri) = r.candidates.first().and_then(|c| c.preferred_iri()) {
                        add(stage, &r.subject, &iri)?;
                    }
                }
            }
        }
    }
    Ok(added)
}
