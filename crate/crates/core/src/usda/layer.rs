//! Layer composition for the two-file layout: `scene.usda` holds geometry and
//! physics, `scene.semantic.usda` holds `semanticTag:*` overs and is listed
//! as a sublayer of the scene file.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::document::{ListOp, Property, Specifier, UsdValue, UsdaPrim, UsdaStage};
use super::parser::{parse, UsdaError};
use super::schema::SEMANTIC_TAG_API;
use super::writer::emit;

pub const SEMANTIC_NAMESPACE: &str = "semanticTag:";
const MAX_SUBLAYER_DEPTH: usize = 8;

#[derive(Debug, Error)]
pub enum LayerError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: UsdaError },
    #[error("sublayer cycle through {0}")]
    Cycle(PathBuf),
    #[error("sublayers nested deeper than {MAX_SUBLAYER_DEPTH}")]
    TooDeep,
}

fn merge_prim(strong: &mut UsdaPrim, weak: &UsdaPrim) {
    if strong.specifier == Specifier::Over && weak.specifier == Specifier::Def {
        strong.specifier = Specifier::Def;
    }
    if strong.type_name.is_none() {
        strong.type_name = weak.type_name.clone();
    }
    for m in &weak.metadata {
        if m.key == "apiSchemas" {
            continue;
        }
        if strong.metadata(&m.key).is_none() {
            strong.metadata.push(m.clone());
        }
    }
    let weak_schemas = weak.api_schemas();
    if !weak_schemas.is_empty() {
        let mut all = strong.api_schemas();
        all.extend(weak_schemas);
        strong.metadata.retain(|m| m.key != "apiSchemas");
        strong.add_api_schemas(all.iter().map(String::as_str));
    }
    for (name, p) in &weak.properties {
        strong.properties.entry(name.clone()).or_insert_with(|| p.clone());
    }
    for wc in &weak.children {
        match strong.child_mut(&wc.name) {
            Some(sc) => merge_prim(sc, wc),
            None => strong.children.push(wc.clone()),
        }
    }
}

/// Composes `weak` underneath `strong`: opinions already in `strong` win,
/// missing prims and properties are filled in, API schema lists are unioned.
pub fn merge_layer(strong: &mut UsdaStage, weak: &UsdaStage) {
    for wp in &weak.prims {
        match strong.prims.iter_mut().find(|p| p.name == wp.name) {
            Some(sp) => merge_prim(sp, wp),
            None => strong.prims.push(wp.clone()),
        }
    }
    for m in &weak.metadata {
        if m.key != "subLayers" && strong.metadata(&m.key).is_none() {
            strong.metadata.push(m.clone());
        }
    }
}

fn load(path: &Path, depth: usize, stack: &mut Vec<PathBuf>) -> Result<UsdaStage, LayerError> {
    if depth > MAX_SUBLAYER_DEPTH {
        return Err(LayerError::TooDeep);
    }
    let canonical = path.canonicalize().unwrap_or_else(|_| path.to_path_buf());
    if stack.contains(&canonical) {
        return Err(LayerError::Cycle(canonical));
    }
    let text = fs::read_to_string(path).map_err(|source| LayerError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut stage = parse(&text).map_err(|source| LayerError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    let subs = stage.sublayers();
    if subs.is_empty() {
        return Ok(stage);
    }
    stack.push(canonical);
    let base = path.parent().unwrap_or(Path::new("."));
    // Earlier sublayers are stronger.
    for sub in subs {
        let weak = load(&base.join(sub), depth + 1, stack)?;
        merge_layer(&mut stage, &weak);
    }
    stack.pop();
    stage.metadata.retain(|m| m.key != "subLayers");
    Ok(stage)
}

/// Reads `path` and composes all of its sublayers (resolved relative to the file).
pub fn load_composed(path: &Path) -> Result<UsdaStage, LayerError> {
    load(path, 0, &mut Vec::new())
}

fn is_semantic(name: &str) -> bool {
    name.starts_with(SEMANTIC_NAMESPACE)
}

/// Collects every `semanticTag:*` property into an over-only layer.
pub fn extract_semantic_layer(stage: &UsdaStage) -> UsdaStage {
    fn extract(p: &UsdaPrim) -> Option<UsdaPrim> {
        let mut over = UsdaPrim::over(&p.name);
        for (name, prop) in &p.properties {
            if is_semantic(name) {
                over.properties.insert(name.clone(), prop.clone());
            }
        }
        if !over.properties.is_empty() {
            over.add_api_schemas([SEMANTIC_TAG_API]);
        }
        over.children = p.children.iter().filter_map(extract).collect();
        (!over.properties.is_empty() || !over.children.is_empty()).then_some(over)
    }
    UsdaStage {
        metadata: Vec::new(),
        prims: stage.prims.iter().filter_map(extract).collect(),
    }
}

/// Removes all `semanticTag:*` properties and the matching API schema.
pub fn strip_semantics(stage: &mut UsdaStage) {
    fn strip(p: &mut UsdaPrim) {
        p.properties.retain(|n, _| !is_semantic(n));
        if p.has_api(SEMANTIC_TAG_API) {
            let keep: Vec<String> = p.api_schemas().into_iter().filter(|s| s != SEMANTIC_TAG_API).collect();
            p.metadata.retain(|m| m.key != "apiSchemas");
            if !keep.is_empty() {
                p.add_api_schemas(keep.iter().map(String::as_str));
            }
        }
        p.children.iter_mut().for_each(strip);
    }
    stage.prims.iter_mut().for_each(strip);
}

/// Whether a semantic layer only authors `semanticTag:*` opinions on prims
/// that exist in `scene`. Returns the offending prim paths or properties.
pub fn check_semantic_layer(layer: &UsdaStage, scene: &UsdaStage) -> Vec<String> {
    let known: HashSet<String> = scene.walk().into_iter().map(|(p, _)| p).collect();
    let mut problems = Vec::new();
    for (path, prim) in layer.walk() {
        if prim.specifier != Specifier::Over {
            problems.push(format!("{path}: only `over` prims are allowed"));
        }
        if !known.contains(&path) {
            problems.push(format!("{path}: no such prim in the scene"));
        }
        for (name, prop) in &prim.properties {
            if !is_semantic(name) {
                problems.push(format!(
                    "{path}.{name}: only {SEMANTIC_NAMESPACE}* properties are allowed"
                ));
            } else if !matches!(prop, Property::Attribute(a) if a.type_name == "string[]") {
                problems.push(format!("{path}.{name}: expected a string[] attribute"));
            }
        }
        for m in &prim.metadata {
            if m.key != "apiSchemas" {
                problems.push(format!("{path}: unexpected metadata `{}`", m.key));
            }
        }
    }
    problems
}

/// File name of the semantic layer belonging to `scene_path`.
pub fn semantic_layer_path(scene_path: &Path) -> PathBuf {
    let stem = scene_path.file_stem().and_then(|s| s.to_str()).unwrap_or("scene");
    scene_path.with_file_name(format!("{stem}.semantic.usda"))
}

/// Writes `stage` as a scene file plus a semantic sublayer next to it.
///
/// Both files are written to temporaries and renamed into place.
pub fn save_two_file(stage: &UsdaStage, scene_path: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
    let sem_path = semantic_layer_path(scene_path);
    let layer = extract_semantic_layer(stage);
    let mut scene = stage.clone();
    strip_semantics(&mut scene);
    let sem_name = sem_path
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or("scene.semantic.usda")
        .to_string();
    scene.metadata.retain(|m| m.key != "subLayers");
    scene.metadata.push(super::document::MetadataEntry {
        op: ListOp::Explicit,
        key: "subLayers".into(),
        value: UsdValue::List(vec![UsdValue::Asset(format!("./{sem_name}"))]),
    });
    write_atomic(&sem_path, &emit(&layer))?;
    write_atomic(scene_path, &emit(&scene))?;
    Ok((scene_path.to_path_buf(), sem_path))
}

/// Writes `contents` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::usda::document::Attribute;

    fn tagged() -> UsdaStage {
        parse(
            r#"#usda 1.0
(
    defaultPrim = "World"
)

def Xform "World"
{
    def Xform "Cup" (
        prepend apiSchemas = ["PhysicsRigidBodyAPI", "SemanticTagAPI"]
    )
    {
        double3 xformOp:translate = (1, 2, 3)
        string[] semanticTag:semanticLabels = ["dfl:cup.n"]
    }
}
"#,
        )
        .unwrap()
    }

    #[test]
    fn extract_strip_merge_restores_stage() {
        let stage = tagged();
        let layer = extract_semantic_layer(&stage);
        let mut bare = stage.clone();
        strip_semantics(&mut bare);
        let cup = bare.prim_at_path("/World/Cup").unwrap();
        assert!(!cup.has_api(SEMANTIC_TAG_API));
        assert!(cup.has_api("PhysicsRigidBodyAPI"));
        assert!(check_semantic_layer(&layer, &bare).is_empty());
        merge_layer(&mut bare, &layer);
        let cup = bare.prim_at_path("/World/Cup").unwrap();
        assert_eq!(
            cup.value("semanticTag:semanticLabels").unwrap().as_strings().unwrap(),
            vec!["dfl:cup.n"]
        );
        assert!(cup.has_api(SEMANTIC_TAG_API));
    }

    #[test]
    fn two_file_layout_composes_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.usda");
        save_two_file(&tagged(), &path).unwrap();
        let scene_text = fs::read_to_string(&path).unwrap();
        assert!(scene_text.contains("subLayers = [@./scene.semantic.usda@]"));
        assert!(!scene_text.contains("semanticTag:"));
        let composed = load_composed(&path).unwrap();
        let cup = composed.prim_at_path("/World/Cup").unwrap();
        assert!(cup.value("semanticTag:semanticLabels").is_some());
        assert_eq!(cup.value("xformOp:translate").unwrap().as_vec3().unwrap().z, 3.0);
    }

    #[test]
    fn semantic_layer_check_rejects_foreign_opinions() {
        let mut layer = extract_semantic_layer(&tagged());
        let cup = layer.prim_at_path_mut("/World/Cup").unwrap();
        cup.set("xformOp:translate", Attribute::new("double3", UsdValue::num(0.0)));
        layer.prims[0].children.push(UsdaPrim::over("Ghost"));
        let problems = check_semantic_layer(&layer, &tagged());
        assert_eq!(problems.len(), 2, "{problems:?}");
    }

    #[test]
    fn sublayer_cycles_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.usda");
        let b = dir.path().join("b.usda");
        fs::write(&a, "#usda 1.0\n(\n    subLayers = [@./b.usda@]\n)\n").unwrap();
        fs::write(&b, "#usda 1.0\n(\n    subLayers = [@./a.usda@]\n)\n").unwrap();
        assert!(matches!(load_composed(&a), Err(LayerError::Cycle(_))));
    }
}
