use std::collections::{BTreeMap, BTreeSet};
use std::path::{Component, Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use scenegraph_core::formats::{
    export, import_file, strip_elements, ExportOptions, ImportOptions, LoopStrategy, SourceFormat, StripElement,
    TargetFormat,
};
use scenegraph_core::kg::{build_kg, competency_question, KnowledgeGraph, Ontology, Query};
use scenegraph_core::refine::{refine_world, RefineOptions};
use scenegraph_core::scene::resolve_mesh_path;
use scenegraph_core::semantics::{
    apply_label_ops, generate_reports, init_semantic_layer, parse_label_script, write_reports, FixtureClient, LabelOp,
    Lexicon, LiveClient, TextToTriplesClient,
};
use scenegraph_core::usda::{
    self, emit, extract_semantic_layer, load_composed, merge_layer, sanitize_name, save_two_file, semantic_layer_path,
    stage_to_world, world_to_stage, write_atomic, UsdaStage,
};
use scenegraph_core::{SceneWorld, Shape};

use crate::config::Config;
use crate::{print_diagnostics, user, ConvertArgs, KgArgs, LabelArgs, QueryArgs, RefineArgs, ReportArgs};

#[derive(Clone, Copy, PartialEq)]
enum Output {
    Usda,
    Robot(TargetFormat),
}

fn output_kind(path: &Path, to: Option<&str>) -> Result<Output> {
    let name = match to {
        Some(t) => t.to_ascii_lowercase(),
        None => path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .ok_or_else(|| {
                user(format!(
                    "cannot tell the output format of {}; pass --to",
                    path.display()
                ))
            })?,
    };
    match name.as_str() {
        "usda" => Ok(Output::Usda),
        "world" => Ok(Output::Robot(TargetFormat::Sdf)),
        other => other.parse().map(Output::Robot).map_err(user),
    }
}

fn parse_strip(list: &str) -> Result<BTreeSet<StripElement>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse().map_err(user))
        .collect()
}

/// `a/b/../c` → `a/c` without touching the file system.
fn normalize(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::ParentDir
                if out
                    .components()
                    .next_back()
                    .is_some_and(|l| matches!(l, Component::Normal(_))) =>
            {
                out.pop();
            }
            Component::CurDir => {}
            other => out.push(other),
        }
    }
    out
}

/// `target` expressed relative to directory `from`; both must be absolute.
fn relative_to(target: &Path, from: &Path) -> PathBuf {
    let t: Vec<Component> = target.components().collect();
    let f: Vec<Component> = from.components().collect();
    let common = t.iter().zip(&f).take_while(|(a, b)| a == b).count();
    let mut out = PathBuf::new();
    for _ in common..f.len() {
        out.push("..");
    }
    for c in &t[common..] {
        out.push(c);
    }
    out
}

fn absolute(p: &Path) -> Result<PathBuf> {
    let abs = if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir()
            .context("cannot read the working directory")?
            .join(p)
    };
    Ok(normalize(&abs))
}

/// Points plain relative mesh references of an imported world at the same
/// files as seen from `out_dir`.
fn rebase_meshes(world: &mut SceneWorld, src_dir: &Path, mesh_root: Option<&Path>, out_dir: &Path) {
    world.for_each_body_mut(|b| {
        for g in &mut b.geometries {
            let Shape::Mesh(src) = &mut g.shape else { continue };
            let Some(file) = &src.file else { continue };
            if file.contains("://") || Path::new(file).is_absolute() {
                continue;
            }
            let found = resolve_mesh_path(file, Some(src_dir), mesh_root);
            if found.exists() {
                if let Ok(abs) = absolute(&found) {
                    src.file = Some(relative_to(&abs, out_dir).to_string_lossy().replace('\\', "/"));
                }
            }
        }
    });
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    write_atomic(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

pub fn convert(a: ConvertArgs, config: &Config) -> Result<()> {
    let kind = output_kind(&a.output, a.to.as_deref())?;
    if let Some(dir) = a.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let strip = match a.strip.as_deref().or(config.get("strip")) {
        Some(s) => parse_strip(s)?,
        None => BTreeSet::new(),
    };
    let loop_strategy: LoopStrategy = config
        .or_value(a.loop_strategy.as_deref().map(str::to_string), "loop_strategy")
        .map_err(user)?
        .map(|s| s.parse().map_err(user))
        .transpose()?
        .unwrap_or_default();
    let verify = !a.no_verify_meshes
        && config
            .or_value::<bool>(None, "verify_meshes")
            .map_err(user)?
            .unwrap_or(true);
    let opts = ImportOptions {
        fix_missing_inertials: a.refine,
        default_density: config.or_value(a.density, "density").map_err(user)?.unwrap_or(1000.0),
        mesh_root: config.or_path(a.mesh_root.clone(), "mesh_root"),
        verify_mesh_paths: verify,
        ..ImportOptions::default()
    };
    for p in &a.inputs {
        if !p.is_file() {
            return Err(user(format!("input not found: {}", p.display())));
        }
    }

    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = a
            .inputs
            .iter()
            .map(|p| {
                let opts = opts.clone();
                s.spawn(move || import_file(p, &opts))
            })
            .collect();
        handles.into_iter().map(|h| h.join()).collect()
    });
    let out_dir = absolute(
        a.output
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new(".")),
    )?;
    let mut imported = Vec::new();
    for (path, r) in a.inputs.iter().zip(results) {
        let r = r.map_err(|_| anyhow!("importer panicked on {}", path.display()))?;
        let (format, mut imp) = r.map_err(|e| user(format!("{}: {e}", path.display())))?;
        print_diagnostics(
            &imp.diagnostics
                .iter()
                .map(|d| match &d.subject {
                    Some(_) => d.clone(),
                    None => d.clone().with_subject(path.display().to_string()),
                })
                .collect::<Vec<_>>(),
        );
        let src_dir = absolute(path.parent().unwrap_or(Path::new(".")))?;
        if src_dir != out_dir {
            rebase_meshes(&mut imp.world, &src_dir, opts.mesh_root.as_deref(), &out_dir);
        }
        imported.push((path, format, imp.world));
    }

    let formats: BTreeSet<SourceFormat> = imported.iter().map(|(_, f, _)| *f).collect();
    let world = if imported.len() == 1 {
        imported
            .pop()
            .map(|(_, _, w)| w)
            .unwrap_or_else(|| SceneWorld::new("World"))
    } else {
        let mut merged = SceneWorld::new("World");
        for (path, _, w) in imported {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("input");
            merged.merge(w, Some(&sanitize_name(stem)));
        }
        merged
    };
    let world = strip_elements(&world, &strip);

    match kind {
        Output::Usda => {
            let mut stage = world_to_stage(&world);
            if a.semantic_layer {
                init_semantic_layer(&mut stage);
                let (_, sem) =
                    save_two_file(&stage, &a.output).with_context(|| format!("cannot write {}", a.output.display()))?;
                println!("wrote {} and {}", a.output.display(), sem.display());
            } else {
                write_output(&a.output, &emit(&stage))?;
                println!("wrote {}", a.output.display());
            }
        }
        Output::Robot(target) => {
            let out = export(&world, target, &ExportOptions { strip, loop_strategy }).map_err(user)?;
            print_diagnostics(&out.diagnostics);
            write_output(&a.output, &out.document)?;
            for (name, contents) in &out.side_files {
                write_output(&out_dir.join(name), contents)?;
            }
            println!("wrote {}", a.output.display());
        }
    }
    let names: Vec<&str> = formats.iter().map(|f| f.as_str()).collect();
    println!(
        "{} bodies, {} joints, {} geometries from {} input(s) ({})",
        world.body_count(),
        world.joint_count(),
        world.geometry_count(),
        a.inputs.len(),
        names.join(", ")
    );
    Ok(())
}

/// A composed stage plus whether it came as scene + semantic layer.
struct LoadedStage {
    stage: UsdaStage,
    two_file: bool,
}

fn load_stage(path: &Path) -> Result<LoadedStage> {
    if !path.is_file() {
        return Err(user(format!("stage not found: {}", path.display())));
    }
    let raw = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let top = usda::parse(&raw).map_err(|e| user(format!("{}: {e}", path.display())))?;
    let sem_name = semantic_layer_path(path)
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    let two_file = top.sublayers().iter().any(|l| l.trim_start_matches("./") == sem_name);
    let stage = load_composed(path).map_err(user)?;
    Ok(LoadedStage { stage, two_file })
}

fn save_stage(stage: &UsdaStage, path: &Path, two_file: bool) -> Result<()> {
    if two_file {
        save_two_file(stage, path).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    } else {
        write_output(path, &emit(stage))
    }
}

pub fn refine(a: RefineArgs, config: &Config) -> Result<()> {
    let loaded = load_stage(&a.stage)?;
    let imported = stage_to_world(&loaded.stage).map_err(|e| user(format!("{}: {e}", a.stage.display())))?;
    print_diagnostics(&imported.diagnostics);
    let mut world = imported.world;
    let opts = RefineOptions {
        default_density: config.or_value(a.density, "density").map_err(user)?.unwrap_or(1000.0),
        recompute: a.recompute,
        consolidate: a.consolidate,
        mesh_root: config.or_path(a.mesh_root, "mesh_root"),
        base_dir: a.stage.parent().map(Path::to_path_buf),
        ..RefineOptions::default()
    };
    let report = refine_world(&mut world, &opts);
    print_diagnostics(&report.diagnostics);
    let mut stage = world_to_stage(&world);
    merge_layer(&mut stage, &extract_semantic_layer(&loaded.stage));
    let out = a.output.unwrap_or(a.stage);
    save_stage(&stage, &out, loaded.two_file)?;
    println!(
        "wrote {}: {} inertials computed, {} repaired, {} bodies consolidated, {} meshes flagged for decomposition",
        out.display(),
        report.computed,
        report.repaired,
        report.consolidated,
        report.flagged_for_decomposition
    );
    Ok(())
}

pub fn report(a: ReportArgs, config: &Config) -> Result<()> {
    let mut loaded = load_stage(&a.stage)?;
    let lexicon = match config.or_path(a.lexicon, "lexicon") {
        Some(p) => Lexicon::load(&p).map_err(user)?,
        None => Lexicon::builtin(),
    };
    let endpoint = a.endpoint.or_else(|| config.get("endpoint").map(str::to_string));
    let client: Option<Box<dyn TextToTriplesClient>> = match (config.or_path(a.fixtures, "fixtures"), endpoint) {
        (Some(dir), _) => {
            if !dir.is_dir() {
                return Err(user(format!("fixture directory not found: {}", dir.display())));
            }
            Some(Box::new(FixtureClient::new(dir)))
        }
        (None, Some(url)) => Some(Box::new(LiveClient::new(&url))),
        (None, None) => None,
    };
    let reports = generate_reports(&loaded.stage, &lexicon, client.as_deref()).map_err(user)?;
    write_reports(&mut loaded.stage, &reports).map_err(user)?;
    let out = a.output.unwrap_or(a.stage);
    save_stage(&loaded.stage, &out, loaded.two_file)?;
    let with = reports.iter().filter(|r| !r.candidates.is_empty()).count();
    println!(
        "wrote {}: {} reports, {} with candidates",
        out.display(),
        reports.len(),
        with
    );
    Ok(())
}

fn split_pair(s: &str) -> Result<(String, String)> {
    s.split_once('=')
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .ok_or_else(|| user(format!("expected `<path>=<iri>`, got `{s}`")))
}

pub fn label(a: LabelArgs) -> Result<()> {
    let mut loaded = load_stage(&a.stage)?;
    let mut ops = match &a.script {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| user(format!("{}: {e}", p.display())))?;
            parse_label_script(&text).map_err(|e| user(format!("{}: {e}", p.display())))?
        }
        None => Vec::new(),
    };
    for s in &a.add {
        let (path, iri) = split_pair(s)?;
        ops.push(LabelOp::Add { path, iri });
    }
    for s in &a.remove {
        let (path, iri) = split_pair(s)?;
        ops.push(LabelOp::Remove { path, iri });
    }
    if a.accept_all {
        ops.push(LabelOp::AcceptAll);
    }
    if ops.is_empty() {
        return Err(user("nothing to do: give --script, --add, --remove or --accept-all"));
    }
    let added = apply_label_ops(&mut loaded.stage, &ops).map_err(user)?;
    let out = a.output.unwrap_or(a.stage);
    save_stage(&loaded.stage, &out, loaded.two_file)?;
    println!(
        "wrote {}: {} operations, {} labels added",
        out.display(),
        ops.len(),
        added
    );
    Ok(())
}

fn load_ontology(path: Option<PathBuf>) -> Result<Ontology> {
    let path = path.ok_or_else(|| user("an ontology is required (--ontology or `ontology` in the config)"))?;
    let text = std::fs::read_to_string(&path).map_err(|e| user(format!("{}: {e}", path.display())))?;
    Ontology::parse(&text).map_err(|e| user(format!("{}: {e}", path.display())))
}

pub fn kg(a: KgArgs, config: &Config) -> Result<()> {
    let loaded = load_stage(&a.stage)?;
    let ontology = load_ontology(config.or_path(a.ontology, "ontology"))?;
    let (kg, diags) = build_kg(&loaded.stage, &ontology);
    print_diagnostics(&diags);
    let nt = kg.to_ntriples().map_err(user)?;
    write_output(&a.output, &nt)?;
    println!(
        "wrote {}: {} triples ({} scene facts)",
        a.output.display(),
        nt.lines().count(),
        kg.facts().len()
    );
    Ok(())
}

pub fn query(a: QueryArgs, config: &Config) -> Result<()> {
    let ontology_path = config.or_path(a.ontology, "ontology");
    let is_stage = a.source.extension().and_then(|e| e.to_str()) == Some("usda");
    let kg = if is_stage {
        let loaded = load_stage(&a.source)?;
        let (kg, diags) = build_kg(&loaded.stage, &load_ontology(ontology_path)?);
        print_diagnostics(&diags);
        kg
    } else {
        let prefixes = match ontology_path {
            Some(p) => load_ontology(Some(p))?.prefixes,
            None => BTreeMap::new(),
        };
        let text = std::fs::read_to_string(&a.source).map_err(|e| user(format!("{}: {e}", a.source.display())))?;
        KnowledgeGraph::from_ntriples(&text, &prefixes).map_err(|e| user(format!("{}: {e}", a.source.display())))?
    };
    let query = match (a.cq, &a.pattern) {
        (Some(n), _) => competency_question(n)
            .ok_or_else(|| user(format!("no competency question {n}; use 1 to 5")))?
            .map_err(|e| anyhow!("shipped CQ{n} does not parse: {e}"))?,
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p).map_err(|e| user(format!("{}: {e}", p.display())))?;
            Query::parse(&text).map_err(|e| user(format!("{}:{e}", p.display())))?
        }
        (None, None) => return Err(user("give --cq or --pattern")),
    };
    let mut params = BTreeMap::new();
    for p in &a.param {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| user(format!("expected NAME=value, got `{p}`")))?;
        params.insert(k.trim_start_matches('$').to_string(), v.to_string());
    }
    let query = query.bind(&params).map_err(user)?;
    let result = kg.evaluate(&query).map_err(user)?;
    if a.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&result.to_json()).context("serializing result")?
        );
    } else {
        print!("{}", result.to_table());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths() {
        assert_eq!(
            relative_to(Path::new("/a/b/m.obj"), Path::new("/a/c")),
            PathBuf::from("../b/m.obj")
        );
        assert_eq!(
            relative_to(Path::new("/a/m.obj"), Path::new("/a")),
            PathBuf::from("m.obj")
        );
        assert_eq!(normalize(Path::new("/a/./b/../c")), PathBuf::from("/a/c"));
    }

    #[test]
    fn output_kinds() {
        assert!(output_kind(Path::new("x.usda"), None).unwrap() == Output::Usda);
        assert!(output_kind(Path::new("x.xml"), None).unwrap() == Output::Robot(TargetFormat::Mjcf));
        assert!(output_kind(Path::new("x"), Some("sdf")).unwrap() == Output::Robot(TargetFormat::Sdf));
        assert!(output_kind(Path::new("x.txt"), None).is_err());
    }
}
