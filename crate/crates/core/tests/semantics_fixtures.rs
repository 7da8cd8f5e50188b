use std::path::PathBuf;

use scenegraph_core::formats::{import_file, ImportOptions};
use scenegraph_core::semantics::{
    apply_label_ops, body_prim_paths, generate_reports, labels, parse_label_script, read_reports, tag_state,
    write_reports, Evidence, FixtureClient, Lexicon, Repository, SemanticReport, TagState,
};
use scenegraph_core::usda::{emit, parse, world_to_stage, UsdaStage};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn stage_of(rel: &str) -> UsdaStage {
    let path = fixtures().join(rel);
    let options = ImportOptions {
        mesh_root: path.parent().map(PathBuf::from),
        ..Default::default()
    };
    world_to_stage(&import_file(&path, &options).unwrap().1.world)
}

#[test]
fn lexicon_covers_the_apartment() {
    let stage = stage_of("procthor/apartment.json");
    let bodies = body_prim_paths(&stage);
    assert_eq!(bodies.len(), 27);
    let reports = generate_reports(&stage, &Lexicon::builtin(), None).unwrap();
    let covered = reports.iter().filter(|r| !r.candidates.is_empty()).count();
    assert!(covered * 5 >= bodies.len() * 4, "{covered}/{}", bodies.len());
    assert!(reports
        .iter()
        .flat_map(|r| &r.candidates)
        .all(|c| c.evidence == Evidence::Lexicon));
}

#[test]
fn recorded_responses_take_precedence_over_the_lexicon() {
    let stage = stage_of("procthor/apartment.json");
    let client = FixtureClient::new(fixtures().join("t2t"));
    let reports = generate_reports(&stage, &Lexicon::builtin(), Some(&client)).unwrap();
    let fridge = reports.iter().find(|r| r.subject.ends_with("/Fridge_1_0")).unwrap();
    let best = &fridge.candidates[0];
    assert_eq!(best.evidence, Evidence::TextToTriples);
    assert!(best.links.contains_key(&Repository::Dbpedia));
    // No recording for the toaster, so the lexicon answers.
    let toaster = reports.iter().find(|r| r.subject.ends_with("/Toaster_1_5")).unwrap();
    assert!(toaster.candidates.iter().all(|c| c.evidence == Evidence::Lexicon));
}

#[test]
fn reports_survive_json_and_the_stage() {
    let mut stage = stage_of("procthor/apartment.json");
    let client = FixtureClient::new(fixtures().join("t2t"));
    let reports = generate_reports(&stage, &Lexicon::builtin(), Some(&client)).unwrap();
    for r in &reports {
        assert_eq!(&SemanticReport::from_json(&r.to_json()).unwrap(), r);
    }
    write_reports(&mut stage, &reports).unwrap();
    let reread = parse(&emit(&stage)).unwrap();
    assert_eq!(read_reports(&reread).unwrap(), reports);
}

#[test]
fn label_script_tags_the_table_setting() {
    let mut stage = stage_of("kg/table_setting.xml");
    let script = std::fs::read_to_string(fixtures().join("kg/table_setting.labels")).unwrap();
    let ops = parse_label_script(&script).unwrap();
    assert_eq!(apply_label_ops(&mut stage, &ops).unwrap(), 20);
    assert_eq!(labels(&stage, "/World/bowl").unwrap(), ["dfl:bowl.n"]);
    assert_ne!(tag_state(&stage, "/World/lamp").unwrap(), TagState::Tagged);
    // Replaying the script adds nothing.
    assert_eq!(apply_label_ops(&mut stage, &ops).unwrap(), 0);
}

#[test]
fn committed_table_setting_stage_matches_its_sources() {
    let mut stage = stage_of("kg/table_setting.xml");
    let script = std::fs::read_to_string(fixtures().join("kg/table_setting.labels")).unwrap();
    apply_label_ops(&mut stage, &parse_label_script(&script).unwrap()).unwrap();
    let committed = parse(&std::fs::read_to_string(fixtures().join("kg/table_setting.usda")).unwrap()).unwrap();
    for path in body_prim_paths(&stage) {
        assert_eq!(
            labels(&stage, &path).unwrap(),
            labels(&committed, &path).unwrap(),
            "{path}"
        );
    }
}
