use std::path::{Path, PathBuf};

use scenegraph_core::formats::{export, import_file, ExportOptions, ImportOptions, SourceFormat, TargetFormat};
use scenegraph_core::scene::{structural_diff, CompareTolerance};
use scenegraph_core::usda::{emit, parse, stage_to_world, world_to_stage};
use scenegraph_core::SceneWorld;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

const ROBOT_FIXTURES: [&str; 9] = [
    "urdf/arm7.urdf",
    "urdf/mobile_base.urdf",
    "urdf/textured.urdf",
    "mjcf/arm.xml",
    "mjcf/four_bar.xml",
    "mjcf/textured.xml",
    "sdf/cart.sdf",
    "sdf/two_models.world",
    "sdf/four_bar.sdf",
];

fn target(format: SourceFormat) -> TargetFormat {
    match format {
        SourceFormat::Urdf => TargetFormat::Urdf,
        SourceFormat::Mjcf => TargetFormat::Mjcf,
        SourceFormat::Sdf => TargetFormat::Sdf,
        SourceFormat::Procthor => unreachable!(),
    }
}

fn import(path: &Path) -> (SourceFormat, SceneWorld) {
    let (format, imported) =
        import_file(path, &ImportOptions::default()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    (format, imported.world)
}

/// import → USDA text → parse → world → native format → import.
fn round_trip(path: &Path) -> (SceneWorld, SceneWorld) {
    let (format, original) = import(path);
    let text = emit(&world_to_stage(&original));
    let back = stage_to_world(&parse(&text).unwrap()).unwrap().world;
    let out = export(&back, target(format), &ExportOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join(path.file_name().unwrap());
    std::fs::write(&file, &out.document).unwrap();
    for (name, contents) in &out.side_files {
        std::fs::write(dir.path().join(name), contents).unwrap();
    }
    let opts = ImportOptions {
        mesh_root: path.parent().map(Path::to_path_buf),
        ..ImportOptions::default()
    };
    let again = import_file(&file, &opts).unwrap().1.world;
    (original, again)
}

#[test]
fn every_robot_fixture_survives_the_usda_round_trip() {
    for rel in ROBOT_FIXTURES {
        let (a, b) = round_trip(&fixtures().join(rel));
        let diff = structural_diff(&a, &b, &CompareTolerance::default());
        assert!(diff.is_empty(), "{rel}: {diff:#?}");
    }
}

#[test]
fn fixtures_have_the_expected_shape() {
    let counts = |rel: &str| {
        let w = import(&fixtures().join(rel)).1;
        (w.body_count(), w.joint_count())
    };
    assert_eq!(counts("urdf/arm7.urdf"), (9, 8));
    // Three hinges plus the loop-closing connect constraint.
    assert_eq!(counts("mjcf/four_bar.xml").1, 4);
    let apartment = import(&fixtures().join("procthor/apartment.json")).1;
    // 25 objects plus one floor per room.
    assert_eq!(apartment.body_count(), 27);
}

#[test]
fn emit_is_deterministic_and_parse_inverts_it() {
    for rel in ROBOT_FIXTURES.iter().chain(&["procthor/apartment.json"]) {
        let world = import(&fixtures().join(rel)).1;
        let first = emit(&world_to_stage(&world));
        assert_eq!(first, emit(&world_to_stage(&world)), "{rel}");
        let reparsed = parse(&first).unwrap();
        assert_eq!(emit(&reparsed), first, "{rel}");
    }
}
