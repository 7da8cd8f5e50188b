use std::collections::BTreeSet;
use std::path::PathBuf;

use scenegraph_core::formats::{import_file, strip_elements, ImportOptions, StripElement};
use scenegraph_core::semantics::{add_label, body_prim_paths, init_semantic_layer, labels};
use scenegraph_core::usda::{
    check_semantic_layer, emit, extract_semantic_layer, load_composed, parse, save_two_file, world_to_stage,
};
use scenegraph_core::SceneWorld;

fn fixture(rel: &str) -> SceneWorld {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel);
    let options = ImportOptions {
        mesh_root: path.parent().map(PathBuf::from),
        ..Default::default()
    };
    import_file(&path, &options).unwrap().1.world
}

#[test]
fn stripping_looks_keeps_the_structure() {
    let world = fixture("mjcf/textured.xml");
    let strip = BTreeSet::from([StripElement::Textures, StripElement::Materials]);
    let lean = strip_elements(&world, &strip);
    assert_eq!(lean.body_count(), world.body_count());
    assert_eq!(lean.joint_count(), world.joint_count());
    assert_eq!(lean.geometry_count(), world.geometry_count());
    let (full, stripped) = (emit(&world_to_stage(&world)), emit(&world_to_stage(&lean)));
    assert!(stripped.len() < full.len());
    assert!(full.contains("wood"));
    assert!(!stripped.contains("wood"));
}

#[test]
fn stripping_textures_alone_keeps_colors() {
    let world = fixture("urdf/textured.urdf");
    let lean = strip_elements(&world, &BTreeSet::from([StripElement::Textures]));
    let out = emit(&world_to_stage(&lean));
    assert!(!out.contains("wood.png"));
    let rgba = |w: &SceneWorld| {
        w.all_bodies()
            .iter()
            .flat_map(|(b, _)| b.geometries.iter().map(|g| g.rgba))
            .collect::<Vec<_>>()
    };
    assert_eq!(rgba(&lean), rgba(&world));
}

#[test]
fn two_file_save_composes_back() {
    let mut stage = world_to_stage(&fixture("urdf/arm7.urdf"));
    init_semantic_layer(&mut stage);
    let body = body_prim_paths(&stage)[0].clone();
    add_label(&mut stage, &body, "dfl:robot_arm.n").unwrap();

    let dir = tempfile::tempdir().unwrap();
    let (scene_path, sem_path) = save_two_file(&stage, &dir.path().join("arm.usda")).unwrap();
    let scene_text = std::fs::read_to_string(&scene_path).unwrap();
    assert!(scene_text.contains("arm.semantic.usda"));
    assert!(!scene_text.contains("robot_arm"));
    assert!(std::fs::read_to_string(&sem_path).unwrap().contains("dfl:robot_arm.n"));

    let composed = load_composed(&scene_path).unwrap();
    assert_eq!(labels(&composed, &body).unwrap(), ["dfl:robot_arm.n"]);
    assert_eq!(emit(&composed), emit(&stage));
}

#[test]
fn semantic_layer_check_rejects_foreign_opinions() {
    let mut stage = world_to_stage(&fixture("urdf/arm7.urdf"));
    init_semantic_layer(&mut stage);
    let layer = extract_semantic_layer(&stage);
    assert!(check_semantic_layer(&layer, &stage).is_empty());

    let text = emit(&layer);
    let renamed = text.replacen("over \"", "over \"Nowhere_", 1);
    assert!(!check_semantic_layer(&parse(&renamed).unwrap(), &stage).is_empty());
    let redefined = text.replacen("over \"", "def Xform \"", 1);
    assert!(!check_semantic_layer(&parse(&redefined).unwrap(), &stage).is_empty());
}
