//! The import → USDA → export → import pipeline over the fixture corpus.

use std::path::Path;

use scenegraph_core::formats::{export, import_file, ExportOptions, ImportOptions, SourceFormat, TargetFormat};
use scenegraph_core::usda::{emit, parse, stage_to_world, world_to_stage};
use scenegraph_core::SceneWorld;

/// Robot fixtures, three per source format, relative to [`fixtures_dir`](crate::fixtures_dir).
pub const ROBOT_FIXTURES: [&str; 9] = [
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

/// Every fixture that imports into a world.
pub const SCENE_FIXTURES: [&str; 11] = [
    "urdf/arm7.urdf",
    "urdf/mobile_base.urdf",
    "urdf/textured.urdf",
    "mjcf/arm.xml",
    "mjcf/four_bar.xml",
    "mjcf/textured.xml",
    "sdf/cart.sdf",
    "sdf/two_models.world",
    "sdf/four_bar.sdf",
    "procthor/apartment.json",
    "kg/table_setting.xml",
];

pub fn import(path: &Path) -> Result<(SourceFormat, SceneWorld), String> {
    import_file(path, &ImportOptions::default())
        .map(|(f, imp)| (f, imp.world))
        .map_err(|e| format!("{}: {e}", path.display()))
}

/// Imports `path`, passes it through USDA text and back to its own format,
/// and imports the result. Returns the first and last worlds.
pub fn round_trip(path: &Path) -> Result<(SceneWorld, SceneWorld), String> {
    let (format, original) = import(path)?;
    let target = match format {
        SourceFormat::Urdf => TargetFormat::Urdf,
        SourceFormat::Mjcf => TargetFormat::Mjcf,
        SourceFormat::Sdf => TargetFormat::Sdf,
        SourceFormat::Procthor => return Err("ProcTHOR has no exporter".into()),
    };
    let text = emit(&world_to_stage(&original));
    let stage = parse(&text).map_err(|e| e.to_string())?;
    let back = stage_to_world(&stage).map_err(|e| e.to_string())?.world;
    let out = export(&back, target, &ExportOptions::default()).map_err(|e| e.to_string())?;
    let dir = std::env::temp_dir().join(format!(
        "scenegraph-rt-{}-{}",
        std::process::id(),
        path.file_name().unwrap_or_default().to_string_lossy()
    ));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let file = dir.join(path.file_name().unwrap_or_default());
    let write = |p: &Path, s: &str| std::fs::write(p, s).map_err(|e| e.to_string());
    write(&file, &out.document)?;
    for (name, contents) in &out.side_files {
        write(&dir.join(name), contents)?;
    }
    let opts = ImportOptions {
        mesh_root: path.parent().map(Path::to_path_buf),
        ..ImportOptions::default()
    };
    let again = import_file(&file, &opts).map_err(|e| e.to_string());
    let _ = std::fs::remove_dir_all(&dir);
    Ok((original, again?.1.world))
}
