//! Importers and exporters for URDF, MJCF, SDF and the ProcTHOR JSON subset.
//!
//! Every importer is a pure function of `(document, options)` returning the
//! world, the provenance of attributes the model has no field for, and any
//! diagnostics. Exporters re-emit provenance recorded by the same format, so
//! vendor-specific attributes survive `import_X(export_X(..))`.

mod common;
mod mjcf;
mod procthor;
mod provenance;
mod sdf;
mod strip;
mod urdf;
mod xml;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::diag::Diagnostic;
use crate::refine::{refine_world, RefineOptions};
use crate::scene::SceneWorld;

pub use mjcf::{export_mjcf, import_mjcf};
pub use procthor::import_procthor;
pub use provenance::{FormatProvenance, UnmappedAttribute, UNMAPPED_XML};
pub use sdf::{export_sdf, import_sdf};
pub use strip::strip_elements;
pub use urdf::{export_urdf, import_urdf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SourceFormat {
    Urdf,
    Mjcf,
    Sdf,
    Procthor,
}

impl SourceFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceFormat::Urdf => "urdf",
            SourceFormat::Mjcf => "mjcf",
            SourceFormat::Sdf => "sdf",
            SourceFormat::Procthor => "procthor",
        }
    }

    /// Guesses the format from a file extension, falling back to the document root.
    pub fn detect(path: &Path, text: &str) -> Option<SourceFormat> {
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("urdf") => return Some(SourceFormat::Urdf),
            Some("mjcf") => return Some(SourceFormat::Mjcf),
            Some("sdf") | Some("world") => return Some(SourceFormat::Sdf),
            Some("json") => return Some(SourceFormat::Procthor),
            _ => {}
        }
        let doc = roxmltree::Document::parse(text).ok()?;
        match doc.root_element().tag_name().name() {
            "robot" => Some(SourceFormat::Urdf),
            "mujoco" => Some(SourceFormat::Mjcf),
            "sdf" => Some(SourceFormat::Sdf),
            _ => None,
        }
    }
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetFormat {
    Urdf,
    Mjcf,
    Sdf,
}

impl FromStr for TargetFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "urdf" => Ok(TargetFormat::Urdf),
            "mjcf" | "xml" => Ok(TargetFormat::Mjcf),
            "sdf" => Ok(TargetFormat::Sdf),
            other => Err(format!("unknown export format `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StripElement {
    VisualMeshes,
    Materials,
    Textures,
    NonCollidableGeometry,
    PhysicsProperties,
}

impl FromStr for StripElement {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s.trim() {
            "visual_meshes" => StripElement::VisualMeshes,
            "materials" => StripElement::Materials,
            "textures" => StripElement::Textures,
            "non_collidable_geometry" => StripElement::NonCollidableGeometry,
            "physics_properties" => StripElement::PhysicsProperties,
            other => return Err(format!("unknown strip element `{other}`")),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LoopStrategy {
    Weld,
    #[default]
    Connect,
    Fail,
}

impl FromStr for LoopStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "weld" => Ok(LoopStrategy::Weld),
            "connect" => Ok(LoopStrategy::Connect),
            "fail" => Ok(LoopStrategy::Fail),
            other => Err(format!("unknown loop strategy `{other}`")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ImportOptions {
    /// Run refinement on bodies without an inertial after import.
    pub fix_missing_inertials: bool,
    pub default_density: f64,
    /// Root for `package://`, `model://` and ProcTHOR asset references.
    pub mesh_root: Option<PathBuf>,
    /// Directory of the source document; relative references resolve here first.
    pub base_dir: Option<PathBuf>,
    /// Fail when a referenced mesh file does not exist.
    pub verify_mesh_paths: bool,
    /// Segments around the axis for emulated capsules.
    pub capsule_segments: u32,
}

impl Default for ImportOptions {
    fn default() -> Self {
        Self {
            fix_missing_inertials: false,
            default_density: 1000.0,
            mesh_root: None,
            base_dir: None,
            verify_mesh_paths: true,
            capsule_segments: 16,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ExportOptions {
    pub strip: BTreeSet<StripElement>,
    pub loop_strategy: LoopStrategy,
}

#[derive(Debug)]
pub struct Imported {
    pub world: SceneWorld,
    pub provenance: FormatProvenance,
    pub diagnostics: Vec<Diagnostic>,
}

/// An exported document plus the side files (embedded meshes) it references.
#[derive(Debug, Default)]
pub struct ExportOutput {
    pub document: String,
    /// `(file name, contents)` pairs to write next to the document.
    pub side_files: Vec<(String, String)>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("expected a <{expected}> root element, found <{found}>")]
    WrongRoot { expected: &'static str, found: String },
    #[error("{element}: missing required {what}")]
    Missing { element: String, what: String },
    #[error("{element}: invalid value for {attribute}: `{value}`")]
    BadValue {
        element: String,
        attribute: String,
        value: String,
    },
    #[error("joint `{joint}`: unsupported joint type `{joint_type}`")]
    UnsupportedJoint { joint: String, joint_type: String },
    #[error("mesh file not found: {}", .0.display())]
    UnresolvedMesh(PathBuf),
    #[error("geometry `{0}` has neither a mesh file nor mesh data")]
    EmptyMesh(String),
    #[error("{what} nested deeper than {limit}")]
    TooDeep { what: &'static str, limit: usize },
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("loop-closing joints cannot be exported with loop_strategy = fail: {}", .0.join(", "))]
    LoopNotAllowed(Vec<String>),
    #[error("invalid structure: {0}")]
    Structure(String),
}

impl FormatError {
    pub(crate) fn bad(element: &str, attribute: &str, value: &str) -> Self {
        FormatError::BadValue {
            element: element.to_string(),
            attribute: attribute.to_string(),
            value: value.to_string(),
        }
    }

    pub(crate) fn missing(element: &str, what: &str) -> Self {
        FormatError::Missing {
            element: element.to_string(),
            what: what.to_string(),
        }
    }
}

/// Reads a file in any supported format.
pub fn import_file(path: &Path, opts: &ImportOptions) -> Result<(SourceFormat, Imported), FormatError> {
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut opts = opts.clone();
    if opts.base_dir.is_none() {
        opts.base_dir = path.parent().map(Path::to_path_buf);
    }
    let format = SourceFormat::detect(path, &text)
        .ok_or_else(|| FormatError::Structure(format!("cannot tell the format of {}", path.display())))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("world");
    let imported = match format {
        SourceFormat::Urdf => import_urdf(&text, &opts)?,
        SourceFormat::Mjcf => import_mjcf(&text, &opts)?,
        SourceFormat::Sdf => import_sdf(&text, &opts)?,
        SourceFormat::Procthor => import_procthor(&text, name, &opts)?,
    };
    Ok((format, imported))
}

/// Exports to `target`.
pub fn export(world: &SceneWorld, target: TargetFormat, opts: &ExportOptions) -> Result<ExportOutput, FormatError> {
    match target {
        TargetFormat::Urdf => export_urdf(world, opts),
        TargetFormat::Mjcf => export_mjcf(world, opts),
        TargetFormat::Sdf => export_sdf(world, opts),
    }
}

/// Shared post-processing: optional refinement of missing inertials.
pub(crate) fn finish_import(world: &mut SceneWorld, opts: &ImportOptions, diagnostics: &mut Vec<Diagnostic>) {
    if opts.fix_missing_inertials {
        let refine = RefineOptions {
            default_density: opts.default_density,
            mesh_root: opts.mesh_root.clone(),
            base_dir: opts.base_dir.clone(),
            ..RefineOptions::default()
        };
        let report = refine_world(world, &refine);
        diagnostics.extend(report.diagnostics);
    }
}

/// Checks that a referenced mesh exists when verification is on.
pub(crate) fn check_mesh_reference(reference: &str, opts: &ImportOptions) -> Result<(), FormatError> {
    if !opts.verify_mesh_paths {
        return Ok(());
    }
    let path = crate::scene::resolve_mesh_path(reference, opts.base_dir.as_deref(), opts.mesh_root.as_deref());
    if path.exists() {
        Ok(())
    } else {
        Err(FormatError::UnresolvedMesh(path))
    }
}
