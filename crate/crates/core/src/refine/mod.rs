//! Mass-property refinement.
//!
//! Computes inertial properties from geometry (exact for meshes and
//! primitives), validates and repairs authored inertials, flags meshes that
//! need convex decomposition, and optionally folds rigidly attached child
//! bodies into their parent.

mod consolidate;
mod inertial;
mod mirtich;
mod primitives;

use std::collections::HashSet;
use std::path::PathBuf;

use thiserror::Error;

use crate::diag::Diagnostic;
use crate::math::{Pose, Vec3};
use crate::scene::{
    names, resolve_mesh_path, InertialProperties, JointType, MeshData, MeshError, PropertyValue, SceneBody,
    SceneGeometry, SceneWorld, Shape,
};

pub use consolidate::consolidate_inertia;
pub use inertial::{repair_inertial, validate_inertial, InertialIssue};
pub use mirtich::{mesh_mass_properties, volume_integrals, MassProperties, VolumeIntegrals};
pub use primitives::{box_properties, cylinder_properties, ellipsoid_properties};

/// Per-body density override (kg/m³).
pub const DENSITY_PROPERTY: &str = "refine:density";

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("mesh is not closed: {boundary_edges} boundary edges, {inconsistent_edges} inconsistently wound edges")]
    OpenMesh {
        boundary_edges: usize,
        inconsistent_edges: usize,
    },
    #[error("mesh encloses negative volume {0} (faces point inward)")]
    InvertedMesh(f64),
    #[error("mesh encloses no volume ({0})")]
    DegenerateVolume(f64),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("inertial cannot be repaired: {0}")]
    UnrepairableInertial(String),
}

#[derive(Clone, Debug)]
pub struct RefineOptions {
    /// kg/m³, used when a body has no `refine:density` property.
    pub default_density: f64,
    /// Recompute inertials that were authored in the source.
    pub recompute: bool,
    /// Fold rigidly attached children into their parent.
    pub consolidate: bool,
    /// Non-convex meshes with more faces than this are flagged.
    pub decomposition_threshold: usize,
    pub mesh_root: Option<PathBuf>,
    pub base_dir: Option<PathBuf>,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            default_density: 1000.0,
            recompute: false,
            consolidate: false,
            decomposition_threshold: 200,
            mesh_root: None,
            base_dir: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RefineReport {
    pub computed: usize,
    pub repaired: usize,
    pub consolidated: usize,
    pub flagged_for_decomposition: usize,
    pub diagnostics: Vec<Diagnostic>,
}

/// Mass properties of one geometry, expressed in its own frame (scale applied).
pub fn geometry_mass_properties(
    geom: &SceneGeometry,
    density: f64,
    options: &RefineOptions,
) -> Result<MassProperties, RefineError> {
    let s = geom.scale;
    match &geom.shape {
        Shape::Cube { half_extents } => Ok(box_properties(&half_extents.component_mul(&s), density)),
        Shape::Sphere { radius } => Ok(ellipsoid_properties(&(s * *radius), density)),
        Shape::Cylinder { radius, half_length } => Ok(cylinder_properties(
            radius * s.x,
            radius * s.y,
            half_length * s.z,
            density,
        )),
        Shape::Mesh(_) => {
            let mesh = load_geometry_mesh(geom, options)?;
            mesh_mass_properties(&mesh.scaled(&s), density)
        }
    }
}

fn load_geometry_mesh(geom: &SceneGeometry, options: &RefineOptions) -> Result<MeshData, MeshError> {
    let Shape::Mesh(src) = &geom.shape else {
        unreachable!("caller checked the shape");
    };
    if let Some(data) = &src.data {
        return Ok(data.clone());
    }
    let reference = src.file.as_deref().unwrap_or_default();
    let path = resolve_mesh_path(reference, options.base_dir.as_deref(), options.mesh_root.as_deref());
    MeshData::load(&path)
}

fn body_density(body: &SceneBody, options: &RefineOptions) -> f64 {
    body.properties
        .get(DENSITY_PROPERTY)
        .and_then(PropertyValue::as_real)
        .unwrap_or(options.default_density)
}

fn refine_body(body: &mut SceneBody, options: &RefineOptions, report: &mut RefineReport) {
    let density = body_density(body, options);
    let has_collision = body.geometries.iter().any(|g| g.collidable);
    let mut parts = Vec::new();
    let mut failed = false;
    for g in &mut body.geometries {
        if let Shape::Mesh(_) = g.shape {
            if let Ok(mesh) = load_geometry_mesh(g, options) {
                let flag = mesh.triangles.len() > options.decomposition_threshold && !mesh.is_convex();
                if flag && !g.properties.flag(names::NEEDS_DECOMPOSITION) {
                    let _ = g
                        .properties
                        .insert(names::NEEDS_DECOMPOSITION, PropertyValue::Bool(true));
                    report.flagged_for_decomposition += 1;
                    report.diagnostics.push(
                        Diagnostic::info(
                            "needs-convex-decomposition",
                            format!(
                                "non-convex mesh with {} faces exceeds the decomposition threshold",
                                mesh.triangles.len()
                            ),
                        )
                        .with_subject(g.name.clone()),
                    );
                }
            }
        }
        if has_collision && !g.collidable {
            continue;
        }
        match geometry_mass_properties(g, density, options) {
            Ok(mp) => parts.push((InertialProperties::new(mp.mass, mp.center_of_mass, mp.inertia), g.pose)),
            Err(e) => {
                failed = true;
                report
                    .diagnostics
                    .push(Diagnostic::error("mass-properties-failed", e.to_string()).with_subject(g.name.clone()));
            }
        }
    }

    let wants_compute = body.inertial.is_none() || options.recompute;
    if wants_compute && !failed && !parts.is_empty() {
        if let Some(i) = consolidate_inertia(&parts) {
            body.inertial = Some(i);
            report.computed += 1;
        }
    }

    if let Some(i) = body.inertial {
        match repair_inertial(&i) {
            Ok((fixed, issues)) if !issues.is_empty() => {
                body.inertial = Some(fixed);
                report.repaired += 1;
                let list: Vec<String> = issues.iter().map(ToString::to_string).collect();
                report
                    .diagnostics
                    .push(Diagnostic::warning("inertial-repaired", list.join("; ")).with_subject(body.name.clone()));
            }
            Ok(_) => {}
            Err(e) => report
                .diagnostics
                .push(Diagnostic::error("invalid-inertial", e.to_string()).with_subject(body.name.clone())),
        }
    }
}

fn consolidate_children(body: &mut SceneBody, moving: &HashSet<String>, report: &mut RefineReport) {
    for child in &mut body.children {
        consolidate_children(child, moving, report);
    }
    let mut parts: Vec<(InertialProperties, Pose)> = body.inertial.map(|i| (i, Pose::identity())).into_iter().collect();
    let mut absorbed = Vec::new();
    for child in &mut body.children {
        if moving.contains(&child.name) {
            continue;
        }
        if let Some(i) = child.inertial.take() {
            parts.push((i, child.pose));
            absorbed.push(child.name.clone());
        }
    }
    if absorbed.is_empty() {
        return;
    }
    body.inertial = consolidate_inertia(&parts);
    let target = body.name.clone();
    for child in &mut body.children {
        if absorbed.contains(&child.name) {
            retarget(child, &target, &absorbed);
            report.consolidated += 1;
        }
    }
}

/// Marks `child` as absorbed, and redirects marks that pointed at `child` or its absorbed siblings.
fn retarget(child: &mut SceneBody, target: &str, absorbed: &[String]) {
    let _ = child
        .properties
        .insert(names::CONSOLIDATED_INTO, PropertyValue::Text(target.to_string()));
    let mut stack: Vec<&mut SceneBody> = child.children.iter_mut().collect();
    while let Some(b) = stack.pop() {
        if let Some(into) = b.properties.text(names::CONSOLIDATED_INTO) {
            if absorbed.iter().any(|a| a == into) {
                let _ = b
                    .properties
                    .insert(names::CONSOLIDATED_INTO, PropertyValue::Text(target.to_string()));
            }
        }
        stack.extend(b.children.iter_mut());
    }
}

/// Refines every body in place. Per-element failures become diagnostics.
pub fn refine_world(world: &mut SceneWorld, options: &RefineOptions) -> RefineReport {
    let mut report = RefineReport::default();
    world.for_each_body_mut(|b| refine_body(b, options, &mut report));
    if options.consolidate {
        let moving: HashSet<String> = world
            .all_joints()
            .iter()
            .filter(|j| j.joint_type != JointType::Fixed)
            .map(|j| j.child_body.clone())
            .collect();
        for root in world.bodies_mut() {
            consolidate_children(root, &moving, &mut report);
        }
    }
    report
}

/// Convenience for tests and callers that want a body's refined inertial without mutation.
pub fn body_mass_properties(
    body: &SceneBody,
    options: &RefineOptions,
) -> Result<Option<InertialProperties>, RefineError> {
    let density = body_density(body, options);
    let mut parts = Vec::new();
    for g in &body.geometries {
        let mp = geometry_mass_properties(g, density, options)?;
        parts.push((InertialProperties::new(mp.mass, mp.center_of_mass, mp.inertia), g.pose));
    }
    Ok(consolidate_inertia(&parts))
}

/// Principal moments sorted ascending with their axes as matrix columns.
pub fn principal_axes(inertia: &crate::math::Mat3) -> (Vec3, crate::math::Mat3) {
    let eig = nalgebra::SymmetricEigen::new(*inertia);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = Vec3::new(
        eig.eigenvalues[idx[0]],
        eig.eigenvalues[idx[1]],
        eig.eigenvalues[idx[2]],
    );
    let mut axes = crate::math::Mat3::zeros();
    for (k, &i) in idx.iter().enumerate() {
        axes.set_column(k, &eig.eigenvectors.column(i));
    }
    if axes.determinant() < 0.0 {
        let flipped = -axes.column(2);
        axes.set_column(2, &flipped);
    }
    (values, axes)
}
