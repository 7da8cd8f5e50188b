//! Pieces shared by the XML exporters.

use std::collections::{HashMap, HashSet};

use crate::diag::Diagnostic;
use crate::scene::{kinematic_classification, JointType, PropertyTriple, SceneGeometry, SceneJoint, SceneWorld, Shape};
use crate::usda::sanitize_name;

use super::{FormatError, LoopStrategy};

/// Predicate marking what kind of thing a triple subject is.
pub const KIND: &str = "kind";
pub const KIND_MATERIAL: &str = "material";
pub const KIND_TEXTURE: &str = "texture";
/// Predicate linking a material to a texture (or naming a texture file).
pub const TEXTURE: &str = "texture";

pub fn material_name(g: &SceneGeometry) -> Option<&str> {
    g.material
        .iter()
        .find(|t| t.predicate == KIND && t.object == KIND_MATERIAL)
        .or_else(|| g.material.first())
        .map(|t| t.subject.as_str())
}

pub fn triple_value<'a>(triples: &'a [PropertyTriple], subject: &str, predicate: &str) -> Option<&'a str> {
    triples
        .iter()
        .find(|t| t.subject == subject && t.predicate == predicate)
        .map(|t| t.object.as_str())
}

/// All `(predicate, object)` pairs of `subject` except the kind marker.
pub fn subject_pairs<'a>(triples: &'a [PropertyTriple], subject: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> {
    triples
        .iter()
        .filter(move |t| t.subject == subject && t.predicate != KIND)
        .map(|t| (t.predicate.as_str(), t.object.as_str()))
}

/// Returns the mesh reference to write, adding an OBJ side file for embedded data.
pub fn mesh_reference(
    g: &SceneGeometry,
    side_files: &mut Vec<(String, String)>,
) -> Result<Option<String>, FormatError> {
    let Shape::Mesh(src) = &g.shape else {
        return Ok(None);
    };
    if let Some(f) = &src.file {
        return Ok(Some(f.clone()));
    }
    let Some(data) = &src.data else {
        return Err(FormatError::EmptyMesh(g.name.clone()));
    };
    let mut file = format!("{}.obj", sanitize_name(&g.name));
    let mut k = 1;
    while side_files.iter().any(|(n, _)| *n == file) {
        file = format!("{}_{k}.obj", sanitize_name(&g.name));
        k += 1;
    }
    side_files.push((file.clone(), data.to_obj()));
    Ok(Some(file))
}

/// Joints that close kinematic loops, in traversal order.
pub fn closing_joints(world: &SceneWorld) -> Vec<String> {
    kinematic_classification(world).closing_joints
}

/// Splits the world's joints into tree joints and loop joints for a target
/// that can only express trees natively.
///
/// Loop joints are the loop-closing joints plus any later joint that would
/// give a body a second parent.
pub struct JointPlan<'w> {
    pub tree: Vec<&'w SceneJoint>,
    pub loops: Vec<&'w SceneJoint>,
    /// Tree joint by child body name.
    pub parent_joint: HashMap<String, &'w SceneJoint>,
}

pub fn plan_joints(world: &SceneWorld) -> JointPlan<'_> {
    let closing: HashSet<String> = closing_joints(world).into_iter().collect();
    let mut plan = JointPlan {
        tree: Vec::new(),
        loops: Vec::new(),
        parent_joint: HashMap::new(),
    };
    for j in world.all_joints() {
        if closing.contains(&j.name) || plan.parent_joint.contains_key(&j.child_body) {
            plan.loops.push(j);
        } else {
            plan.parent_joint.insert(j.child_body.clone(), j);
            plan.tree.push(j);
        }
    }
    plan
}

/// Fails for `LoopStrategy::Fail` when there is anything to replace.
pub fn check_loop_strategy(
    loops: &[&SceneJoint],
    strategy: LoopStrategy,
    native: impl Fn(JointType) -> bool,
) -> Result<(), FormatError> {
    let offending: Vec<String> = loops
        .iter()
        .filter(|j| !native(j.joint_type))
        .map(|j| j.name.clone())
        .collect();
    if strategy == LoopStrategy::Fail && !offending.is_empty() {
        return Err(FormatError::LoopNotAllowed(offending));
    }
    Ok(())
}

pub fn dropped(joint: &SceneJoint, why: &str) -> Diagnostic {
    Diagnostic::warning("joint-dropped", format!("joint `{}` dropped: {why}", joint.name))
        .with_subject(joint.name.clone())
}
