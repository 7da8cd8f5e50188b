//! The unified scene-graph model.
//!
//! A world is a forest of bodies plus world-level properties. Each body owns
//! its child bodies, the joints for which it is the parent, its geometries and
//! a property set. Joints whose parent is the world live in
//! [`SceneWorld::world_joints`]. Nesting alone means rigid attachment; joint
//! edges may close loops.

mod compare;
mod kinematics;
pub mod mesh;
pub mod property;
mod validate;

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use nalgebra::UnitQuaternion;
use thiserror::Error;

use crate::math::{Mat3, Pose, Vec3};

pub use compare::{structural_diff, CompareTolerance};
pub use kinematics::{kinematic_classification, KinematicClass, KinematicKind};
pub use mesh::{resolve_mesh_path, MeshData, MeshError};
pub use property::{names, PropertyError, PropertySet, PropertyTriple, PropertyValue, ValueKind};
pub use validate::{validate_world, RuleId, ValidationIssue, ValidationReport};

/// Reserved body name for joints attached to the world frame.
pub const WORLD: &str = "world";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JointType {
    Fixed,
    Revolute,
    Prismatic,
    Spherical,
}

impl JointType {
    pub fn as_str(&self) -> &'static str {
        match self {
            JointType::Fixed => "fixed",
            JointType::Revolute => "revolute",
            JointType::Prismatic => "prismatic",
            JointType::Spherical => "spherical",
        }
    }

    pub fn has_axis(&self) -> bool {
        matches!(self, JointType::Revolute | JointType::Prismatic)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GeomType {
    Cube,
    Sphere,
    Cylinder,
    Mesh,
}

/// Reference to a mesh: a file path as written in the source, embedded data, or both.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeshSource {
    pub file: Option<String>,
    pub data: Option<MeshData>,
}

impl MeshSource {
    pub fn file(path: impl Into<String>) -> Self {
        Self {
            file: Some(path.into()),
            data: None,
        }
    }

    pub fn embedded(data: MeshData) -> Self {
        Self {
            file: None,
            data: Some(data),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Cube {
        half_extents: Vec3,
    },
    Sphere {
        radius: f64,
    },
    /// Axis along local Z.
    Cylinder {
        radius: f64,
        half_length: f64,
    },
    Mesh(MeshSource),
}

impl Shape {
    pub fn geom_type(&self) -> GeomType {
        match self {
            Shape::Cube { .. } => GeomType::Cube,
            Shape::Sphere { .. } => GeomType::Sphere,
            Shape::Cylinder { .. } => GeomType::Cylinder,
            Shape::Mesh(_) => GeomType::Mesh,
        }
    }
}

/// Mass (kg), center of mass in the body frame (m) and inertia about the COM (kg·m²).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertialProperties {
    pub mass: f64,
    pub center_of_mass: Vec3,
    pub inertia: Mat3,
}

impl InertialProperties {
    pub fn new(mass: f64, center_of_mass: Vec3, inertia: Mat3) -> Self {
        Self {
            mass,
            center_of_mass,
            inertia,
        }
    }

    pub fn diagonal(mass: f64, center_of_mass: Vec3, diag: Vec3) -> Self {
        Self::new(mass, center_of_mass, Mat3::from_diagonal(&diag))
    }

    /// Re-expresses the properties in the frame where `pose` describes the current frame.
    pub fn transformed(&self, pose: &Pose) -> Self {
        let r = pose.rotation.to_rotation_matrix();
        Self {
            mass: self.mass,
            center_of_mass: pose.transform_point(&self.center_of_mass),
            inertia: r.matrix() * self.inertia * r.matrix().transpose(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointLimits {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneJoint {
    pub name: String,
    pub joint_type: JointType,
    pub parent_body: String,
    pub child_body: String,
    /// Joint frame relative to the child body frame.
    pub pose: Pose,
    /// Unit axis in the joint frame (revolute and prismatic only).
    pub axis: Option<Vec3>,
    /// Radians for revolute, meters for prismatic.
    pub limits: Option<JointLimits>,
    pub properties: PropertySet,
}

impl SceneJoint {
    pub fn new(name: &str, joint_type: JointType, parent: &str, child: &str) -> Self {
        Self {
            name: name.to_string(),
            joint_type,
            parent_body: parent.to_string(),
            child_body: child.to_string(),
            pose: Pose::identity(),
            axis: joint_type.has_axis().then(Vec3::x),
            limits: None,
            properties: PropertySet::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneGeometry {
    pub name: String,
    pub shape: Shape,
    /// Relative to the owning body frame.
    pub pose: Pose,
    pub scale: Vec3,
    pub visible: bool,
    pub collidable: bool,
    pub rgba: Option<[f64; 4]>,
    pub material: Vec<PropertyTriple>,
    pub properties: PropertySet,
}

impl SceneGeometry {
    pub fn new(name: &str, shape: Shape) -> Self {
        Self {
            name: name.to_string(),
            shape,
            pose: Pose::identity(),
            scale: Vec3::new(1.0, 1.0, 1.0),
            visible: true,
            collidable: true,
            rgba: None,
            material: Vec::new(),
            properties: PropertySet::new(),
        }
    }

    pub fn geom_type(&self) -> GeomType {
        self.shape.geom_type()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneBody {
    pub name: String,
    /// Relative to the parent body frame (or the world for root bodies).
    pub pose: Pose,
    pub inertial: Option<InertialProperties>,
    pub children: Vec<SceneBody>,
    /// Joints whose parent is this body.
    pub joints: Vec<SceneJoint>,
    pub geometries: Vec<SceneGeometry>,
    pub properties: PropertySet,
}

impl SceneBody {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            pose: Pose::identity(),
            inertial: None,
            children: Vec::new(),
            joints: Vec::new(),
            geometries: Vec::new(),
            properties: PropertySet::new(),
        }
    }

    pub fn with_pose(mut self, pose: Pose) -> Self {
        self.pose = pose;
        self
    }

    /// Depth-first pre-order over this body and its descendants.
    pub fn descendants(&self) -> Vec<&SceneBody> {
        let mut out = vec![self];
        let mut i = 0;
        while i < out.len() {
            let next: Vec<&SceneBody> = out[i].children.iter().collect();
            out.splice(i + 1..i + 1, next);
            i += 1;
        }
        out
    }

    fn for_each_mut(&mut self, f: &mut dyn FnMut(&mut SceneBody)) {
        f(self);
        for child in &mut self.children {
            child.for_each_mut(f);
        }
    }
}

/// Borrowed view of a named element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Element<'a> {
    Body(&'a SceneBody),
    Joint(&'a SceneJoint),
    Geometry(&'a SceneGeometry),
}

impl Element<'_> {
    pub fn name(&self) -> &str {
        match self {
            Element::Body(b) => &b.name,
            Element::Joint(j) => &j.name,
            Element::Geometry(g) => &g.name,
        }
    }
}

/// Index path of an element inside the body forest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ElementRef {
    Body(Vec<usize>),
    /// `owner == None` for world joints.
    Joint {
        owner: Option<Vec<usize>>,
        index: usize,
    },
    Geometry {
        body: Vec<usize>,
        index: usize,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("no element named `{0}`")]
    NotFound(String),
    #[error("an element named `{0}` already exists")]
    NameTaken(String),
    #[error("`{0}` is reserved")]
    ReservedName(String),
}

#[derive(Debug, Default)]
pub struct SceneWorld {
    pub name: String,
    bodies: Vec<SceneBody>,
    world_joints: Vec<SceneJoint>,
    pub properties: PropertySet,
    index: OnceLock<HashMap<String, ElementRef>>,
}

impl Clone for SceneWorld {
    fn clone(&self) -> Self {
        Self {
            name: self.name.clone(),
            bodies: self.bodies.clone(),
            world_joints: self.world_joints.clone(),
            properties: self.properties.clone(),
            index: OnceLock::new(),
        }
    }
}

impl PartialEq for SceneWorld {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.bodies == other.bodies
            && self.world_joints == other.world_joints
            && self.properties == other.properties
    }
}

impl SceneWorld {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn with_bodies(name: &str, bodies: Vec<SceneBody>) -> Self {
        let mut w = Self::new(name);
        w.bodies = bodies;
        w
    }

    pub fn bodies(&self) -> &[SceneBody] {
        &self.bodies
    }

    /// Mutable access to the body forest; invalidates the name index.
    pub fn bodies_mut(&mut self) -> &mut Vec<SceneBody> {
        self.index = OnceLock::new();
        &mut self.bodies
    }

    pub fn world_joints(&self) -> &[SceneJoint] {
        &self.world_joints
    }

    pub fn world_joints_mut(&mut self) -> &mut Vec<SceneJoint> {
        self.index = OnceLock::new();
        &mut self.world_joints
    }

    pub fn push_body(&mut self, body: SceneBody) {
        self.bodies_mut().push(body);
    }

    /// Every body in depth-first pre-order with its parent (if any).
    pub fn all_bodies(&self) -> Vec<(&SceneBody, Option<&SceneBody>)> {
        fn walk<'a>(
            b: &'a SceneBody,
            parent: Option<&'a SceneBody>,
            out: &mut Vec<(&'a SceneBody, Option<&'a SceneBody>)>,
        ) {
            out.push((b, parent));
            for c in &b.children {
                walk(c, Some(b), out);
            }
        }
        let mut out = Vec::new();
        for b in &self.bodies {
            walk(b, None, &mut out);
        }
        out
    }

    pub fn all_joints(&self) -> Vec<&SceneJoint> {
        let mut out: Vec<&SceneJoint> = self.world_joints.iter().collect();
        for (b, _) in self.all_bodies() {
            out.extend(b.joints.iter());
        }
        out
    }

    pub fn all_geometries(&self) -> Vec<(&SceneBody, &SceneGeometry)> {
        self.all_bodies()
            .into_iter()
            .flat_map(|(b, _)| b.geometries.iter().map(move |g| (b, g)))
            .collect()
    }

    pub fn body_count(&self) -> usize {
        self.all_bodies().len()
    }

    pub fn joint_count(&self) -> usize {
        self.all_joints().len()
    }

    pub fn geometry_count(&self) -> usize {
        self.all_geometries().len()
    }

    /// Applies `f` to every body in pre-order.
    pub fn for_each_body_mut(&mut self, mut f: impl FnMut(&mut SceneBody)) {
        for b in self.bodies_mut() {
            b.for_each_mut(&mut f);
        }
    }

    fn build_index(&self) -> HashMap<String, ElementRef> {
        fn walk(b: &SceneBody, path: &mut Vec<usize>, index: &mut HashMap<String, ElementRef>) {
            index
                .entry(b.name.clone())
                .or_insert_with(|| ElementRef::Body(path.clone()));
            for (i, j) in b.joints.iter().enumerate() {
                index.entry(j.name.clone()).or_insert_with(|| ElementRef::Joint {
                    owner: Some(path.clone()),
                    index: i,
                });
            }
            for (i, g) in b.geometries.iter().enumerate() {
                index.entry(g.name.clone()).or_insert_with(|| ElementRef::Geometry {
                    body: path.clone(),
                    index: i,
                });
            }
            for (i, c) in b.children.iter().enumerate() {
                path.push(i);
                walk(c, path, index);
                path.pop();
            }
        }
        let mut index = HashMap::new();
        for (i, j) in self.world_joints.iter().enumerate() {
            index
                .entry(j.name.clone())
                .or_insert(ElementRef::Joint { owner: None, index: i });
        }
        let mut path = Vec::new();
        for (i, b) in self.bodies.iter().enumerate() {
            path.push(i);
            walk(b, &mut path, &mut index);
            path.pop();
        }
        index
    }

    pub fn element_ref(&self, name: &str) -> Option<&ElementRef> {
        self.index.get_or_init(|| self.build_index()).get(name)
    }

    pub fn body_at(&self, path: &[usize]) -> Option<&SceneBody> {
        let (first, rest) = path.split_first()?;
        let mut b = self.bodies.get(*first)?;
        for &i in rest {
            b = b.children.get(i)?;
        }
        Some(b)
    }

    fn body_at_mut(&mut self, path: &[usize]) -> Option<&mut SceneBody> {
        let (first, rest) = path.split_first()?;
        let mut b = self.bodies.get_mut(*first)?;
        for &i in rest {
            b = b.children.get_mut(i)?;
        }
        Some(b)
    }

    /// Expected O(1) lookup through the name index.
    pub fn find_by_name(&self, name: &str) -> Option<Element<'_>> {
        match self.element_ref(name)? {
            ElementRef::Body(p) => self.body_at(p).map(Element::Body),
            ElementRef::Joint { owner: None, index } => self.world_joints.get(*index).map(Element::Joint),
            ElementRef::Joint { owner: Some(p), index } => {
                self.body_at(p).and_then(|b| b.joints.get(*index)).map(Element::Joint)
            }
            ElementRef::Geometry { body, index } => self
                .body_at(body)
                .and_then(|b| b.geometries.get(*index))
                .map(Element::Geometry),
        }
    }

    pub fn body(&self, name: &str) -> Option<&SceneBody> {
        match self.find_by_name(name)? {
            Element::Body(b) => Some(b),
            _ => None,
        }
    }

    pub fn body_mut(&mut self, name: &str) -> Option<&mut SceneBody> {
        let path = match self.element_ref(name)? {
            ElementRef::Body(p) => p.clone(),
            _ => return None,
        };
        self.index = OnceLock::new();
        self.body_at_mut(&path)
    }

    /// Renames any element; joint references follow a renamed body.
    pub fn rename(&mut self, old: &str, new: &str) -> Result<(), SceneError> {
        if new == WORLD {
            return Err(SceneError::ReservedName(new.to_string()));
        }
        if self.element_ref(new).is_some() {
            return Err(SceneError::NameTaken(new.to_string()));
        }
        let target = self
            .element_ref(old)
            .cloned()
            .ok_or_else(|| SceneError::NotFound(old.to_string()))?;
        self.index = OnceLock::new();
        match target {
            ElementRef::Body(p) => {
                self.body_at_mut(&p).expect("indexed body").name = new.to_string();
                let fix = |j: &mut SceneJoint| {
                    if j.parent_body == old {
                        j.parent_body = new.to_string();
                    }
                    if j.child_body == old {
                        j.child_body = new.to_string();
                    }
                };
                self.world_joints.iter_mut().for_each(fix);
                self.for_each_body_mut(|b| b.joints.iter_mut().for_each(fix));
            }
            ElementRef::Joint { owner: None, index } => {
                self.world_joints[index].name = new.to_string();
            }
            ElementRef::Joint { owner: Some(p), index } => {
                self.body_at_mut(&p).expect("indexed body").joints[index].name = new.to_string();
            }
            ElementRef::Geometry { body, index } => {
                self.body_at_mut(&body).expect("indexed body").geometries[index].name = new.to_string();
            }
        }
        Ok(())
    }

    /// Every element name in the world, in traversal order (duplicates included).
    pub fn all_names(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.world_joints.iter().map(|j| j.name.as_str()).collect();
        for (b, _) in self.all_bodies() {
            out.push(&b.name);
            out.extend(b.joints.iter().map(|j| j.name.as_str()));
            out.extend(b.geometries.iter().map(|g| g.name.as_str()));
        }
        out
    }

    /// World-frame pose of every body frame.
    pub fn body_world_poses(&self) -> HashMap<String, Pose> {
        fn walk(b: &SceneBody, parent: &Pose, out: &mut HashMap<String, Pose>) {
            let pose = parent.compose(&b.pose);
            out.insert(b.name.clone(), pose);
            for c in &b.children {
                walk(c, &pose, out);
            }
        }
        let mut out = HashMap::new();
        for b in &self.bodies {
            walk(b, &Pose::identity(), &mut out);
        }
        out
    }

    /// Moves `other` into this world, renaming colliding names with `_1`, `_2`, …
    ///
    /// When `container` is given, the other world's roots are nested under a new
    /// body of that name (itself subject to collision renaming).
    pub fn merge(&mut self, other: SceneWorld, container: Option<&str>) {
        let mut names = NameAllocator::from_names(self.all_names());
        let mut other = other;
        let mut renames: Vec<(String, String)> = Vec::new();
        for name in other.all_names().into_iter().map(str::to_string).collect::<Vec<_>>() {
            let (fresh, renamed) = names.allocate(&name);
            if renamed {
                renames.push((name, fresh));
            }
        }
        for (old, new) in renames {
            // Ordered renames cannot collide: every target was freshly allocated.
            if other.rename(&old, &new).is_ok() {
                mark_source_name(&mut other, &new, &old);
            }
        }
        let mut roots = std::mem::take(other.bodies_mut());
        let world_joints = std::mem::take(other.world_joints_mut());
        if let Some(container) = container {
            let (name, _) = names.allocate(container);
            let mut holder = SceneBody::new(&name);
            holder.children = roots;
            roots = vec![holder];
        }
        self.bodies_mut().extend(roots);
        self.world_joints_mut().extend(world_joints);
        for (k, v) in other.properties.iter() {
            if !self.properties.contains(k) {
                let _ = self.properties.insert(k, v.clone());
            }
        }
    }
}

fn mark_source_name(world: &mut SceneWorld, name: &str, original: &str) {
    let original = PropertyValue::Text(original.to_string());
    let Some(r) = world.element_ref(name).cloned() else {
        return;
    };
    world.index = OnceLock::new();
    let props = match r {
        ElementRef::Body(p) => world.body_at_mut(&p).map(|b| &mut b.properties),
        ElementRef::Joint { owner: None, index } => world.world_joints.get_mut(index).map(|j| &mut j.properties),
        ElementRef::Joint { owner: Some(p), index } => world
            .body_at_mut(&p)
            .and_then(|b| b.joints.get_mut(index))
            .map(|j| &mut j.properties),
        ElementRef::Geometry { body, index } => world
            .body_at_mut(&body)
            .and_then(|b| b.geometries.get_mut(index))
            .map(|g| &mut g.properties),
    };
    if let Some(props) = props {
        if !props.contains(names::SOURCE_NAME) {
            let _ = props.insert(names::SOURCE_NAME, original);
        }
    }
}

/// Hands out globally unique names, suffixing `_1`, `_2`, … on collision.
#[derive(Clone, Debug, Default)]
pub struct NameAllocator {
    used: HashSet<String>,
}

impl NameAllocator {
    pub fn new() -> Self {
        let mut used = HashSet::new();
        used.insert(WORLD.to_string());
        Self { used }
    }

    pub fn from_names<'a>(names: impl IntoIterator<Item = &'a str>) -> Self {
        let mut alloc = Self::new();
        alloc.used.extend(names.into_iter().map(str::to_string));
        alloc
    }

    /// Returns the allocated name and whether it differs from `raw`.
    pub fn allocate(&mut self, raw: &str) -> (String, bool) {
        if self.used.insert(raw.to_string()) {
            return (raw.to_string(), false);
        }
        let mut k = 1;
        loop {
            let candidate = format!("{raw}_{k}");
            if self.used.insert(candidate.clone()) {
                return (candidate, true);
            }
            k += 1;
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.used.contains(name)
    }
}

/// Unit quaternion from scalar-first components, re-normalized.
pub fn quat_wxyz(w: f64, x: f64, y: f64, z: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z))
}
