//! Conversion between [`SceneWorld`] and a USDA document.
//!
//! Layout: one root `World` prim; bodies are nested `Xform` prims mirroring
//! the body tree; each body holds its geometry prims, then the joints it
//! parents, then its child bodies. World joints sit directly under the root.
//! Mesh files are referenced through a `FileReferences` prim under the root.
//! Prim names are sanitized identifiers; the original name is kept in
//! `displayName` whenever the two differ.

use std::collections::{BTreeSet, HashMap, HashSet};

use nalgebra::{Rotation3, UnitQuaternion};
use thiserror::Error;

use crate::diag::Diagnostic;
use crate::math::{rotation_from_z, Mat3, Pose, Vec3};
use crate::refine::principal_axes;
use crate::scene::{
    names, InertialProperties, JointLimits, JointType, MeshData, MeshSource, NameAllocator, PropertySet, PropertyValue,
    SceneBody, SceneGeometry, SceneJoint, SceneWorld, Shape, WORLD,
};

use super::document::{Attribute, MetadataEntry, Property, Specifier, UsdValue, UsdaPrim, UsdaStage};
use super::parser::parse_items;
use super::sanitize::sanitize_name;
use super::schema::*;
use super::writer::{emit_prim, emit_property};

#[derive(Debug, Error, PartialEq)]
pub enum ConvertError {
    #[error("stage has no root prim")]
    NoRootPrim,
    #[error("default prim `{0}` does not exist")]
    MissingDefaultPrim(String),
}

/// Result of reading a stage back into the scene model.
#[derive(Debug)]
pub struct StageImport {
    pub world: SceneWorld,
    pub diagnostics: Vec<Diagnostic>,
}

fn alloc(used: &mut HashSet<String>, raw: &str) -> String {
    let base = sanitize_name(raw);
    if used.insert(base.clone()) {
        return base;
    }
    let mut k = 1;
    loop {
        let candidate = format!("{base}_{k}");
        if used.insert(candidate.clone()) {
            return candidate;
        }
        k += 1;
    }
}

struct ChildNames {
    geoms: Vec<String>,
    joints: Vec<String>,
    bodies: Vec<String>,
}

fn child_names(body: &SceneBody) -> ChildNames {
    let mut used = HashSet::new();
    ChildNames {
        geoms: body.geometries.iter().map(|g| alloc(&mut used, &g.name)).collect(),
        joints: body.joints.iter().map(|j| alloc(&mut used, &j.name)).collect(),
        bodies: body.children.iter().map(|c| alloc(&mut used, &c.name)).collect(),
    }
}

fn root_names(world: &SceneWorld) -> (Vec<String>, Vec<String>) {
    let mut used: HashSet<String> = [FILE_REFERENCES.to_string()].into();
    let joints = world.world_joints().iter().map(|j| alloc(&mut used, &j.name)).collect();
    let bodies = world.bodies().iter().map(|b| alloc(&mut used, &b.name)).collect();
    (joints, bodies)
}

fn set_display_name(prim: &mut UsdaPrim, original: &str) {
    if prim.name != original {
        prim.set_metadata("displayName", UsdValue::string(original));
    }
}

fn write_xform(prim: &mut UsdaPrim, pose: &Pose, scale: Option<&Vec3>) {
    prim.set_value(TRANSLATE, "double3", UsdValue::vec3(&pose.translation));
    prim.set_value(ORIENT, "quatd", UsdValue::quat(&pose.rotation));
    let mut order = vec![TRANSLATE, ORIENT];
    if let Some(s) = scale.filter(|s| **s != Vec3::new(1.0, 1.0, 1.0)) {
        prim.set_value(SCALE, "double3", UsdValue::vec3(s));
        order.push(SCALE);
    }
    prim.set(
        XFORM_OP_ORDER,
        Attribute::new("token[]", UsdValue::strings(order)).uniform(),
    );
}

fn namespace(attr: &str) -> Option<&str> {
    attr.split_once(':').map(|(ns, _)| ns)
}

struct Emitter<'w> {
    world_poses: HashMap<String, Pose>,
    body_paths: HashMap<String, String>,
    file_refs: Vec<(String, String)>,
    file_ref_names: HashSet<String>,
    _world: &'w SceneWorld,
}

impl<'w> Emitter<'w> {
    fn new(world: &'w SceneWorld) -> Self {
        let mut body_paths = HashMap::new();
        fn walk(b: &SceneBody, path: String, out: &mut HashMap<String, String>) {
            let names = child_names(b);
            for (c, n) in b.children.iter().zip(&names.bodies) {
                walk(c, format!("{path}/{n}"), out);
            }
            out.entry(b.name.clone()).or_insert(path);
        }
        let (_, roots) = root_names(world);
        for (b, n) in world.bodies().iter().zip(&roots) {
            walk(b, format!("/{ROOT_PRIM}/{n}"), &mut body_paths);
        }
        Self {
            world_poses: world.body_world_poses(),
            body_paths,
            file_refs: Vec::new(),
            file_ref_names: [FILE_REFERENCES.to_string()].into(),
            _world: world,
        }
    }

    fn file_ref_path(&mut self, file: &str) -> String {
        if let Some((name, _)) = self.file_refs.iter().find(|(_, f)| f == file) {
            return format!("/{ROOT_PRIM}/{FILE_REFERENCES}/{name}");
        }
        let stem = std::path::Path::new(file)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("mesh");
        let name = alloc(&mut self.file_ref_names, stem);
        self.file_refs.push((name.clone(), file.to_string()));
        format!("/{ROOT_PRIM}/{FILE_REFERENCES}/{name}")
    }

    /// Writes properties, returning passthrough prims to append after regular children.
    fn write_properties(&self, prim: &mut UsdaPrim, props: &PropertySet, kind: ElementKind) -> Vec<UsdaPrim> {
        let mut schemas: BTreeSet<String> = BTreeSet::new();
        let mut extra = Vec::new();
        let mut passthrough = None;
        for (name, value) in props.iter() {
            if name == names::USD_PASSTHROUGH {
                passthrough = value.as_text();
                continue;
            }
            if name == names::USD_API_SCHEMAS {
                if let Some(list) = value.as_text_list() {
                    schemas.extend(list.iter().cloned());
                }
                continue;
            }
            let attr_name = attribute_name(name);
            if let Some(s) = namespace(&attr_name).and_then(|ns| api_schema_for(ns, kind)) {
                schemas.insert(s);
            }
            prim.set(&attr_name, encode_property(value));
        }
        if let Some(text) = passthrough {
            match parse_items(text) {
                Ok((attrs, prims)) => {
                    for (n, p) in attrs {
                        prim.properties.entry(n).or_insert(p);
                    }
                    extra = prims;
                }
                Err(_) => {
                    prim.set(
                        &attribute_name(names::USD_PASSTHROUGH),
                        Attribute::new("string", UsdValue::string(text)),
                    );
                }
            }
        }
        prim.add_api_schemas(schemas.iter().map(String::as_str));
        extra
    }

    fn geometry_prim(&mut self, g: &SceneGeometry, prim_name: &str) -> UsdaPrim {
        let type_name = match g.shape {
            Shape::Cube { .. } => "Cube",
            Shape::Sphere { .. } => "Sphere",
            Shape::Cylinder { .. } => "Cylinder",
            Shape::Mesh(_) => "Mesh",
        };
        let mut prim = UsdaPrim::def(type_name, prim_name);
        set_display_name(&mut prim, &g.name);
        let mut schemas = Vec::new();
        match &g.shape {
            Shape::Cube { half_extents } => {
                prim.set_value("size", "double", UsdValue::num(2.0));
                write_xform(&mut prim, &g.pose, Some(&half_extents.component_mul(&g.scale)));
            }
            Shape::Sphere { radius } => {
                prim.set_value("radius", "double", UsdValue::num(*radius));
                write_xform(&mut prim, &g.pose, Some(&g.scale));
            }
            Shape::Cylinder { radius, half_length } => {
                prim.set_value("radius", "double", UsdValue::num(*radius));
                prim.set_value("height", "double", UsdValue::num(2.0 * half_length));
                prim.set("axis", Attribute::new("token", UsdValue::string("Z")).uniform());
                write_xform(&mut prim, &g.pose, Some(&g.scale));
            }
            Shape::Mesh(src) => {
                if let Some(mesh) = &src.data {
                    write_mesh(&mut prim, mesh);
                }
                if let Some(file) = &src.file {
                    let target = self.file_ref_path(file);
                    prim.set_relationship(MESH_FILE_REL, vec![target]);
                }
                write_xform(&mut prim, &g.pose, Some(&g.scale));
            }
        }
        if !g.visible {
            prim.set_value(VISIBILITY, "token", UsdValue::string("invisible"));
        }
        if g.collidable {
            schemas.push(COLLISION_API);
        }
        if let Some([r, gr, b, a]) = g.rgba {
            prim.set_value(
                DISPLAY_COLOR,
                "color3f[]",
                UsdValue::List(vec![UsdValue::vec3(&Vec3::new(r, gr, b))]),
            );
            prim.set_value(DISPLAY_OPACITY, "float[]", UsdValue::List(vec![UsdValue::num(a)]));
        }
        if !g.material.is_empty() {
            prim.set_value(MATERIAL_TRIPLES, "string[]", flatten_triples(&g.material));
            schemas.push(MATERIAL_API);
        }
        prim.add_api_schemas(schemas);
        let extra = self.write_properties(&mut prim, &g.properties, ElementKind::Geom);
        prim.children.extend(extra);
        prim
    }

    fn joint_prim(&self, j: &SceneJoint, prim_name: &str) -> UsdaPrim {
        let mut prim = UsdaPrim::def(joint_prim_type(j.joint_type), prim_name);
        set_display_name(&mut prim, &j.name);
        let parent_world = if j.parent_body == WORLD {
            Pose::identity()
        } else {
            self.world_poses.get(&j.parent_body).copied().unwrap_or_default()
        };
        let child_world = self.world_poses.get(&j.child_body).copied().unwrap_or_default();
        let local0 = parent_world.inverse().compose(&child_world.compose(&j.pose));
        if j.parent_body != WORLD {
            if let Some(p) = self.body_paths.get(&j.parent_body) {
                prim.set_relationship(BODY0, vec![p.clone()]);
            }
        }
        if let Some(p) = self.body_paths.get(&j.child_body) {
            prim.set_relationship(BODY1, vec![p.clone()]);
        }
        prim.set_value(LOCAL_POS0, "point3f", UsdValue::vec3(&local0.translation));
        prim.set_value(LOCAL_ROT0, "quatf", UsdValue::quat(&local0.rotation));
        prim.set_value(LOCAL_POS1, "point3f", UsdValue::vec3(&j.pose.translation));
        prim.set_value(LOCAL_ROT1, "quatf", UsdValue::quat(&j.pose.rotation));
        if let (true, Some(axis)) = (j.joint_type.has_axis(), j.axis) {
            let (k, token) = [(0, "X"), (1, "Y"), (2, "Z")]
                .into_iter()
                .max_by(|a, b| axis[a.0].abs().total_cmp(&axis[b.0].abs()))
                .expect("three axes");
            prim.set(
                "physics:axis",
                Attribute::new("token", UsdValue::string(token)).uniform(),
            );
            let mut unit = Vec3::zeros();
            unit[k] = 1.0;
            if axis != unit {
                prim.set_value(AXIS_VECTOR, "vector3f", UsdValue::vec3(&axis));
            }
        }
        if let Some(l) = j.limits {
            let (lo, hi) = if j.joint_type == JointType::Revolute {
                (l.lower.to_degrees(), l.upper.to_degrees())
            } else {
                (l.lower, l.upper)
            };
            prim.set_value(LOWER_LIMIT, "float", UsdValue::num(lo));
            prim.set_value(UPPER_LIMIT, "float", UsdValue::num(hi));
        }
        let extra = self.write_properties(&mut prim, &j.properties, ElementKind::Joint);
        prim.children.extend(extra);
        prim
    }

    fn body_prim(&mut self, b: &SceneBody, prim_name: &str) -> UsdaPrim {
        let mut prim = UsdaPrim::def("Xform", prim_name);
        set_display_name(&mut prim, &b.name);
        write_xform(&mut prim, &b.pose, None);
        let mut schemas = vec![RIGID_BODY_API];
        if let Some(i) = &b.inertial {
            schemas.push(MASS_API);
            let (values, axes) = principal_axes(&i.inertia);
            let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(axes));
            prim.set_value(MASS, "float", UsdValue::num(i.mass));
            prim.set_value(CENTER_OF_MASS, "point3f", UsdValue::vec3(&i.center_of_mass));
            prim.set_value(DIAGONAL_INERTIA, "float3", UsdValue::vec3(&values));
            prim.set_value(PRINCIPAL_AXES, "quatf", UsdValue::quat(&q));
        }
        prim.add_api_schemas(schemas);
        let extra = self.write_properties(&mut prim, &b.properties, ElementKind::Body);
        let names = child_names(b);
        for (g, n) in b.geometries.iter().zip(&names.geoms) {
            let p = self.geometry_prim(g, n);
            prim.children.push(p);
        }
        for (j, n) in b.joints.iter().zip(&names.joints) {
            prim.children.push(self.joint_prim(j, n));
        }
        for (c, n) in b.children.iter().zip(&names.bodies) {
            let p = self.body_prim(c, n);
            prim.children.push(p);
        }
        append_unique(&mut prim, extra);
        prim
    }
}

fn append_unique(prim: &mut UsdaPrim, extra: Vec<UsdaPrim>) {
    let mut used: HashSet<String> = prim.children.iter().map(|c| c.name.clone()).collect();
    for mut p in extra {
        if used.contains(&p.name) {
            p.name = alloc(&mut used, &p.name);
        } else {
            used.insert(p.name.clone());
        }
        prim.children.push(p);
    }
}

fn write_mesh(prim: &mut UsdaPrim, mesh: &MeshData) {
    prim.set_value(
        "points",
        "point3f[]",
        UsdValue::List(mesh.vertices.iter().map(UsdValue::vec3).collect()),
    );
    prim.set_value(
        "faceVertexCounts",
        "int[]",
        UsdValue::List(mesh.triangles.iter().map(|_| UsdValue::int(3)).collect()),
    );
    prim.set_value(
        "faceVertexIndices",
        "int[]",
        UsdValue::List(
            mesh.triangles
                .iter()
                .flat_map(|t| t.iter().map(|&i| UsdValue::int(i as i64)))
                .collect(),
        ),
    );
    if !mesh.uvs.is_empty() {
        let mut attr = Attribute::new(
            "texCoord2f[]",
            UsdValue::List(
                mesh.uvs
                    .iter()
                    .map(|uv| UsdValue::Tuple(vec![UsdValue::num(uv[0]), UsdValue::num(uv[1])]))
                    .collect(),
            ),
        );
        attr.metadata
            .push(MetadataEntry::new("interpolation", UsdValue::string("vertex")));
        prim.set(UVS, attr);
    }
}

/// Builds the USDA document for `world`.
pub fn world_to_stage(world: &SceneWorld) -> UsdaStage {
    let mut em = Emitter::new(world);
    let mut root = UsdaPrim::def("Xform", ROOT_PRIM);
    set_display_name(&mut root, &world.name);
    let extra = em.write_properties(&mut root, &world.properties, ElementKind::World);
    let (joint_names, body_names) = root_names(world);
    for (j, n) in world.world_joints().iter().zip(&joint_names) {
        root.children.push(em.joint_prim(j, n));
    }
    for (b, n) in world.bodies().iter().zip(&body_names) {
        let p = em.body_prim(b, n);
        root.children.push(p);
    }
    if !em.file_refs.is_empty() {
        let mut refs = UsdaPrim::def(FILE_REFERENCES, FILE_REFERENCES);
        for (name, file) in &em.file_refs {
            let mut r = UsdaPrim::def(FILE_REFERENCE_TYPE, name);
            r.set_value(FILE_PATH, "asset", UsdValue::Asset(file.clone()));
            refs.children.push(r);
        }
        root.children.insert(0, refs);
    }
    append_unique(&mut root, extra);

    let mut stage = UsdaStage::default();
    stage.set_metadata("defaultPrim", UsdValue::string(ROOT_PRIM));
    stage.set_metadata("metersPerUnit", UsdValue::num(1.0));
    stage.set_metadata("upAxis", UsdValue::string("Z"));
    stage.prims.push(root);
    stage
}

// ---------------------------------------------------------------------------
// Stage → world

const GEOM_TYPES: [&str; 4] = ["Cube", "Sphere", "Cylinder", "Mesh"];

fn is_joint_type(t: &str) -> bool {
    JOINT_TYPES.iter().any(|(n, _)| *n == t)
}

struct Reader {
    file_refs: HashMap<String, String>,
    names: NameAllocator,
    /// Body prim path → body name.
    body_paths: HashMap<String, String>,
    /// (prim path, prim, owner body name) for every joint prim, in document order.
    joints: Vec<(String, UsdaPrim, Option<String>)>,
    diagnostics: Vec<Diagnostic>,
}

/// Attribute names consumed by the converter for each element kind.
fn consumed(kind: ElementKind, name: &str) -> bool {
    if name.starts_with("xformOp:") || name == XFORM_OP_ORDER {
        return true;
    }
    match kind {
        ElementKind::World => false,
        ElementKind::Body => matches!(name, MASS | CENTER_OF_MASS | DIAGONAL_INERTIA | PRINCIPAL_AXES),
        ElementKind::Joint => matches!(
            name,
            BODY0
                | BODY1
                | LOCAL_POS0
                | LOCAL_ROT0
                | LOCAL_POS1
                | LOCAL_ROT1
                | AXIS
                | AXIS_VECTOR
                | LOWER_LIMIT
                | UPPER_LIMIT
        ),
        ElementKind::Geom => matches!(
            name,
            "size"
                | "radius"
                | "height"
                | "axis"
                | "points"
                | "faceVertexCounts"
                | "faceVertexIndices"
                | UVS
                | VISIBILITY
                | DISPLAY_COLOR
                | DISPLAY_OPACITY
                | MATERIAL_TRIPLES
                | MESH_FILE_REL
        ),
    }
}

impl Reader {
    fn warn(&mut self, code: &str, subject: &str, message: String) {
        self.diagnostics
            .push(Diagnostic::warning(code, message).with_subject(subject.to_string()));
    }

    fn element_name(&mut self, prim: &UsdaPrim) -> (String, Option<String>) {
        let original = prim.display_name().unwrap_or(&prim.name).to_string();
        let (name, renamed) = self.names.allocate(&original);
        (name, renamed.then_some(original))
    }

    /// Reads properties, API schemas and passthrough text for one element.
    fn read_properties(
        &mut self,
        prim: &UsdaPrim,
        kind: ElementKind,
        passthrough_prims: &[&UsdaPrim],
        path: &str,
    ) -> PropertySet {
        let mut props = PropertySet::new();
        let mut raw = String::new();
        for (name, p) in &prim.properties {
            if consumed(kind, name) {
                continue;
            }
            let decoded = match p {
                Property::Attribute(a) if name.contains(':') => decode_property(name, a),
                _ => None,
            };
            let stored = match decoded {
                Some(value) => {
                    let pname = property_name(name);
                    if pname == names::USD_PASSTHROUGH {
                        if let Some(t) = value.as_text() {
                            raw.push_str(t);
                        }
                        true
                    } else {
                        props.insert(&pname, value).is_ok()
                    }
                }
                None => false,
            };
            if !stored {
                raw.push_str(&emit_property(name, p));
            }
        }
        let foreign: Vec<String> = prim
            .api_schemas()
            .into_iter()
            .filter(|s| !is_generated_schema(s))
            .collect();
        if !foreign.is_empty() {
            let _ = props.insert(names::USD_API_SCHEMAS, PropertyValue::TextList(foreign));
        }
        for p in passthrough_prims {
            raw.push_str(&emit_prim(p));
        }
        if !raw.is_empty() {
            if !passthrough_prims.is_empty() {
                self.diagnostics.push(
                    Diagnostic::info(
                        "usd-passthrough",
                        format!("{} uninterpreted child prim(s) kept verbatim", passthrough_prims.len()),
                    )
                    .with_subject(path.to_string()),
                );
            }
            let _ = props.insert(names::USD_PASSTHROUGH, PropertyValue::Text(raw));
        }
        props
    }

    fn collect_scope_joints(&mut self, prim: &UsdaPrim, path: &str, owner: Option<&str>) -> Option<UsdaPrim> {
        let mut rest = prim.clone();
        rest.children.clear();
        for c in &prim.children {
            let cpath = format!("{path}/{}", c.name);
            if c.specifier == Specifier::Def && is_joint_type(c.type_name()) {
                self.joints.push((cpath, c.clone(), owner.map(str::to_string)));
            } else if c.type_name() == "Scope" {
                if let Some(r) = self.collect_scope_joints(c, &cpath, owner) {
                    rest.children.push(r);
                }
            } else {
                rest.children.push(c.clone());
            }
        }
        (!rest.children.is_empty() || !rest.properties.is_empty() || prim.children.is_empty()).then_some(rest)
    }

    fn body(&mut self, prim: &UsdaPrim, path: &str) -> SceneBody {
        let (name, original) = self.element_name(prim);
        self.body_paths.insert(path.to_string(), name.clone());
        let mut body = SceneBody::new(&name);
        let (pose, scale) = read_xform(prim);
        body.pose = pose;
        if scale != Vec3::new(1.0, 1.0, 1.0) {
            self.warn(
                "body-scale-ignored",
                path,
                "scale on a body prim is not supported".into(),
            );
        }
        if let Some(mass) = prim.value(MASS).and_then(UsdValue::as_f64) {
            let com = prim
                .value(CENTER_OF_MASS)
                .and_then(UsdValue::as_vec3)
                .unwrap_or_default();
            let diag = prim
                .value(DIAGONAL_INERTIA)
                .and_then(UsdValue::as_vec3)
                .unwrap_or_default();
            let axes = prim
                .value(PRINCIPAL_AXES)
                .and_then(UsdValue::as_quat)
                .unwrap_or_else(UnitQuaternion::identity);
            let r = axes.to_rotation_matrix();
            let inertia: Mat3 = r.matrix() * Mat3::from_diagonal(&diag) * r.matrix().transpose();
            body.inertial = Some(InertialProperties::new(
                mass,
                com,
                (inertia + inertia.transpose()) / 2.0,
            ));
        }
        let mut passthrough = Vec::new();
        for c in &prim.children {
            let cpath = format!("{path}/{}", c.name);
            let t = c.type_name();
            if c.specifier != Specifier::Def {
                passthrough.push(c);
            } else if GEOM_TYPES.contains(&t) {
                let g = self.geometry(c, &cpath);
                body.geometries.push(g);
            } else if is_joint_type(t) {
                self.joints.push((cpath, c.clone(), Some(name.clone())));
            } else if t == "Xform" || t.is_empty() {
                let child = self.body(c, &cpath);
                body.children.push(child);
            } else {
                passthrough.push(c);
            }
        }
        let mut kept = Vec::new();
        let mut scope_rest = Vec::new();
        for p in passthrough {
            if p.type_name() == "Scope" {
                let cpath = format!("{path}/{}", p.name);
                if let Some(r) = self.collect_scope_joints(p, &cpath, Some(&name)) {
                    scope_rest.push(r);
                }
            } else {
                kept.push(p);
            }
        }
        let mut all: Vec<&UsdaPrim> = kept;
        all.extend(scope_rest.iter());
        body.properties = self.read_properties(prim, ElementKind::Body, &all, path);
        if let Some(o) = original {
            let _ = body.properties.insert(names::SOURCE_NAME, PropertyValue::Text(o));
        }
        body
    }

    fn geometry(&mut self, prim: &UsdaPrim, path: &str) -> SceneGeometry {
        let (name, original) = self.element_name(prim);
        let (mut pose, mut scale) = read_xform(prim);
        let num = |n: &str, default: f64| prim.value(n).and_then(UsdValue::as_f64).unwrap_or(default);
        let shape = match prim.type_name() {
            "Cube" => {
                let half = scale * (num("size", 2.0) / 2.0);
                scale = Vec3::new(1.0, 1.0, 1.0);
                Shape::Cube { half_extents: half }
            }
            "Sphere" => Shape::Sphere {
                radius: num("radius", 1.0),
            },
            "Cylinder" => {
                let axis = prim.value("axis").and_then(UsdValue::as_str).unwrap_or("Z");
                let dir = match axis {
                    "X" => Vec3::x(),
                    "Y" => Vec3::y(),
                    _ => Vec3::z(),
                };
                if axis != "Z" {
                    let r = rotation_from_z(&dir);
                    pose = pose.compose(&Pose::new(Vec3::zeros(), r));
                    let s = r.inverse() * scale;
                    scale = s.abs();
                }
                Shape::Cylinder {
                    radius: num("radius", 1.0),
                    half_length: num("height", 2.0) / 2.0,
                }
            }
            _ => {
                let data = read_mesh(prim);
                let file = prim
                    .targets(MESH_FILE_REL)
                    .and_then(|t| t.first())
                    .and_then(|t| self.file_refs.get(t))
                    .cloned();
                if data.is_none() && file.is_none() {
                    self.warn("empty-mesh", path, "mesh prim has neither points nor a file".into());
                }
                Shape::Mesh(MeshSource { file, data })
            }
        };
        let mut g = SceneGeometry::new(&name, shape);
        g.pose = pose;
        g.scale = scale;
        g.visible = prim.value(VISIBILITY).and_then(UsdValue::as_str) != Some("invisible");
        g.collidable = prim.has_api(COLLISION_API);
        if let Some(c) = prim
            .value(DISPLAY_COLOR)
            .and_then(UsdValue::as_list)
            .and_then(|l| l.first())
            .and_then(UsdValue::as_vec3)
        {
            let a = prim
                .value(DISPLAY_OPACITY)
                .and_then(UsdValue::as_list)
                .and_then(|l| l.first())
                .and_then(UsdValue::as_f64)
                .unwrap_or(1.0);
            g.rgba = Some([c.x, c.y, c.z, a]);
        }
        if let Some(t) = prim.value(MATERIAL_TRIPLES).and_then(unflatten_triples) {
            g.material = t;
        }
        let children: Vec<&UsdaPrim> = prim.children.iter().collect();
        g.properties = self.read_properties(prim, ElementKind::Geom, &children, path);
        if let Some(o) = original {
            let _ = g.properties.insert(names::SOURCE_NAME, PropertyValue::Text(o));
        }
        g
    }

    fn joint(&mut self, path: &str, prim: &UsdaPrim, world_poses: &HashMap<String, Pose>) -> Option<SceneJoint> {
        let joint_type = JOINT_TYPES
            .iter()
            .find(|(n, _)| *n == prim.type_name())
            .map(|(_, t)| *t)?;
        let resolve = |rel: &str| -> Result<Option<String>, String> {
            match prim.targets(rel).and_then(|t| t.first()) {
                None => Ok(None),
                Some(target) => self
                    .body_paths
                    .get(target)
                    .cloned()
                    .map(Some)
                    .ok_or_else(|| target.clone()),
            }
        };
        let parent = match resolve(BODY0) {
            Ok(p) => p.unwrap_or_else(|| WORLD.to_string()),
            Err(t) => {
                self.warn(
                    "dangling-joint-target",
                    path,
                    format!("body0 target <{t}> is not a body"),
                );
                return None;
            }
        };
        let child = match resolve(BODY1) {
            Ok(Some(c)) => c,
            Ok(None) => {
                self.warn("dangling-joint-target", path, "joint has no body1".into());
                return None;
            }
            Err(t) => {
                self.warn(
                    "dangling-joint-target",
                    path,
                    format!("body1 target <{t}> is not a body"),
                );
                return None;
            }
        };
        let (name, original) = self.element_name(prim);
        let mut j = SceneJoint::new(&name, joint_type, &parent, &child);
        let v3 = |n: &str| prim.value(n).and_then(UsdValue::as_vec3);
        let q = |n: &str| prim.value(n).and_then(UsdValue::as_quat);
        j.pose = if v3(LOCAL_POS1).is_some() || q(LOCAL_ROT1).is_some() {
            Pose::new(
                v3(LOCAL_POS1).unwrap_or_default(),
                q(LOCAL_ROT1).unwrap_or_else(UnitQuaternion::identity),
            )
        } else if v3(LOCAL_POS0).is_some() || q(LOCAL_ROT0).is_some() {
            let local0 = Pose::new(
                v3(LOCAL_POS0).unwrap_or_default(),
                q(LOCAL_ROT0).unwrap_or_else(UnitQuaternion::identity),
            );
            let pw = world_poses.get(&parent).copied().unwrap_or_default();
            let cw = world_poses.get(&child).copied().unwrap_or_default();
            cw.inverse().compose(&pw.compose(&local0))
        } else {
            Pose::identity()
        };
        if joint_type.has_axis() {
            j.axis =
                Some(v3(AXIS_VECTOR).unwrap_or_else(
                    || match prim.value(AXIS).and_then(UsdValue::as_str).unwrap_or("X") {
                        "Y" => Vec3::y(),
                        "Z" => Vec3::z(),
                        _ => Vec3::x(),
                    },
                ));
        } else {
            j.axis = None;
        }
        let lo = prim.value(LOWER_LIMIT).and_then(UsdValue::as_f64);
        let hi = prim.value(UPPER_LIMIT).and_then(UsdValue::as_f64);
        if joint_type.has_axis() && (lo.is_some() || hi.is_some()) {
            let (mut lower, mut upper) = (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY));
            if joint_type == JointType::Revolute {
                lower = lower.to_radians();
                upper = upper.to_radians();
            }
            j.limits = Some(JointLimits { lower, upper });
        }
        let children: Vec<&UsdaPrim> = prim.children.iter().collect();
        j.properties = self.read_properties(prim, ElementKind::Joint, &children, path);
        if let Some(o) = original {
            let _ = j.properties.insert(names::SOURCE_NAME, PropertyValue::Text(o));
        }
        Some(j)
    }
}

/// Composes the xform ops listed in `xformOpOrder` into a pose and a scale.
pub fn read_xform(prim: &UsdaPrim) -> (Pose, Vec3) {
    let order: Vec<String> = prim
        .value(XFORM_OP_ORDER)
        .and_then(UsdValue::as_strings)
        .unwrap_or_else(|| {
            [TRANSLATE, ORIENT, SCALE]
                .iter()
                .filter(|n| prim.value(n).is_some())
                .map(|s| s.to_string())
                .collect()
        });
    let mut pose = Pose::identity();
    let mut scale = Vec3::new(1.0, 1.0, 1.0);
    for op in order {
        let Some(v) = prim.value(&op) else { continue };
        let kind = op.trim_start_matches("xformOp:");
        let base = kind.split(':').next().unwrap_or(kind);
        match base {
            "translate" => {
                if let Some(t) = v.as_vec3() {
                    pose = pose.compose(&Pose::from_translation(t));
                }
            }
            "orient" => {
                if let Some(q) = v.as_quat() {
                    pose = pose.compose(&Pose::new(Vec3::zeros(), q));
                }
            }
            "scale" => {
                if let Some(s) = v.as_vec3() {
                    scale = scale.component_mul(&s);
                }
            }
            "rotateX" | "rotateY" | "rotateZ" => {
                if let Some(a) = v.as_f64() {
                    let axis = match base {
                        "rotateX" => Vec3::x_axis(),
                        "rotateY" => Vec3::y_axis(),
                        _ => Vec3::z_axis(),
                    };
                    let q = UnitQuaternion::from_axis_angle(&axis, a.to_radians());
                    pose = pose.compose(&Pose::new(Vec3::zeros(), q));
                }
            }
            "rotateXYZ" => {
                if let Some(r) = v.as_vec3() {
                    // Intrinsic X then Y then Z, i.e. R = Rz * Ry * Rx.
                    let q = UnitQuaternion::from_euler_angles(r.x.to_radians(), r.y.to_radians(), r.z.to_radians());
                    pose = pose.compose(&Pose::new(Vec3::zeros(), q));
                }
            }
            "transform" => {
                if let Some(rows) = v.as_tuple().filter(|r| r.len() == 4) {
                    let m: Option<Vec<Vec<f64>>> = rows.iter().map(UsdValue::as_f64s).collect();
                    if let Some(m) = m.filter(|m| m.iter().all(|r| r.len() == 4)) {
                        // Row-vector convention: translation in the last row.
                        let mut rot = Mat3::zeros();
                        for r in 0..3 {
                            for c in 0..3 {
                                rot[(r, c)] = m[c][r];
                            }
                        }
                        let sx = rot.column(0).norm();
                        let sy = rot.column(1).norm();
                        let sz = rot.column(2).norm();
                        let mut pure = rot;
                        if sx > 0.0 && sy > 0.0 && sz > 0.0 {
                            pure.set_column(0, &(rot.column(0) / sx));
                            pure.set_column(1, &(rot.column(1) / sy));
                            pure.set_column(2, &(rot.column(2) / sz));
                        }
                        let q = UnitQuaternion::from_matrix(&pure);
                        let t = Vec3::new(m[3][0], m[3][1], m[3][2]);
                        pose = pose.compose(&Pose::new(t, q));
                        scale = scale.component_mul(&Vec3::new(sx, sy, sz));
                    }
                }
            }
            _ => {}
        }
    }
    (pose, scale)
}

fn read_mesh(prim: &UsdaPrim) -> Option<MeshData> {
    let points = prim.value("points")?.as_list()?;
    let vertices: Vec<Vec3> = points.iter().filter_map(UsdValue::as_vec3).collect();
    let counts: Vec<i64> = prim
        .value("faceVertexCounts")
        .and_then(UsdValue::as_list)
        .map(|l| l.iter().filter_map(UsdValue::as_i64).collect())
        .unwrap_or_default();
    let indices: Vec<i64> = prim
        .value("faceVertexIndices")
        .and_then(UsdValue::as_list)
        .map(|l| l.iter().filter_map(UsdValue::as_i64).collect())
        .unwrap_or_default();
    let mut triangles = Vec::new();
    let mut cursor = 0usize;
    for &n in &counts {
        let n = n.max(0) as usize;
        let face = indices.get(cursor..cursor + n)?;
        for k in 1..n.saturating_sub(1) {
            triangles.push([face[0] as u32, face[k] as u32, face[k + 1] as u32]);
        }
        cursor += n;
    }
    let mut mesh = MeshData::new(vertices, triangles);
    if let Some(attr) = prim.attribute(UVS) {
        let interp = attr
            .metadata
            .iter()
            .find(|m| m.key == "interpolation")
            .and_then(|m| m.value.as_str());
        if matches!(interp, Some("vertex") | None) {
            if let Some(list) = attr.value.as_ref().and_then(UsdValue::as_list) {
                let uvs: Vec<[f64; 2]> = list
                    .iter()
                    .filter_map(|v| v.as_f64s())
                    .filter(|v| v.len() == 2)
                    .map(|v| [v[0], v[1]])
                    .collect();
                if uvs.len() == mesh.vertices.len() {
                    mesh.uvs = uvs;
                }
            }
        }
    }
    Some(mesh)
}

/// Reads a (composed) stage back into the scene model.
pub fn stage_to_world(stage: &UsdaStage) -> Result<StageImport, ConvertError> {
    let root = match stage.default_prim() {
        Some(name) => stage
            .prims
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| ConvertError::MissingDefaultPrim(name.to_string()))?,
        None => stage
            .prims
            .iter()
            .find(|p| p.specifier == Specifier::Def)
            .ok_or(ConvertError::NoRootPrim)?,
    };
    let root_path = format!("/{}", root.name);
    let mut reader = Reader {
        file_refs: HashMap::new(),
        names: NameAllocator::new(),
        body_paths: HashMap::new(),
        joints: Vec::new(),
        diagnostics: Vec::new(),
    };
    for c in &root.children {
        if c.type_name() == FILE_REFERENCES {
            for r in &c.children {
                if let Some(file) = r.value(FILE_PATH).and_then(UsdValue::as_str) {
                    reader
                        .file_refs
                        .insert(format!("{root_path}/{}/{}", c.name, r.name), file.to_string());
                }
            }
        }
    }

    let mut world = SceneWorld::new(root.display_name().unwrap_or(&root.name));
    let mut passthrough: Vec<&UsdaPrim> = Vec::new();
    let mut scope_rest = Vec::new();
    let mut bodies = Vec::new();
    for c in &root.children {
        let cpath = format!("{root_path}/{}", c.name);
        let t = c.type_name();
        if c.specifier != Specifier::Def {
            passthrough.push(c);
        } else if t == FILE_REFERENCES {
            continue;
        } else if is_joint_type(t) {
            reader.joints.push((cpath, c.clone(), None));
        } else if t == "Xform" || t.is_empty() {
            bodies.push(reader.body(c, &cpath));
        } else if t == "Scope" {
            if let Some(r) = reader.collect_scope_joints(c, &cpath, None) {
                scope_rest.push(r);
            }
        } else {
            passthrough.push(c);
        }
    }
    passthrough.extend(scope_rest.iter());
    let others: Vec<&UsdaPrim> = stage.prims.iter().filter(|p| p.name != root.name).collect();
    for o in &others {
        reader.warn(
            "extra-root-prim",
            &format!("/{}", o.name),
            "top-level prim outside the default prim is kept verbatim".into(),
        );
    }
    passthrough.extend(others);
    world.properties = reader.read_properties(root, ElementKind::World, &passthrough, &root_path);
    *world.bodies_mut() = bodies;

    let world_poses = world.body_world_poses();
    let pending = std::mem::take(&mut reader.joints);
    let mut placed: Vec<(SceneJoint, String)> = Vec::new();
    for (path, prim, _) in &pending {
        if let Some(j) = reader.joint(path, prim, &world_poses) {
            let owner = j.parent_body.clone();
            placed.push((j, owner));
        }
    }
    for (j, owner) in placed {
        if owner == WORLD {
            world.world_joints_mut().push(j);
        } else if let Some(b) = world.body_mut(&owner) {
            b.joints.push(j);
        }
    }
    Ok(StageImport {
        world,
        diagnostics: reader.diagnostics,
    })
}
