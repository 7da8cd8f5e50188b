//! URDF import and export.
//!
//! A URDF child link's frame is its joint frame, so imported joints always
//! have an identity pose and the link pose carries the joint origin. On
//! export, bodies whose joint frame differs from the body frame are
//! re-expressed in the joint frame.

use std::collections::{HashMap, HashSet};

use roxmltree::Node;

use crate::diag::Diagnostic;
use crate::math::{Pose, Vec3};
use crate::scene::{
    names, InertialProperties, JointLimits, JointType, MeshSource, NameAllocator, PropertySet, PropertyTriple,
    PropertyValue, SceneBody, SceneGeometry, SceneJoint, SceneWorld, Shape, WORLD,
};

use super::common::{self, material_name, mesh_reference, plan_joints, triple_value, KIND, KIND_MATERIAL, TEXTURE};
use super::provenance::{restore, restore_attrs, Recorder};
use super::strip::strip_elements;
use super::xml::*;
use super::{
    check_mesh_reference, finish_import, ExportOptions, ExportOutput, FormatError, ImportOptions, Imported,
    LoopStrategy, SourceFormat,
};

const FMT: SourceFormat = SourceFormat::Urdf;

fn origin(node: Node) -> Result<Pose, FormatError> {
    let Some(o) = child(node, "origin") else {
        return Ok(Pose::identity());
    };
    let xyz = match o.attribute("xyz") {
        Some(t) => floats_n::<3>(o, "xyz", t)?,
        None => [0.0; 3],
    };
    let rpy = match o.attribute("rpy") {
        Some(t) => floats_n::<3>(o, "rpy", t)?,
        None => [0.0; 3],
    };
    Ok(xyz_rpy_pose(xyz, rpy))
}

fn origin_element(pose: &Pose) -> Option<XmlElement> {
    if pose.is_identity() {
        return None;
    }
    Some(
        XmlElement::new("origin")
            .attr("xyz", fmt_vec3(&pose.translation))
            .attr("rpy", fmt_floats(&pose.rpy())),
    )
}

#[derive(Clone, Default)]
struct Material {
    rgba: Option<[f64; 4]>,
    texture: Option<String>,
}

fn read_material(node: Node) -> Result<Material, FormatError> {
    let mut m = Material::default();
    if let Some(c) = child(node, "color") {
        let t = c
            .attribute("rgba")
            .ok_or_else(|| FormatError::missing(&describe(c), "rgba"))?;
        m.rgba = Some(floats_n::<4>(c, "rgba", t)?);
    }
    if let Some(t) = child(node, "texture") {
        m.texture = t.attribute("filename").map(str::to_string);
    }
    Ok(m)
}

struct GeomSpec {
    name: Option<String>,
    shape: Shape,
    pose: Pose,
    scale: Vec3,
    props: PropertySet,
    material: Option<(String, Material)>,
}

struct Importer<'s> {
    rec: Recorder<'s>,
    opts: &'s ImportOptions,
    materials: HashMap<String, Material>,
    diagnostics: Vec<Diagnostic>,
}

impl<'s> Importer<'s> {
    fn geometry(&mut self, node: Node, link: &str, kind: &str) -> Result<GeomSpec, FormatError> {
        let g = child(node, "geometry").ok_or_else(|| FormatError::missing(&describe(node), "<geometry>"))?;
        let shape_node = g
            .children()
            .find(|c| c.is_element())
            .ok_or_else(|| FormatError::missing(&describe(g), "shape element"))?;
        let mut scale = Vec3::new(1.0, 1.0, 1.0);
        let need = |attr: &str| {
            shape_node
                .attribute(attr)
                .ok_or_else(|| FormatError::missing(&describe(shape_node), attr))
        };
        let shape = match shape_node.tag_name().name() {
            "box" => {
                let [x, y, z] = floats_n::<3>(shape_node, "size", need("size")?)?;
                Shape::Cube {
                    half_extents: Vec3::new(x, y, z) / 2.0,
                }
            }
            "sphere" => Shape::Sphere {
                radius: floats_n::<1>(shape_node, "radius", need("radius")?)?[0],
            },
            "cylinder" => Shape::Cylinder {
                radius: floats_n::<1>(shape_node, "radius", need("radius")?)?[0],
                half_length: floats_n::<1>(shape_node, "length", need("length")?)?[0] / 2.0,
            },
            "mesh" => {
                let file = need("filename")?.to_string();
                check_mesh_reference(&file, self.opts)?;
                if let Some(s) = attr_vec3(shape_node, "scale")? {
                    scale = s;
                }
                Shape::Mesh(MeshSource::file(file))
            }
            other => {
                return Err(FormatError::Structure(format!(
                    "link `{link}`: unsupported {kind} geometry <{other}>"
                )))
            }
        };
        let name = node.attribute("name").map(str::to_string);
        let element = name.clone().unwrap_or_else(|| format!("{link}/{kind}"));
        let mut props = PropertySet::new();
        self.rec.attrs(node, &element, "", &["name"], &mut props);
        self.rec.attrs(
            shape_node,
            &element,
            "geometry:",
            &["size", "radius", "length", "filename", "scale"],
            &mut props,
        );
        self.rec
            .elements(node, &element, &["origin", "geometry", "material"], &mut props);
        let material = match child(node, "material") {
            None => None,
            Some(m) => {
                let mname = m.attribute("name").unwrap_or("").to_string();
                let has_body = m.children().any(|c| c.is_element());
                let mat = if has_body {
                    read_material(m)?
                } else {
                    match self.materials.get(&mname) {
                        Some(found) => found.clone(),
                        None => {
                            self.diagnostics.push(
                                Diagnostic::warning("unknown-material", format!("material `{mname}` is not defined"))
                                    .with_subject(element.clone()),
                            );
                            Material::default()
                        }
                    }
                };
                Some((mname, mat))
            }
        };
        Ok(GeomSpec {
            name,
            shape,
            pose: origin(node)?,
            scale,
            props,
            material,
        })
    }

    fn link(&mut self, node: Node, name: &str) -> Result<(SceneBody, Vec<(GeomSpec, bool, bool)>), FormatError> {
        let mut body = SceneBody::new(name);
        self.rec.attrs(node, name, "", &["name"], &mut body.properties);
        self.rec
            .elements(node, name, &["inertial", "visual", "collision"], &mut body.properties);
        if let Some(i) = child(node, "inertial") {
            let frame = origin(i)?;
            let m = child(i, "mass").ok_or_else(|| FormatError::missing(&describe(i), "<mass>"))?;
            let mass = attr_f64(m, "value")?.ok_or_else(|| FormatError::missing(&describe(m), "value"))?;
            let t = child(i, "inertia");
            let get = |k: &str| -> Result<f64, FormatError> {
                match t {
                    Some(t) => Ok(attr_f64(t, k)?.unwrap_or(0.0)),
                    None => Ok(0.0),
                }
            };
            let (ixx, ixy, ixz, iyy, iyz, izz) = (
                get("ixx")?,
                get("ixy")?,
                get("ixz")?,
                get("iyy")?,
                get("iyz")?,
                get("izz")?,
            );
            let local = crate::math::Mat3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz);
            let r = frame.rotation.to_rotation_matrix();
            let inertia = r.matrix() * local * r.matrix().transpose();
            body.inertial = Some(InertialProperties::new(
                mass,
                frame.translation,
                (inertia + inertia.transpose()) / 2.0,
            ));
        }
        let mut geoms: Vec<(GeomSpec, bool, bool)> = Vec::new();
        for v in children(node, "visual") {
            let spec = self.geometry(v, name, "visual")?;
            geoms.push((spec, true, false));
        }
        for c in children(node, "collision") {
            let spec = self.geometry(c, name, "collision")?;
            // A collision with the same name and shape as a visual is one geometry.
            let twin = geoms.iter_mut().find(|(g, vis, col)| {
                *vis && !*col
                    && g.name.is_some()
                    && g.name == spec.name
                    && g.shape == spec.shape
                    && g.pose == spec.pose
                    && g.scale == spec.scale
            });
            match twin {
                Some(t) => {
                    t.2 = true;
                    for (k, v) in spec.props.iter() {
                        if !t.0.props.contains(k) {
                            let _ = t.0.props.insert(k, v.clone());
                        }
                    }
                }
                None => geoms.push((spec, false, true)),
            }
        }
        Ok((body, geoms))
    }
}

fn joint_type(node: Node, name: &str) -> Result<(JointType, bool), FormatError> {
    let t = node
        .attribute("type")
        .ok_or_else(|| FormatError::missing(&describe(node), "type"))?;
    Ok(match t {
        "fixed" => (JointType::Fixed, false),
        "revolute" => (JointType::Revolute, false),
        "continuous" => (JointType::Revolute, true),
        "prismatic" => (JointType::Prismatic, false),
        other => {
            return Err(FormatError::UnsupportedJoint {
                joint: name.to_string(),
                joint_type: other.to_string(),
            })
        }
    })
}

/// Imports a URDF `<robot>`.
pub fn import_urdf(text: &str, opts: &ImportOptions) -> Result<Imported, FormatError> {
    let doc = parse_document(text)?;
    let root = doc.root_element();
    if root.tag_name().name() != "robot" {
        return Err(FormatError::WrongRoot {
            expected: "robot",
            found: root.tag_name().name().to_string(),
        });
    }
    let mut imp = Importer {
        rec: Recorder::new(FMT, text),
        opts,
        materials: HashMap::new(),
        diagnostics: Vec::new(),
    };
    let mut world = SceneWorld::new(root.attribute("name").unwrap_or("robot"));
    imp.rec.attrs(root, "robot", "", &["name"], &mut world.properties);
    imp.rec
        .elements(root, "robot", &["link", "joint", "material"], &mut world.properties);
    for m in children(root, "material") {
        if let Some(n) = m.attribute("name") {
            let mat = read_material(m)?;
            imp.materials.insert(n.to_string(), mat);
        }
    }

    // Links, keyed by name, in document order.
    let mut link_order: Vec<String> = Vec::new();
    let mut links: HashMap<String, (SceneBody, Vec<(GeomSpec, bool, bool)>)> = HashMap::new();
    for l in children(root, "link") {
        let name = l
            .attribute("name")
            .ok_or_else(|| FormatError::missing(&describe(l), "name"))?
            .to_string();
        if name == WORLD {
            if l.children().any(|c| c.is_element()) {
                imp.diagnostics.push(
                    Diagnostic::warning("world-link-content", "contents of link `world` are ignored")
                        .with_subject(WORLD),
                );
            }
            continue;
        }
        if links.contains_key(&name) {
            return Err(FormatError::Structure(format!("duplicate link `{name}`")));
        }
        let parsed = imp.link(l, &name)?;
        link_order.push(name.clone());
        links.insert(name, parsed);
    }

    // Joints.
    struct J {
        joint: SceneJoint,
        origin: Pose,
    }
    let mut joints: Vec<J> = Vec::new();
    let mut parent_of: HashMap<String, usize> = HashMap::new();
    for j in children(root, "joint") {
        let name = j
            .attribute("name")
            .ok_or_else(|| FormatError::missing(&describe(j), "name"))?
            .to_string();
        let (jt, unbounded) = joint_type(j, &name)?;
        let link_ref = |tag: &str| -> Result<String, FormatError> {
            child(j, tag)
                .and_then(|c| c.attribute("link"))
                .map(str::to_string)
                .ok_or_else(|| FormatError::missing(&describe(j), &format!("<{tag} link>")))
        };
        let parent = link_ref("parent")?;
        let child_link = link_ref("child")?;
        for l in [&parent, &child_link] {
            if l != WORLD && !links.contains_key(l) {
                return Err(FormatError::Structure(format!(
                    "joint `{name}` references unknown link `{l}`"
                )));
            }
        }
        if child_link == WORLD {
            return Err(FormatError::Structure(format!("joint `{name}` has the world as child")));
        }
        if parent_of.contains_key(&child_link) {
            return Err(FormatError::Structure(format!(
                "link `{child_link}` has two parent joints"
            )));
        }
        let mut joint = SceneJoint::new(&name, jt, &parent, &child_link);
        imp.rec.attrs(j, &name, "", &["name", "type"], &mut joint.properties);
        imp.rec.elements(
            j,
            &name,
            &["origin", "parent", "child", "axis", "limit", "dynamics"],
            &mut joint.properties,
        );
        if jt.has_axis() {
            if let Some(a) = child(j, "axis") {
                if let Some(v) = attr_vec3(a, "xyz")? {
                    joint.axis = Some(v);
                }
            }
        }
        if let Some(l) = child(j, "limit") {
            let lower = attr_f64(l, "lower")?;
            let upper = attr_f64(l, "upper")?;
            if jt.has_axis() && !unbounded && (lower.is_some() || upper.is_some()) {
                joint.limits = Some(JointLimits {
                    lower: lower.unwrap_or(0.0),
                    upper: upper.unwrap_or(0.0),
                });
            }
            for (attr, prop) in [("effort", names::LIMITS_EFFORT), ("velocity", names::LIMITS_VELOCITY)] {
                if let Some(v) = attr_f64(l, attr)? {
                    let _ = joint.properties.insert(prop, PropertyValue::Real(v));
                }
            }
            imp.rec.attrs(
                l,
                &name,
                "limit:",
                &["lower", "upper", "effort", "velocity"],
                &mut joint.properties,
            );
        }
        if let Some(d) = child(j, "dynamics") {
            for (attr, prop) in [
                ("damping", names::DYNAMICS_DAMPING),
                ("friction", names::DYNAMICS_FRICTION),
            ] {
                if let Some(v) = attr_f64(d, attr)? {
                    let _ = joint.properties.insert(prop, PropertyValue::Real(v));
                }
            }
            imp.rec
                .attrs(d, &name, "dynamics:", &["damping", "friction"], &mut joint.properties);
        }
        if unbounded {
            let _ = joint
                .properties
                .insert(names::LIMITS_UNBOUNDED, PropertyValue::Bool(true));
        }
        parent_of.insert(child_link.clone(), joints.len());
        joints.push(J {
            joint,
            origin: origin(j)?,
        });
    }

    // Unique names across links, joints and geometries.
    let mut alloc = NameAllocator::new();
    for l in &link_order {
        alloc.allocate(l);
    }
    let mut renamed_joints: HashMap<usize, String> = HashMap::new();
    for (k, j) in joints.iter().enumerate() {
        let (n, renamed) = alloc.allocate(&j.joint.name);
        if renamed {
            renamed_joints.insert(k, n);
        }
    }
    for (k, n) in renamed_joints {
        let j = &mut joints[k].joint;
        let _ = j
            .properties
            .insert(names::SOURCE_NAME, PropertyValue::Text(j.name.clone()));
        j.name = n;
    }
    let mut bodies: HashMap<String, SceneBody> = HashMap::new();
    for l in &link_order {
        let (mut body, specs) = links.remove(l).expect("link parsed");
        let mut counters = [0usize; 2];
        for (spec, visible, collidable) in specs {
            let fallback = if visible {
                counters[0] += 1;
                format!("{l}_visual_{}", counters[0] - 1)
            } else {
                counters[1] += 1;
                format!("{l}_collision_{}", counters[1] - 1)
            };
            let raw = spec.name.clone().unwrap_or(fallback);
            let (name, renamed) = alloc.allocate(&raw);
            let mut g = SceneGeometry::new(&name, spec.shape);
            g.pose = spec.pose;
            g.scale = spec.scale;
            g.visible = visible;
            g.collidable = collidable;
            g.properties = spec.props;
            if renamed && spec.name.is_some() {
                let _ = g.properties.insert(names::SOURCE_NAME, PropertyValue::Text(raw));
            }
            if let Some((mname, mat)) = spec.material {
                g.rgba = mat.rgba;
                let subject = if mname.is_empty() {
                    format!("{name}_material")
                } else {
                    mname
                };
                g.material.push(PropertyTriple::new(&subject, KIND, KIND_MATERIAL));
                if let Some(t) = mat.texture {
                    g.material.push(PropertyTriple::new(&subject, TEXTURE, &t));
                }
            }
            body.geometries.push(g);
        }
        bodies.insert(l.clone(), body);
    }

    // Nest children under parents, deepest first so subtrees are complete.
    let mut depth: HashMap<String, usize> = HashMap::new();
    fn depth_of(
        l: &str,
        parent_of: &HashMap<String, usize>,
        parents: &[String],
        memo: &mut HashMap<String, usize>,
        guard: usize,
    ) -> Option<usize> {
        if let Some(d) = memo.get(l) {
            return Some(*d);
        }
        if guard > parents.len() + 1 {
            return None;
        }
        let d = match parent_of.get(l) {
            None => 0,
            Some(&k) if parents[k] == WORLD => 0,
            Some(&k) => depth_of(&parents[k], parent_of, parents, memo, guard + 1)? + 1,
        };
        memo.insert(l.to_string(), d);
        Some(d)
    }
    let parents: Vec<String> = joints.iter().map(|j| j.joint.parent_body.clone()).collect();
    for l in &link_order {
        if depth_of(l, &parent_of, &parents, &mut depth, 0).is_none() {
            return Err(FormatError::Structure(format!("link `{l}` is part of a joint cycle")));
        }
    }
    for j in &joints {
        if let Some(b) = bodies.get_mut(&j.joint.child_body) {
            b.pose = j.origin;
        }
    }
    let mut order: Vec<&String> = link_order.iter().collect();
    order.sort_by_key(|l| std::cmp::Reverse(depth[*l]));
    // Children keep document order within each parent.
    let mut pending_children: HashMap<String, Vec<SceneBody>> = HashMap::new();
    for l in order {
        let mut body = bodies.remove(l).expect("body built");
        if let Some(mut kids) = pending_children.remove(l) {
            kids.sort_by_key(|b| link_order.iter().position(|x| *x == b.name));
            body.children = kids;
        }
        match parent_of.get(l).map(|&k| &parents[k]) {
            Some(p) if p != WORLD => pending_children.entry(p.clone()).or_default().push(body),
            _ => pending_children.entry(String::new()).or_default().push(body),
        }
    }
    let mut roots = pending_children.remove("").unwrap_or_default();
    roots.sort_by_key(|b| link_order.iter().position(|x| *x == b.name));
    *world.bodies_mut() = roots;
    for j in joints {
        let joint = j.joint;
        if joint.parent_body == WORLD {
            world.world_joints_mut().push(joint);
        } else if let Some(p) = world.body_mut(&joint.parent_body.clone()) {
            p.joints.push(joint);
        }
    }
    let mut diagnostics = imp.diagnostics;
    finish_import(&mut world, opts, &mut diagnostics);
    Ok(Imported {
        world,
        provenance: imp.rec.provenance,
        diagnostics,
    })
}

fn geometry_element(
    g: &SceneGeometry,
    side_files: &mut Vec<(String, String)>,
    diags: &mut Vec<Diagnostic>,
) -> Result<XmlElement, FormatError> {
    let s = g.scale;
    let mut e = match &g.shape {
        Shape::Cube { half_extents } => {
            XmlElement::new("box").attr("size", fmt_vec3(&(half_extents.component_mul(&s) * 2.0)))
        }
        Shape::Sphere { radius } => {
            if (s.x - s.y).abs() > 1e-12 || (s.x - s.z).abs() > 1e-12 {
                diags.push(
                    Diagnostic::warning(
                        "nonuniform-sphere",
                        "URDF spheres cannot be scaled per axis; using the largest factor",
                    )
                    .with_subject(g.name.clone()),
                );
            }
            XmlElement::new("sphere").attr("radius", fmt_f64(radius * s.max()))
        }
        Shape::Cylinder { radius, half_length } => {
            if (s.x - s.y).abs() > 1e-12 {
                diags.push(
                    Diagnostic::warning(
                        "nonuniform-cylinder",
                        "elliptic cylinder exported with the larger radius",
                    )
                    .with_subject(g.name.clone()),
                );
            }
            XmlElement::new("cylinder")
                .attr("radius", fmt_f64(radius * s.x.max(s.y)))
                .attr("length", fmt_f64(2.0 * half_length * s.z))
        }
        Shape::Mesh(_) => {
            let file = mesh_reference(g, side_files)?.expect("mesh shape");
            let mut m = XmlElement::new("mesh").attr("filename", file);
            if s != Vec3::new(1.0, 1.0, 1.0) {
                m.set("scale", fmt_vec3(&s));
            }
            m
        }
    };
    restore_attrs(&g.properties, FMT, "geometry:", &mut e);
    Ok(XmlElement::new("geometry").child(e))
}

fn geometry_elements(
    g: &SceneGeometry,
    frame_from_body: &Pose,
    side_files: &mut Vec<(String, String)>,
    diags: &mut Vec<Diagnostic>,
) -> Result<Vec<XmlElement>, FormatError> {
    let pose = frame_from_body.compose(&g.pose);
    let shape = geometry_element(g, side_files, diags)?;
    let mut out = Vec::new();
    let (visual, collision) = match (g.visible, g.collidable) {
        (false, false) => {
            diags.push(
                Diagnostic::warning(
                    "hidden-geometry",
                    "geometry is neither visible nor collidable; exported as visual",
                )
                .with_subject(g.name.clone()),
            );
            (true, false)
        }
        other => other,
    };
    let name = &g.name;
    for (tag, wanted) in [("visual", visual), ("collision", collision)] {
        if !wanted {
            continue;
        }
        let mut e = XmlElement::new(tag).attr("name", name);
        if let Some(o) = origin_element(&pose) {
            e.push(o);
        }
        e.push(shape.clone());
        if tag == "visual" && (g.rgba.is_some() || !g.material.is_empty()) {
            let mname = material_name(g)
                .map(str::to_string)
                .unwrap_or_else(|| format!("{}_material", g.name));
            let mut m = XmlElement::new("material").attr("name", mname.clone());
            if let Some(c) = g.rgba {
                m.push(XmlElement::new("color").attr("rgba", fmt_floats(&c)));
            }
            if let Some(t) = triple_value(&g.material, &mname, TEXTURE) {
                m.push(XmlElement::new("texture").attr("filename", t));
            }
            e.push(m);
        }
        restore(&g.properties, FMT, &mut e);
        out.push(e);
    }
    Ok(out)
}

fn inertial_element(i: &InertialProperties, frame_from_body: &Pose) -> XmlElement {
    let t = i.transformed(frame_from_body);
    let m = t.inertia;
    let mut e = XmlElement::new("inertial");
    if t.center_of_mass != Vec3::zeros() {
        e.push(
            XmlElement::new("origin")
                .attr("xyz", fmt_vec3(&t.center_of_mass))
                .attr("rpy", "0 0 0"),
        );
    }
    e.push(XmlElement::new("mass").attr("value", fmt_f64(t.mass)));
    e.push(
        XmlElement::new("inertia")
            .attr("ixx", fmt_f64(m[(0, 0)]))
            .attr("ixy", fmt_f64(m[(0, 1)]))
            .attr("ixz", fmt_f64(m[(0, 2)]))
            .attr("iyy", fmt_f64(m[(1, 1)]))
            .attr("iyz", fmt_f64(m[(1, 2)]))
            .attr("izz", fmt_f64(m[(2, 2)])),
    );
    e
}

/// Exports to URDF. Loop-closing joints are dropped with a warning (or
/// rejected with `LoopStrategy::Fail`); spherical tree joints become fixed.
pub fn export_urdf(world: &SceneWorld, opts: &ExportOptions) -> Result<ExportOutput, FormatError> {
    let world = strip_elements(world, &opts.strip);
    let mut out = ExportOutput::default();
    let plan = plan_joints(&world);
    common::check_loop_strategy(&plan.loops, opts.loop_strategy, |_| false)?;
    if opts.loop_strategy != LoopStrategy::Fail {
        for j in &plan.loops {
            out.diagnostics
                .push(common::dropped(j, "URDF cannot express kinematic loops"));
        }
    }
    let poses = world.body_world_poses();
    let world_pose = |b: &str| poses.get(b).copied().unwrap_or_default();

    // Link frame of each body: its joint frame if it has a tree parent joint.
    let mut link_frame: HashMap<String, Pose> = HashMap::new();
    for (b, _) in world.all_bodies() {
        let f = match plan.parent_joint.get(&b.name) {
            Some(j) => world_pose(&b.name).compose(&j.pose),
            None => world_pose(&b.name),
        };
        link_frame.insert(b.name.clone(), f);
    }
    let frame_of = |b: &str| {
        if b == WORLD {
            Pose::identity()
        } else {
            link_frame.get(b).copied().unwrap_or_default()
        }
    };

    let mut root = XmlElement::new("robot").attr("name", world.name.clone());
    restore_attrs(&world.properties, FMT, "", &mut root);

    // Synthesized joints: jointless nesting and detached roots.
    let mut synthetic: Vec<(String, String, String)> = Vec::new();
    let mut roots: Vec<&SceneBody> = Vec::new();
    for (b, parent) in world.all_bodies() {
        if plan.parent_joint.contains_key(&b.name) {
            continue;
        }
        match parent {
            Some(p) => synthetic.push((format!("{}_fixed", b.name), p.name.clone(), b.name.clone())),
            None => roots.push(b),
        }
    }
    let has_world_joints = plan.tree.iter().any(|j| j.parent_body == WORLD);
    let anchor_roots = has_world_joints || roots.len() > 1 || roots.iter().any(|b| !world_pose(&b.name).is_identity());
    if anchor_roots {
        for b in &roots {
            synthetic.push((format!("{}_world_fixed", b.name), WORLD.to_string(), b.name.clone()));
        }
        root.push(XmlElement::new("link").attr("name", WORLD));
    }
    let mut used: HashSet<String> = world.all_names().into_iter().map(str::to_string).collect();
    for s in &mut synthetic {
        let mut name = s.0.clone();
        let mut k = 1;
        while used.contains(&name) {
            name = format!("{}_{k}", s.0);
            k += 1;
        }
        used.insert(name.clone());
        out.diagnostics.push(
            Diagnostic::info("synthesized-joint", format!("added fixed joint `{name}` for `{}`", s.2))
                .with_subject(name.clone()),
        );
        s.0 = name;
    }

    // Global materials keep their definitions next to their first use; nothing to emit here.
    for (b, _) in world.all_bodies() {
        let mut link = XmlElement::new("link").attr("name", b.name.clone());
        restore_attrs(&b.properties, FMT, "", &mut link);
        let frame_from_body = frame_of(&b.name).inverse().compose(&world_pose(&b.name));
        if let Some(i) = &b.inertial {
            link.push(inertial_element(i, &frame_from_body));
        }
        for g in &b.geometries {
            for e in geometry_elements(g, &frame_from_body, &mut out.side_files, &mut out.diagnostics)? {
                link.push(e);
            }
        }
        super::provenance::restore_elements(&b.properties, FMT, &mut link);
        root.push(link);
    }

    for j in &plan.tree {
        let mut jt = match j.joint_type {
            JointType::Fixed => "fixed",
            JointType::Revolute if j.properties.flag(names::LIMITS_UNBOUNDED) || j.limits.is_none() => "continuous",
            JointType::Revolute => "revolute",
            JointType::Prismatic => "prismatic",
            JointType::Spherical => "fixed",
        };
        if j.joint_type == JointType::Spherical {
            out.diagnostics.push(
                Diagnostic::warning(
                    "joint-degraded",
                    format!("spherical joint `{}` exported as fixed", j.name),
                )
                .with_subject(j.name.clone()),
            );
        }
        if jt == "continuous" && j.joint_type != JointType::Revolute {
            jt = "fixed";
        }
        let mut e = XmlElement::new("joint").attr("name", j.name.clone()).attr("type", jt);
        restore_attrs(&j.properties, FMT, "", &mut e);
        let origin = frame_of(&j.parent_body).inverse().compose(&frame_of(&j.child_body));
        if let Some(o) = origin_element(&origin) {
            e.push(o);
        }
        e.push(XmlElement::new("parent").attr("link", j.parent_body.clone()));
        e.push(XmlElement::new("child").attr("link", j.child_body.clone()));
        if j.joint_type.has_axis() {
            let axis = j.axis.unwrap_or_else(Vec3::x);
            e.push(XmlElement::new("axis").attr("xyz", fmt_vec3(&axis)));
            let mut limit = XmlElement::new("limit");
            if let (Some(l), "revolute" | "prismatic") = (j.limits, jt) {
                limit.set("lower", fmt_f64(l.lower));
                limit.set("upper", fmt_f64(l.upper));
            }
            for (attr, prop) in [("effort", names::LIMITS_EFFORT), ("velocity", names::LIMITS_VELOCITY)] {
                let v = j.properties.get(prop).and_then(PropertyValue::as_real).unwrap_or(0.0);
                limit.set(attr, fmt_f64(v));
            }
            restore_attrs(&j.properties, FMT, "limit:", &mut limit);
            e.push(limit);
        }
        let mut dynamics = XmlElement::new("dynamics");
        for (attr, prop) in [
            ("damping", names::DYNAMICS_DAMPING),
            ("friction", names::DYNAMICS_FRICTION),
        ] {
            if let Some(v) = j.properties.get(prop).and_then(PropertyValue::as_real) {
                dynamics.set(attr, fmt_f64(v));
            }
        }
        restore_attrs(&j.properties, FMT, "dynamics:", &mut dynamics);
        if !dynamics.is_empty() {
            e.push(dynamics);
        }
        super::provenance::restore_elements(&j.properties, FMT, &mut e);
        root.push(e);
    }
    for (name, parent, child_name) in &synthetic {
        let mut e = XmlElement::new("joint")
            .attr("name", name.clone())
            .attr("type", "fixed");
        let origin = frame_of(parent).inverse().compose(&frame_of(child_name));
        if let Some(o) = origin_element(&origin) {
            e.push(o);
        }
        e.push(XmlElement::new("parent").attr("link", parent.clone()));
        e.push(XmlElement::new("child").attr("link", child_name.clone()));
        root.push(e);
    }
    super::provenance::restore_elements(&world.properties, FMT, &mut root);
    out.document = document(&root);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{kinematic_classification, structural_diff, CompareTolerance, KinematicKind};

    const TWO_LINK: &str = r#"<?xml version="1.0"?>
<robot name="two">
  <material name="blue"><color rgba="0 0 1 1"/></material>
  <link name="base">
    <inertial>
      <origin xyz="0 0 0.1" rpy="0 0 0.3"/>
      <mass value="2"/>
      <inertia ixx="0.1" ixy="0.01" ixz="0" iyy="0.2" iyz="0" izz="0.3"/>
    </inertial>
    <visual name="shell">
      <geometry><box size="0.2 0.4 0.6"/></geometry>
      <material name="blue"/>
    </visual>
    <collision name="shell">
      <geometry><box size="0.2 0.4 0.6"/></geometry>
    </collision>
  </link>
  <link name="arm">
    <visual><origin xyz="0 0 0.25"/><geometry><cylinder radius="0.05" length="0.5"/></geometry></visual>
  </link>
  <joint name="shoulder" type="revolute">
    <origin xyz="0 0 0.3" rpy="0 0.1 0"/>
    <parent link="base"/>
    <child link="arm"/>
    <axis xyz="0 1 0"/>
    <limit lower="-1" upper="1" effort="10" velocity="2" vendor="x"/>
    <safety_controller k_velocity="10"/>
  </joint>
  <transmission name="t"><type>simple</type></transmission>
</robot>"#;

    fn opts() -> ImportOptions {
        ImportOptions {
            verify_mesh_paths: false,
            ..Default::default()
        }
    }

    #[test]
    fn imports_two_link_robot() {
        let imp = import_urdf(TWO_LINK, &opts()).unwrap();
        let w = &imp.world;
        assert_eq!((w.body_count(), w.joint_count(), w.geometry_count()), (2, 1, 2));
        assert_eq!(kinematic_classification(w).kind, KinematicKind::Tree);
        let base = w.body("base").unwrap();
        let shell = &base.geometries[0];
        assert!(shell.visible && shell.collidable);
        assert_eq!(shell.rgba, Some([0.0, 0.0, 1.0, 1.0]));
        let arm_geom = &w.body("arm").unwrap().geometries[0];
        assert!(arm_geom.visible && !arm_geom.collidable);
        assert_eq!(arm_geom.name, "arm_visual_0");
        let j = &base.joints[0];
        assert_eq!(
            j.limits,
            Some(JointLimits {
                lower: -1.0,
                upper: 1.0
            })
        );
        assert_eq!(j.properties.text("urdf:limit:vendor"), Some("x"));
        assert!(j
            .properties
            .text("urdf:unmapped_xml")
            .unwrap()
            .contains("safety_controller"));
        assert!(imp.provenance.unmapped_attributes.len() >= 3);
    }

    #[test]
    fn export_round_trips_structure_and_provenance() {
        let first = import_urdf(TWO_LINK, &opts()).unwrap().world;
        let out = export_urdf(&first, &ExportOptions::default()).unwrap();
        assert!(out.document.contains("<transmission name=\"t\">"));
        assert!(out.document.contains("vendor=\"x\""));
        let second = import_urdf(&out.document, &opts()).unwrap().world;
        let diff = structural_diff(&first, &second, &CompareTolerance::default());
        assert!(diff.is_empty(), "{diff:?}\n{}", out.document);
    }

    #[test]
    fn continuous_is_unbounded_revolute() {
        let doc = r#"<robot name="r"><link name="a"/><link name="b"/>
            <joint name="j" type="continuous"><parent link="a"/><child link="b"/></joint></robot>"#;
        let w = import_urdf(doc, &opts()).unwrap().world;
        let j = &w.body("a").unwrap().joints[0];
        assert_eq!(j.joint_type, JointType::Revolute);
        assert!(j.properties.flag(names::LIMITS_UNBOUNDED));
        let out = export_urdf(&w, &ExportOptions::default()).unwrap();
        assert!(out.document.contains("type=\"continuous\""));
    }

    #[test]
    fn rejects_floating_and_missing_mesh() {
        let doc = r#"<robot name="r"><link name="a"/><link name="b"/>
            <joint name="j" type="floating"><parent link="a"/><child link="b"/></joint></robot>"#;
        assert!(matches!(
            import_urdf(doc, &opts()),
            Err(FormatError::UnsupportedJoint { .. })
        ));
        let doc = r#"<robot name="r"><link name="a"><visual><geometry><mesh filename="nope/missing.stl"/></geometry></visual></link></robot>"#;
        match import_urdf(doc, &ImportOptions::default()) {
            Err(FormatError::UnresolvedMesh(p)) => assert!(p.ends_with("nope/missing.stl")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn world_link_becomes_world_joint() {
        let doc = r#"<robot name="r"><link name="world"/><link name="a"/>
            <joint name="j" type="fixed"><origin xyz="1 0 0"/><parent link="world"/><child link="a"/></joint></robot>"#;
        let w = import_urdf(doc, &opts()).unwrap().world;
        assert_eq!(w.world_joints().len(), 1);
        assert_eq!(w.body("a").unwrap().pose.translation.x, 1.0);
        let again = import_urdf(&export_urdf(&w, &ExportOptions::default()).unwrap().document, &opts())
            .unwrap()
            .world;
        assert!(structural_diff(&w, &again, &CompareTolerance::default()).is_empty());
    }

    #[test]
    fn loop_joints_are_dropped_or_rejected() {
        let mut w = import_urdf(TWO_LINK, &opts()).unwrap().world;
        w.body_mut("arm")
            .unwrap()
            .joints
            .push(SceneJoint::new("closure", JointType::Revolute, "arm", "base"));
        let out = export_urdf(&w, &ExportOptions::default()).unwrap();
        assert!(out.diagnostics.iter().any(|d| d.code == "joint-dropped"));
        let fail = ExportOptions {
            loop_strategy: LoopStrategy::Fail,
            ..Default::default()
        };
        assert!(matches!(export_urdf(&w, &fail), Err(FormatError::LoopNotAllowed(_))));
    }
}
