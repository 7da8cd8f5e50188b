//! SDFormat import and export.
//!
//! Links are flat inside a model, so the body tree is rebuilt from the joint
//! graph: the first joint that reaches a link makes it a child of the joint's
//! parent, and every later joint reaching it closes a loop. Link, joint and
//! geometry names are scoped in SDF but global in the scene model; clashes
//! are renamed and the original kept in `source:name`, which export writes
//! back. Nested models are flattened and remembered per body in `sdf:model`.

use std::collections::{BTreeMap, HashMap, HashSet};

use roxmltree::Node;

use crate::diag::Diagnostic;
use crate::math::{Mat3, Pose, Vec3};
use crate::scene::{
    names, InertialProperties, JointLimits, JointType, MeshData, MeshSource, NameAllocator, PropertySet,
    PropertyTriple, PropertyValue, SceneBody, SceneGeometry, SceneJoint, SceneWorld, Shape, WORLD,
};

use super::common::{mesh_reference, plan_joints, subject_pairs, KIND, KIND_MATERIAL, TEXTURE};
use super::provenance::{restore_attrs, restore_elements, Recorder};
use super::strip::strip_elements;
use super::xml::*;
use super::{
    check_mesh_reference, finish_import, ExportOptions, ExportOutput, FormatError, ImportOptions, Imported,
    SourceFormat,
};

const FMT: SourceFormat = SourceFormat::Sdf;
const MAX_MODEL_DEPTH: usize = 8;
/// Limits at or beyond this magnitude mean "no limit".
const UNLIMITED: f64 = 1e16;
/// Model path (`outer::inner`) of a body.
pub const MODEL: &str = "sdf:model";
/// `"world"` or `"model"`: what the `<sdf>` element contained.
const META_ROOT: &str = "sdf:meta:root";
const META_CAPSULE: &str = "sdf:meta:capsule";
const META_VISUAL_XML: &str = "sdf:meta:visual_xml";
const META_COLLISION_XML: &str = "sdf:meta:collision_xml";
const META_AXIS_XML: &str = "sdf:meta:axis_xml";
const COLORS: [&str; 4] = ["ambient", "diffuse", "specular", "emissive"];

fn model_key(path: &str, what: &str) -> String {
    format!("sdf:meta:model:{path}:{what}")
}

fn pose_of(node: Node) -> Result<(Pose, Option<String>), FormatError> {
    let Some(p) = child(node, "pose") else {
        return Ok((Pose::identity(), None));
    };
    let text = p.text().unwrap_or("").trim();
    let pose = if text.is_empty() {
        Pose::identity()
    } else {
        let v = floats_n::<6>(p, "pose", text)?;
        xyz_rpy_pose([v[0], v[1], v[2]], [v[3], v[4], v[5]])
    };
    let relative_to = p.attribute("relative_to").filter(|r| !r.is_empty()).map(str::to_string);
    Ok((pose, relative_to))
}

fn pose_text(pose: &Pose) -> String {
    let t = pose.translation;
    fmt_floats(&[t.x, t.y, t.z, pose.rpy()[0], pose.rpy()[1], pose.rpy()[2]])
}

fn vec_text(node: Node, tag: &str) -> Result<Option<Vec3>, FormatError> {
    match child(node, tag) {
        None => Ok(None),
        Some(c) => {
            let [x, y, z] = floats_n::<3>(c, tag, c.text().unwrap_or("").trim())?;
            Ok(Some(Vec3::new(x, y, z)))
        }
    }
}

fn need_f64(node: Node, tag: &str) -> Result<f64, FormatError> {
    child_f64(node, tag)?.ok_or_else(|| FormatError::missing(&describe(node), &format!("<{tag}>")))
}

struct GeomSpec {
    raw_name: String,
    shape: Shape,
    pose: Pose,
    scale: Vec3,
    visible: bool,
    collidable: bool,
    rgba: Option<[f64; 4]>,
    material: Vec<PropertyTriple>,
    props: PropertySet,
}

struct LinkRec {
    key: String,
    raw_name: String,
    /// World frame.
    pose: Pose,
    body: SceneBody,
    geoms: Vec<GeomSpec>,
}

struct JointRec {
    model: String,
}

struct Importer<'s> {
    rec: Recorder<'s>,
    opts: &'s ImportOptions,
    links: Vec<LinkRec>,
    by_key: HashMap<String, usize>,
    /// (joint element, model path, model world pose), document order.
    joints: Vec<(Node<'s, 's>, JointRec, Pose)>,
    diagnostics: Vec<Diagnostic>,
}

impl<'s> Importer<'s> {
    fn geometry(&mut self, node: Node, link: &str, visual: bool) -> Result<Option<GeomSpec>, FormatError> {
        let raw_name = node
            .attribute("name")
            .unwrap_or(if visual { "visual" } else { "collision" });
        let g = child(node, "geometry").ok_or_else(|| FormatError::missing(&describe(node), "<geometry>"))?;
        let Some(shape_node) = g.children().find(|c| c.is_element()) else {
            return Err(FormatError::missing(&describe(g), "shape element"));
        };
        let mut scale = Vec3::new(1.0, 1.0, 1.0);
        let mut props = PropertySet::new();
        let shape = match shape_node.tag_name().name() {
            "box" => {
                let size = vec_text(shape_node, "size")?
                    .ok_or_else(|| FormatError::missing(&describe(shape_node), "<size>"))?;
                Shape::Cube {
                    half_extents: size / 2.0,
                }
            }
            "sphere" => Shape::Sphere {
                radius: need_f64(shape_node, "radius")?,
            },
            "cylinder" => Shape::Cylinder {
                radius: need_f64(shape_node, "radius")?,
                half_length: need_f64(shape_node, "length")? / 2.0,
            },
            "capsule" => {
                let (r, h) = (need_f64(shape_node, "radius")?, need_f64(shape_node, "length")? / 2.0);
                let _ = props.insert(META_CAPSULE, PropertyValue::Text(fmt_floats(&[r, h])));
                let segments = self.opts.capsule_segments.max(3);
                Shape::Mesh(MeshSource::embedded(MeshData::capsule(
                    r,
                    h,
                    segments,
                    (segments / 4).max(2),
                )))
            }
            "ellipsoid" => {
                scale = vec_text(shape_node, "radii")?
                    .ok_or_else(|| FormatError::missing(&describe(shape_node), "<radii>"))?;
                Shape::Sphere { radius: 1.0 }
            }
            "mesh" => {
                let uri = child_text(shape_node, "uri")
                    .filter(|u| !u.is_empty())
                    .ok_or_else(|| FormatError::missing(&describe(shape_node), "<uri>"))?;
                check_mesh_reference(uri, self.opts)?;
                if let Some(s) = vec_text(shape_node, "scale")? {
                    scale = s;
                }
                Shape::Mesh(MeshSource::file(uri))
            }
            _ => return Ok(None),
        };
        let element = format!("{link}/{raw_name}");
        let (pose, relative_to) = pose_of(node)?;
        if relative_to.is_some() {
            self.diagnostics.push(
                Diagnostic::warning("sdf-relative-pose", "geometry poses are read relative to their link")
                    .with_subject(element.clone()),
            );
        }
        self.rec.attrs(node, &element, "", &["name"], &mut props);
        let mapped: &[&str] = if visual {
            &["pose", "geometry", "material"]
        } else {
            &["pose", "geometry"]
        };
        let kept: Vec<&str> = node
            .children()
            .filter(|c| c.is_element() && !mapped.contains(&c.tag_name().name()))
            .map(|c| raw(c, self.source()))
            .collect();
        if !kept.is_empty() {
            let key = if visual { META_VISUAL_XML } else { META_COLLISION_XML };
            let _ = props.insert(key, PropertyValue::Text(kept.join("\n")));
            for c in node
                .children()
                .filter(|c| c.is_element() && !mapped.contains(&c.tag_name().name()))
            {
                self.rec.provenance.unmapped_attributes.push(super::UnmappedAttribute {
                    element_path: element.clone(),
                    attribute: format!("<{}>", c.tag_name().name()),
                    value: raw(c, self.source()).to_string(),
                });
            }
        }
        let mut rgba = None;
        let mut material = Vec::new();
        if let Some(m) = child(node, "material").filter(|_| visual) {
            let subject = format!("{raw_name}_material");
            material.push(PropertyTriple::new(&subject, KIND, KIND_MATERIAL));
            for c in COLORS {
                if let Some(t) = child_text(m, c) {
                    material.push(PropertyTriple::new(&subject, c, t));
                    if c == "diffuse" {
                        let v = parse_floats(m, c, t)?;
                        rgba = match v.len() {
                            4 => Some([v[0], v[1], v[2], v[3]]),
                            3 => Some([v[0], v[1], v[2], 1.0]),
                            _ => return Err(FormatError::bad(&describe(m), c, t)),
                        };
                    }
                }
            }
            if let Some(s) = child(m, "script") {
                for (tag, pred) in [("uri", "script_uri"), ("name", "script_name")] {
                    if let Some(t) = child_text(s, tag) {
                        material.push(PropertyTriple::new(&subject, pred, t));
                    }
                }
            }
            let albedo = m
                .descendants()
                .find(|d| d.is_element() && d.tag_name().name() == "albedo_map")
                .and_then(|d| d.text());
            if let Some(t) = albedo {
                material.push(PropertyTriple::new(&subject, TEXTURE, t.trim()));
            }
        }
        if let Some(t) = child_f64(node, "transparency")? {
            if t >= 1.0 {
                rgba.get_or_insert([1.0, 1.0, 1.0, 1.0])[3] = 0.0;
            }
        }
        Ok(Some(GeomSpec {
            raw_name: raw_name.to_string(),
            shape,
            pose,
            scale,
            visible: visual,
            collidable: !visual,
            rgba,
            material,
            props,
        }))
    }

    fn source(&self) -> &'s str {
        self.rec.source()
    }

    fn link(
        &mut self,
        node: Node,
        model: &str,
        model_pose: &Pose,
        link_frames: &HashMap<String, Pose>,
    ) -> Result<LinkRec, FormatError> {
        let raw_name = node
            .attribute("name")
            .ok_or_else(|| FormatError::missing(&describe(node), "name"))?
            .to_string();
        let key = format!("{model}::{raw_name}");
        let (local, relative_to) = pose_of(node)?;
        let frame = match relative_to.as_deref() {
            None | Some("__model__") => *model_pose,
            Some(other) => *link_frames.get(&format!("{model}::{other}")).ok_or_else(|| {
                FormatError::Structure(format!("link `{raw_name}`: unknown relative_to frame `{other}`"))
            })?,
        };
        let mut body = SceneBody::new(&raw_name);
        self.rec.attrs(node, &key, "", &["name"], &mut body.properties);
        self.rec.elements(
            node,
            &key,
            &["pose", "inertial", "visual", "collision"],
            &mut body.properties,
        );
        let _ = body.properties.insert(MODEL, PropertyValue::Text(model.to_string()));
        if let Some(i) = child(node, "inertial") {
            let (frame, _) = pose_of(i)?;
            let mass = need_f64(i, "mass")?;
            let t = child(i, "inertia");
            let get = |k: &str| -> Result<f64, FormatError> {
                match t {
                    Some(t) => Ok(child_f64(t, k)?.unwrap_or(0.0)),
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
            let local = Mat3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz);
            let r = frame.rotation.to_rotation_matrix();
            let inertia = r.matrix() * local * r.matrix().transpose();
            body.inertial = Some(InertialProperties::new(
                mass,
                frame.translation,
                (inertia + inertia.transpose()) / 2.0,
            ));
        }
        let mut geoms: Vec<GeomSpec> = Vec::new();
        let mut kept = Vec::new();
        for v in children(node, "visual") {
            match self.geometry(v, &raw_name, true)? {
                Some(g) => geoms.push(g),
                None => kept.push(v),
            }
        }
        for c in children(node, "collision") {
            let Some(spec) = self.geometry(c, &raw_name, false)? else {
                kept.push(c);
                continue;
            };
            let twin = geoms.iter_mut().find(|g| {
                g.visible
                    && !g.collidable
                    && g.raw_name == spec.raw_name
                    && g.shape == spec.shape
                    && g.pose == spec.pose
                    && g.scale == spec.scale
            });
            match twin {
                Some(t) => {
                    t.collidable = true;
                    for (k, v) in spec.props.iter() {
                        if !t.props.contains(k) {
                            let _ = t.props.insert(k, v.clone());
                        }
                    }
                }
                None => geoms.push(spec),
            }
        }
        let texts: Vec<&str> = kept.iter().map(|k| raw(*k, self.source())).collect();
        self.rec.keep_raw(&texts.join("\n"), &mut body.properties);
        Ok(LinkRec {
            key,
            raw_name,
            pose: frame.compose(&local),
            body,
            geoms,
        })
    }

    fn model(
        &mut self,
        node: Node<'s, 's>,
        parent_path: Option<&str>,
        parent_pose: &Pose,
        depth: usize,
        world_props: &mut PropertySet,
    ) -> Result<(), FormatError> {
        if depth >= MAX_MODEL_DEPTH {
            return Err(FormatError::TooDeep {
                what: "SDF models",
                limit: MAX_MODEL_DEPTH,
            });
        }
        let name = node
            .attribute("name")
            .ok_or_else(|| FormatError::missing(&describe(node), "name"))?;
        let path = match parent_path {
            Some(p) => format!("{p}::{name}"),
            None => name.to_string(),
        };
        let (local, _) = pose_of(node)?;
        let pose = parent_pose.compose(&local);
        for a in node
            .attributes()
            .filter(|a| a.name() != "name" && a.namespace().is_none())
        {
            let _ = world_props.insert(
                &model_key(&path, &format!("attr:{}", a.name())),
                PropertyValue::Text(a.value().to_string()),
            );
            self.rec.provenance.unmapped_attributes.push(super::UnmappedAttribute {
                element_path: path.clone(),
                attribute: a.name().to_string(),
                value: a.value().to_string(),
            });
        }
        let mut frames: HashMap<String, Pose> = HashMap::new();
        let mut kept = Vec::new();
        for c in node.children().filter(|c| c.is_element()) {
            match c.tag_name().name() {
                "pose" => {}
                "link" => {
                    let l = self.link(c, &path, &pose, &frames)?;
                    if self.by_key.contains_key(&l.key) {
                        return Err(FormatError::Structure(format!("duplicate link `{}`", l.key)));
                    }
                    frames.insert(l.key.clone(), l.pose);
                    self.by_key.insert(l.key.clone(), self.links.len());
                    self.links.push(l);
                }
                "joint" => self.joints.push((c, JointRec { model: path.clone() }, pose)),
                "model" => self.model(c, Some(&path), &pose, depth + 1, world_props)?,
                _ => kept.push(c),
            }
        }
        if !kept.is_empty() {
            let texts: Vec<&str> = kept.iter().map(|k| raw(*k, self.source())).collect();
            let _ = world_props.insert(&model_key(&path, "xml"), PropertyValue::Text(texts.join("\n")));
            for k in kept {
                self.rec.provenance.unmapped_attributes.push(super::UnmappedAttribute {
                    element_path: path.clone(),
                    attribute: format!("<{}>", k.tag_name().name()),
                    value: raw(k, self.source()).to_string(),
                });
            }
        }
        Ok(())
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
        "ball" => (JointType::Spherical, false),
        other => {
            return Err(FormatError::UnsupportedJoint {
                joint: name.to_string(),
                joint_type: other.to_string(),
            })
        }
    })
}

/// Imports an SDF document containing a `<world>` or a single `<model>`.
pub fn import_sdf(text: &str, opts: &ImportOptions) -> Result<Imported, FormatError> {
    let doc = parse_document(text)?;
    let root = doc.root_element();
    if root.tag_name().name() != "sdf" {
        return Err(FormatError::WrongRoot {
            expected: "sdf",
            found: root.tag_name().name().to_string(),
        });
    }
    let mut imp = Importer {
        rec: Recorder::new(FMT, text),
        opts,
        links: Vec::new(),
        by_key: HashMap::new(),
        joints: Vec::new(),
        diagnostics: Vec::new(),
    };
    let mut world;
    if let Some(w) = child(root, "world") {
        world = SceneWorld::new(w.attribute("name").unwrap_or("world"));
        let _ = world.properties.insert(META_ROOT, PropertyValue::Text("world".into()));
        if let Some(g) = vec_text(w, "gravity")? {
            let _ = world.properties.insert(names::GRAVITY, PropertyValue::Vector(g));
        }
        imp.rec.attrs(w, "world", "", &["name"], &mut world.properties);
        imp.rec
            .elements(w, "world", &["model", "gravity"], &mut world.properties);
        if child(w, "include").is_some() {
            imp.diagnostics.push(Diagnostic::warning(
                "sdf-include",
                "<include> elements are kept verbatim, not expanded",
            ));
        }
        for m in children(w, "model") {
            imp.model(m, None, &Pose::identity(), 0, &mut world.properties)?;
        }
    } else if let Some(m) = child(root, "model") {
        world = SceneWorld::new(m.attribute("name").unwrap_or("model"));
        let _ = world.properties.insert(META_ROOT, PropertyValue::Text("model".into()));
        imp.model(m, None, &Pose::identity(), 0, &mut world.properties)?;
    } else {
        return Err(FormatError::missing("<sdf>", "<world> or <model>"));
    }
    imp.rec.attrs(root, "sdf", "", &["version"], &mut world.properties);

    // Global names: links, then joints, then geometries.
    let mut alloc = NameAllocator::new();
    for l in &mut imp.links {
        let (n, renamed) = alloc.allocate(&l.raw_name);
        if renamed {
            let _ = l
                .body
                .properties
                .insert(names::SOURCE_NAME, PropertyValue::Text(l.raw_name.clone()));
            l.body.name = n;
        }
    }

    let resolve = |imp: &Importer, model: &str, reference: &str| -> Option<usize> {
        imp.by_key.get(&format!("{model}::{reference}")).copied()
    };
    let mut joints: Vec<SceneJoint> = Vec::new();
    let mut parent_of: HashMap<usize, usize> = HashMap::new();
    let joint_nodes = std::mem::take(&mut imp.joints);
    for (node, jr, model_pose) in &joint_nodes {
        let raw_name = node
            .attribute("name")
            .ok_or_else(|| FormatError::missing(&describe(*node), "name"))?;
        let (jt, unbounded) = joint_type(*node, raw_name)?;
        let link_ref = |tag: &str| -> Result<String, FormatError> {
            child_text(*node, tag)
                .map(str::to_string)
                .ok_or_else(|| FormatError::missing(&describe(*node), &format!("<{tag}>")))
        };
        let (parent_ref, child_ref) = (link_ref("parent")?, link_ref("child")?);
        let lookup = |r: &str| -> Result<Option<usize>, FormatError> {
            if r == WORLD {
                return Ok(None);
            }
            resolve(&imp, &jr.model, r)
                .map(Some)
                .ok_or_else(|| FormatError::Structure(format!("joint `{raw_name}` references unknown link `{r}`")))
        };
        let parent = lookup(&parent_ref)?;
        let child_idx = lookup(&child_ref)?
            .ok_or_else(|| FormatError::Structure(format!("joint `{raw_name}` has the world as child")))?;
        let child_pose = imp.links[child_idx].pose;
        let (local, relative_to) = pose_of(*node)?;
        let frame_world = match relative_to.as_deref() {
            None => child_pose.compose(&local),
            Some("__model__") => model_pose.compose(&local),
            Some(r) => {
                let idx = resolve(&imp, &jr.model, r).ok_or_else(|| {
                    FormatError::Structure(format!("joint `{raw_name}`: unknown relative_to frame `{r}`"))
                })?;
                imp.links[idx].pose.compose(&local)
            }
        };
        let parent_name = parent
            .map(|p| imp.links[p].body.name.clone())
            .unwrap_or_else(|| WORLD.to_string());
        let child_name = imp.links[child_idx].body.name.clone();
        let mut joint = SceneJoint::new(raw_name, jt, &parent_name, &child_name);
        joint.pose = child_pose.inverse().compose(&frame_world);
        let element = format!("{}::{raw_name}", jr.model);
        imp.rec
            .attrs(*node, &element, "", &["name", "type"], &mut joint.properties);
        imp.rec.elements(
            *node,
            &element,
            &["pose", "parent", "child", "axis"],
            &mut joint.properties,
        );
        if let Some(a) = child(*node, "axis") {
            if jt.has_axis() {
                let xyz_node = child(a, "xyz");
                let xyz = vec_text(a, "xyz")?.unwrap_or_else(Vec3::z);
                if xyz.norm() == 0.0 {
                    return Err(FormatError::bad(&element, "axis", "0 0 0"));
                }
                let expressed = xyz_node.and_then(|x| x.attribute("expressed_in"));
                let parent_frame = match child(a, "use_parent_model_frame") {
                    Some(u) => parse_bool(u, "use_parent_model_frame", u.text().unwrap_or("").trim())?,
                    None => false,
                };
                let in_model = parent_frame || expressed == Some("__model__");
                let axis_frame = match expressed {
                    _ if in_model => Some(*model_pose),
                    None => None,
                    Some(r) => Some(resolve(&imp, &jr.model, r).map(|i| imp.links[i].pose).ok_or_else(|| {
                        FormatError::Structure(format!("joint `{raw_name}`: unknown expressed_in frame `{r}`"))
                    })?),
                };
                let axis = match axis_frame {
                    Some(f) => frame_world.rotation.inverse() * (f.rotation * xyz),
                    None => xyz,
                };
                joint.axis = Some(axis.normalize());
            }
            if let Some(l) = child(a, "limit") {
                let finite = |v: Option<f64>| v.filter(|x| x.abs() < UNLIMITED);
                let (lower, upper) = (finite(child_f64(l, "lower")?), finite(child_f64(l, "upper")?));
                if jt.has_axis() && !unbounded && (lower.is_some() || upper.is_some()) {
                    joint.limits = Some(JointLimits {
                        lower: lower.unwrap_or(-UNLIMITED),
                        upper: upper.unwrap_or(UNLIMITED),
                    });
                }
                for (tag, prop) in [("effort", names::LIMITS_EFFORT), ("velocity", names::LIMITS_VELOCITY)] {
                    if let Some(v) = child_f64(l, tag)? {
                        let _ = joint.properties.insert(prop, PropertyValue::Real(v));
                    }
                }
            }
            if let Some(d) = child(a, "dynamics") {
                for (tag, prop) in [
                    ("damping", names::DYNAMICS_DAMPING),
                    ("friction", names::DYNAMICS_FRICTION),
                ] {
                    if let Some(v) = child_f64(d, tag)? {
                        let _ = joint.properties.insert(prop, PropertyValue::Real(v));
                    }
                }
            }
            let kept: Vec<&str> = a
                .children()
                .filter(|c| {
                    c.is_element()
                        && !matches!(
                            c.tag_name().name(),
                            "xyz" | "limit" | "dynamics" | "use_parent_model_frame"
                        )
                })
                .map(|c| raw(c, text))
                .collect();
            if !kept.is_empty() {
                let _ = joint
                    .properties
                    .insert(META_AXIS_XML, PropertyValue::Text(kept.join("\n")));
            }
        }
        if unbounded {
            let _ = joint
                .properties
                .insert(names::LIMITS_UNBOUNDED, PropertyValue::Bool(true));
        }
        // Nest the child under the parent unless that would make a cycle.
        if let Some(p) = parent {
            if !parent_of.contains_key(&child_idx) {
                let mut cur = Some(p);
                let mut cycle = false;
                while let Some(c) = cur {
                    if c == child_idx {
                        cycle = true;
                        break;
                    }
                    cur = parent_of.get(&c).copied();
                }
                if !cycle {
                    parent_of.insert(child_idx, p);
                }
            }
        }
        joints.push(joint);
    }
    for j in &mut joints {
        let (n, renamed) = alloc.allocate(&j.name);
        if renamed {
            let _ = j
                .properties
                .insert(names::SOURCE_NAME, PropertyValue::Text(j.name.clone()));
            j.name = n;
        }
    }

    // Geometries.
    for l in &mut imp.links {
        for spec in std::mem::take(&mut l.geoms) {
            let (name, renamed) = alloc.allocate(&spec.raw_name);
            let mut g = SceneGeometry::new(&name, spec.shape);
            g.pose = spec.pose;
            g.scale = spec.scale;
            g.visible = spec.visible && spec.rgba.map(|c| c[3]) != Some(0.0);
            g.collidable = spec.collidable;
            g.rgba = spec.rgba;
            g.material = spec.material;
            g.properties = spec.props;
            if renamed {
                let _ = g
                    .properties
                    .insert(names::SOURCE_NAME, PropertyValue::Text(spec.raw_name));
            }
            l.body.geometries.push(g);
        }
    }

    // Assemble the forest.
    let n = imp.links.len();
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut roots = Vec::new();
    for i in 0..n {
        match parent_of.get(&i) {
            Some(&p) => kids[p].push(i),
            None => roots.push(i),
        }
    }
    let mut slots: Vec<Option<SceneBody>> = imp
        .links
        .iter_mut()
        .map(|l| Some(std::mem::replace(&mut l.body, SceneBody::new(""))))
        .collect();
    fn build(
        i: usize,
        parent_pose: &Pose,
        links: &[LinkRec],
        kids: &[Vec<usize>],
        slots: &mut [Option<SceneBody>],
    ) -> SceneBody {
        let mut b = slots[i].take().expect("each link placed once");
        b.pose = parent_pose.inverse().compose(&links[i].pose);
        for &k in &kids[i] {
            let c = build(k, &links[i].pose, links, kids, slots);
            b.children.push(c);
        }
        b
    }
    let bodies: Vec<SceneBody> = roots
        .iter()
        .map(|&r| build(r, &Pose::identity(), &imp.links, &kids, &mut slots))
        .collect();
    *world.bodies_mut() = bodies;
    for j in joints {
        if j.parent_body == WORLD {
            world.world_joints_mut().push(j);
        } else if let Some(p) = world.body_mut(&j.parent_body.clone()) {
            p.joints.push(j);
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

fn local_name<'a>(props: &'a PropertySet, name: &'a str) -> &'a str {
    props.text(names::SOURCE_NAME).unwrap_or(name)
}

fn text_el(tag: &str, text: impl Into<String>) -> XmlElement {
    let mut e = XmlElement::new(tag);
    e.children.push(XmlNode::Text(text.into()));
    e
}

fn geometry_element(g: &SceneGeometry, side_files: &mut Vec<(String, String)>) -> Result<XmlElement, FormatError> {
    let s = g.scale;
    let unit = Vec3::new(1.0, 1.0, 1.0);
    let capsule = g
        .properties
        .text(META_CAPSULE)
        .or_else(|| g.properties.text("mjcf:meta:capsule"))
        .and_then(|t| {
            let v: Vec<f64> = t.split_whitespace().filter_map(|x| x.parse().ok()).collect();
            (v.len() == 2).then(|| (v[0], v[1]))
        });
    let shape = match (&g.shape, capsule) {
        (Shape::Mesh(_), Some((r, h))) => XmlElement::new("capsule")
            .text_child("radius", fmt_f64(r * s.x.max(s.y)))
            .text_child("length", fmt_f64(2.0 * h * s.z)),
        (Shape::Sphere { radius }, _) if s == unit => XmlElement::new("sphere").text_child("radius", fmt_f64(*radius)),
        (Shape::Sphere { radius }, _) => XmlElement::new("ellipsoid").text_child("radii", fmt_vec3(&(s * *radius))),
        (Shape::Cube { half_extents }, _) => {
            XmlElement::new("box").text_child("size", fmt_vec3(&(half_extents.component_mul(&s) * 2.0)))
        }
        (Shape::Cylinder { radius, half_length }, _) => XmlElement::new("cylinder")
            .text_child("radius", fmt_f64(radius * s.x.max(s.y)))
            .text_child("length", fmt_f64(2.0 * half_length * s.z)),
        (Shape::Mesh(_), None) => {
            let file = mesh_reference(g, side_files)?.expect("mesh shape");
            let mut m = XmlElement::new("mesh").text_child("uri", file);
            if s != unit {
                m = m.text_child("scale", fmt_vec3(&s));
            }
            m
        }
    };
    Ok(XmlElement::new("geometry").child(shape))
}

fn material_element(g: &SceneGeometry) -> Option<XmlElement> {
    if g.rgba.is_none() && g.material.is_empty() {
        return None;
    }
    let mut m = XmlElement::new("material");
    let subject = g
        .material
        .iter()
        .find(|t| t.predicate == KIND && t.object == KIND_MATERIAL)
        .map(|t| t.subject.as_str());
    let pairs: BTreeMap<&str, &str> = subject
        .map(|s| subject_pairs(&g.material, s).collect())
        .unwrap_or_default();
    for c in COLORS {
        match pairs.get(c) {
            Some(v) => m.push(text_el(c, *v)),
            None if c == "diffuse" => {
                if let Some(rgba) = g.rgba {
                    m.push(text_el(c, fmt_floats(&rgba)));
                }
            }
            None => {}
        }
    }
    if pairs.contains_key("script_uri") || pairs.contains_key("script_name") {
        let mut s = XmlElement::new("script");
        for (pred, tag) in [("script_uri", "uri"), ("script_name", "name")] {
            if let Some(v) = pairs.get(pred) {
                s.push(text_el(tag, *v));
            }
        }
        m.push(s);
    }
    if let Some(t) = pairs.get(TEXTURE) {
        m.push(XmlElement::new("pbr").child(XmlElement::new("metal").text_child("albedo_map", *t)));
    }
    Some(m)
}

fn link_element(
    b: &SceneBody,
    pose: &Pose,
    side_files: &mut Vec<(String, String)>,
    diags: &mut Vec<Diagnostic>,
) -> Result<XmlElement, FormatError> {
    let mut link = XmlElement::new("link").attr("name", local_name(&b.properties, &b.name));
    restore_attrs(&b.properties, FMT, "", &mut link);
    if !pose.is_identity() {
        link.push(text_el("pose", pose_text(pose)));
    }
    if let Some(i) = &b.inertial {
        let m = i.inertia;
        let mut inertia = XmlElement::new("inertia");
        for (tag, (r, c)) in [
            ("ixx", (0, 0)),
            ("ixy", (0, 1)),
            ("ixz", (0, 2)),
            ("iyy", (1, 1)),
            ("iyz", (1, 2)),
            ("izz", (2, 2)),
        ] {
            inertia.push(text_el(tag, fmt_f64(m[(r, c)])));
        }
        let mut e = XmlElement::new("inertial");
        if i.center_of_mass != Vec3::zeros() {
            e.push(text_el("pose", pose_text(&Pose::from_translation(i.center_of_mass))));
        }
        e.push(text_el("mass", fmt_f64(i.mass)));
        e.push(inertia);
        link.push(e);
    }
    for g in &b.geometries {
        let (mut visual, collision) = (g.visible, g.collidable);
        if !visual && !collision {
            diags.push(
                Diagnostic::warning(
                    "hidden-geometry",
                    "geometry is neither visible nor collidable; exported as visual",
                )
                .with_subject(g.name.clone()),
            );
            visual = true;
        }
        let geometry = geometry_element(g, side_files)?;
        let name = local_name(&g.properties, &g.name);
        for (tag, wanted, key) in [
            ("visual", visual, META_VISUAL_XML),
            ("collision", collision, META_COLLISION_XML),
        ] {
            if !wanted {
                continue;
            }
            let mut e = XmlElement::new(tag).attr("name", name);
            restore_attrs(&g.properties, FMT, "", &mut e);
            if !g.pose.is_identity() {
                e.push(text_el("pose", pose_text(&g.pose)));
            }
            e.push(geometry.clone());
            if tag == "visual" {
                if let Some(m) = material_element(g) {
                    e.push(m);
                }
                if !g.visible {
                    e.push(text_el("transparency", "1"));
                }
            }
            if let Some(raw) = g.properties.text(key) {
                e.push_raw(raw);
            }
            link.push(e);
        }
    }
    restore_elements(&b.properties, FMT, &mut link);
    Ok(link)
}

fn joint_element(j: &SceneJoint, parent_ref: &str, child_ref: &str) -> XmlElement {
    let jt = match j.joint_type {
        JointType::Fixed => "fixed",
        JointType::Revolute if j.properties.flag(names::LIMITS_UNBOUNDED) => "continuous",
        JointType::Revolute => "revolute",
        JointType::Prismatic => "prismatic",
        JointType::Spherical => "ball",
    };
    let mut e = XmlElement::new("joint")
        .attr("name", local_name(&j.properties, &j.name))
        .attr("type", jt);
    restore_attrs(&j.properties, FMT, "", &mut e);
    if !j.pose.is_identity() {
        e.push(text_el("pose", pose_text(&j.pose)));
    }
    e.push(text_el("parent", parent_ref));
    e.push(text_el("child", child_ref));
    if j.joint_type.has_axis() {
        let mut axis = XmlElement::new("axis").text_child("xyz", fmt_vec3(&j.axis.unwrap_or_else(Vec3::x)));
        let mut limit = XmlElement::new("limit");
        let (lo, hi) = match j.limits {
            Some(l) if jt != "continuous" => (l.lower, l.upper),
            _ => (-UNLIMITED, UNLIMITED),
        };
        limit.push(text_el("lower", fmt_f64(lo)));
        limit.push(text_el("upper", fmt_f64(hi)));
        for (tag, prop) in [("effort", names::LIMITS_EFFORT), ("velocity", names::LIMITS_VELOCITY)] {
            if let Some(v) = j.properties.get(prop).and_then(PropertyValue::as_real) {
                limit.push(text_el(tag, fmt_f64(v)));
            }
        }
        axis.push(limit);
        let mut dynamics = XmlElement::new("dynamics");
        for (tag, prop) in [
            ("damping", names::DYNAMICS_DAMPING),
            ("friction", names::DYNAMICS_FRICTION),
        ] {
            if let Some(v) = j.properties.get(prop).and_then(PropertyValue::as_real) {
                dynamics.push(text_el(tag, fmt_f64(v)));
            }
        }
        if !dynamics.is_empty() {
            axis.push(dynamics);
        }
        if let Some(raw) = j.properties.text(META_AXIS_XML) {
            axis.push_raw(raw);
        }
        e.push(axis);
    }
    restore_elements(&j.properties, FMT, &mut e);
    e
}

/// Model path → its parts.
#[derive(Default)]
struct ModelOut {
    links: Vec<XmlElement>,
    joints: Vec<XmlElement>,
}

/// Longest common `::`-separated prefix of two model paths.
fn common_model(a: &str, b: &str) -> String {
    let (pa, pb): (Vec<&str>, Vec<&str>) = (a.split("::").collect(), b.split("::").collect());
    pa.iter()
        .zip(&pb)
        .take_while(|(x, y)| x == y)
        .map(|(x, _)| *x)
        .collect::<Vec<_>>()
        .join("::")
}

/// Exports to SDF 1.8. SDF expresses kinematic loops natively, so every joint
/// is written; nesting without a joint becomes a fixed joint.
pub fn export_sdf(world: &SceneWorld, opts: &ExportOptions) -> Result<ExportOutput, FormatError> {
    let world = strip_elements(world, &opts.strip);
    let mut out = ExportOutput::default();
    let plan = plan_joints(&world);
    let poses = world.body_world_poses();
    let default_model = world.name.clone();
    let model_of: HashMap<String, String> = world
        .all_bodies()
        .into_iter()
        .map(|(b, _)| {
            let m = b
                .properties
                .text(MODEL)
                .map(str::to_string)
                .unwrap_or_else(|| default_model.clone());
            (b.name.clone(), m)
        })
        .collect();
    let local_of: HashMap<&str, &str> = world
        .all_bodies()
        .into_iter()
        .map(|(b, _)| (b.name.as_str(), local_name(&b.properties, &b.name)))
        .collect();

    let mut models: BTreeMap<String, ModelOut> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let touch = |m: &str, models: &mut BTreeMap<String, ModelOut>, order: &mut Vec<String>| {
        // Ancestors first so nested models have a parent element.
        let parts: Vec<&str> = m.split("::").collect();
        for k in 1..=parts.len() {
            let p = parts[..k].join("::");
            if !models.contains_key(&p) {
                models.insert(p.clone(), ModelOut::default());
                order.push(p);
            }
        }
    };
    for (b, _) in world.all_bodies() {
        let m = &model_of[&b.name];
        touch(m, &mut models, &mut order);
        let link = link_element(b, &poses[&b.name], &mut out.side_files, &mut out.diagnostics)?;
        models.get_mut(m).expect("model registered").links.push(link);
    }
    let reference = |body: &str, scope: &str| -> String {
        if body == WORLD {
            return WORLD.to_string();
        }
        let m = &model_of[body];
        let local = local_of[body];
        match m.strip_prefix(scope).and_then(|r| r.strip_prefix("::")) {
            Some(rest) => format!("{rest}::{local}"),
            None => local.to_string(),
        }
    };
    let scope_of = |j: &SceneJoint| -> String {
        let cm = &model_of[&j.child_body];
        if j.parent_body == WORLD {
            cm.clone()
        } else {
            common_model(&model_of[&j.parent_body], cm)
        }
    };
    let mut joints: Vec<&SceneJoint> = plan.tree.clone();
    joints.extend(plan.loops.iter().copied());
    for j in joints {
        let scope = scope_of(j);
        let scope = if scope.is_empty() {
            model_of[&j.child_body].clone()
        } else {
            scope
        };
        touch(&scope, &mut models, &mut order);
        let e = joint_element(j, &reference(&j.parent_body, &scope), &reference(&j.child_body, &scope));
        models.get_mut(&scope).expect("model registered").joints.push(e);
    }
    let mut used: HashSet<String> = world.all_names().into_iter().map(str::to_string).collect();
    for (b, parent) in world.all_bodies() {
        let (Some(p), false) = (parent, plan.parent_joint.contains_key(&b.name)) else {
            continue;
        };
        let mut name = format!("{}_fixed", b.name);
        let mut k = 1;
        while !used.insert(name.clone()) {
            name = format!("{}_fixed_{k}", b.name);
            k += 1;
        }
        out.diagnostics.push(
            Diagnostic::info(
                "synthesized-joint",
                format!("added fixed joint `{name}` for `{}`", b.name),
            )
            .with_subject(name.clone()),
        );
        let mut j = SceneJoint::new(&name, JointType::Fixed, &p.name, &b.name);
        j.properties = PropertySet::new();
        let scope = common_model(&model_of[&p.name], &model_of[&b.name]);
        let scope = if scope.is_empty() {
            model_of[&b.name].clone()
        } else {
            scope
        };
        touch(&scope, &mut models, &mut order);
        let e = joint_element(&j, &reference(&p.name, &scope), &reference(&b.name, &scope));
        models.get_mut(&scope).expect("model registered").joints.push(e);
    }

    fn model_element(
        path: &str,
        models: &mut BTreeMap<String, ModelOut>,
        order: &[String],
        props: &PropertySet,
    ) -> XmlElement {
        let name = path.rsplit("::").next().unwrap_or(path);
        let mut e = XmlElement::new("model").attr("name", name);
        let attr_prefix = model_key(path, "attr:");
        for (k, v) in props.iter() {
            if let (Some(a), Some(t)) = (k.strip_prefix(&attr_prefix), v.as_text()) {
                e.set(a, t);
            }
        }
        let parts = models.remove(path).unwrap_or_default();
        for l in parts.links {
            e.push(l);
        }
        for j in parts.joints {
            e.push(j);
        }
        let prefix = format!("{path}::");
        for p in order {
            if let Some(rest) = p.strip_prefix(&prefix) {
                if !rest.contains("::") {
                    e.push(model_element(p, models, order, props));
                }
            }
        }
        if let Some(raw) = props.text(&model_key(path, "xml")) {
            e.push_raw(raw);
        }
        e
    }
    let top: Vec<String> = order.iter().filter(|p| !p.contains("::")).cloned().collect();
    let mut sdf = XmlElement::new("sdf").attr("version", "1.8");
    let root_kind = world.properties.text(META_ROOT).unwrap_or("world");
    if root_kind == "model" && top.len() == 1 && world.world_joints().is_empty() {
        sdf.push(model_element(&top[0], &mut models, &order, &world.properties));
    } else {
        let mut w = XmlElement::new("world").attr("name", world.name.clone());
        restore_attrs(&world.properties, FMT, "", &mut w);
        if let Some(g) = world.properties.get(names::GRAVITY).and_then(PropertyValue::as_vector) {
            w.push(text_el("gravity", fmt_vec3(&g)));
        }
        for t in &top {
            w.push(model_element(t, &mut models, &order, &world.properties));
        }
        restore_elements(&world.properties, FMT, &mut w);
        sdf.push(w);
    }
    out.document = document(&sdf);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{kinematic_classification, structural_diff, CompareTolerance, KinematicKind};

    const CART: &str = r#"<?xml version="1.0"?>
<sdf version="1.7">
  <world name="shop">
    <gravity>0 0 -9.8</gravity>
    <physics type="ode"><max_step_size>0.001</max_step_size></physics>
    <model name="cart">
      <pose>1 0 0 0 0 0</pose>
      <static>false</static>
      <link name="chassis">
        <pose>0 0 0.2 0 0 0</pose>
        <inertial><mass>5</mass><inertia><ixx>0.1</ixx><iyy>0.2</iyy><izz>0.3</izz></inertia></inertial>
        <visual name="body"><geometry><box><size>1 0.5 0.2</size></box></geometry>
          <material><diffuse>0.2 0.2 0.8 1</diffuse><pbr><metal><albedo_map>paint.png</albedo_map></metal></pbr></material>
        </visual>
        <collision name="body"><geometry><box><size>1 0.5 0.2</size></box></geometry>
          <surface><friction><ode><mu>0.5</mu></ode></friction></surface>
        </collision>
      </link>
      <link name="wheel">
        <pose relative_to="chassis">0.4 0.3 0 -1.5707963267948966 0 0</pose>
        <visual name="visual"><geometry><cylinder><radius>0.1</radius><length>0.05</length></cylinder></geometry></visual>
        <collision name="collision"><geometry><sphere><radius>0.1</radius></sphere></geometry></collision>
      </link>
      <joint name="axle" type="continuous">
        <parent>chassis</parent><child>wheel</child>
        <axis><xyz>0 0 1</xyz><dynamics><damping>0.1</damping></dynamics></axis>
      </joint>
      <model name="arm">
        <link name="visual"><pose>0 0 0.5 0 0 0</pose></link>
      </model>
      <joint name="mount" type="revolute">
        <parent>chassis</parent><child>arm::visual</child>
        <pose>0 0 -0.1 0 0 0</pose>
        <axis><xyz expressed_in="__model__">0 1 0</xyz><limit><lower>-1</lower><upper>1</upper><effort>3</effort></limit></axis>
      </joint>
    </model>
  </world>
</sdf>"#;

    fn opts() -> ImportOptions {
        ImportOptions {
            verify_mesh_paths: false,
            ..Default::default()
        }
    }

    #[test]
    fn imports_models_links_and_joints() {
        let imp = import_sdf(CART, &opts()).unwrap();
        let w = &imp.world;
        assert_eq!((w.body_count(), w.joint_count()), (3, 2));
        let chassis = w.body("chassis").unwrap();
        assert_eq!(chassis.pose.translation, Vec3::new(1.0, 0.0, 0.2));
        let body_geom = &chassis.geometries[0];
        assert!(body_geom.visible && body_geom.collidable);
        assert_eq!(body_geom.rgba, Some([0.2, 0.2, 0.8, 1.0]));
        assert!(body_geom
            .material
            .iter()
            .any(|t| t.predicate == TEXTURE && t.object == "paint.png"));
        assert!(body_geom.properties.text(META_COLLISION_XML).unwrap().contains("<mu>"));
        let wheel = w.body("wheel").unwrap();
        assert!((wheel.pose.translation - Vec3::new(0.4, 0.3, 0.0)).norm() < 1e-12);
        assert_eq!(wheel.geometries.len(), 2);
        // Links claim names first, so the wheel's visual is the one renamed.
        let arm = w.body("visual").unwrap();
        assert_eq!(arm.properties.text(MODEL), Some("cart::arm"));
        let renamed = wheel.geometries.iter().find(|g| g.name == "visual_1").unwrap();
        assert_eq!(renamed.properties.text(names::SOURCE_NAME), Some("visual"));
        let axle = chassis.joints.iter().find(|j| j.name == "axle").unwrap();
        assert!(axle.properties.flag(names::LIMITS_UNBOUNDED));
        let mount = chassis.joints.iter().find(|j| j.name == "mount").unwrap();
        assert!((mount.axis.unwrap() - Vec3::y()).norm() < 1e-12);
        assert_eq!(
            mount.limits,
            Some(JointLimits {
                lower: -1.0,
                upper: 1.0
            })
        );
        assert!(w.properties.text("sdf:unmapped_xml").unwrap().contains("<physics"));
        assert_eq!(
            w.properties.text(&model_key("cart", "xml")),
            Some("<static>false</static>")
        );
    }

    #[test]
    fn round_trip_is_structurally_equal() {
        let first = import_sdf(CART, &opts()).unwrap().world;
        let out = export_sdf(&first, &ExportOptions::default()).unwrap();
        let second = import_sdf(&out.document, &opts()).unwrap().world;
        let diff = structural_diff(&first, &second, &CompareTolerance::default());
        assert!(diff.is_empty(), "{diff:?}\n{}", out.document);
        assert_eq!(
            export_sdf(&second, &ExportOptions::default()).unwrap().document,
            out.document
        );
        assert!(out.document.contains("<max_step_size>0.001</max_step_size>"));
        assert!(out.document.contains("<child>arm::visual</child>"));
    }

    #[test]
    fn loops_are_kept_as_joints() {
        let doc = r#"<sdf version="1.8"><model name="m">
            <link name="a"/><link name="b"/><link name="c"/>
            <joint name="ab" type="revolute"><parent>a</parent><child>b</child><axis><xyz>0 0 1</xyz></axis></joint>
            <joint name="bc" type="revolute"><parent>b</parent><child>c</child><axis><xyz>0 0 1</xyz></axis></joint>
            <joint name="ca" type="ball"><parent>c</parent><child>a</child></joint>
          </model></sdf>"#;
        let w = import_sdf(doc, &opts()).unwrap().world;
        assert_eq!(kinematic_classification(&w).kind, KinematicKind::Loop);
        let out = export_sdf(&w, &ExportOptions::default()).unwrap();
        assert!(out
            .document
            .starts_with("<?xml version=\"1.0\"?>\n<sdf version=\"1.8\">\n  <model name=\"m\">"));
        let back = import_sdf(&out.document, &opts()).unwrap().world;
        assert!(structural_diff(&w, &back, &CompareTolerance::default()).is_empty());
        assert_eq!(back.body("a").unwrap().joints[0].limits, None);
    }

    #[test]
    fn rejects_unknown_links_and_joint_types() {
        let bad_ref = r#"<sdf version="1.8"><model name="m"><link name="a"/>
            <joint name="j" type="fixed"><parent>a</parent><child>b</child></joint></model></sdf>"#;
        assert!(matches!(import_sdf(bad_ref, &opts()), Err(FormatError::Structure(_))));
        let screw = r#"<sdf version="1.8"><model name="m"><link name="a"/><link name="b"/>
            <joint name="j" type="screw"><parent>a</parent><child>b</child></joint></model></sdf>"#;
        assert!(matches!(
            import_sdf(screw, &opts()),
            Err(FormatError::UnsupportedJoint { .. })
        ));
    }
}
