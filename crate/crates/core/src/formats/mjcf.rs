//! MJCF import and export.
//!
//! Default classes are resolved at import: an element is read with the
//! attributes of its class chain merged under its own, and the `<default>`
//! section itself is not kept. Capsules become generated meshes (the size is
//! remembered so export writes a native capsule again), ellipsoids become
//! scaled unit spheres, and `equality` connect/weld constraints become
//! spherical/fixed joints.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use roxmltree::Node;

use crate::diag::Diagnostic;
use crate::math::{rotation_from_z, Mat3, Pose, Vec3};
use crate::scene::{
    names, InertialProperties, JointLimits, JointType, MeshData, MeshSource, NameAllocator, PropertySet,
    PropertyTriple, PropertyValue, SceneBody, SceneGeometry, SceneJoint, SceneWorld, Shape, WORLD,
};
use crate::usda::sanitize_name;

use super::common::{self, plan_joints, subject_pairs, KIND, KIND_MATERIAL, KIND_TEXTURE, TEXTURE};
use super::provenance::{restore_attrs, restore_elements, Recorder, UnmappedAttribute};
use super::strip::strip_elements;
use super::xml::*;
use super::{
    check_mesh_reference, finish_import, ExportOptions, ExportOutput, FormatError, ImportOptions, Imported,
    LoopStrategy, SourceFormat,
};

const FMT: SourceFormat = SourceFormat::Mjcf;
const MAX_INCLUDE_DEPTH: usize = 8;
/// `"radius half_length"` of a geometry that was a capsule.
pub const META_CAPSULE: &str = "mjcf:meta:capsule";
/// Name of the free joint of a body (empty when unnamed).
pub const META_FREEJOINT: &str = "mjcf:meta:freejoint";
/// Marks the body holding the geoms written directly in `<worldbody>`.
pub const META_WORLDBODY: &str = "mjcf:meta:worldbody";
const WORLDBODY_BODY: &str = "worldbody";

/// Section whose unmapped children are kept as raw markup in `mjcf:meta:<section>_xml`.
fn section_key(section: &str) -> String {
    format!("mjcf:meta:{section}_xml")
}

/// Inlines `<include file=".."/>` elements, recursively.
fn expand_includes(text: &str, base: Option<&Path>, depth: usize) -> Result<String, FormatError> {
    let doc = parse_document(text)?;
    let includes: Vec<(std::ops::Range<usize>, String)> = doc
        .descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == "include")
        .map(|n| {
            n.attribute("file")
                .map(|f| (n.range(), f.to_string()))
                .ok_or_else(|| FormatError::missing("<include>", "file"))
        })
        .collect::<Result<_, _>>()?;
    if includes.is_empty() {
        return Ok(text.to_string());
    }
    if depth >= MAX_INCLUDE_DEPTH {
        return Err(FormatError::TooDeep {
            what: "MJCF includes",
            limit: MAX_INCLUDE_DEPTH,
        });
    }
    let mut out = text.to_string();
    for (range, file) in includes.into_iter().rev() {
        let path = match base {
            Some(b) => b.join(&file),
            None => Path::new(&file).to_path_buf(),
        };
        let included = std::fs::read_to_string(&path).map_err(|source| FormatError::Io {
            path: path.clone(),
            source,
        })?;
        let expanded = expand_includes(&included, path.parent(), depth + 1)?;
        let inner_doc = parse_document(&expanded)?;
        let root = inner_doc.root_element();
        let inner = match (root.first_child(), root.last_child()) {
            (Some(first), Some(last)) => &expanded[first.range().start..last.range().end],
            _ => "",
        };
        out.replace_range(range, inner);
    }
    Ok(out)
}

type Attrs = BTreeMap<String, String>;

#[derive(Default)]
struct DefaultClass {
    parent: Option<String>,
    elems: HashMap<String, Vec<(String, String)>>,
}

#[derive(Default)]
struct Defaults {
    classes: HashMap<String, DefaultClass>,
}

impl Defaults {
    fn collect(&mut self, node: Node, parent: Option<&str>) {
        let class = match parent {
            None => "main".to_string(),
            Some(_) => node.attribute("class").unwrap_or("main").to_string(),
        };
        let mut entry = DefaultClass {
            parent: parent.map(str::to_string),
            ..Default::default()
        };
        for c in node.children().filter(|c| c.is_element()) {
            if c.tag_name().name() == "default" {
                self.collect(c, Some(&class));
            } else {
                entry
                    .elems
                    .entry(c.tag_name().name().to_string())
                    .or_default()
                    .extend(c.attributes().map(|a| (a.name().to_string(), a.value().to_string())));
            }
        }
        self.classes.insert(class, entry);
    }

    /// Attributes of `node` merged over its class chain.
    fn resolve(&self, node: Node, inherited: &str) -> Attrs {
        let class = node.attribute("class").unwrap_or(inherited);
        let mut chain = Vec::new();
        let mut cur = Some(class.to_string());
        while let Some(c) = cur {
            if chain.contains(&c) {
                break;
            }
            cur = self.classes.get(&c).and_then(|d| d.parent.clone());
            chain.push(c);
        }
        let tag = node.tag_name().name();
        let mut out = Attrs::new();
        for c in chain.iter().rev() {
            if let Some(attrs) = self.classes.get(c).and_then(|d| d.elems.get(tag)) {
                out.extend(attrs.iter().cloned());
            }
        }
        out.extend(node.attributes().map(|a| (a.name().to_string(), a.value().to_string())));
        out.remove("class");
        out
    }
}

fn own_attrs(node: Node) -> Attrs {
    node.attributes()
        .map(|a| (a.name().to_string(), a.value().to_string()))
        .collect()
}

fn floats(attrs: &Attrs, key: &str, element: &str) -> Result<Option<Vec<f64>>, FormatError> {
    match attrs.get(key) {
        None => Ok(None),
        Some(t) => t
            .split_whitespace()
            .map(|x| x.parse::<f64>().ok().filter(|v| !v.is_nan()))
            .collect::<Option<Vec<f64>>>()
            .map(Some)
            .ok_or_else(|| FormatError::bad(element, key, t)),
    }
}

fn fixed<const N: usize>(attrs: &Attrs, key: &str, element: &str) -> Result<Option<[f64; N]>, FormatError> {
    match floats(attrs, key, element)? {
        None => Ok(None),
        Some(v) => v
            .try_into()
            .map(Some)
            .map_err(|_| FormatError::bad(element, key, &attrs[key])),
    }
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

fn pairs(attrs: &Attrs) -> impl Iterator<Item = (&str, &str)> {
    attrs.iter().map(|(k, v)| (k.as_str(), v.as_str()))
}

const ORIENTATION_KEYS: [&str; 6] = ["pos", "quat", "axisangle", "euler", "xyaxes", "zaxis"];

struct Compiler {
    degrees: bool,
    eulerseq: String,
    meshdir: Option<String>,
    texturedir: Option<String>,
    autolimits: bool,
}

impl Compiler {
    fn read(node: Option<Node>) -> Result<Compiler, FormatError> {
        let attrs = node.map(own_attrs).unwrap_or_default();
        let assetdir = attrs.get("assetdir").cloned();
        let degrees = match attrs.get("angle").map(String::as_str) {
            None | Some("degree") => true,
            Some("radian") => false,
            Some(other) => return Err(FormatError::bad("<compiler>", "angle", other)),
        };
        let autolimits = match attrs.get("autolimits").map(String::as_str) {
            None | Some("true") => true,
            Some("false") => false,
            Some(other) => return Err(FormatError::bad("<compiler>", "autolimits", other)),
        };
        Ok(Compiler {
            degrees,
            eulerseq: attrs.get("eulerseq").cloned().unwrap_or_else(|| "xyz".to_string()),
            meshdir: attrs.get("meshdir").cloned().or_else(|| assetdir.clone()),
            texturedir: attrs.get("texturedir").cloned().or(assetdir),
            autolimits,
        })
    }

    fn angle(&self, v: f64) -> f64 {
        if self.degrees {
            v.to_radians()
        } else {
            v
        }
    }

    /// Orientation from any of quat / axisangle / euler / xyaxes / zaxis.
    fn orientation(&self, attrs: &Attrs, element: &str) -> Result<UnitQuaternion<f64>, FormatError> {
        if let Some([w, x, y, z]) = fixed::<4>(attrs, "quat", element)? {
            let q = nalgebra::Quaternion::new(w, x, y, z);
            if q.norm() == 0.0 {
                return Err(FormatError::bad(element, "quat", &attrs["quat"]));
            }
            return Ok(UnitQuaternion::from_quaternion(q));
        }
        if let Some([x, y, z, a]) = fixed::<4>(attrs, "axisangle", element)? {
            let axis = Vector3::new(x, y, z);
            if axis.norm() == 0.0 {
                return Err(FormatError::bad(element, "axisangle", &attrs["axisangle"]));
            }
            return Ok(UnitQuaternion::from_axis_angle(
                &nalgebra::Unit::new_normalize(axis),
                self.angle(a),
            ));
        }
        if let Some(e) = fixed::<3>(attrs, "euler", element)? {
            let seq: Vec<char> = self.eulerseq.chars().collect();
            if seq.len() != 3 {
                return Err(FormatError::bad("<compiler>", "eulerseq", &self.eulerseq));
            }
            let mut q = UnitQuaternion::identity();
            for (k, c) in seq.iter().enumerate() {
                let axis = match c.to_ascii_lowercase() {
                    'x' => Vector3::x_axis(),
                    'y' => Vector3::y_axis(),
                    'z' => Vector3::z_axis(),
                    _ => return Err(FormatError::bad("<compiler>", "eulerseq", &self.eulerseq)),
                };
                let r = UnitQuaternion::from_axis_angle(&axis, self.angle(e[k]));
                // Lower case rotates about the moving axes, upper case about the fixed ones.
                q = if c.is_ascii_lowercase() { q * r } else { r * q };
            }
            return Ok(q);
        }
        if let Some(v) = fixed::<6>(attrs, "xyaxes", element)? {
            let x = Vec3::new(v[0], v[1], v[2]);
            let y0 = Vec3::new(v[3], v[4], v[5]);
            if x.norm() == 0.0 || x.cross(&y0).norm() == 0.0 {
                return Err(FormatError::bad(element, "xyaxes", &attrs["xyaxes"]));
            }
            let x = x.normalize();
            let y = (y0 - x * x.dot(&y0)).normalize();
            let m = Matrix3::from_columns(&[x, y, x.cross(&y)]);
            return Ok(UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
                m,
            )));
        }
        if let Some(z) = fixed::<3>(attrs, "zaxis", element)? {
            let z = vec3(z);
            if z.norm() == 0.0 {
                return Err(FormatError::bad(element, "zaxis", &attrs["zaxis"]));
            }
            return Ok(rotation_from_z(&z.normalize()));
        }
        Ok(UnitQuaternion::identity())
    }

    fn pose(&self, attrs: &Attrs, element: &str) -> Result<Pose, FormatError> {
        let pos = fixed::<3>(attrs, "pos", element)?.map(vec3).unwrap_or_default();
        Ok(Pose::new(pos, self.orientation(attrs, element)?))
    }
}

struct Importer<'s> {
    source: &'s str,
    rec: Recorder<'s>,
    opts: &'s ImportOptions,
    defaults: Defaults,
    compiler: Compiler,
    /// Mesh asset name → (file reference, scale).
    meshes: HashMap<String, (String, Vec3)>,
    /// Material name → (rgba, triples describing it and its texture).
    materials: HashMap<String, (Option<[f64; 4]>, Vec<PropertyTriple>)>,
    names: NameAllocator,
    diagnostics: Vec<Diagnostic>,
    unnamed_bodies: usize,
    joints: Vec<SceneJoint>,
}

impl<'s> Importer<'s> {
    fn name(&mut self, raw: Option<&str>, fallback: impl FnOnce(&mut Self) -> String) -> (String, Option<String>) {
        let raw = match raw {
            Some(r) => r.to_string(),
            None => fallback(self),
        };
        let (n, renamed) = self.names.allocate(&raw);
        (n, renamed.then_some(raw))
    }

    fn keep_unmapped(&mut self, element: &str, nodes: &[Node], props: &mut PropertySet, key: Option<&str>) {
        if nodes.is_empty() {
            return;
        }
        let mut texts = Vec::new();
        for c in nodes {
            let text = raw(*c, self.source);
            self.rec.provenance.unmapped_attributes.push(UnmappedAttribute {
                element_path: element.to_string(),
                attribute: format!("<{}>", c.tag_name().name()),
                value: text.to_string(),
            });
            texts.push(text);
        }
        let text = texts.join("\n");
        match key {
            None => self.rec.keep_raw(&text, props),
            Some(k) => {
                let _ = props.insert(k, PropertyValue::Text(text));
            }
        }
    }

    fn read_assets(&mut self, asset: Node, world_props: &mut PropertySet) -> Result<(), FormatError> {
        let mut textures: HashMap<String, Vec<PropertyTriple>> = HashMap::new();
        let mut unmapped = Vec::new();
        let stem = |f: &str| {
            Path::new(f)
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or(f)
                .to_string()
        };
        for c in asset.children().filter(|c| c.is_element()) {
            let attrs = self.defaults.resolve(c, "main");
            match c.tag_name().name() {
                "texture" => {
                    let Some(name) = attrs
                        .get("name")
                        .cloned()
                        .or_else(|| attrs.get("file").map(|f| stem(f)))
                    else {
                        unmapped.push(c);
                        continue;
                    };
                    let mut triples = vec![PropertyTriple::new(&name, KIND, KIND_TEXTURE)];
                    for (k, v) in &attrs {
                        let v = match (k.as_str(), &self.compiler.texturedir) {
                            ("name", _) => continue,
                            ("file", Some(dir)) => Path::new(dir).join(v).to_string_lossy().into_owned(),
                            _ => v.clone(),
                        };
                        triples.push(PropertyTriple::new(&name, k, &v));
                    }
                    textures.insert(name, triples);
                }
                "material" => {
                    let Some(name) = attrs.get("name").cloned() else {
                        unmapped.push(c);
                        continue;
                    };
                    let rgba = fixed::<4>(&attrs, "rgba", &describe(c))?;
                    let mut triples = vec![PropertyTriple::new(&name, KIND, KIND_MATERIAL)];
                    for (k, v) in &attrs {
                        if k != "name" {
                            triples.push(PropertyTriple::new(&name, k, v));
                        }
                    }
                    if let Some(tex) = attrs.get(TEXTURE).and_then(|t| textures.get(t)) {
                        triples.extend(tex.iter().cloned());
                    }
                    self.materials.insert(name, (rgba, triples));
                }
                "mesh" => {
                    let Some(file) = attrs.get("file") else {
                        self.diagnostics.push(Diagnostic::warning(
                            "mesh-without-file",
                            "inline MJCF mesh data is not supported; asset kept verbatim",
                        ));
                        unmapped.push(c);
                        continue;
                    };
                    let name = attrs.get("name").cloned().unwrap_or_else(|| stem(file));
                    let reference = match &self.compiler.meshdir {
                        Some(dir) => Path::new(dir).join(file).to_string_lossy().into_owned(),
                        None => file.clone(),
                    };
                    check_mesh_reference(&reference, self.opts)?;
                    let scale = fixed::<3>(&attrs, "scale", &describe(c))?
                        .map(vec3)
                        .unwrap_or(Vec3::new(1.0, 1.0, 1.0));
                    self.meshes.insert(name, (reference, scale));
                }
                _ => unmapped.push(c),
            }
        }
        self.keep_unmapped("asset", &unmapped, world_props, Some(&section_key("asset")));
        Ok(())
    }

    fn geom(
        &mut self,
        node: Node,
        class: &str,
        body: &str,
        index: usize,
    ) -> Result<Option<SceneGeometry>, FormatError> {
        let attrs = self.defaults.resolve(node, class);
        let gtype = attrs.get("type").map(String::as_str).unwrap_or("sphere");
        if matches!(gtype, "plane" | "hfield" | "sdf") {
            return Ok(None);
        }
        let element = match attrs.get("name") {
            Some(n) => format!("<geom name=\"{n}\">"),
            None => format!("geom {index} of body `{body}`"),
        };
        let size = floats(&attrs, "size", &element)?.unwrap_or_default();
        let size_at = |k: usize| {
            size.get(k)
                .copied()
                .ok_or_else(|| FormatError::missing(&element, "size"))
        };
        let mut pose = self.compiler.pose(&attrs, &element)?;
        let mut half_from_fromto = None;
        if let Some(ft) = fixed::<6>(&attrs, "fromto", &element)? {
            let (a, b) = (Vec3::new(ft[0], ft[1], ft[2]), Vec3::new(ft[3], ft[4], ft[5]));
            let d = b - a;
            if d.norm() == 0.0 {
                return Err(FormatError::bad(&element, "fromto", &attrs["fromto"]));
            }
            pose = Pose::new((a + b) / 2.0, rotation_from_z(&d.normalize()));
            half_from_fromto = Some(d.norm() / 2.0);
        }
        let mut scale = Vec3::new(1.0, 1.0, 1.0);
        let mut props = PropertySet::new();
        let shape = match gtype {
            "sphere" => Shape::Sphere { radius: size_at(0)? },
            "box" => Shape::Cube {
                half_extents: Vec3::new(
                    size_at(0)?,
                    size_at(1)?,
                    match half_from_fromto {
                        Some(h) => h,
                        None => size_at(2)?,
                    },
                ),
            },
            "cylinder" => Shape::Cylinder {
                radius: size_at(0)?,
                half_length: match half_from_fromto {
                    Some(h) => h,
                    None => size_at(1)?,
                },
            },
            "capsule" => {
                let r = size_at(0)?;
                let h = match half_from_fromto {
                    Some(h) => h,
                    None => size_at(1)?,
                };
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
                scale = Vec3::new(size_at(0)?, size_at(1)?, size_at(2)?);
                Shape::Sphere { radius: 1.0 }
            }
            "mesh" => {
                let mname = attrs
                    .get("mesh")
                    .ok_or_else(|| FormatError::missing(&element, "mesh"))?;
                let (file, s) = self
                    .meshes
                    .get(mname)
                    .ok_or_else(|| FormatError::Structure(format!("{element}: unknown mesh `{mname}`")))?;
                scale = *s;
                Shape::Mesh(MeshSource::file(file.clone()))
            }
            other => return Err(FormatError::bad(&element, "type", other)),
        };
        let (name, original) = self.name(attrs.get("name").map(String::as_str), |_| {
            format!("{body}_geom_{index}")
        });
        let mut g = SceneGeometry::new(&name, shape);
        g.pose = pose;
        g.scale = scale;
        let flag = |k: &str| attrs.get(k).map(|v| v.trim() != "0").unwrap_or(true);
        g.collidable = flag("contype") || flag("conaffinity");
        let explicit_rgba = fixed::<4>(&attrs, "rgba", &element)?;
        g.rgba = explicit_rgba;
        if let Some(mat) = attrs.get("material") {
            match self.materials.get(mat) {
                Some((rgba, triples)) => {
                    g.rgba = explicit_rgba.or(*rgba);
                    g.material = triples.clone();
                }
                None => self.diagnostics.push(
                    Diagnostic::warning("unknown-material", format!("material `{mat}` is not defined"))
                        .with_subject(name.clone()),
                ),
            }
        }
        if g.rgba.map(|c| c[3]) == Some(0.0) {
            g.visible = false;
        }
        let mut mapped = vec![
            "name",
            "type",
            "size",
            "fromto",
            "mesh",
            "material",
            "rgba",
            "contype",
            "conaffinity",
        ];
        mapped.extend(ORIENTATION_KEYS);
        // Collision bitmasks other than plain on/off must survive export.
        for k in ["contype", "conaffinity"] {
            if attrs.get(k).is_some_and(|v| !matches!(v.trim(), "0" | "1")) {
                mapped.retain(|m| *m != k);
            }
        }
        self.rec.pairs(pairs(&attrs), &name, "", &mapped, &mut props);
        if let Some(o) = original {
            let _ = props.insert(names::SOURCE_NAME, PropertyValue::Text(o));
        }
        g.properties = props;
        Ok(Some(g))
    }

    /// Returns `None` for free joints.
    fn joint(
        &mut self,
        node: Node,
        class: &str,
        parent: &str,
        child: &str,
        index: usize,
    ) -> Result<Option<SceneJoint>, FormatError> {
        let mut attrs = self.defaults.resolve(node, class);
        let jtype = attrs.get("type").map(String::as_str).unwrap_or("hinge");
        let element = match attrs.get("name") {
            Some(n) => format!("<joint name=\"{n}\">"),
            None => format!("joint {index} of body `{child}`"),
        };
        let joint_type = match jtype {
            "hinge" => JointType::Revolute,
            "slide" => JointType::Prismatic,
            "ball" => JointType::Spherical,
            "free" => return Ok(None),
            other => {
                return Err(FormatError::UnsupportedJoint {
                    joint: attrs.get("name").cloned().unwrap_or_else(|| element.clone()),
                    joint_type: other.to_string(),
                })
            }
        };
        let (name, original) = self.name(attrs.get("name").map(String::as_str), |_| {
            format!("{child}_joint_{index}")
        });
        let mut j = SceneJoint::new(&name, joint_type, parent, child);
        if let Some(p) = fixed::<3>(&attrs, "pos", &element)? {
            j.pose = Pose::from_translation(vec3(p));
        }
        let range = fixed::<2>(&attrs, "range", &element)?;
        if joint_type.has_axis() {
            let axis = fixed::<3>(&attrs, "axis", &element)?.map(vec3).unwrap_or_else(Vec3::z);
            if axis.norm() == 0.0 {
                return Err(FormatError::bad(&element, "axis", &attrs["axis"]));
            }
            j.axis = Some(axis.normalize());
            let limited = match attrs.get("limited").map(String::as_str) {
                Some("true") => true,
                Some("false") => false,
                _ => self.compiler.autolimits && range.is_some(),
            };
            if let (true, Some([lo, hi])) = (limited, range) {
                j.limits = Some(if joint_type == JointType::Revolute {
                    JointLimits {
                        lower: self.compiler.angle(lo),
                        upper: self.compiler.angle(hi),
                    }
                } else {
                    JointLimits { lower: lo, upper: hi }
                });
            }
        } else if let Some([lo, hi]) = range {
            // Exported files are in radians.
            attrs.insert(
                "range".into(),
                fmt_floats(&[self.compiler.angle(lo), self.compiler.angle(hi)]),
            );
        }
        let mut props = PropertySet::new();
        for (attr, prop) in [
            ("damping", names::DYNAMICS_DAMPING),
            ("frictionloss", names::DYNAMICS_FRICTION),
        ] {
            if let Some([v]) = fixed::<1>(&attrs, attr, &element)? {
                let _ = props.insert(prop, PropertyValue::Real(v));
            }
        }
        let mut mapped = vec!["name", "type", "pos", "axis", "limited", "damping", "frictionloss"];
        if joint_type.has_axis() {
            mapped.push("range");
        }
        self.rec.pairs(pairs(&attrs), &name, "", &mapped, &mut props);
        if let Some(o) = original {
            let _ = props.insert(names::SOURCE_NAME, PropertyValue::Text(o));
        }
        j.properties = props;
        Ok(Some(j))
    }

    fn inertial(&self, node: Node, body: &str) -> Result<InertialProperties, FormatError> {
        let attrs = own_attrs(node);
        let element = format!("inertial of body `{body}`");
        let frame = self.compiler.pose(&attrs, &element)?;
        let mass = fixed::<1>(&attrs, "mass", &element)?.ok_or_else(|| FormatError::missing(&element, "mass"))?[0];
        let local = if let Some([xx, yy, zz, xy, xz, yz]) = fixed::<6>(&attrs, "fullinertia", &element)? {
            Mat3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
        } else if let Some(d) = fixed::<3>(&attrs, "diaginertia", &element)? {
            Mat3::from_diagonal(&vec3(d))
        } else {
            return Err(FormatError::missing(&element, "diaginertia or fullinertia"));
        };
        let r = frame.rotation.to_rotation_matrix();
        let inertia = r.matrix() * local * r.matrix().transpose();
        Ok(InertialProperties::new(
            mass,
            frame.translation,
            (inertia + inertia.transpose()) / 2.0,
        ))
    }

    fn body(&mut self, node: Node, parent: &str, childclass: &str) -> Result<SceneBody, FormatError> {
        let attrs = own_attrs(node);
        let class = attrs
            .get("childclass")
            .map(String::as_str)
            .unwrap_or(childclass)
            .to_string();
        let (name, original) = self.name(attrs.get("name").map(String::as_str), |imp| {
            imp.unnamed_bodies += 1;
            format!("body_{}", imp.unnamed_bodies)
        });
        let element = format!("body `{name}`");
        let body_pose = self.compiler.pose(&attrs, &element)?;
        let mut body = SceneBody::new(&name);
        let mut mapped: Vec<&str> = vec!["name", "childclass"];
        mapped.extend(ORIENTATION_KEYS);
        self.rec.attrs(node, &name, "", &mapped, &mut body.properties);
        if let Some(o) = original {
            let _ = body.properties.insert(names::SOURCE_NAME, PropertyValue::Text(o));
        }
        let mut unmapped = Vec::new();
        let mut joint_nodes = Vec::new();
        let mut kids = Vec::new();
        for c in node.children().filter(|c| c.is_element()) {
            match c.tag_name().name() {
                "inertial" => body.inertial = Some(self.inertial(c, &name)?),
                "joint" => joint_nodes.push(c),
                "freejoint" => {
                    let jn = c.attribute("name").unwrap_or("").to_string();
                    let _ = body.properties.insert(META_FREEJOINT, PropertyValue::Text(jn));
                }
                "geom" => match self.geom(c, &class, &name, body.geometries.len())? {
                    Some(g) => body.geometries.push(g),
                    None => unmapped.push(c),
                },
                "body" => kids.push(c),
                _ => unmapped.push(c),
            }
        }
        self.keep_unmapped(&name, &unmapped, &mut body.properties, None);

        let mut parsed = Vec::new();
        for (k, jn) in joint_nodes.into_iter().enumerate() {
            match self.joint(jn, &class, parent, &name, k)? {
                Some(j) => parsed.push(j),
                None => {
                    let n = jn.attribute("name").unwrap_or("").to_string();
                    let _ = body.properties.insert(META_FREEJOINT, PropertyValue::Text(n));
                }
            }
        }
        for k in kids {
            let c = self.body(k, &name, &class)?;
            body.children.push(c);
        }
        if parsed.len() <= 1 {
            body.pose = body_pose;
            self.joints.extend(parsed);
            return Ok(body);
        }

        // Several joints in one body: a chain of massless bodies, one joint each.
        self.diagnostics.push(
            Diagnostic::info(
                "mjcf-joint-chain",
                format!("body `{name}` has {} joints; added intermediate bodies", parsed.len()),
            )
            .with_subject(name.clone()),
        );
        let n = parsed.len();
        let holders: Vec<String> = parsed[..n - 1]
            .iter()
            .map(|j| self.names.allocate(&format!("{name}_{}", j.name)).0)
            .collect();
        for (k, j) in parsed.iter_mut().enumerate() {
            j.parent_body = if k == 0 {
                parent.to_string()
            } else {
                holders[k - 1].clone()
            };
            j.child_body = if k == n - 1 { name.clone() } else { holders[k].clone() };
        }
        self.joints.extend(parsed);
        let mut current = body;
        for h in holders.iter().rev() {
            let mut holder = SceneBody::new(h);
            holder.children.push(current);
            current = holder;
        }
        current.pose = body_pose;
        Ok(current)
    }

    /// A connect or weld constraint as a joint; `None` for other kinds.
    fn equality_joint(&mut self, node: Node, poses: &HashMap<String, Pose>) -> Result<Option<SceneJoint>, FormatError> {
        let tag = node.tag_name().name();
        let joint_type = match tag {
            "connect" => JointType::Spherical,
            "weld" => JointType::Fixed,
            _ => return Ok(None),
        };
        let attrs = self.defaults.resolve(node, "main");
        let Some(child) = attrs.get("body1").cloned() else {
            // Site-based constraints have no body pair to map onto.
            return Ok(None);
        };
        let element = describe(node);
        let parent = attrs.get("body2").cloned().unwrap_or_else(|| WORLD.to_string());
        for b in [&child, &parent] {
            if b != WORLD && !poses.contains_key(b) {
                return Err(FormatError::Structure(format!(
                    "{element} references unknown body `{b}`"
                )));
            }
        }
        let anchor = fixed::<3>(&attrs, "anchor", &element)?.map(vec3).unwrap_or_default();
        let pose_of = |b: &str| poses.get(b).copied().unwrap_or_default();
        // Connect anchors are in body1 coordinates, weld anchors in body2 coordinates.
        let local = match joint_type {
            JointType::Spherical => anchor,
            _ => pose_of(&child)
                .inverse()
                .transform_point(&pose_of(&parent).transform_point(&anchor)),
        };
        let (name, original) = self.name(attrs.get("name").map(String::as_str), |_| format!("{child}_{tag}"));
        let mut j = SceneJoint::new(&name, joint_type, &parent, &child);
        j.pose = Pose::from_translation(local);
        self.rec.pairs(
            pairs(&attrs),
            &name,
            "",
            &["name", "body1", "body2", "anchor"],
            &mut j.properties,
        );
        if let Some(o) = original {
            let _ = j.properties.insert(names::SOURCE_NAME, PropertyValue::Text(o));
        }
        Ok(Some(j))
    }
}

/// Imports an MJCF `<mujoco>` document. `<include>` files resolve against
/// `opts.base_dir`.
pub fn import_mjcf(text: &str, opts: &ImportOptions) -> Result<Imported, FormatError> {
    let expanded = expand_includes(text, opts.base_dir.as_deref(), 0)?;
    let doc = parse_document(&expanded)?;
    let root = doc.root_element();
    if root.tag_name().name() != "mujoco" {
        return Err(FormatError::WrongRoot {
            expected: "mujoco",
            found: root.tag_name().name().to_string(),
        });
    }
    let compiler_node = child(root, "compiler");
    let mut imp = Importer {
        source: &expanded,
        rec: Recorder::new(FMT, &expanded),
        opts,
        defaults: Defaults::default(),
        compiler: Compiler::read(compiler_node)?,
        meshes: HashMap::new(),
        materials: HashMap::new(),
        names: NameAllocator::new(),
        diagnostics: Vec::new(),
        unnamed_bodies: 0,
        joints: Vec::new(),
    };
    let mut world = SceneWorld::new(root.attribute("model").unwrap_or("mjcf"));
    imp.rec.attrs(root, "mujoco", "", &["model"], &mut world.properties);
    if let Some(c) = compiler_node {
        imp.rec.attrs(
            c,
            "compiler",
            "compiler:",
            &["angle", "eulerseq", "meshdir", "texturedir", "assetdir", "autolimits"],
            &mut world.properties,
        );
    }
    let mut saw_default = false;
    for d in children(root, "default") {
        imp.defaults.collect(d, None);
        saw_default = true;
    }
    if saw_default {
        imp.diagnostics.push(Diagnostic::info(
            "mjcf-defaults-resolved",
            "default classes were applied to every element and are not kept",
        ));
    }
    for o in children(root, "option") {
        if let Some(g) = o.attribute("gravity") {
            let [x, y, z] = floats_n::<3>(o, "gravity", g)?;
            let _ = world
                .properties
                .insert(names::GRAVITY, PropertyValue::Vector(Vec3::new(x, y, z)));
        }
        imp.rec
            .attrs(o, "option", "option:", &["gravity"], &mut world.properties);
        let kids: Vec<Node> = o.children().filter(|c| c.is_element()).collect();
        imp.keep_unmapped("option", &kids, &mut world.properties, Some(&section_key("option")));
    }
    for a in children(root, "asset") {
        imp.read_assets(a, &mut world.properties)?;
    }

    let mut roots = Vec::new();
    if let Some(wb) = child(root, "worldbody") {
        let mut holder = SceneBody::new(WORLDBODY_BODY);
        let _ = holder.properties.insert(META_WORLDBODY, PropertyValue::Bool(true));
        imp.names.allocate(WORLDBODY_BODY);
        let mut unmapped = Vec::new();
        let mut bodies = Vec::new();
        for c in wb.children().filter(|c| c.is_element()) {
            match c.tag_name().name() {
                "body" => bodies.push(c),
                "geom" => match imp.geom(c, "main", WORLDBODY_BODY, holder.geometries.len())? {
                    Some(g) => holder.geometries.push(g),
                    None => unmapped.push(c),
                },
                _ => unmapped.push(c),
            }
        }
        imp.keep_unmapped(
            "worldbody",
            &unmapped,
            &mut world.properties,
            Some(&section_key("worldbody")),
        );
        if !holder.geometries.is_empty() {
            roots.push(holder);
        }
        for b in bodies {
            let body = imp.body(b, WORLD, "main")?;
            roots.push(body);
        }
    }
    *world.bodies_mut() = roots;

    let poses = world.body_world_poses();
    let mut equality_raw = Vec::new();
    for e in children(root, "equality") {
        for c in e.children().filter(|c| c.is_element()) {
            match imp.equality_joint(c, &poses)? {
                Some(j) => imp.joints.push(j),
                None => equality_raw.push(c),
            }
        }
    }
    imp.keep_unmapped(
        "equality",
        &equality_raw,
        &mut world.properties,
        Some(&section_key("equality")),
    );
    let top: Vec<Node> = root
        .children()
        .filter(|c| {
            c.is_element()
                && !matches!(
                    c.tag_name().name(),
                    "compiler" | "option" | "default" | "asset" | "worldbody" | "equality"
                )
        })
        .collect();
    imp.keep_unmapped("mujoco", &top, &mut world.properties, None);

    for j in std::mem::take(&mut imp.joints) {
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

fn pose_attrs(e: &mut XmlElement, pose: &Pose) {
    if pose.translation != Vec3::zeros() {
        e.set("pos", fmt_vec3(&pose.translation));
    }
    if pose.rotation != UnitQuaternion::identity() {
        e.set("quat", fmt_floats(&pose.wxyz()));
    }
}

fn push_section(e: &mut XmlElement, props: &PropertySet, section: &str) {
    if let Some(text) = props.text(&section_key(section)) {
        e.push_raw(text);
    }
}

#[derive(Default)]
struct Assets {
    meshes: Vec<XmlElement>,
    /// (file, scale bits) → asset name.
    mesh_names: HashMap<(String, [u64; 3]), String>,
    used: HashSet<String>,
    materials: BTreeMap<String, XmlElement>,
    textures: BTreeMap<String, XmlElement>,
}

impl Assets {
    fn mesh(&mut self, file: &str, scale: &Vec3) -> String {
        let key = (
            file.to_string(),
            [scale.x.to_bits(), scale.y.to_bits(), scale.z.to_bits()],
        );
        if let Some(n) = self.mesh_names.get(&key) {
            return n.clone();
        }
        let stem = Path::new(file).file_stem().and_then(|s| s.to_str()).unwrap_or("mesh");
        let base = sanitize_name(stem);
        let mut name = base.clone();
        let mut k = 1;
        while !self.used.insert(name.clone()) {
            name = format!("{base}_{k}");
            k += 1;
        }
        let mut e = XmlElement::new("mesh").attr("name", name.clone()).attr("file", file);
        if *scale != Vec3::new(1.0, 1.0, 1.0) {
            e.set("scale", fmt_vec3(scale));
        }
        self.meshes.push(e);
        self.mesh_names.insert(key, name.clone());
        name
    }

    /// Registers the material of `g` and returns its name and rgba.
    fn material(&mut self, g: &SceneGeometry) -> Option<(String, Option<[f64; 4]>)> {
        let mat = g
            .material
            .iter()
            .find(|t| t.predicate == KIND && t.object == KIND_MATERIAL)?
            .subject
            .clone();
        let mut e = XmlElement::new("material").attr("name", mat.clone());
        let mut rgba = None;
        for (p, o) in subject_pairs(&g.material, &mat) {
            if p == TEXTURE {
                let is_texture = g
                    .material
                    .iter()
                    .any(|t| t.subject == o && t.predicate == KIND && t.object == KIND_TEXTURE);
                let tex = if is_texture {
                    o.to_string()
                } else {
                    // A bare texture file, as URDF writes it.
                    let name = format!("{mat}_texture");
                    self.textures.entry(name.clone()).or_insert_with(|| {
                        XmlElement::new("texture")
                            .attr("name", name.clone())
                            .attr("type", "2d")
                            .attr("file", o)
                    });
                    name
                };
                e.set("texture", tex);
                continue;
            }
            if p == "rgba" {
                rgba = parse_rgba(o);
            }
            e.set(p, o);
        }
        for t in g
            .material
            .iter()
            .filter(|t| t.predicate == KIND && t.object == KIND_TEXTURE)
        {
            let tex = &t.subject;
            self.textures.entry(tex.clone()).or_insert_with(|| {
                let mut te = XmlElement::new("texture").attr("name", tex.clone());
                for (p, o) in subject_pairs(&g.material, tex) {
                    te.set(p, o);
                }
                te
            });
        }
        self.materials.entry(mat.clone()).or_insert(e);
        Some((mat, rgba))
    }
}

fn parse_rgba(text: &str) -> Option<[f64; 4]> {
    let v: Vec<f64> = text.split_whitespace().filter_map(|t| t.parse().ok()).collect();
    v.try_into().ok()
}

fn geom_element(
    g: &SceneGeometry,
    assets: &mut Assets,
    side_files: &mut Vec<(String, String)>,
) -> Result<XmlElement, FormatError> {
    let s = g.scale;
    let unit = Vec3::new(1.0, 1.0, 1.0);
    let mut e = XmlElement::new("geom").attr("name", g.name.clone());
    let capsule = g.properties.text(META_CAPSULE).and_then(|t| {
        let v: Vec<f64> = t.split_whitespace().filter_map(|x| x.parse().ok()).collect();
        (v.len() == 2).then(|| (v[0], v[1]))
    });
    match (&g.shape, capsule) {
        (Shape::Mesh(_), Some((r, h))) => {
            e.set("type", "capsule");
            e.set("size", fmt_floats(&[r * s.x.max(s.y), h * s.z]));
        }
        (Shape::Sphere { radius }, _) if s == unit => {
            e.set("type", "sphere");
            e.set("size", fmt_f64(*radius));
        }
        (Shape::Sphere { radius }, _) => {
            e.set("type", "ellipsoid");
            e.set("size", fmt_vec3(&(s * *radius)));
        }
        (Shape::Cube { half_extents }, _) => {
            e.set("type", "box");
            e.set("size", fmt_vec3(&half_extents.component_mul(&s)));
        }
        (Shape::Cylinder { radius, half_length }, _) => {
            e.set("type", "cylinder");
            e.set("size", fmt_floats(&[radius * s.x.max(s.y), half_length * s.z]));
        }
        (Shape::Mesh(_), None) => {
            let file = common::mesh_reference(g, side_files)?.expect("mesh shape");
            e.set("type", "mesh");
            e.set("mesh", assets.mesh(&file, &s));
        }
    }
    pose_attrs(&mut e, &g.pose);
    if !g.collidable {
        e.set("contype", "0");
        e.set("conaffinity", "0");
    }
    let material = assets.material(g);
    if let Some((name, _)) = &material {
        e.set("material", name.clone());
    }
    let mut rgba = g.rgba;
    if !g.visible {
        let c = rgba.unwrap_or([0.5, 0.5, 0.5, 1.0]);
        rgba = Some([c[0], c[1], c[2], 0.0]);
    }
    if let Some(c) = rgba {
        if material.as_ref().and_then(|m| m.1) != Some(c) {
            e.set("rgba", fmt_floats(&c));
        }
    }
    restore_attrs(&g.properties, FMT, "", &mut e);
    Ok(e)
}

fn inertial_element(i: &InertialProperties) -> XmlElement {
    let m = i.inertia;
    XmlElement::new("inertial")
        .attr("pos", fmt_vec3(&i.center_of_mass))
        .attr("mass", fmt_f64(i.mass))
        .attr(
            "fullinertia",
            fmt_floats(&[m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(0, 1)], m[(0, 2)], m[(1, 2)]]),
        )
}

fn joint_element(j: &SceneJoint) -> XmlElement {
    let jt = match j.joint_type {
        JointType::Revolute => "hinge",
        JointType::Prismatic => "slide",
        _ => "ball",
    };
    let mut e = XmlElement::new("joint").attr("name", j.name.clone()).attr("type", jt);
    if j.pose.translation != Vec3::zeros() {
        e.set("pos", fmt_vec3(&j.pose.translation));
    }
    if j.joint_type.has_axis() {
        let axis = j.pose.rotation * j.axis.unwrap_or_else(Vec3::x);
        e.set("axis", fmt_vec3(&axis));
        match j.limits {
            Some(l) if !j.properties.flag(names::LIMITS_UNBOUNDED) => {
                e.set("limited", "true");
                e.set("range", fmt_floats(&[l.lower, l.upper]));
            }
            _ => e.set("limited", "false"),
        }
    }
    for (attr, prop) in [
        ("damping", names::DYNAMICS_DAMPING),
        ("frictionloss", names::DYNAMICS_FRICTION),
    ] {
        if let Some(v) = j.properties.get(prop).and_then(PropertyValue::as_real) {
            e.set(attr, fmt_f64(v));
        }
    }
    restore_attrs(&j.properties, FMT, "", &mut e);
    e
}

struct BodyWriter<'w> {
    native: HashMap<&'w str, &'w SceneJoint>,
    assets: Assets,
    side_files: Vec<(String, String)>,
}

impl<'w> BodyWriter<'w> {
    fn body(&mut self, b: &'w SceneBody) -> Result<XmlElement, FormatError> {
        let mut e = XmlElement::new("body").attr("name", b.name.clone());
        pose_attrs(&mut e, &b.pose);
        restore_attrs(&b.properties, FMT, "", &mut e);
        if let Some(i) = &b.inertial {
            e.push(inertial_element(i));
        }
        if let Some(n) = b.properties.text(META_FREEJOINT) {
            let mut f = XmlElement::new("freejoint");
            if !n.is_empty() {
                f.set("name", n);
            }
            e.push(f);
        }
        if let Some(j) = self.native.get(b.name.as_str()) {
            e.push(joint_element(j));
        }
        for g in &b.geometries {
            e.push(geom_element(g, &mut self.assets, &mut self.side_files)?);
        }
        restore_elements(&b.properties, FMT, &mut e);
        for c in &b.children {
            e.push(self.body(c)?);
        }
        Ok(e)
    }
}

/// Exports to MJCF. Joints MJCF cannot place in the body tree become
/// `<equality>` constraints: spherical as connect, fixed as weld, and
/// revolute/prismatic per `opts.loop_strategy`.
pub fn export_mjcf(world: &SceneWorld, opts: &ExportOptions) -> Result<ExportOutput, FormatError> {
    let world = strip_elements(world, &opts.strip);
    let mut out = ExportOutput::default();
    let plan = plan_joints(&world);
    let nesting_parent: HashMap<&str, &str> = world
        .all_bodies()
        .into_iter()
        .map(|(b, p)| (b.name.as_str(), p.map(|p| p.name.as_str()).unwrap_or(WORLD)))
        .collect();
    let mut native: HashMap<&str, &SceneJoint> = HashMap::new();
    let mut constraints: Vec<&SceneJoint> = plan.loops.clone();
    for j in &plan.tree {
        let nests = nesting_parent.get(j.child_body.as_str()) == Some(&j.parent_body.as_str());
        if nests && j.joint_type != JointType::Fixed {
            native.insert(j.child_body.as_str(), j);
        } else {
            constraints.push(j);
        }
    }
    common::check_loop_strategy(&constraints, opts.loop_strategy, |t| {
        matches!(t, JointType::Spherical | JointType::Fixed)
    })?;

    let mut root = XmlElement::new("mujoco").attr("model", world.name.clone());
    restore_attrs(&world.properties, FMT, "", &mut root);
    let mut compiler = XmlElement::new("compiler")
        .attr("angle", "radian")
        .attr("autolimits", "true");
    restore_attrs(&world.properties, FMT, "compiler:", &mut compiler);
    root.push(compiler);
    let mut option = XmlElement::new("option");
    if let Some(g) = world.properties.get(names::GRAVITY).and_then(PropertyValue::as_vector) {
        option.set("gravity", fmt_vec3(&g));
    }
    restore_attrs(&world.properties, FMT, "option:", &mut option);
    push_section(&mut option, &world.properties, "option");

    let mut writer = BodyWriter {
        native,
        assets: Assets::default(),
        side_files: Vec::new(),
    };
    let mut worldbody = XmlElement::new("worldbody");
    for b in world.bodies() {
        let plain_holder = b.properties.flag(META_WORLDBODY)
            && b.pose.is_identity()
            && b.children.is_empty()
            && b.inertial.is_none()
            && !writer.native.contains_key(b.name.as_str());
        if plain_holder {
            for g in &b.geometries {
                worldbody.push(geom_element(g, &mut writer.assets, &mut writer.side_files)?);
            }
        } else {
            worldbody.push(writer.body(b)?);
        }
    }
    push_section(&mut worldbody, &world.properties, "worldbody");

    let poses = world.body_world_poses();
    let pose_of = |b: &str| poses.get(b).copied().unwrap_or_default();
    let mut equality = XmlElement::new("equality");
    for j in &constraints {
        let tag = match j.joint_type {
            JointType::Spherical => "connect",
            JointType::Fixed => "weld",
            _ => {
                let tag = if opts.loop_strategy == LoopStrategy::Weld {
                    "weld"
                } else {
                    "connect"
                };
                out.diagnostics.push(
                    Diagnostic::warning(
                        "joint-degraded",
                        format!(
                            "{} joint `{}` exported as a {tag} constraint",
                            j.joint_type.as_str(),
                            j.name
                        ),
                    )
                    .with_subject(j.name.clone()),
                );
                tag
            }
        };
        let mut e = XmlElement::new(tag)
            .attr("name", j.name.clone())
            .attr("body1", j.child_body.clone());
        if j.parent_body != WORLD {
            e.set("body2", j.parent_body.clone());
        }
        let anchor = if tag == "connect" {
            j.pose.translation
        } else {
            pose_of(&j.parent_body)
                .inverse()
                .transform_point(&pose_of(&j.child_body).transform_point(&j.pose.translation))
        };
        e.set("anchor", fmt_vec3(&anchor));
        restore_attrs(&j.properties, FMT, "", &mut e);
        equality.push(e);
    }
    push_section(&mut equality, &world.properties, "equality");

    let mut asset = XmlElement::new("asset");
    push_section(&mut asset, &world.properties, "asset");
    for t in writer.assets.textures.values() {
        asset.push(t.clone());
    }
    for m in writer.assets.materials.values() {
        asset.push(m.clone());
    }
    for m in &writer.assets.meshes {
        asset.push(m.clone());
    }
    if !option.is_empty() {
        root.push(option);
    }
    if !asset.is_empty() {
        root.push(asset);
    }
    root.push(worldbody);
    if !equality.is_empty() {
        root.push(equality);
    }
    restore_elements(&world.properties, FMT, &mut root);
    out.side_files = writer.side_files;
    out.document = document(&root);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::StripElement;
    use crate::scene::{kinematic_classification, structural_diff, CompareTolerance, KinematicKind};

    const ARM: &str = r#"<mujoco model="arm">
  <compiler angle="degree" eulerseq="xyz"/>
  <option gravity="0 0 -9.81" timestep="0.002"/>
  <default>
    <geom rgba="0.8 0.2 0.2 1"/>
    <default class="visual">
      <geom contype="0" conaffinity="0" group="2"/>
    </default>
  </default>
  <asset>
    <texture name="grid" type="2d" builtin="checker" width="64" height="64"/>
    <material name="floor" texture="grid" rgba="0.5 0.5 0.5 1"/>
  </asset>
  <worldbody>
    <light pos="0 0 3"/>
    <geom name="ground" type="plane" size="5 5 0.1"/>
    <geom name="pedestal" type="box" size="0.2 0.2 0.05" material="floor"/>
    <body name="base" pos="0 0 0.1" euler="0 0 90">
      <inertial pos="0 0 0.05" mass="2" diaginertia="0.01 0.02 0.03"/>
      <geom name="base_shell" type="cylinder" size="0.05 0.05"/>
      <body name="upper" pos="0 0 0.1">
        <joint name="shoulder" type="hinge" axis="0 1 0" range="-90 90" damping="0.5" armature="0.01"/>
        <geom name="upper_link" type="capsule" fromto="0 0 0 0 0 0.3" size="0.03"/>
        <geom class="visual" type="ellipsoid" size="0.04 0.05 0.06"/>
        <body pos="0 0 0.3">
          <joint type="hinge" axis="1 0 0"/>
          <joint name="wrist_roll" type="hinge" axis="0 0 1" range="-45 45"/>
          <geom type="sphere" size="0.04"/>
          <site name="tip" pos="0 0 0.05"/>
        </body>
      </body>
    </body>
  </worldbody>
  <actuator><motor joint="shoulder" gear="10"/></actuator>
</mujoco>"#;

    const FOUR_BAR: &str = r#"<mujoco model="fourbar">
  <compiler angle="radian"/>
  <worldbody>
    <body name="crank" pos="0 0 0">
      <joint name="j0" type="hinge" axis="0 1 0"/>
      <geom type="box" size="0.5 0.02 0.02" pos="0.5 0 0"/>
      <body name="coupler" pos="1 0 0">
        <joint name="j1" type="hinge" axis="0 1 0"/>
        <geom type="box" size="0.02 0.02 0.5" pos="0 0 0.5"/>
        <body name="rocker" pos="0 0 1">
          <joint name="j2" type="hinge" axis="0 1 0"/>
          <geom type="box" size="0.5 0.02 0.02" pos="-0.5 0 0"/>
        </body>
      </body>
    </body>
  </worldbody>
  <equality>
    <connect name="close" body1="rocker" anchor="-1 0 0" solref="0.01 1"/>
  </equality>
</mujoco>"#;

    fn opts() -> ImportOptions {
        ImportOptions {
            verify_mesh_paths: false,
            ..Default::default()
        }
    }

    #[test]
    fn imports_defaults_shapes_and_joints() {
        let imp = import_mjcf(ARM, &opts()).unwrap();
        let w = &imp.world;
        let pedestal = &w.body(WORLDBODY_BODY).unwrap().geometries[0];
        assert_eq!(pedestal.rgba, Some([0.8, 0.2, 0.2, 1.0]));
        assert!(pedestal
            .material
            .iter()
            .any(|t| t.subject == "grid" && t.predicate == "builtin"));
        let upper = w.body("upper").unwrap();
        let capsule = &upper.geometries[0];
        let Shape::Mesh(src) = &capsule.shape else { panic!() };
        assert_eq!(src.data.as_ref().unwrap().vertices.len(), 2 * 4 * 16 + 2);
        assert!((capsule.pose.translation.z - 0.15).abs() < 1e-12);
        let visual = &upper.geometries[1];
        assert!(!visual.collidable);
        assert_eq!(visual.name, "upper_geom_1");
        assert_eq!(visual.scale, Vec3::new(0.04, 0.05, 0.06));
        assert_eq!(visual.properties.text("mjcf:group"), Some("2"));
        let base = w.body("base").unwrap();
        assert!((base.pose.rotation.angle() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let shoulder = &base.joints[0];
        let limits = shoulder.limits.unwrap();
        assert!((limits.upper - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert_eq!(
            shoulder.properties.get(names::DYNAMICS_DAMPING),
            Some(&PropertyValue::Real(0.5))
        );
        assert_eq!(shoulder.properties.text("mjcf:armature"), Some("0.01"));
        // Two joints in one body: an intermediate body carries the first.
        assert!(w.body("body_1_body_1_joint_0").is_some());
        assert_eq!(w.joint_count(), 3);
        assert!(w.properties.text("mjcf:meta:worldbody_xml").unwrap().contains("plane"));
        assert!(w.properties.text("mjcf:unmapped_xml").unwrap().contains("<motor"));
        assert_eq!(
            w.properties.get(names::GRAVITY),
            Some(&PropertyValue::Vector(Vec3::new(0.0, 0.0, -9.81)))
        );
    }

    #[test]
    fn round_trip_is_structurally_equal() {
        for src in [ARM, FOUR_BAR] {
            let first = import_mjcf(src, &opts()).unwrap().world;
            let out = export_mjcf(&first, &ExportOptions::default()).unwrap();
            let second = import_mjcf(&out.document, &opts()).unwrap().world;
            let diff = structural_diff(&first, &second, &CompareTolerance::default());
            assert!(diff.is_empty(), "{diff:?}\n{}", out.document);
            let again = export_mjcf(&second, &ExportOptions::default()).unwrap();
            assert_eq!(again.document, out.document);
        }
    }

    #[test]
    fn connect_closes_a_loop() {
        let w = import_mjcf(FOUR_BAR, &opts()).unwrap().world;
        let class = kinematic_classification(&w);
        assert_eq!(class.kind, KinematicKind::Loop);
        assert_eq!(class.closing_joints, vec!["close".to_string()]);
        let close = w.world_joints().iter().find(|j| j.name == "close").unwrap();
        assert_eq!(close.joint_type, JointType::Spherical);
        assert_eq!(close.properties.text("mjcf:solref"), Some("0.01 1"));
        let out = export_mjcf(&w, &ExportOptions::default()).unwrap();
        assert!(out
            .document
            .contains("<connect name=\"close\" body1=\"rocker\" anchor=\"-1 0 0\""));
    }

    #[test]
    fn revolute_loops_follow_strategy() {
        let mut w = import_mjcf(FOUR_BAR, &opts()).unwrap().world;
        w.world_joints_mut().retain(|j| j.name != "close");
        let mut hinge = SceneJoint::new("close", JointType::Revolute, "rocker", "crank");
        hinge.axis = Some(Vec3::y());
        w.body_mut("rocker").unwrap().joints.push(hinge);
        let weld = ExportOptions {
            loop_strategy: LoopStrategy::Weld,
            ..Default::default()
        };
        let out = export_mjcf(&w, &weld).unwrap();
        assert!(out.document.contains("<weld name=\"close\""));
        assert!(out.diagnostics.iter().any(|d| d.code == "joint-degraded"));
        let fail = ExportOptions {
            loop_strategy: LoopStrategy::Fail,
            ..Default::default()
        };
        assert!(matches!(export_mjcf(&w, &fail), Err(FormatError::LoopNotAllowed(_))));
    }

    #[test]
    fn weld_anchor_survives_round_trip() {
        let doc = r#"<mujoco><worldbody>
            <body name="a" pos="1 0 0"><geom size="0.1"/></body>
            <body name="b" pos="0 2 0" quat="0 0 0 1"><geom size="0.1"/></body>
          </worldbody><equality><weld body1="b" body2="a" anchor="0.5 0 0"/></equality></mujoco>"#;
        let w = import_mjcf(doc, &opts()).unwrap().world;
        let j = &w.body("a").unwrap().joints[0];
        assert_eq!(j.name, "b_weld");
        let world_anchor = w.body_world_poses()["b"].compose(&j.pose).translation;
        assert!((world_anchor - Vec3::new(1.5, 0.0, 0.0)).norm() < 1e-12);
        let out = export_mjcf(&w, &ExportOptions::default()).unwrap();
        let back = import_mjcf(&out.document, &opts()).unwrap().world;
        assert!(structural_diff(&w, &back, &CompareTolerance::default()).is_empty());
    }

    #[test]
    fn orientation_forms_agree() {
        let c = Compiler::read(None).unwrap();
        let q = |k: &str, v: &str| {
            let attrs = Attrs::from([(k.to_string(), v.to_string())]);
            c.orientation(&attrs, "t").unwrap()
        };
        let reference = q("axisangle", "0 0 1 90");
        for (k, v) in [
            ("euler", "0 0 90"),
            ("quat", "0.7071067811865476 0 0 0.7071067811865476"),
            ("xyaxes", "0 1 0 -1 0 0"),
        ] {
            assert!(q(k, v).angle_to(&reference) < 1e-9, "{k}");
        }
        let z = q("zaxis", "1 0 0");
        assert!((z * Vec3::z() - Vec3::x()).norm() < 1e-12);
        // Intrinsic and extrinsic sequences differ.
        let mut ext = Compiler::read(None).unwrap();
        ext.eulerseq = "XYZ".into();
        let attrs = Attrs::from([("euler".to_string(), "90 90 0".to_string())]);
        let (a, b) = (
            ext.orientation(&attrs, "t").unwrap(),
            c.orientation(&attrs, "t").unwrap(),
        );
        assert!(a.angle_to(&b) > 0.1);
    }

    #[test]
    fn includes_are_expanded() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("part.xml"),
            r#"<mujoco><body name="inc"><geom size="0.1"/></body></mujoco>"#,
        )
        .unwrap();
        let doc = r#"<mujoco><worldbody><include file="part.xml"/></worldbody></mujoco>"#;
        let o = ImportOptions {
            base_dir: Some(dir.path().to_path_buf()),
            ..opts()
        };
        let w = import_mjcf(doc, &o).unwrap().world;
        assert!(w.body("inc").is_some());
    }

    #[test]
    fn stripping_materials_drops_assets() {
        let w = import_mjcf(ARM, &opts()).unwrap().world;
        let strip = ExportOptions {
            strip: [StripElement::Materials].into(),
            ..Default::default()
        };
        let full = export_mjcf(&w, &ExportOptions::default()).unwrap().document;
        let bare = export_mjcf(&w, &strip).unwrap().document;
        assert!(full.contains("<material") && !bare.contains("<material"));
        assert!(bare.len() < full.len());
    }
}
