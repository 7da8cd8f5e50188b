//! Import of the ProcTHOR house JSON subset.
//!
//! Only `rooms[].floorPolygon` and `objects[].{id, assetId, position,
//! rotation, children}` are interpreted. Every other key is kept as JSON text
//! in a `procthor:<key>` property of the world, room or object it sits on.
//!
//! ProcTHOR uses Unity's frame: Y up and left-handed, Euler angles in degrees
//! applied Z, then X, then Y. Points map to the scene frame by swapping y and
//! z (the reflection `S`), and rotations by conjugation, `S R S`.

use serde_json::{Map, Value};

use crate::diag::Diagnostic;
use crate::math::{Mat3, Pose, Vec3};
use crate::scene::{
    names, MeshData, MeshSource, NameAllocator, PropertySet, PropertyValue, SceneBody, SceneGeometry, SceneWorld, Shape,
};

use super::provenance::{FormatProvenance, UnmappedAttribute};
use super::{check_mesh_reference, finish_import, FormatError, ImportOptions, Imported, SourceFormat};

/// Thickness of generated floor slabs, below the polygon's height.
pub const FLOOR_THICKNESS: f64 = 0.05;

const OBJECT_KEYS: [&str; 5] = ["id", "assetId", "position", "rotation", "children"];

fn swap_yz() -> Mat3 {
    Mat3::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0)
}

/// Unity point to scene point.
pub fn map_point(p: Vec3) -> Vec3 {
    Vec3::new(p.x, p.z, p.y)
}

/// Unity Euler angles in degrees to a scene-frame rotation matrix.
pub fn map_rotation(euler_deg: Vec3) -> Mat3 {
    let (x, y, z) = (
        euler_deg.x.to_radians(),
        euler_deg.y.to_radians(),
        euler_deg.z.to_radians(),
    );
    let rx = Mat3::new(1.0, 0.0, 0.0, 0.0, x.cos(), -x.sin(), 0.0, x.sin(), x.cos());
    let ry = Mat3::new(y.cos(), 0.0, y.sin(), 0.0, 1.0, 0.0, -y.sin(), 0.0, y.cos());
    let rz = Mat3::new(z.cos(), -z.sin(), 0.0, z.sin(), z.cos(), 0.0, 0.0, 0.0, 1.0);
    let s = swap_yz();
    s * (ry * rx * rz) * s
}

fn pose_from(position: Vec3, rotation: Mat3) -> Pose {
    let r = nalgebra::Rotation3::from_matrix_unchecked(rotation);
    Pose {
        translation: position,
        rotation: nalgebra::UnitQuaternion::from_rotation_matrix(&r),
    }
}

struct Importer<'o> {
    opts: &'o ImportOptions,
    names: NameAllocator,
    provenance: FormatProvenance,
}

fn real(v: &Value, path: &str, key: &str) -> Result<f64, FormatError> {
    let x = v
        .get(key)
        .ok_or_else(|| FormatError::missing(path, key))?
        .as_f64()
        .ok_or_else(|| FormatError::bad(path, key, &v[key].to_string()))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(FormatError::bad(path, key, &x.to_string()))
    }
}

fn xyz(obj: &Map<String, Value>, path: &str, key: &str) -> Result<Vec3, FormatError> {
    let v = obj.get(key).ok_or_else(|| FormatError::missing(path, key))?;
    if !v.is_object() {
        return Err(FormatError::bad(path, key, &v.to_string()));
    }
    let at = format!("{path}.{key}");
    Ok(Vec3::new(real(v, &at, "x")?, real(v, &at, "y")?, real(v, &at, "z")?))
}

fn text<'v>(obj: &'v Map<String, Value>, path: &str, key: &str) -> Result<&'v str, FormatError> {
    let v = obj.get(key).ok_or_else(|| FormatError::missing(path, key))?;
    v.as_str().ok_or_else(|| FormatError::bad(path, key, &v.to_string()))
}

impl Importer<'_> {
    fn keep_other(&mut self, obj: &Map<String, Value>, mapped: &[&str], path: &str, props: &mut PropertySet) {
        for (k, v) in obj {
            if mapped.contains(&k.as_str()) {
                continue;
            }
            let value = v.to_string();
            let _ = props.insert(&format!("procthor:{k}"), PropertyValue::Text(value.clone()));
            self.provenance.unmapped_attributes.push(UnmappedAttribute {
                element_path: path.to_string(),
                attribute: k.clone(),
                value,
            });
        }
    }

    fn allocate(&mut self, raw: &str, props: &mut PropertySet) -> String {
        let (name, renamed) = self.names.allocate(raw);
        if renamed {
            let _ = props.insert(names::SOURCE_NAME, PropertyValue::Text(raw.to_string()));
        }
        name
    }

    /// `parent` is the parent's world pose; ProcTHOR child positions are
    /// world positions.
    fn object(&mut self, v: &Value, path: &str, parent: &Pose, depth: usize) -> Result<SceneBody, FormatError> {
        if depth > 16 {
            return Err(FormatError::TooDeep {
                what: "ProcTHOR children",
                limit: 16,
            });
        }
        let obj = v
            .as_object()
            .ok_or_else(|| FormatError::bad(path, "object", &v.to_string()))?;
        let id = text(obj, path, "id")?;
        let asset = text(obj, path, "assetId")?;
        let position = map_point(xyz(obj, path, "position")?);
        let rotation = match obj.get("rotation") {
            Some(_) => map_rotation(xyz(obj, path, "rotation")?),
            None => Mat3::identity(),
        };
        let world_pose = pose_from(position, rotation);
        let mut props = PropertySet::new();
        let name = self.allocate(id, &mut props);
        let mut body = SceneBody::new(&name);
        body.properties = props;
        body.pose = parent.inverse().compose(&world_pose);
        let _ = body
            .properties
            .insert(names::SOURCE_ASSET_ID, PropertyValue::Text(asset.to_string()));
        self.keep_other(obj, &OBJECT_KEYS, path, &mut body.properties);

        let file = format!("{asset}.obj");
        check_mesh_reference(&file, self.opts)?;
        let mut gprops = PropertySet::new();
        let gname = self.allocate(&format!("{id}_mesh"), &mut gprops);
        let mut g = SceneGeometry::new(&gname, Shape::Mesh(MeshSource::file(file)));
        g.properties = gprops;
        // Maps Unity mesh coordinates to the scene frame: the reflection S
        // as a z-flip followed by a quarter turn about x.
        g.scale = Vec3::new(1.0, 1.0, -1.0);
        g.pose = pose_from(Vec3::zeros(), Mat3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0));
        body.geometries.push(g);

        if let Some(children) = obj.get("children") {
            let list = children
                .as_array()
                .ok_or_else(|| FormatError::bad(path, "children", &children.to_string()))?;
            for (i, c) in list.iter().enumerate() {
                let child = self.object(c, &format!("{path}.children[{i}]"), &world_pose, depth + 1)?;
                body.children.push(child);
            }
        }
        Ok(body)
    }

    fn room(&mut self, v: &Value, index: usize) -> Result<Option<SceneBody>, FormatError> {
        let path = format!("rooms[{index}]");
        let obj = v
            .as_object()
            .ok_or_else(|| FormatError::bad(&path, "room", &v.to_string()))?;
        let id = obj
            .get("id")
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or(format!("room_{index}"));
        let poly = obj
            .get("floorPolygon")
            .ok_or_else(|| FormatError::missing(&path, "floorPolygon"))?
            .as_array()
            .ok_or_else(|| FormatError::bad(&path, "floorPolygon", "not an array"))?;
        let mut points = Vec::with_capacity(poly.len());
        for (i, p) in poly.iter().enumerate() {
            let at = format!("{path}.floorPolygon[{i}]");
            points.push(map_point(Vec3::new(
                real(p, &at, "x")?,
                real(p, &at, "y")?,
                real(p, &at, "z")?,
            )));
        }
        let mut props = PropertySet::new();
        let name = self.allocate(&format!("{id}_floor"), &mut props);
        let mut body = SceneBody::new(&name);
        body.properties = props;
        self.keep_other(obj, &["id", "floorPolygon"], &path, &mut body.properties);
        if points.len() < 3 {
            return Err(FormatError::bad(&path, "floorPolygon", "fewer than 3 points"));
        }
        let height = points.iter().map(|p| p.z).sum::<f64>() / points.len() as f64;
        let outline: Vec<[f64; 2]> = points.iter().map(|p| [p.x, p.y]).collect();
        let mesh = MeshData::prism(&outline, height - FLOOR_THICKNESS, height);
        let mut gprops = PropertySet::new();
        let gname = self.allocate(&format!("{id}_floor_mesh"), &mut gprops);
        let mut g = SceneGeometry::new(&gname, Shape::Mesh(MeshSource::embedded(mesh)));
        g.properties = gprops;
        body.geometries.push(g);
        Ok(Some(body))
    }
}

/// Imports a ProcTHOR house. `name` becomes the world name.
pub fn import_procthor(text: &str, name: &str, opts: &ImportOptions) -> Result<Imported, FormatError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| FormatError::Json(e.to_string()))?;
    let root = doc
        .as_object()
        .ok_or_else(|| FormatError::Json("top level is not an object".into()))?;
    let list = |key: &str| -> Result<&Vec<Value>, FormatError> {
        root.get(key)
            .ok_or_else(|| FormatError::missing("house", key))?
            .as_array()
            .ok_or_else(|| FormatError::bad("house", key, "not an array"))
    };
    let (rooms, objects) = (list("rooms")?, list("objects")?);
    let mut imp = Importer {
        opts,
        names: NameAllocator::new(),
        provenance: FormatProvenance {
            source_format: SourceFormat::Procthor,
            unmapped_attributes: Vec::new(),
        },
    };
    let mut world = SceneWorld::new(name);
    // Objects claim names before floors so object ids survive unchanged.
    let mut bodies = Vec::new();
    for (i, o) in objects.iter().enumerate() {
        bodies.push(imp.object(o, &format!("objects[{i}]"), &Pose::identity(), 0)?);
    }
    for (i, r) in rooms.iter().enumerate() {
        if let Some(b) = imp.room(r, i)? {
            bodies.push(b);
        }
    }
    for b in bodies {
        world.push_body(b);
    }
    let mut world_props = std::mem::take(&mut world.properties);
    imp.keep_other(root, &["rooms", "objects"], "house", &mut world_props);
    world.properties = world_props;
    let _ = world
        .properties
        .insert(names::GRAVITY, PropertyValue::Vector(Vec3::new(0.0, 0.0, -9.81)));
    let mut diagnostics = Vec::new();
    if root.contains_key("walls") {
        diagnostics.push(Diagnostic::info(
            "procthor-walls",
            "walls are not modelled; kept as procthor:walls",
        ));
    }
    finish_import(&mut world, opts, &mut diagnostics);
    Ok(Imported {
        world,
        provenance: imp.provenance,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::structural_diff;

    const HOUSE: &str = r#"{
      "rooms": [{"id": "room|1", "roomType": "Kitchen",
                 "floorPolygon": [{"x":0,"y":0,"z":0},{"x":4,"y":0,"z":0},{"x":4,"y":0,"z":3},{"x":0,"y":0,"z":3}]}],
      "walls": [{"id": "wall|1"}],
      "objects": [
        {"id": "Fridge|1", "assetId": "Fridge_1", "position": {"x":1,"y":0.5,"z":2},
         "rotation": {"x":0,"y":90,"z":0}, "kinematic": true},
        {"id": "Table|2", "assetId": "Table_3", "position": {"x":2,"y":0.4,"z":1},
         "rotation": {"x":0,"y":0,"z":0},
         "children": [{"id": "Bowl|3", "assetId": "Bowl_1", "position": {"x":2.1,"y":0.8,"z":1},
                       "rotation": {"x":0,"y":0,"z":0}}]}
      ]
    }"#;

    fn opts() -> ImportOptions {
        ImportOptions {
            verify_mesh_paths: false,
            ..Default::default()
        }
    }

    #[test]
    fn objects_become_bodies_in_the_scene_frame() {
        let imp = import_procthor(HOUSE, "house", &opts()).unwrap();
        let w = &imp.world;
        assert_eq!((w.body_count(), w.joint_count()), (4, 0));
        let fridge = w.body("Fridge|1").unwrap();
        assert_eq!(fridge.pose.translation, Vec3::new(1.0, 2.0, 0.5));
        assert_eq!(fridge.properties.text(names::SOURCE_ASSET_ID), Some("Fridge_1"));
        assert_eq!(fridge.properties.text("procthor:kinematic"), Some("true"));
        let bowl = w.body("Bowl|3").unwrap();
        assert!((bowl.pose.translation - Vec3::new(0.1, 0.0, 0.4)).norm() < 1e-12);
        let poses = w.body_world_poses();
        assert!((poses["Bowl|3"].translation - Vec3::new(2.1, 1.0, 0.8)).norm() < 1e-12);
        assert!(w.properties.text("procthor:walls").is_some());
        assert_eq!(imp.provenance.unmapped_attributes.len(), 3);
    }

    #[test]
    fn yaw_about_unity_up_is_yaw_about_z() {
        // A quarter turn about Unity's up axis is left-handed, so in the
        // right-handed scene frame it turns +x towards -y.
        let r = map_rotation(Vec3::new(0.0, 90.0, 0.0));
        assert!((r * Vec3::x() - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_mapping_commutes_with_point_mapping() {
        let e = Vec3::new(20.0, -35.0, 70.0);
        let (x, y, z) = (e.x.to_radians(), e.y.to_radians(), e.z.to_radians());
        let rx = Mat3::new(1.0, 0.0, 0.0, 0.0, x.cos(), -x.sin(), 0.0, x.sin(), x.cos());
        let ry = Mat3::new(y.cos(), 0.0, y.sin(), 0.0, 1.0, 0.0, -y.sin(), 0.0, y.cos());
        let rz = Mat3::new(z.cos(), -z.sin(), 0.0, z.sin(), z.cos(), 0.0, 0.0, 0.0, 1.0);
        let p = Vec3::new(0.3, -1.2, 2.0);
        let unity = ry * rx * rz * p;
        assert!((map_rotation(e) * map_point(p) - map_point(unity)).norm() < 1e-12);
    }

    #[test]
    fn mesh_frame_reproduces_the_axis_swap() {
        let w = import_procthor(HOUSE, "house", &opts()).unwrap().world;
        let g = &w.body("Table|2").unwrap().geometries[0];
        let p = Vec3::new(0.3, 0.7, -0.2);
        let mapped = g.pose.transform_point(&p.component_mul(&g.scale));
        assert!((mapped - map_point(p)).norm() < 1e-12);
    }

    #[test]
    fn floors_are_slabs_at_polygon_height() {
        let w = import_procthor(HOUSE, "house", &opts()).unwrap().world;
        let floor = w.body("room|1_floor").unwrap();
        let Shape::Mesh(src) = &floor.geometries[0].shape else {
            panic!()
        };
        let mesh = src.data.as_ref().unwrap();
        let top = mesh.vertices.iter().map(|v| v.z).fold(f64::MIN, f64::max);
        assert_eq!(top, 0.0);
        assert_eq!(floor.properties.text("procthor:roomType"), Some("\"Kitchen\""));
    }

    #[test]
    fn rejects_missing_keys_and_non_finite_values() {
        let no_asset = r#"{"rooms": [], "objects": [{"id": "a", "position": {"x":0,"y":0,"z":0}}]}"#;
        assert!(matches!(
            import_procthor(no_asset, "h", &opts()),
            Err(FormatError::Missing { .. })
        ));
        let no_objects = r#"{"rooms": []}"#;
        assert!(matches!(
            import_procthor(no_objects, "h", &opts()),
            Err(FormatError::Missing { .. })
        ));
        // JSON has no NaN literal; huge exponents overflow to infinity.
        let inf = r#"{"rooms": [], "objects": [{"id": "a", "assetId": "b", "position": {"x":1e999,"y":0,"z":0}}]}"#;
        assert!(import_procthor(inf, "h", &opts()).is_err());
    }

    #[test]
    fn reimport_is_deterministic() {
        let a = import_procthor(HOUSE, "house", &opts()).unwrap().world;
        let b = import_procthor(HOUSE, "house", &opts()).unwrap().world;
        assert!(structural_diff(&a, &b, &Default::default()).is_empty());
    }
}
