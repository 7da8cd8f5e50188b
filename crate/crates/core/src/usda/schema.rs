//! Attribute names, prim types and API schemas used by the converter, and the
//! encoding of scene properties as attributes.

use crate::scene::{PropertyTriple, PropertyValue};

use super::document::{Attribute, UsdValue};

pub const ROOT_PRIM: &str = "World";
pub const FILE_REFERENCES: &str = "FileReferences";
pub const FILE_REFERENCE_TYPE: &str = "FileReference";
pub const FILE_PATH: &str = "filePath";
pub const MESH_FILE_REL: &str = "scene:meshFile";

pub const TRANSLATE: &str = "xformOp:translate";
pub const ORIENT: &str = "xformOp:orient";
pub const SCALE: &str = "xformOp:scale";
pub const TRANSFORM: &str = "xformOp:transform";
pub const XFORM_OP_ORDER: &str = "xformOpOrder";

pub const MASS: &str = "physics:mass";
pub const CENTER_OF_MASS: &str = "physics:centerOfMass";
pub const DIAGONAL_INERTIA: &str = "physics:diagonalInertia";
pub const PRINCIPAL_AXES: &str = "physics:principalAxes";

pub const BODY0: &str = "physics:body0";
pub const BODY1: &str = "physics:body1";
pub const LOCAL_POS0: &str = "physics:localPos0";
pub const LOCAL_ROT0: &str = "physics:localRot0";
pub const LOCAL_POS1: &str = "physics:localPos1";
pub const LOCAL_ROT1: &str = "physics:localRot1";
pub const AXIS: &str = "physics:axis";
pub const AXIS_VECTOR: &str = "sceneJoint:axis";
pub const LOWER_LIMIT: &str = "physics:lowerLimit";
pub const UPPER_LIMIT: &str = "physics:upperLimit";

pub const MATERIAL_TRIPLES: &str = "material:triples";
pub const DISPLAY_COLOR: &str = "primvars:displayColor";
pub const DISPLAY_OPACITY: &str = "primvars:displayOpacity";
pub const UVS: &str = "primvars:st";
pub const VISIBILITY: &str = "visibility";

pub const SEMANTIC_LABELS: &str = "semanticTag:semanticLabels";
pub const SEMANTIC_REPORTS: &str = "semanticTag:semanticReports";

pub const RIGID_BODY_API: &str = "PhysicsRigidBodyAPI";
pub const MASS_API: &str = "PhysicsMassAPI";
pub const COLLISION_API: &str = "PhysicsCollisionAPI";
pub const MATERIAL_API: &str = "SceneMaterialAPI";
pub const SEMANTIC_TAG_API: &str = "SemanticTagAPI";

pub const JOINT_TYPES: [(&str, crate::scene::JointType); 4] = [
    ("PhysicsFixedJoint", crate::scene::JointType::Fixed),
    ("PhysicsRevoluteJoint", crate::scene::JointType::Revolute),
    ("PhysicsPrismaticJoint", crate::scene::JointType::Prismatic),
    ("PhysicsSphericalJoint", crate::scene::JointType::Spherical),
];

pub fn joint_prim_type(t: crate::scene::JointType) -> &'static str {
    JOINT_TYPES
        .iter()
        .find(|(_, jt)| *jt == t)
        .expect("all joint types mapped")
        .0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    World,
    Body,
    Joint,
    Geom,
}

/// API schema advertising the properties under `namespace` on this element kind.
pub fn api_schema_for(namespace: &str, kind: ElementKind) -> Option<String> {
    let fixed = match namespace {
        "scene" => Some("ScenePropertiesAPI"),
        "source" => Some("SourceAPI"),
        "limits" => Some("JointLimitsAPI"),
        "dynamics" => Some("JointDynamicsAPI"),
        "refine" => Some("RefinementAPI"),
        "semanticTag" => Some(SEMANTIC_TAG_API),
        _ => None,
    };
    if let Some(f) = fixed {
        return Some(f.to_string());
    }
    let format = match namespace {
        "urdf" => "Urdf",
        "mjcf" => "Mjcf",
        "sdf" => "Sdf",
        "procthor" => "Procthor",
        _ => return None,
    };
    let suffix = match kind {
        ElementKind::World => "World",
        ElementKind::Body => "Body",
        ElementKind::Joint => "Joint",
        ElementKind::Geom => "Geom",
    };
    Some(format!("{format}{suffix}API"))
}

/// Whether `schema` is one the converter emits itself.
pub fn is_generated_schema(schema: &str) -> bool {
    const FIXED: [&str; 11] = [
        RIGID_BODY_API,
        MASS_API,
        COLLISION_API,
        MATERIAL_API,
        SEMANTIC_TAG_API,
        "ScenePropertiesAPI",
        "SourceAPI",
        "JointLimitsAPI",
        "JointDynamicsAPI",
        "RefinementAPI",
        "ScenePassthroughAPI",
    ];
    if FIXED.contains(&schema) {
        return true;
    }
    ["Urdf", "Mjcf", "Sdf", "Procthor"].iter().any(|f| {
        ["World", "Body", "Joint", "Geom"]
            .iter()
            .any(|k| schema == format!("{f}{k}API"))
    })
}

/// Attribute name for a scene property; bare names go under `scene:`.
pub fn attribute_name(property: &str) -> String {
    if property.contains(':') {
        property.to_string()
    } else {
        format!("scene:{property}")
    }
}

pub fn property_name(attribute: &str) -> String {
    attribute
        .strip_prefix("scene:")
        .filter(|rest| !rest.contains(':'))
        .unwrap_or(attribute)
        .to_string()
}

pub fn flatten_triples(triples: &[PropertyTriple]) -> UsdValue {
    UsdValue::strings(
        triples
            .iter()
            .flat_map(|t| [t.subject.clone(), t.predicate.clone(), t.object.clone()]),
    )
}

pub fn unflatten_triples(v: &UsdValue) -> Option<Vec<PropertyTriple>> {
    let flat = v.as_strings()?;
    if flat.len() % 3 != 0 {
        return None;
    }
    Some(
        flat.chunks(3)
            .map(|c| PropertyTriple::new(&c[0], &c[1], &c[2]))
            .collect(),
    )
}

pub fn encode_property(value: &PropertyValue) -> Attribute {
    match value {
        PropertyValue::Bool(b) => Attribute::new("bool", UsdValue::Ident(b.to_string())),
        PropertyValue::Int(i) => Attribute::new("int64", UsdValue::int(*i)),
        PropertyValue::Real(r) => Attribute::new("double", UsdValue::num(*r)),
        PropertyValue::Text(s) => Attribute::new("string", UsdValue::string(s.clone())),
        PropertyValue::Vector(v) => Attribute::new("double3", UsdValue::vec3(v)),
        PropertyValue::Quaternion(q) => Attribute::new("quatd", UsdValue::quat(q)),
        PropertyValue::Matrix(m) => Attribute::new("matrix3d", UsdValue::matrix3(m)),
        PropertyValue::Reference(r) => Attribute::new("asset", UsdValue::Asset(r.clone())),
        PropertyValue::TextList(l) => Attribute::new("string[]", UsdValue::strings(l.clone())),
        PropertyValue::Triples(t) => Attribute::new("string[]", flatten_triples(t)),
    }
}

/// Decodes an attribute into a property value; `None` if the type has no mapping.
pub fn decode_property(name: &str, attr: &Attribute) -> Option<PropertyValue> {
    let v = attr.value.as_ref()?;
    let base = attr.type_name.as_str();
    Some(match base {
        "bool" => PropertyValue::Bool(v.as_bool()?),
        "int" | "int64" | "uint" | "uint64" | "uchar" => PropertyValue::Int(v.as_i64()?),
        "double" | "float" | "half" => PropertyValue::Real(v.as_f64()?),
        "string" | "token" => PropertyValue::Text(v.as_str()?.to_string()),
        "double3" | "float3" | "half3" | "vector3d" | "vector3f" | "point3d" | "point3f" | "normal3d" | "normal3f"
        | "color3d" | "color3f" => PropertyValue::Vector(v.as_vec3()?),
        "quatd" | "quatf" | "quath" => PropertyValue::Quaternion(v.as_quat()?),
        "matrix3d" => PropertyValue::Matrix(v.as_matrix3()?),
        "asset" => PropertyValue::Reference(v.as_str()?.to_string()),
        "string[]" | "token[]" => {
            let registered = crate::scene::property::registered_kind(name);
            if name.ends_with(":triples") || registered == Some(crate::scene::ValueKind::Triples) {
                PropertyValue::Triples(unflatten_triples(v)?)
            } else {
                PropertyValue::TextList(v.as_strings()?)
            }
        }
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;

    #[test]
    fn property_round_trip() {
        let values = [
            PropertyValue::Bool(true),
            PropertyValue::Int(-3),
            PropertyValue::Real(0.1),
            PropertyValue::Text("a \"b\"".into()),
            PropertyValue::Vector(Vec3::new(1.0, 2.0, 3.0)),
            PropertyValue::TextList(vec!["x".into(), "y".into()]),
            PropertyValue::Reference("meshes/a.obj".into()),
        ];
        for v in values {
            let attr = encode_property(&v);
            assert_eq!(decode_property("test:x", &attr), Some(v));
        }
        let t = PropertyValue::Triples(vec![PropertyTriple::new("a", "b", "c")]);
        assert_eq!(decode_property("test:triples", &encode_property(&t)), Some(t));
    }

    #[test]
    fn names() {
        assert_eq!(attribute_name("gravity"), "scene:gravity");
        assert_eq!(attribute_name("urdf:foo"), "urdf:foo");
        assert_eq!(property_name("scene:gravity"), "gravity");
        assert_eq!(property_name("urdf:foo"), "urdf:foo");
        assert_eq!(api_schema_for("mjcf", ElementKind::Joint).unwrap(), "MjcfJointAPI");
        assert!(is_generated_schema("MjcfJointAPI"));
        assert!(!is_generated_schema("MaterialBindingAPI"));
    }
}
