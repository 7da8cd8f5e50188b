//! Named, typed properties attached to worlds, bodies, joints and geometries.
//!
//! Every property name has exactly one value kind for the lifetime of the
//! process. Well-known names are pre-registered; any other name is registered
//! with the kind of the first value stored under it.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{OnceLock, RwLock};

use nalgebra::UnitQuaternion;
use thiserror::Error;

use crate::math::{Mat3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ValueKind {
    Bool,
    Int,
    Real,
    Text,
    Vector,
    Quaternion,
    Matrix,
    Reference,
    TextList,
    Triples,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::Bool => "bool",
            ValueKind::Int => "int",
            ValueKind::Real => "real",
            ValueKind::Text => "text",
            ValueKind::Vector => "vector3",
            ValueKind::Quaternion => "quaternion",
            ValueKind::Matrix => "matrix3",
            ValueKind::Reference => "reference",
            ValueKind::TextList => "text list",
            ValueKind::Triples => "triples",
        };
        f.write_str(s)
    }
}

/// `(subject, predicate, object)` strings, used for geometry materials.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PropertyTriple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl PropertyTriple {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Self {
        Self {
            subject: subject.to_string(),
            predicate: predicate.to_string(),
            object: object.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PropertyValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Text(String),
    Vector(Vec3),
    Quaternion(UnitQuaternion<f64>),
    Matrix(Mat3),
    /// File path or prim path reference.
    Reference(String),
    TextList(Vec<String>),
    Triples(Vec<PropertyTriple>),
}

impl PropertyValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            PropertyValue::Bool(_) => ValueKind::Bool,
            PropertyValue::Int(_) => ValueKind::Int,
            PropertyValue::Real(_) => ValueKind::Real,
            PropertyValue::Text(_) => ValueKind::Text,
            PropertyValue::Vector(_) => ValueKind::Vector,
            PropertyValue::Quaternion(_) => ValueKind::Quaternion,
            PropertyValue::Matrix(_) => ValueKind::Matrix,
            PropertyValue::Reference(_) => ValueKind::Reference,
            PropertyValue::TextList(_) => ValueKind::TextList,
            PropertyValue::Triples(_) => ValueKind::Triples,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            PropertyValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            PropertyValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            PropertyValue::Real(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text_list(&self) -> Option<&[String]> {
        match self {
            PropertyValue::TextList(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<Vec3> {
        match self {
            PropertyValue::Vector(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropertyError {
    #[error("property `{name}` is registered as {registered}, got {given}")]
    KindMismatch {
        name: String,
        registered: ValueKind,
        given: ValueKind,
    },
    #[error("property name must not be empty")]
    EmptyName,
}

/// Well-known property names and their kinds.
pub mod names {
    pub const GRAVITY: &str = "gravity";
    pub const LIGHT_INTENSITY: &str = "light_intensity";
    pub const SOURCE_NAME: &str = "source:name";
    pub const SOURCE_ASSET_ID: &str = "source:assetId";
    pub const LIMITS_UNBOUNDED: &str = "limits:unbounded";
    pub const LIMITS_EFFORT: &str = "limits:effort";
    pub const LIMITS_VELOCITY: &str = "limits:velocity";
    pub const DYNAMICS_DAMPING: &str = "dynamics:damping";
    pub const DYNAMICS_FRICTION: &str = "dynamics:friction";
    pub const NEEDS_DECOMPOSITION: &str = "refine:needs_convex_decomposition";
    pub const CONSOLIDATED_INTO: &str = "refine:consolidated_into";
    /// Raw USDA text for attributes and prims the converter does not interpret.
    pub const USD_PASSTHROUGH: &str = "usd:passthrough";
    /// API schemas applied in a source stage that the converter does not generate.
    pub const USD_API_SCHEMAS: &str = "usd:apiSchemas";
}

const BUILTIN: &[(&str, ValueKind)] = &[
    (names::GRAVITY, ValueKind::Vector),
    (names::LIGHT_INTENSITY, ValueKind::Real),
    (names::SOURCE_NAME, ValueKind::Text),
    (names::SOURCE_ASSET_ID, ValueKind::Text),
    (names::LIMITS_UNBOUNDED, ValueKind::Bool),
    (names::LIMITS_EFFORT, ValueKind::Real),
    (names::LIMITS_VELOCITY, ValueKind::Real),
    (names::DYNAMICS_DAMPING, ValueKind::Real),
    (names::DYNAMICS_FRICTION, ValueKind::Real),
    (names::NEEDS_DECOMPOSITION, ValueKind::Bool),
    (names::CONSOLIDATED_INTO, ValueKind::Text),
    (names::USD_PASSTHROUGH, ValueKind::Text),
    (names::USD_API_SCHEMAS, ValueKind::TextList),
];

fn registry() -> &'static RwLock<HashMap<String, ValueKind>> {
    static REGISTRY: OnceLock<RwLock<HashMap<String, ValueKind>>> = OnceLock::new();
    REGISTRY.get_or_init(|| RwLock::new(BUILTIN.iter().map(|(n, k)| (n.to_string(), *k)).collect()))
}

/// Registers `name` with `kind`, or checks it against the frozen kind.
pub fn register_property(name: &str, kind: ValueKind) -> Result<(), PropertyError> {
    if name.is_empty() {
        return Err(PropertyError::EmptyName);
    }
    if let Some(existing) = registered_kind(name) {
        return check(name, existing, kind);
    }
    let mut reg = registry().write().expect("property registry poisoned");
    let existing = *reg.entry(name.to_string()).or_insert(kind);
    check(name, existing, kind)
}

fn check(name: &str, registered: ValueKind, given: ValueKind) -> Result<(), PropertyError> {
    if registered == given {
        Ok(())
    } else {
        Err(PropertyError::KindMismatch {
            name: name.to_string(),
            registered,
            given,
        })
    }
}

pub fn registered_kind(name: &str) -> Option<ValueKind> {
    registry()
        .read()
        .expect("property registry poisoned")
        .get(name)
        .copied()
}

/// Ordered map from property name to typed value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PropertySet {
    entries: BTreeMap<String, PropertyValue>,
}

impl PropertySet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces a value, enforcing the registered kind.
    pub fn insert(&mut self, name: &str, value: PropertyValue) -> Result<Option<PropertyValue>, PropertyError> {
        register_property(name, value.kind())?;
        Ok(self.entries.insert(name.to_string(), value))
    }

    /// Convenience for provenance strings, which are always `Text`.
    pub fn insert_text(&mut self, name: &str, value: impl Into<String>) -> Result<(), PropertyError> {
        self.insert(name, PropertyValue::Text(value.into())).map(|_| ())
    }

    pub fn get(&self, name: &str) -> Option<&PropertyValue> {
        self.entries.get(name)
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        self.get(name).and_then(PropertyValue::as_text)
    }

    pub fn flag(&self, name: &str) -> bool {
        self.get(name).and_then(PropertyValue::as_bool).unwrap_or(false)
    }

    pub fn remove(&mut self, name: &str) -> Option<PropertyValue> {
        self.entries.remove(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&str, &PropertyValue) -> bool) {
        self.entries.retain(|k, v| keep(k, v));
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &PropertyValue)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Entries whose name starts with `prefix:`; yields the part after the colon.
    pub fn with_namespace<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a PropertyValue)> + 'a {
        self.entries.iter().filter_map(move |(k, v)| {
            k.strip_prefix(prefix)
                .and_then(|rest| rest.strip_prefix(':'))
                .map(|rest| (rest, v))
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_frozen_at_first_registration() {
        let mut set = PropertySet::new();
        set.insert("test:frozen_kind", PropertyValue::Real(1.0)).unwrap();
        let err = set
            .insert("test:frozen_kind", PropertyValue::Text("x".into()))
            .unwrap_err();
        assert!(matches!(err, PropertyError::KindMismatch { .. }));
        assert_eq!(set.get("test:frozen_kind"), Some(&PropertyValue::Real(1.0)));
    }

    #[test]
    fn builtin_kinds_enforced() {
        let mut set = PropertySet::new();
        assert!(set.insert(names::GRAVITY, PropertyValue::Real(9.81)).is_err());
        assert!(set
            .insert(names::GRAVITY, PropertyValue::Vector(Vec3::new(0.0, 0.0, -9.81)))
            .is_ok());
    }

    #[test]
    fn names_are_unique_within_a_set() {
        let mut set = PropertySet::new();
        set.insert_text("test:dup", "a").unwrap();
        set.insert_text("test:dup", "b").unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.text("test:dup"), Some("b"));
    }

    #[test]
    fn namespace_iteration() {
        let mut set = PropertySet::new();
        set.insert_text("mjcf:armature", "0.1").unwrap();
        set.insert_text("urdf:foo", "x").unwrap();
        let got: Vec<_> = set.with_namespace("mjcf").map(|(k, _)| k).collect();
        assert_eq!(got, vec!["armature"]);
    }
}
