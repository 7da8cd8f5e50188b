//! In-memory form of a text USD layer.
//!
//! The model is deliberately syntactic: numbers keep their source text, so a
//! parsed layer re-emits byte-for-byte and `parse(emit(stage)) == stage`.
//! Properties are kept sorted by name.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Quaternion, UnitQuaternion};

use crate::math::{Mat3, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub enum UsdValue {
    /// Numeric literal as written.
    Number(String),
    Str(String),
    /// Bare word such as `true`, `None` or `inf`.
    Ident(String),
    /// `</World/body>`
    Path(String),
    /// `@file.obj@`
    Asset(String),
    Tuple(Vec<UsdValue>),
    List(Vec<UsdValue>),
    Dict(Vec<DictEntry>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DictEntry {
    pub type_name: String,
    pub key: String,
    pub value: UsdValue,
}

/// Shortest text that parses back to exactly `v`.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let s = format!("{v:?}");
    match s.strip_suffix(".0") {
        Some(int) => int.to_string(),
        None => s,
    }
}

impl UsdValue {
    pub fn num(v: f64) -> Self {
        UsdValue::Number(format_f64(v))
    }

    pub fn int(v: i64) -> Self {
        UsdValue::Number(v.to_string())
    }

    pub fn string(s: impl Into<String>) -> Self {
        UsdValue::Str(s.into())
    }

    pub fn vec3(v: &Vec3) -> Self {
        UsdValue::Tuple(v.iter().map(|c| Self::num(*c)).collect())
    }

    /// Scalar-first `(w, x, y, z)`.
    pub fn quat(q: &UnitQuaternion<f64>) -> Self {
        let q = q.quaternion();
        UsdValue::Tuple([q.w, q.i, q.j, q.k].iter().map(|c| Self::num(*c)).collect())
    }

    pub fn matrix3(m: &Mat3) -> Self {
        UsdValue::Tuple(
            (0..3)
                .map(|r| UsdValue::Tuple((0..3).map(|c| Self::num(m[(r, c)])).collect()))
                .collect(),
        )
    }

    pub fn strings<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        UsdValue::List(items.into_iter().map(|s| UsdValue::Str(s.into())).collect())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            UsdValue::Number(s) => s.parse().ok(),
            UsdValue::Ident(s) => match s.as_str() {
                "inf" => Some(f64::INFINITY),
                "-inf" => Some(f64::NEG_INFINITY),
                "nan" => Some(f64::NAN),
                "true" => Some(1.0),
                "false" => Some(0.0),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            UsdValue::Number(s) => s.parse().ok(),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            UsdValue::Ident(s) if s == "true" => Some(true),
            UsdValue::Ident(s) if s == "false" => Some(false),
            UsdValue::Number(s) if s == "1" => Some(true),
            UsdValue::Number(s) if s == "0" => Some(false),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            UsdValue::Str(s) | UsdValue::Asset(s) | UsdValue::Path(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[UsdValue]> {
        match self {
            UsdValue::List(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_tuple(&self) -> Option<&[UsdValue]> {
        match self {
            UsdValue::Tuple(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_f64s(&self) -> Option<Vec<f64>> {
        match self {
            UsdValue::Tuple(v) | UsdValue::List(v) => v.iter().map(UsdValue::as_f64).collect(),
            _ => None,
        }
    }

    pub fn as_vec3(&self) -> Option<Vec3> {
        let v = self.as_tuple()?;
        if v.len() != 3 {
            return None;
        }
        Some(Vec3::new(v[0].as_f64()?, v[1].as_f64()?, v[2].as_f64()?))
    }

    pub fn as_quat(&self) -> Option<UnitQuaternion<f64>> {
        let v = self.as_tuple()?;
        if v.len() != 4 {
            return None;
        }
        let q = Quaternion::new(v[0].as_f64()?, v[1].as_f64()?, v[2].as_f64()?, v[3].as_f64()?);
        Some(UnitQuaternion::from_quaternion(q))
    }

    pub fn as_matrix3(&self) -> Option<Mat3> {
        let rows = self.as_tuple()?;
        if rows.len() != 3 {
            return None;
        }
        let mut m = Mat3::zeros();
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_vec3()?;
            for c in 0..3 {
                m[(r, c)] = row[c];
            }
        }
        Some(m)
    }

    pub fn as_strings(&self) -> Option<Vec<String>> {
        self.as_list()?.iter().map(|v| v.as_str().map(str::to_string)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Specifier {
    Def,
    Over,
    Class,
}

impl Specifier {
    pub fn keyword(&self) -> &'static str {
        match self {
            Specifier::Def => "def",
            Specifier::Over => "over",
            Specifier::Class => "class",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ListOp {
    Explicit,
    Prepend,
    Append,
    Add,
    Delete,
}

impl ListOp {
    pub fn keyword(&self) -> Option<&'static str> {
        match self {
            ListOp::Explicit => None,
            ListOp::Prepend => Some("prepend"),
            ListOp::Append => Some("append"),
            ListOp::Add => Some("add"),
            ListOp::Delete => Some("delete"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetadataEntry {
    pub op: ListOp,
    pub key: String,
    pub value: UsdValue,
}

impl MetadataEntry {
    pub fn new(key: &str, value: UsdValue) -> Self {
        Self {
            op: ListOp::Explicit,
            key: key.to_string(),
            value,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Attribute {
    /// Value type such as `double3` or `string[]`.
    pub type_name: String,
    pub custom: bool,
    pub uniform: bool,
    pub value: Option<UsdValue>,
    pub metadata: Vec<MetadataEntry>,
}

impl Attribute {
    pub fn new(type_name: &str, value: UsdValue) -> Self {
        Self {
            type_name: type_name.to_string(),
            custom: false,
            uniform: false,
            value: Some(value),
            metadata: Vec::new(),
        }
    }

    pub fn uniform(mut self) -> Self {
        self.uniform = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Property {
    Attribute(Attribute),
    Relationship {
        custom: bool,
        /// `None` for a declaration without assignment.
        targets: Option<Vec<String>>,
        metadata: Vec<MetadataEntry>,
    },
}

impl Property {
    pub fn relationship(targets: Vec<String>) -> Self {
        Property::Relationship {
            custom: false,
            targets: Some(targets),
            metadata: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UsdaPrim {
    pub specifier: Specifier,
    pub type_name: Option<String>,
    pub name: String,
    pub metadata: Vec<MetadataEntry>,
    pub properties: BTreeMap<String, Property>,
    pub children: Vec<UsdaPrim>,
}

impl UsdaPrim {
    pub fn new(specifier: Specifier, type_name: Option<&str>, name: &str) -> Self {
        Self {
            specifier,
            type_name: type_name.map(str::to_string),
            name: name.to_string(),
            metadata: Vec::new(),
            properties: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    pub fn def(type_name: &str, name: &str) -> Self {
        Self::new(Specifier::Def, Some(type_name), name)
    }

    pub fn over(name: &str) -> Self {
        Self::new(Specifier::Over, None, name)
    }

    pub fn type_name(&self) -> &str {
        self.type_name.as_deref().unwrap_or("")
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        match self.properties.get(name)? {
            Property::Attribute(a) => Some(a),
            _ => None,
        }
    }

    pub fn value(&self, name: &str) -> Option<&UsdValue> {
        self.attribute(name)?.value.as_ref()
    }

    pub fn set(&mut self, name: &str, attr: Attribute) {
        self.properties.insert(name.to_string(), Property::Attribute(attr));
    }

    pub fn set_value(&mut self, name: &str, type_name: &str, value: UsdValue) {
        self.set(name, Attribute::new(type_name, value));
    }

    pub fn set_relationship(&mut self, name: &str, targets: Vec<String>) {
        self.properties
            .insert(name.to_string(), Property::relationship(targets));
    }

    pub fn targets(&self, name: &str) -> Option<&[String]> {
        match self.properties.get(name)? {
            Property::Relationship { targets: Some(t), .. } => Some(t),
            _ => None,
        }
    }

    pub fn metadata(&self, key: &str) -> Option<&UsdValue> {
        self.metadata.iter().find(|m| m.key == key).map(|m| &m.value)
    }

    pub fn set_metadata(&mut self, key: &str, value: UsdValue) {
        match self.metadata.iter_mut().find(|m| m.key == key) {
            Some(m) => m.value = value,
            None => self.metadata.push(MetadataEntry::new(key, value)),
        }
    }

    pub fn display_name(&self) -> Option<&str> {
        self.metadata("displayName").and_then(UsdValue::as_str)
    }

    /// Applied API schemas from every `apiSchemas` list-op, in order.
    pub fn api_schemas(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for m in self.metadata.iter().filter(|m| m.key == "apiSchemas") {
            let items = m.value.as_strings().unwrap_or_default();
            match m.op {
                ListOp::Delete => out.retain(|s| !items.contains(s)),
                ListOp::Prepend => {
                    let mut merged = items;
                    merged.extend(out.into_iter());
                    out = merged;
                }
                _ => out.extend(items),
            }
        }
        let mut seen = std::collections::HashSet::new();
        out.retain(|s| seen.insert(s.clone()));
        out
    }

    pub fn has_api(&self, schema: &str) -> bool {
        self.api_schemas().iter().any(|s| s == schema)
    }

    /// Adds `schemas` to the prepended `apiSchemas` list (keeping it sorted and unique).
    pub fn add_api_schemas<'a>(&mut self, schemas: impl IntoIterator<Item = &'a str>) {
        let mut schemas = schemas.into_iter().peekable();
        if schemas.peek().is_none() {
            return;
        }
        let idx = match self
            .metadata
            .iter()
            .position(|m| m.key == "apiSchemas" && m.op == ListOp::Prepend)
        {
            Some(i) => i,
            None => {
                self.metadata.insert(
                    0,
                    MetadataEntry {
                        op: ListOp::Prepend,
                        key: "apiSchemas".into(),
                        value: UsdValue::List(Vec::new()),
                    },
                );
                0
            }
        };
        let mut current = self.metadata[idx].value.as_strings().unwrap_or_default();
        current.extend(schemas.map(str::to_string));
        current.sort();
        current.dedup();
        self.metadata[idx].value = UsdValue::strings(current);
    }

    pub fn child(&self, name: &str) -> Option<&UsdaPrim> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn child_mut(&mut self, name: &str) -> Option<&mut UsdaPrim> {
        self.children.iter_mut().find(|c| c.name == name)
    }

    /// Number of prims in this subtree, including `self`.
    pub fn prim_count(&self) -> usize {
        1 + self.children.iter().map(UsdaPrim::prim_count).sum::<usize>()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UsdaStage {
    pub metadata: Vec<MetadataEntry>,
    pub prims: Vec<UsdaPrim>,
}

impl UsdaStage {
    pub fn metadata(&self, key: &str) -> Option<&UsdValue> {
        self.metadata.iter().find(|m| m.key == key).map(|m| &m.value)
    }

    pub fn set_metadata(&mut self, key: &str, value: UsdValue) {
        match self.metadata.iter_mut().find(|m| m.key == key) {
            Some(m) => m.value = value,
            None => self.metadata.push(MetadataEntry::new(key, value)),
        }
    }

    pub fn default_prim(&self) -> Option<&str> {
        self.metadata("defaultPrim").and_then(UsdValue::as_str)
    }

    pub fn sublayers(&self) -> Vec<String> {
        self.metadata("subLayers")
            .and_then(UsdValue::as_list)
            .map(|l| l.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
            .unwrap_or_default()
    }

    /// Looks up `/A/B/C`.
    pub fn prim_at_path(&self, path: &str) -> Option<&UsdaPrim> {
        let mut parts = path.trim_start_matches('/').split('/');
        let first = parts.next()?;
        let mut prim = self.prims.iter().find(|p| p.name == first)?;
        for part in parts {
            prim = prim.child(part)?;
        }
        Some(prim)
    }

    pub fn prim_at_path_mut(&mut self, path: &str) -> Option<&mut UsdaPrim> {
        let mut parts = path.trim_start_matches('/').split('/');
        let first = parts.next()?;
        let mut prim = self.prims.iter_mut().find(|p| p.name == first)?;
        for part in parts {
            prim = prim.child_mut(part)?;
        }
        Some(prim)
    }

    /// Every prim with its absolute path, depth-first pre-order.
    pub fn walk(&self) -> Vec<(String, &UsdaPrim)> {
        fn go<'a>(p: &'a UsdaPrim, prefix: &str, out: &mut Vec<(String, &'a UsdaPrim)>) {
            let path = format!("{prefix}/{}", p.name);
            out.push((path.clone(), p));
            for c in &p.children {
                go(c, &path, out);
            }
        }
        let mut out = Vec::new();
        for p in &self.prims {
            go(p, "", &mut out);
        }
        out
    }

    pub fn prim_count(&self) -> usize {
        self.prims.iter().map(UsdaPrim::prim_count).sum()
    }
}

impl fmt::Display for UsdaStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::writer::emit(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_float_text_round_trips() {
        for v in [0.1, 1.0, -2.5, 1e-7, 123456789.125, 1.0 / 3.0, f64::MIN_POSITIVE] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_f64(1.0), "1");
        assert_eq!(format_f64(-0.0), "-0");
    }

    #[test]
    fn api_schema_list_ops_compose() {
        let mut p = UsdaPrim::def("Xform", "a");
        p.add_api_schemas(["B", "A"]);
        p.metadata.push(MetadataEntry {
            op: ListOp::Append,
            key: "apiSchemas".into(),
            value: UsdValue::strings(["C"]),
        });
        assert_eq!(p.api_schemas(), vec!["A", "B", "C"]);
        p.metadata.push(MetadataEntry {
            op: ListOp::Delete,
            key: "apiSchemas".into(),
            value: UsdValue::strings(["B"]),
        });
        assert_eq!(p.api_schemas(), vec!["A", "C"]);
    }
}
