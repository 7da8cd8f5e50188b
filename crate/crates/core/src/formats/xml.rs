//! Small XML writer plus reading helpers over `roxmltree`.

use roxmltree::Node;

use crate::math::{Pose, Vec3};
use crate::usda::format_f64;

use super::FormatError;

#[derive(Clone, Debug)]
pub enum XmlNode {
    Element(XmlElement),
    Text(String),
    /// Verbatim markup, written on its own line.
    Raw(String),
}

#[derive(Clone, Debug)]
pub struct XmlElement {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<XmlNode>,
}

impl XmlElement {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            attrs: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn attr(mut self, key: &str, value: impl Into<String>) -> Self {
        self.set(key, value);
        self
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.attrs.iter_mut().find(|(k, _)| k == key) {
            Some((_, v)) => *v = value,
            None => self.attrs.push((key.to_string(), value)),
        }
    }

    pub fn has_attr(&self, key: &str) -> bool {
        self.attrs.iter().any(|(k, _)| k == key)
    }

    pub fn child(mut self, e: XmlElement) -> Self {
        self.children.push(XmlNode::Element(e));
        self
    }

    pub fn push(&mut self, e: XmlElement) {
        self.children.push(XmlNode::Element(e));
    }

    pub fn push_raw(&mut self, raw: &str) {
        if !raw.trim().is_empty() {
            self.children.push(XmlNode::Raw(raw.trim().to_string()));
        }
    }

    /// `<name>text</name>`
    pub fn text_child(mut self, name: &str, text: impl Into<String>) -> Self {
        let mut e = XmlElement::new(name);
        e.children.push(XmlNode::Text(text.into()));
        self.children.push(XmlNode::Element(e));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty() && self.children.is_empty()
    }

    fn write(&self, out: &mut String, level: usize) {
        let pad = "  ".repeat(level);
        out.push_str(&pad);
        out.push('<');
        out.push_str(&self.name);
        for (k, v) in &self.attrs {
            out.push(' ');
            out.push_str(k);
            out.push_str("=\"");
            out.push_str(&escape(v));
            out.push('"');
        }
        if self.children.is_empty() {
            out.push_str("/>\n");
            return;
        }
        if let [XmlNode::Text(t)] = self.children.as_slice() {
            out.push('>');
            out.push_str(&escape(t));
            out.push_str("</");
            out.push_str(&self.name);
            out.push_str(">\n");
            return;
        }
        out.push_str(">\n");
        for c in &self.children {
            match c {
                XmlNode::Element(e) => e.write(out, level + 1),
                XmlNode::Text(t) => {
                    out.push_str(&pad);
                    out.push_str("  ");
                    out.push_str(&escape(t));
                    out.push('\n');
                }
                XmlNode::Raw(r) => {
                    out.push_str(&pad);
                    out.push_str("  ");
                    out.push_str(r);
                    out.push('\n');
                }
            }
        }
        out.push_str(&pad);
        out.push_str("</");
        out.push_str(&self.name);
        out.push_str(">\n");
    }
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

pub fn document(root: &XmlElement) -> String {
    let mut out = String::from("<?xml version=\"1.0\"?>\n");
    root.write(&mut out, 0);
    out
}

pub fn fmt_f64(v: f64) -> String {
    format_f64(v)
}

pub fn fmt_floats(vals: &[f64]) -> String {
    vals.iter().map(|v| format_f64(*v)).collect::<Vec<_>>().join(" ")
}

pub fn fmt_vec3(v: &Vec3) -> String {
    fmt_floats(&[v.x, v.y, v.z])
}

pub fn parse_document(text: &str) -> Result<roxmltree::Document<'_>, FormatError> {
    let opts = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    roxmltree::Document::parse_with_options(text, opts).map_err(|e| FormatError::Xml(e.to_string()))
}

/// Human-readable locator for error messages, e.g. `<joint name="j1">`.
pub fn describe(node: Node) -> String {
    match node.attribute("name") {
        Some(n) => format!("<{} name=\"{n}\">", node.tag_name().name()),
        None => format!("<{}>", node.tag_name().name()),
    }
}

pub fn parse_floats(node: Node, attr: &str, text: &str) -> Result<Vec<f64>, FormatError> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| !v.is_nan())
                .ok_or_else(|| FormatError::bad(&describe(node), attr, text))
        })
        .collect()
}

pub fn floats_n<const N: usize>(node: Node, attr: &str, text: &str) -> Result<[f64; N], FormatError> {
    let v = parse_floats(node, attr, text)?;
    v.try_into().map_err(|_| FormatError::bad(&describe(node), attr, text))
}

pub fn attr_f64(node: Node, attr: &str) -> Result<Option<f64>, FormatError> {
    match node.attribute(attr) {
        None => Ok(None),
        Some(t) => Ok(Some(floats_n::<1>(node, attr, t)?[0])),
    }
}

pub fn attr_vec3(node: Node, attr: &str) -> Result<Option<Vec3>, FormatError> {
    match node.attribute(attr) {
        None => Ok(None),
        Some(t) => {
            let [x, y, z] = floats_n::<3>(node, attr, t)?;
            Ok(Some(Vec3::new(x, y, z)))
        }
    }
}

pub fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == tag)
}

pub fn children<'a, 'i>(node: Node<'a, 'i>, tag: &'a str) -> impl Iterator<Item = Node<'a, 'i>> + 'a {
    node.children()
        .filter(move |c| c.is_element() && c.tag_name().name() == tag)
}

pub fn child_text<'a>(node: Node<'a, '_>, tag: &str) -> Option<&'a str> {
    child(node, tag).map(|c| c.text().unwrap_or("").trim())
}

pub fn child_f64(node: Node, tag: &str) -> Result<Option<f64>, FormatError> {
    match child(node, tag) {
        None => Ok(None),
        Some(c) => Ok(Some(floats_n::<1>(c, tag, c.text().unwrap_or("").trim())?[0])),
    }
}

/// Parses a `true`/`false`/`1`/`0` flag.
pub fn parse_bool(node: Node, attr: &str, text: &str) -> Result<bool, FormatError> {
    match text.trim() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(FormatError::bad(&describe(node), attr, text)),
    }
}

/// URDF/SDF style `xyz rpy` pose.
pub fn xyz_rpy_pose(xyz: [f64; 3], rpy: [f64; 3]) -> Pose {
    Pose::from_xyz_rpy(xyz, rpy)
}

/// Source text of `node`, used to keep unmapped elements verbatim.
pub fn raw<'i>(node: Node<'_, 'i>, source: &'i str) -> &'i str {
    &source[node.range()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writer_escapes_and_nests() {
        let root = XmlElement::new("robot")
            .attr("name", "a&b")
            .child(XmlElement::new("link").attr("name", "x"))
            .text_child("note", "1 < 2");
        let text = document(&root);
        assert_eq!(
            text,
            "<?xml version=\"1.0\"?>\n<robot name=\"a&amp;b\">\n  <link name=\"x\"/>\n  <note>1 &lt; 2</note>\n</robot>\n"
        );
        let doc = parse_document(&text).unwrap();
        assert_eq!(doc.root_element().attribute("name"), Some("a&b"));
    }

    #[test]
    fn float_lists_are_validated() {
        let doc = parse_document("<a v=\"1 2 x\"/>").unwrap();
        let n = doc.root_element();
        assert!(attr_vec3(n, "v").is_err());
        assert!(attr_f64(n, "missing").unwrap().is_none());
    }
}
