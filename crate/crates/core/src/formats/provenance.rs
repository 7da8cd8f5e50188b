//! Bookkeeping for source attributes and elements the scene model has no
//! field for.
//!
//! An unmapped attribute `foo` on the element that became a body (joint,
//! geometry, world) is stored as the text property `<format>:foo`; on a
//! mapped sub-element such as `<limit>` it becomes `<format>:limit:foo`.
//! Unmapped child elements are kept as raw markup in
//! `<format>:unmapped_xml`. Exporters for the same format put both back.

use roxmltree::Node;

use crate::scene::{PropertySet, PropertyValue};

use super::xml::{raw, XmlElement};
use super::SourceFormat;

pub const UNMAPPED_XML: &str = "unmapped_xml";

#[derive(Clone, Debug, PartialEq)]
pub struct UnmappedAttribute {
    /// Scene element the attribute was attached to.
    pub element_path: String,
    /// Attribute name, prefixed by the sub-element path (`limit:foo`), or
    /// `<tag>` for a whole unmapped element.
    pub attribute: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FormatProvenance {
    pub source_format: SourceFormat,
    pub unmapped_attributes: Vec<UnmappedAttribute>,
}

fn clean(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

pub(crate) struct Recorder<'s> {
    format: SourceFormat,
    source: &'s str,
    pub provenance: FormatProvenance,
}

impl<'s> Recorder<'s> {
    pub fn new(format: SourceFormat, source: &'s str) -> Self {
        Self {
            format,
            source,
            provenance: FormatProvenance {
                source_format: format,
                unmapped_attributes: Vec::new(),
            },
        }
    }

    pub fn source(&self) -> &'s str {
        self.source
    }

    /// Records every attribute of `node` not listed in `mapped`.
    pub fn attrs(&mut self, node: Node, element: &str, sub: &str, mapped: &[&str], props: &mut PropertySet) {
        let pairs = node
            .attributes()
            .filter(|a| a.namespace().is_none())
            .map(|a| (a.name(), a.value()));
        self.pairs(pairs, element, sub, mapped, props);
    }

    /// Same as [`Recorder::attrs`] for already-resolved `(name, value)` pairs.
    pub fn pairs<'a>(
        &mut self,
        pairs: impl Iterator<Item = (&'a str, &'a str)>,
        element: &str,
        sub: &str,
        mapped: &[&str],
        props: &mut PropertySet,
    ) {
        for (name, value) in pairs {
            if mapped.contains(&name) {
                continue;
            }
            let key = format!("{sub}{}", clean(name));
            let _ = props.insert(
                &format!("{}:{key}", self.format.as_str()),
                PropertyValue::Text(value.to_string()),
            );
            self.provenance.unmapped_attributes.push(UnmappedAttribute {
                element_path: element.to_string(),
                attribute: key,
                value: value.to_string(),
            });
        }
    }

    /// Keeps every child element of `node` whose tag is not in `mapped` verbatim.
    pub fn elements(&mut self, node: Node, element: &str, mapped: &[&str], props: &mut PropertySet) {
        let mut kept = Vec::new();
        for c in node.children().filter(|c| c.is_element()) {
            if mapped.contains(&c.tag_name().name()) {
                continue;
            }
            let text = raw(c, self.source);
            self.provenance.unmapped_attributes.push(UnmappedAttribute {
                element_path: element.to_string(),
                attribute: format!("<{}>", c.tag_name().name()),
                value: text.to_string(),
            });
            kept.push(text);
        }
        self.keep_raw(&kept.join("\n"), props);
    }

    /// Appends already-extracted markup to the unmapped XML property.
    pub fn keep_raw(&self, text: &str, props: &mut PropertySet) {
        if text.is_empty() {
            return;
        }
        let key = format!("{}:{UNMAPPED_XML}", self.format.as_str());
        let merged = match props.text(&key) {
            Some(prev) => format!("{prev}\n{text}"),
            None => text.to_string(),
        };
        let _ = props.insert(&key, PropertyValue::Text(merged));
    }
}

/// Puts back attributes recorded by [`Recorder::attrs`] with the same `sub`
/// prefix. Attributes already set on `e` win.
pub(crate) fn restore_attrs(props: &PropertySet, format: SourceFormat, sub: &str, e: &mut XmlElement) {
    let prefix = format!("{}:{sub}", format.as_str());
    for (name, value) in props.iter() {
        let Some(rest) = name.strip_prefix(&prefix) else {
            continue;
        };
        if rest.contains(':') || rest == UNMAPPED_XML || rest.is_empty() {
            continue;
        }
        if let (Some(text), false) = (value.as_text(), e.has_attr(rest)) {
            e.set(rest, text);
        }
    }
}

pub(crate) fn restore_elements(props: &PropertySet, format: SourceFormat, e: &mut XmlElement) {
    if let Some(text) = props.text(&format!("{}:{UNMAPPED_XML}", format.as_str())) {
        e.push_raw(text);
    }
}

/// Both of the above for the element itself.
pub(crate) fn restore(props: &PropertySet, format: SourceFormat, e: &mut XmlElement) {
    restore_attrs(props, format, "", e);
    restore_elements(props, format, e);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::xml::{document, parse_document};

    #[test]
    fn unmapped_attributes_and_elements_come_back() {
        let src = r#"<joint name="j" type="fixed" vendor-flag="7"><mimic joint="a"/><origin xyz="0 0 0"/></joint>"#;
        let doc = parse_document(src).unwrap();
        let node = doc.root_element();
        let mut rec = Recorder::new(SourceFormat::Urdf, src);
        let mut props = PropertySet::new();
        rec.attrs(node, "j", "", &["name", "type"], &mut props);
        rec.elements(node, "j", &["origin"], &mut props);
        assert_eq!(props.text("urdf:vendor_flag"), Some("7"));
        assert_eq!(props.text("urdf:unmapped_xml"), Some(r#"<mimic joint="a"/>"#));
        assert_eq!(rec.provenance.unmapped_attributes.len(), 2);

        let mut e = XmlElement::new("joint").attr("name", "j");
        restore(&props, SourceFormat::Urdf, &mut e);
        let text = document(&e);
        assert!(text.contains("vendor_flag=\"7\""));
        assert!(text.contains("<mimic joint=\"a\"/>"));
        // Other formats ignore it.
        let mut other = XmlElement::new("joint");
        restore(&props, SourceFormat::Mjcf, &mut other);
        assert!(other.is_empty());
    }
}
