//! Deterministic USDA emission.
//!
//! Output depends only on the document: four-space indentation, metadata in
//! stored order, properties sorted by name, one blank line between sibling prims.

use std::fmt::Write as _;

use super::document::{Attribute, MetadataEntry, Property, UsdValue, UsdaPrim, UsdaStage};

pub fn emit(stage: &UsdaStage) -> String {
    let mut out = String::with_capacity(4096);
    out.push_str("#usda 1.0\n");
    if !stage.metadata.is_empty() {
        out.push_str("(\n");
        for m in &stage.metadata {
            write_metadata_entry(&mut out, m, 1);
        }
        out.push_str(")\n");
    }
    for prim in &stage.prims {
        out.push('\n');
        write_prim(&mut out, prim, 0);
    }
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

pub(crate) fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            '\r' => q.push_str("\\r"),
            '\t' => q.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(q, "\\x{:02x}", c as u32);
            }
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

pub(crate) fn write_value(out: &mut String, v: &UsdValue) {
    match v {
        UsdValue::Number(s) | UsdValue::Ident(s) => out.push_str(s),
        UsdValue::Str(s) => out.push_str(&quote(s)),
        UsdValue::Path(p) => {
            out.push('<');
            out.push_str(p);
            out.push('>');
        }
        UsdValue::Asset(a) => {
            out.push('@');
            out.push_str(a);
            out.push('@');
        }
        UsdValue::Tuple(items) => {
            out.push('(');
            write_items(out, items);
            out.push(')');
        }
        UsdValue::List(items) => {
            out.push('[');
            write_items(out, items);
            out.push(']');
        }
        UsdValue::Dict(entries) => {
            out.push('{');
            for (i, e) in entries.iter().enumerate() {
                if i > 0 {
                    out.push(';');
                }
                out.push(' ');
                out.push_str(&e.type_name);
                out.push(' ');
                out.push_str(&e.key);
                out.push_str(" = ");
                write_value(out, &e.value);
            }
            if !entries.is_empty() {
                out.push(' ');
            }
            out.push('}');
        }
    }
}

fn write_items(out: &mut String, items: &[UsdValue]) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_value(out, item);
    }
}

fn write_metadata_entry(out: &mut String, m: &MetadataEntry, level: usize) {
    indent(out, level);
    if m.key == "doc" && m.op.keyword().is_none() {
        // Bare strings in a metadata block are documentation.
        if let UsdValue::Str(s) = &m.value {
            out.push_str(&quote(s));
            out.push('\n');
            return;
        }
    }
    if let Some(kw) = m.op.keyword() {
        out.push_str(kw);
        out.push(' ');
    }
    out.push_str(&m.key);
    out.push_str(" = ");
    write_value(out, &m.value);
    out.push('\n');
}

fn write_inline_metadata(out: &mut String, metadata: &[MetadataEntry], level: usize) {
    if metadata.is_empty() {
        return;
    }
    out.push_str(" (\n");
    for m in metadata {
        write_metadata_entry(out, m, level + 1);
    }
    indent(out, level);
    out.push(')');
}

fn write_attribute(out: &mut String, name: &str, a: &Attribute, level: usize) {
    indent(out, level);
    if a.custom {
        out.push_str("custom ");
    }
    if a.uniform {
        out.push_str("uniform ");
    }
    out.push_str(&a.type_name);
    out.push(' ');
    out.push_str(name);
    if let Some(v) = &a.value {
        out.push_str(" = ");
        write_value(out, v);
    }
    write_inline_metadata(out, &a.metadata, level);
    out.push('\n');
}

fn write_property(out: &mut String, name: &str, p: &Property, level: usize) {
    match p {
        Property::Attribute(a) => write_attribute(out, name, a, level),
        Property::Relationship {
            custom,
            targets,
            metadata,
        } => {
            indent(out, level);
            if *custom {
                out.push_str("custom ");
            }
            out.push_str("rel ");
            out.push_str(name);
            match targets.as_deref() {
                None => {}
                Some([single]) => {
                    let _ = write!(out, " = <{single}>");
                }
                Some(many) => {
                    out.push_str(" = [");
                    for (i, t) in many.iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        let _ = write!(out, "<{t}>");
                    }
                    out.push(']');
                }
            }
            write_inline_metadata(out, metadata, level);
            out.push('\n');
        }
    }
}

pub(crate) fn write_prim(out: &mut String, prim: &UsdaPrim, level: usize) {
    indent(out, level);
    out.push_str(prim.specifier.keyword());
    if let Some(t) = &prim.type_name {
        out.push(' ');
        out.push_str(t);
    }
    out.push(' ');
    out.push_str(&quote(&prim.name));
    write_inline_metadata(out, &prim.metadata, level);
    out.push('\n');
    indent(out, level);
    out.push_str("{\n");
    for (name, p) in &prim.properties {
        write_property(out, name, p, level + 1);
    }
    for (i, child) in prim.children.iter().enumerate() {
        if i > 0 || !prim.properties.is_empty() {
            out.push('\n');
        }
        write_prim(out, child, level + 1);
    }
    indent(out, level);
    out.push_str("}\n");
}

/// Text of a single prim, as used for passthrough storage.
pub fn emit_prim(prim: &UsdaPrim) -> String {
    let mut out = String::new();
    write_prim(&mut out, prim, 0);
    out
}

/// Text of a single property line.
pub fn emit_property(name: &str, p: &Property) -> String {
    let mut out = String::new();
    write_property(&mut out, name, p, 0);
    out
}
