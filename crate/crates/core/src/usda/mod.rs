//! Text USD (USDA) subset: document model, parser, deterministic writer,
//! conversion to and from [`SceneWorld`](crate::scene::SceneWorld), and layer
//! composition.
//!
//! Supported syntax: `def`/`over`/`class` prims, typed attributes (scalars,
//! tuples, arrays, dictionaries), relationships, list-op metadata such as
//! `prepend apiSchemas`, and `subLayers`. Time samples, connections and
//! variant sets are rejected with a located error.

mod convert;
mod document;
mod layer;
mod parser;
mod sanitize;
pub mod schema;
mod writer;

pub use convert::{read_xform, stage_to_world, world_to_stage, ConvertError, StageImport};
pub use document::{
    format_f64, Attribute, DictEntry, ListOp, MetadataEntry, Property, Specifier, UsdValue, UsdaPrim, UsdaStage,
};
pub use layer::{
    check_semantic_layer, extract_semantic_layer, load_composed, merge_layer, save_two_file, semantic_layer_path,
    strip_semantics, write_atomic, LayerError, SEMANTIC_NAMESPACE,
};
pub use parser::{parse, parse_items, parse_prim, UsdaError};
pub use sanitize::{is_valid_identifier, sanitize_name};
pub use writer::{emit, emit_prim, emit_property};
