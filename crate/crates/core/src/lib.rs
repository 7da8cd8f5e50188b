//! Scene-description toolchain.
//!
//! Robot and environment descriptions (URDF, MJCF, SDF and a ProcTHOR JSON
//! subset) are imported into one scene-graph model ([`scene::SceneWorld`]),
//! stored as text USD ([`usda`]), refined with exact polyhedral mass
//! properties ([`refine`]), annotated with semantic reports and labels
//! ([`semantics`]) and finally compiled into a small knowledge graph that
//! answers household competency questions ([`kg`]).
//!
//! ```text
//!  URDF ─┐                      ┌─> URDF
//!  MJCF ─┼─> SceneWorld <─> USDA┼─> MJCF
//!  SDF  ─┤        │             └─> SDF
//!  JSON ─┘        └─> refine ─> semantic layer ─> knowledge graph ─> CQ1..CQ5
//! ```

pub mod diag;
pub mod formats;
pub mod kg;
pub mod math;
pub mod refine;
pub mod scene;
pub mod semantics;
pub mod usda;

pub use diag::{Diagnostic, Severity};
pub use math::Pose;
pub use scene::{
    GeomType, InertialProperties, JointType, MeshData, PropertySet, PropertyValue, SceneBody, SceneGeometry,
    SceneJoint, SceneWorld, Shape,
};
