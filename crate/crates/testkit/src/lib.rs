//! Reference implementations used to check `scenegraph-core`.
//!
//! Every oracle here is written from the definition of the quantity it
//! computes and shares no code with the implementation it checks: convex
//! hulls by exhaustive facet search, mass properties by Monte-Carlo
//! sampling, lexicon matching over every token run, query answers by
//! exhaustive variable assignment and loop detection by edge removal.

pub mod hull;
pub mod kg;
pub mod lexicon;
pub mod loops;
pub mod monte_carlo;
pub mod round_trip;
pub mod synth;

use std::path::PathBuf;

/// The repository's `fixtures/` directory.
pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}
