//! Subgraph counts in `G(n, p)`: patterns, copy catalogs, the variance and
//! neighbourhood constants, the bounds, and exact checkers for the auxiliary
//! lemmas.

mod bounds;
mod catalog;
pub mod lemmas;
mod pattern;
mod sampler;

pub use bounds::{CorollaryRow, SubgraphBoundInputs, TheoremRow, ZhangRow, BOUND_COLUMNS};
pub use catalog::{edge_index, CopyCatalog, DEFAULT_CATALOG_CAP};
pub use pattern::{PatternGraph, MAX_PATTERN_VERTICES};
pub use sampler::SubgraphSampler;
