//! Synthetic clinical corpus generation, multi-format fragmentation,
//! de-identification, parsing, variable extraction, per-disease table
//! assembly and exact-match evaluation.

pub mod anonymizer;
pub mod canonical;
pub mod corpus;
pub mod docstore;
pub mod eval;
pub mod extract;
pub mod ingest;
pub mod megatable;
pub mod pipeline;
pub mod scatter;
pub mod seed;
pub mod types;

pub use types::{Category, CodeSystem, EventValue, FormatKind, ValueKind};
