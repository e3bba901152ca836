//! Ontology registry, statement matching and per-patient variable extraction.

mod registry;
mod resolve;

pub use registry::{
    build_registry, fold, Concept, ConceptLink, OntologyRegistry, Relation, RelationEdge, RegistryError,
};
pub use resolve::{
    extract_patient_variables, match_statements, resolve_conflicts, AssignmentStatus, Candidate, ConflictPolicy,
    ResolutionNote, StatementMatch, VariableAssignment,
};
