use std::collections::BTreeSet;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::registry::{fold, OntologyRegistry};
use crate::canonical::{format_date, render_quantity, MISSING};
use crate::corpus::{DiseaseModule, Domain, VariableSpec};
use crate::ingest::{CanonicalStatement, ParsedDocument, SourceRef};
use crate::types::{EventValue, FormatKind, ValueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignmentStatus {
    Found,
    MissingSentinel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResolutionNote {
    None,
    Single,
    Agreement,
    Currency,
    FormatPriority,
    Lexicographic,
}

impl ResolutionNote {
    pub fn as_str(self) -> &'static str {
        match self {
            ResolutionNote::None => "none",
            ResolutionNote::Single => "single",
            ResolutionNote::Agreement => "agreement",
            ResolutionNote::Currency => "currency",
            ResolutionNote::FormatPriority => "format-priority",
            ResolutionNote::Lexicographic => "lexicographic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableAssignment {
    pub patient: String,
    pub disease_id: String,
    pub variable_id: String,
    pub extracted_value: String,
    pub status: AssignmentStatus,
    pub evidence: Vec<SourceRef>,
    pub resolution_note: ResolutionNote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictPolicy {
    /// Highest priority first.
    pub format_priority: Vec<FormatKind>,
    pub plausibility: bool,
}

impl Default for ConflictPolicy {
    fn default() -> Self {
        ConflictPolicy {
            format_priority: FormatKind::ALL.to_vec(),
            plausibility: true,
        }
    }
}

impl ConflictPolicy {
    fn rank(&self, f: FormatKind) -> usize {
        self.format_priority.iter().position(|x| *x == f).unwrap_or(self.format_priority.len())
    }
}

/// A statement bound to one variable of the patient's disease.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub variable_id: String,
    /// Option label (or preferred term) of the matched concept.
    pub label: String,
    pub value: EventValue,
    pub timestamp: Option<NaiveDateTime>,
    pub format: FormatKind,
    pub source: SourceRef,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatementMatch<'a> {
    pub statement: &'a CanonicalStatement,
    pub format: FormatKind,
    /// (variable_id, label) pairs in the patient's disease.
    pub candidates: Vec<(String, String)>,
}

fn links_for(
    statement: &CanonicalStatement,
    registry: &OntologyRegistry,
    disease_id: &str,
) -> BTreeSet<(String, String)> {
    let codes: Vec<String> = match &statement.code {
        Some(c) => vec![c.clone()],
        None => registry.lookup(&statement.display).into_iter().flatten().cloned().collect(),
    };
    let mut out = BTreeSet::new();
    for code in codes {
        let Some(concept) = registry.concept(&code) else { continue };
        if concept.category != statement.category {
            continue;
        }
        for l in concept.links.iter().filter(|l| l.disease_id == disease_id) {
            out.insert((l.variable_id.clone(), l.value.clone().unwrap_or_else(|| concept.display.clone())));
        }
    }
    out
}

/// Candidate variables of each statement, restricted to one disease.
/// Coded statements match by code, uncoded ones through the synonym index.
pub fn match_statements<'a>(
    docs: &'a [ParsedDocument],
    registry: &OntologyRegistry,
    disease_id: &str,
) -> Vec<StatementMatch<'a>> {
    docs.iter()
        .flat_map(|d| d.statements.iter().map(move |s| (d.format, s)))
        .map(|(format, statement)| StatementMatch {
            statement,
            format,
            candidates: links_for(statement, registry, disease_id).into_iter().collect(),
        })
        .collect()
}

/// Value text a candidate contributes, or `None` when implausible.
fn candidate_text(spec: &VariableSpec, c: &Candidate, check: bool) -> Option<String> {
    if !spec.carries_value() {
        return match spec.value_kind {
            ValueKind::Date => c.timestamp.map(|t| format_date(&t.date())),
            ValueKind::Coded => Some(c.label.clone()),
            _ => Some("Yes".to_string()),
        };
    }
    match (&c.value, &spec.domain) {
        (EventValue::Quantity { value, unit }, Some(Domain::Numeric { min, max, unit: want, .. })) => {
            let unit_ok = match (unit, want) {
                (None, None) => true,
                (Some(u), Some(w)) => u.eq_ignore_ascii_case(w),
                _ => false,
            };
            if check && (!unit_ok || *value < *min || *value > *max || !value.is_finite()) {
                return None;
            }
            let unit = if unit_ok { want.as_deref() } else { unit.as_deref() };
            Some(render_quantity(*value, unit))
        }
        (EventValue::Text(t), Some(Domain::Options { values })) => {
            match values.iter().find(|v| fold(v) == fold(t)) {
                Some(v) => Some(v.clone()),
                None if check => None,
                None => Some(t.clone()),
            }
        }
        (v, _) if check => {
            let ok = match spec.value_kind {
                ValueKind::Date => matches!(v, EventValue::Date(_)),
                ValueKind::Boolean => matches!(v, EventValue::Bool(_)),
                ValueKind::FreeText | ValueKind::Coded => matches!(v, EventValue::Text(_)),
                ValueKind::Numeric => false,
            };
            ok.then(|| v.render())
        }
        (v, _) => Some(v.render()),
    }
}

fn missing(patient: &str, spec: &VariableSpec) -> VariableAssignment {
    VariableAssignment {
        patient: patient.to_string(),
        disease_id: spec.disease_id.clone(),
        variable_id: spec.variable_id.clone(),
        extracted_value: MISSING.to_string(),
        status: AssignmentStatus::MissingSentinel,
        evidence: Vec::new(),
        resolution_note: ResolutionNote::None,
    }
}

/// Picks one value: implausible values are dropped, then the latest
/// timestamp wins, then format priority, then the smallest value text.
pub fn resolve_conflicts(
    patient: &str,
    spec: &VariableSpec,
    candidates: &[Candidate],
    policy: &ConflictPolicy,
) -> VariableAssignment {
    let scored: Vec<(String, &Candidate)> = candidates
        .iter()
        .filter(|c| c.variable_id == spec.variable_id)
        .filter_map(|c| candidate_text(spec, c, policy.plausibility).map(|t| (t, c)))
        .collect();
    if scored.is_empty() {
        return missing(patient, spec);
    }
    let distinct: BTreeSet<&str> = scored.iter().map(|(t, _)| t.as_str()).collect();
    let (value, note) = if scored.len() == 1 {
        (scored[0].0.clone(), ResolutionNote::Single)
    } else if distinct.len() == 1 {
        (scored[0].0.clone(), ResolutionNote::Agreement)
    } else {
        let latest = scored.iter().map(|(_, c)| c.timestamp).max().unwrap();
        let current: Vec<&(String, &Candidate)> = scored.iter().filter(|(_, c)| c.timestamp == latest).collect();
        let values: BTreeSet<&str> = current.iter().map(|(t, _)| t.as_str()).collect();
        if values.len() == 1 {
            (current[0].0.clone(), ResolutionNote::Currency)
        } else {
            let best = current.iter().map(|(_, c)| policy.rank(c.format)).min().unwrap();
            let top: BTreeSet<&str> = current
                .iter()
                .filter(|(_, c)| policy.rank(c.format) == best)
                .map(|(t, _)| t.as_str())
                .collect();
            let first = top.iter().next().unwrap().to_string();
            if top.len() == 1 {
                (first, ResolutionNote::FormatPriority)
            } else {
                (first, ResolutionNote::Lexicographic)
            }
        }
    };
    let mut evidence: Vec<SourceRef> = scored
        .iter()
        .filter(|(t, _)| *t == value)
        .map(|(_, c)| c.source.clone())
        .collect();
    evidence.sort();
    evidence.dedup();
    VariableAssignment {
        patient: patient.to_string(),
        disease_id: spec.disease_id.clone(),
        variable_id: spec.variable_id.clone(),
        extracted_value: value,
        status: AssignmentStatus::Found,
        evidence,
        resolution_note: note,
    }
}

/// One assignment per variable of the disease, in catalog order.
/// Statements with more than one candidate variable are dropped.
pub fn extract_patient_variables(
    patient: &str,
    module: &DiseaseModule,
    docs: &[ParsedDocument],
    registry: &OntologyRegistry,
    policy: &ConflictPolicy,
) -> Vec<VariableAssignment> {
    let mut candidates: Vec<Candidate> = Vec::new();
    for m in match_statements(docs, registry, &module.disease_id) {
        if m.statement.patient != patient {
            continue;
        }
        let variables: BTreeSet<&str> = m.candidates.iter().map(|(v, _)| v.as_str()).collect();
        if variables.len() != 1 || m.candidates.len() != 1 {
            continue;
        }
        let (variable_id, label) = m.candidates[0].clone();
        candidates.push(Candidate {
            variable_id,
            label,
            value: m.statement.value.clone(),
            timestamp: m.statement.timestamp,
            format: m.format,
            source: m.statement.source.clone(),
        });
    }
    module
        .variable_specs
        .iter()
        .map(|spec| resolve_conflicts(patient, spec, &candidates, policy))
        .collect()
}
