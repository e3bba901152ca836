use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::types::{Category, CodeSystem, ValueKind};

const BUNDLED: &str = include_str!("../../data/catalog.json");

pub const MIN_VARIABLES: usize = 8;
pub const MAX_VARIABLES: usize = 105;

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("cannot read catalog {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("catalog parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("no diseases defined")]
    Empty,
    #[error("duplicate disease_id `{0}`")]
    DuplicateDisease(String),
    #[error("invalid catalog field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> CatalogError {
    CatalogError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeBinding {
    pub system: CodeSystem,
    pub code: String,
    pub display: String,
    /// Option label this concept stands for in a concept-coded variable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

impl CodeBinding {
    pub fn surface_forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.display.as_str()).chain(self.synonyms.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    Numeric {
        min: f64,
        max: f64,
        decimals: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        unit: Option<String>,
    },
    Options {
        values: Vec<String>,
    },
    Date {
        max_lag_days: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub variable_id: String,
    pub disease_id: String,
    pub name: String,
    pub category: Category,
    pub value_kind: ValueKind,
    pub code_bindings: Vec<CodeBinding>,
    pub synonyms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambiguity_class: Option<String>,
    pub presence: f64,
    #[serde(default)]
    pub repeat_probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Domain>,
}

impl VariableSpec {
    /// True when the value is carried by the event itself rather than by
    /// which concept was recorded.
    pub fn carries_value(&self) -> bool {
        self.category == Category::Observations
    }

    pub fn is_concept_coded(&self) -> bool {
        !self.carries_value() && self.value_kind == ValueKind::Coded
    }

    pub fn unit(&self) -> Option<&str> {
        match &self.domain {
            Some(Domain::Numeric { unit, .. }) => unit.as_deref(),
            _ => None,
        }
    }
}

/// Background event generator: events that appear in a patient's history
/// but are not extraction targets for the disease.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTemplate {
    pub category: Category,
    pub system: CodeSystem,
    pub code: String,
    pub display: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseModule {
    pub disease_id: String,
    pub name: String,
    pub variable_specs: Vec<VariableSpec>,
    #[serde(default)]
    pub event_templates: Vec<EventTemplate>,
}

impl DiseaseModule {
    pub fn variable(&self, variable_id: &str) -> Option<&VariableSpec> {
        self.variable_specs.iter().find(|v| v.variable_id == variable_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub catalog_version: u32,
    pub diseases: Vec<DiseaseModule>,
}

impl Catalog {
    pub fn bundled() -> Catalog {
        Catalog::from_json_str(BUNDLED).expect("bundled catalog is valid")
    }

    pub fn from_json_str(text: &str) -> Result<Catalog, CatalogError> {
        if text.trim().is_empty() {
            return Err(CatalogError::Empty);
        }
        let catalog: Catalog = serde_json::from_str(text).map_err(|e| CatalogError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn disease(&self, disease_id: &str) -> Option<&DiseaseModule> {
        self.diseases.iter().find(|d| d.disease_id == disease_id)
    }

    pub fn variable(&self, variable_id: &str) -> Option<&VariableSpec> {
        self.diseases.iter().find_map(|d| d.variable(variable_id))
    }

    pub fn variable_count(&self) -> usize {
        self.diseases.iter().map(|d| d.variable_specs.len()).sum()
    }

    /// Keeps only the listed diseases, in catalog order.
    pub fn restrict(&self, disease_ids: &[String]) -> Result<Catalog, CatalogError> {
        if let Some(unknown) = disease_ids.iter().find(|id| self.disease(id).is_none()) {
            return Err(invalid("diseases", format!("unknown disease `{unknown}`")));
        }
        Ok(Catalog {
            catalog_version: self.catalog_version,
            diseases: self
                .diseases
                .iter()
                .filter(|d| disease_ids.is_empty() || disease_ids.contains(&d.disease_id))
                .cloned()
                .collect(),
        })
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.diseases.is_empty() {
            return Err(CatalogError::Empty);
        }
        let mut seen = BTreeSet::new();
        for d in &self.diseases {
            if !seen.insert(d.disease_id.as_str()) {
                return Err(CatalogError::DuplicateDisease(d.disease_id.clone()));
            }
        }

        // code -> (category, display) must be consistent across the whole catalog
        let mut concepts: BTreeMap<String, (Category, String)> = BTreeMap::new();
        let mut check_concept = |code: &str, cat: Category, display: &str, field: &str| {
            match concepts.insert(code.to_string(), (cat, display.to_string())) {
                Some((c, d)) if c != cat || d != display => Err(invalid(
                    field,
                    format!("code {code} bound as `{d}` ({c}) and `{display}` ({cat})"),
                )),
                _ => Ok(()),
            }
        };

        let mut variable_ids = BTreeSet::new();
        let mut categories = BTreeSet::new();
        for d in &self.diseases {
            let n = d.variable_specs.len();
            if !(MIN_VARIABLES..=MAX_VARIABLES).contains(&n) {
                return Err(invalid(
                    format!("{}.variable_specs", d.disease_id),
                    format!("{n} variables, expected {MIN_VARIABLES}..={MAX_VARIABLES}"),
                ));
            }
            let mut disease_codes = BTreeSet::new();
            for v in &d.variable_specs {
                let field = format!("{}.{}", d.disease_id, v.variable_id);
                if !variable_ids.insert(v.variable_id.as_str()) {
                    return Err(invalid(field, "duplicate variable_id"));
                }
                if v.disease_id != d.disease_id {
                    return Err(invalid(field, format!("disease_id `{}` does not match module", v.disease_id)));
                }
                if v.code_bindings.is_empty() {
                    return Err(invalid(field, "no code bindings"));
                }
                if v.synonyms.is_empty() {
                    return Err(invalid(field, "no synonyms"));
                }
                if !(0.0..=1.0).contains(&v.presence) || !(0.0..=1.0).contains(&v.repeat_probability) {
                    return Err(invalid(field, "probabilities must lie in [0, 1]"));
                }
                for b in &v.code_bindings {
                    check_concept(&b.code, v.category, &b.display, &field)?;
                    if !disease_codes.insert(b.code.as_str()) {
                        return Err(invalid(field, format!("code {} bound twice within disease", b.code)));
                    }
                }
                validate_shape(v, &field)?;
                categories.insert(v.category);
            }
            for t in &d.event_templates {
                let field = format!("{}.event_templates", d.disease_id);
                check_concept(&t.code, t.category, &t.display, &field)?;
                if disease_codes.contains(t.code.as_str()) {
                    return Err(invalid(field, format!("background code {} is bound to a variable", t.code)));
                }
                if t.weight <= 0.0 {
                    return Err(invalid(field, "template weight must be positive"));
                }
            }
        }
        if let Some(missing) = Category::ALL.iter().find(|c| !categories.contains(c)) {
            return Err(invalid("diseases", format!("no variable in category {missing}")));
        }
        Ok(())
    }
}

fn validate_shape(v: &VariableSpec, field: &str) -> Result<(), CatalogError> {
    let domain_ok = match (v.carries_value(), v.value_kind, &v.domain) {
        (true, ValueKind::Numeric, Some(Domain::Numeric { min, max, .. })) => min <= max,
        (true, ValueKind::Coded | ValueKind::FreeText, Some(Domain::Options { values })) => !values.is_empty(),
        (true, ValueKind::Date, None | Some(Domain::Date { .. })) => true,
        (true, ValueKind::Boolean, None) => true,
        (false, ValueKind::Coded, None) => {
            let labels: BTreeSet<_> = v.code_bindings.iter().filter_map(|b| b.value.as_deref()).collect();
            labels.len() == v.code_bindings.len()
        }
        (false, ValueKind::Boolean | ValueKind::Date, None) => v.code_bindings.len() == 1,
        _ => false,
    };
    if domain_ok {
        Ok(())
    } else {
        Err(invalid(field, format!("value kind {:?} does not fit category {} and domain", v.value_kind, v.category)))
    }
}

pub fn load_disease_catalog(path: &Path) -> Result<Catalog, CatalogError> {
    let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Catalog::from_json_str(&text)
}
