use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Catalog;
use crate::types::{Category, CodeSystem};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("variable {variable_id}: code {code} resolves to `{existing}` but is bound as `{display}`")]
    Unresolvable {
        variable_id: String,
        code: String,
        existing: String,
        display: String,
    },
    #[error("variable {variable_id}: synonym `{synonym}` does not resolve to any of its concepts")]
    OpenSynonym { variable_id: String, synonym: String },
}

/// Variable (and option label, for concept-coded variables) a concept fills.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConceptLink {
    pub disease_id: String,
    pub variable_id: String,
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub code: String,
    pub system: CodeSystem,
    pub display: String,
    pub category: Category,
    pub links: Vec<ConceptLink>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    IsA,
    Treats,
    Indicates,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationEdge {
    pub from: String,
    pub relation: Relation,
    pub to: String,
}

/// Case-folded, whitespace-collapsed key used for every surface-form lookup.
pub fn fold(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, Default)]
pub struct OntologyRegistry {
    concepts: BTreeMap<String, Concept>,
    /// folded surface form -> concept codes
    surface: BTreeMap<String, BTreeSet<String>>,
    /// folded surface form -> original spelling (first seen)
    spelling: BTreeMap<String, String>,
    ambiguous: BTreeMap<String, BTreeSet<String>>,
    relations: BTreeSet<RelationEdge>,
    units: BTreeMap<String, String>,
}

impl OntologyRegistry {
    pub fn concept(&self, code: &str) -> Option<&Concept> {
        self.concepts.get(code)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// Codes reachable from a surface form (case-insensitive).
    pub fn lookup(&self, surface: &str) -> Option<&BTreeSet<String>> {
        self.surface.get(&fold(surface))
    }

    /// All surface forms with their original spelling.
    pub fn surface_forms(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.surface
            .iter()
            .map(|(k, v)| (self.spelling.get(k).map_or(k.as_str(), String::as_str), v))
    }

    /// Surface forms that reach more than one concept, with the ambiguity
    /// classes of the variables involved.
    pub fn ambiguous_forms(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.ambiguous
    }

    pub fn is_ambiguous(&self, surface: &str) -> bool {
        self.ambiguous.contains_key(&fold(surface))
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationEdge> {
        self.relations.iter()
    }

    pub fn related(&self, code: &str, relation: Relation) -> Vec<&str> {
        self.relations
            .iter()
            .filter(|e| e.from == code && e.relation == relation)
            .map(|e| e.to.as_str())
            .collect()
    }

    /// Canonical spelling of a unit recognised in text, if registered.
    pub fn unit(&self, token: &str) -> Option<&str> {
        self.units.get(&token.to_lowercase()).map(String::as_str)
    }

    /// Links of every concept reachable from a surface form, restricted to a disease.
    pub fn scoped_links(&self, surface: &str, disease_id: &str) -> BTreeSet<&ConceptLink> {
        self.lookup(surface)
            .into_iter()
            .flatten()
            .filter_map(|c| self.concepts.get(c))
            .flat_map(|c| c.links.iter())
            .filter(|l| l.disease_id == disease_id)
            .collect()
    }

    pub fn code_links(&self, code: &str, disease_id: &str) -> Vec<&ConceptLink> {
        self.concepts
            .get(code)
            .map(|c| c.links.iter().filter(|l| l.disease_id == disease_id).collect())
            .unwrap_or_default()
    }

    fn add_concept(
        &mut self,
        code: &str,
        system: CodeSystem,
        display: &str,
        category: Category,
        variable_id: &str,
    ) -> Result<&mut Concept, RegistryError> {
        let c = self.concepts.entry(code.to_string()).or_insert_with(|| Concept {
            code: code.to_string(),
            system,
            display: display.to_string(),
            category,
            links: Vec::new(),
        });
        if c.display != display || c.category != category || c.system != system {
            return Err(RegistryError::Unresolvable {
                variable_id: variable_id.to_string(),
                code: code.to_string(),
                existing: c.display.clone(),
                display: display.to_string(),
            });
        }
        Ok(c)
    }

    fn add_surface(&mut self, form: &str, code: &str) {
        let key = fold(form);
        self.spelling.entry(key.clone()).or_insert_with(|| form.trim().to_string());
        self.surface.entry(key).or_default().insert(code.to_string());
    }
}

pub fn build_registry(catalog: &Catalog) -> Result<OntologyRegistry, RegistryError> {
    let mut reg = OntologyRegistry::default();
    let mut classes: BTreeMap<String, Option<String>> = BTreeMap::new();
    for d in &catalog.diseases {
        for v in &d.variable_specs {
            for b in &v.code_bindings {
                let link = ConceptLink {
                    disease_id: d.disease_id.clone(),
                    variable_id: v.variable_id.clone(),
                    value: b.value.clone(),
                };
                let c = reg.add_concept(&b.code, b.system, &b.display, v.category, &v.variable_id)?;
                if !c.links.contains(&link) {
                    c.links.push(link);
                }
                for form in b.surface_forms() {
                    reg.add_surface(form, &b.code);
                }
                classes.insert(b.code.clone(), v.ambiguity_class.clone());
            }
            if let Some(Some(unit)) = v.domain.as_ref().map(|_| v.unit()) {
                reg.units.insert(unit.to_lowercase(), unit.to_string());
            }
            for s in &v.synonyms {
                let reachable = reg
                    .lookup(s)
                    .is_some_and(|codes| v.code_bindings.iter().any(|b| codes.contains(&b.code)));
                if !reachable {
                    return Err(RegistryError::OpenSynonym {
                        variable_id: v.variable_id.clone(),
                        synonym: s.clone(),
                    });
                }
            }
        }
        for t in &d.event_templates {
            reg.add_concept(&t.code, t.system, &t.display, t.category, &format!("{}.background", d.disease_id))?;
            reg.add_surface(&t.display, &t.code);
        }

        // edges: medications treat and symptoms indicate the disease's conditions
        let conditions: Vec<&str> = d
            .variable_specs
            .iter()
            .filter(|v| v.category == Category::Conditions)
            .flat_map(|v| v.code_bindings.iter().map(|b| b.code.as_str()))
            .collect();
        for v in &d.variable_specs {
            let relation = match v.category {
                Category::Medications => Relation::Treats,
                Category::Symptoms => Relation::Indicates,
                _ => continue,
            };
            for b in &v.code_bindings {
                for c in &conditions {
                    reg.relations.insert(RelationEdge {
                        from: b.code.clone(),
                        relation,
                        to: c.to_string(),
                    });
                }
            }
        }
    }
    let ambiguous: BTreeMap<String, BTreeSet<String>> = reg
        .surface
        .iter()
        .filter(|(_, codes)| codes.len() > 1)
        .map(|(form, codes)| {
            let tags = codes.iter().filter_map(|c| classes.get(c).cloned().flatten()).collect();
            (form.clone(), tags)
        })
        .collect();
    reg.ambiguous = ambiguous;
    Ok(reg)
}
