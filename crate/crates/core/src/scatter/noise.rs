use std::collections::BTreeMap;

use chrono::Days;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::draft::{DateStyle, DocDraft, DraftEntry};
use crate::corpus::{draw_numeric, CodeBinding, DiseaseModule, Domain, VariableSpec};
use crate::seed::{rng_for, stable_hash64};
use crate::types::{Category, EventValue, FormatKind};

/// Restricts noise to matching entries. Empty lists match everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseTargets {
    pub diseases: Vec<String>,
    pub categories: Vec<Category>,
    pub variables: Vec<String>,
}

impl NoiseTargets {
    pub fn is_empty(&self) -> bool {
        self.diseases.is_empty() && self.categories.is_empty() && self.variables.is_empty()
    }

    fn matches(&self, disease_id: &str, e: &DraftEntry) -> bool {
        if self.is_empty() {
            return true;
        }
        let disease_ok = self.diseases.is_empty() || self.diseases.iter().any(|d| d == disease_id);
        let category_ok = self.categories.is_empty() || self.categories.contains(&e.category);
        let variable_ok = self.variables.is_empty()
            || e.variable_id.as_ref().is_some_and(|v| self.variables.contains(v));
        disease_ok && category_ok && variable_ok && e.variable_id.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseProfile {
    pub synonym_swap_rate: f64,
    pub typo_rate: f64,
    pub duplicate_conflict_rate: f64,
    pub omission_rate: f64,
    pub format_jitter_rate: f64,
    /// Multiplier on the synonym swap rate per ambiguity class.
    pub ambiguity_boost: BTreeMap<String, f64>,
    pub targets: NoiseTargets,
}

#[derive(Debug, thiserror::Error)]
#[error("invalid noise profile: {0}")]
pub struct NoiseError(pub String);

impl NoiseProfile {
    pub fn zero() -> NoiseProfile {
        NoiseProfile::default()
    }

    pub fn is_zero(&self) -> bool {
        self.synonym_swap_rate == 0.0
            && self.typo_rate == 0.0
            && self.duplicate_conflict_rate == 0.0
            && self.omission_rate == 0.0
            && self.format_jitter_rate == 0.0
    }

    /// Named profiles: `zero`, `mild`, and `respiratory-otic`, which aims
    /// ambiguity and conflicts at symptoms, medications and immunizations of
    /// bronchitis and ear infections.
    pub fn preset(name: &str) -> Option<NoiseProfile> {
        match name {
            "zero" => Some(NoiseProfile::zero()),
            "mild" => Some(NoiseProfile {
                synonym_swap_rate: 0.3,
                typo_rate: 0.05,
                duplicate_conflict_rate: 0.02,
                omission_rate: 0.01,
                format_jitter_rate: 0.3,
                ..NoiseProfile::default()
            }),
            "respiratory-otic" => Some(NoiseProfile {
                synonym_swap_rate: 0.8,
                typo_rate: 0.2,
                duplicate_conflict_rate: 0.35,
                omission_rate: 0.25,
                format_jitter_rate: 0.5,
                ambiguity_boost: [
                    ("respiratory-cough".to_string(), 1.25),
                    ("otic-discomfort".to_string(), 1.25),
                    ("vaccine-generic".to_string(), 1.25),
                ]
                .into_iter()
                .collect(),
                targets: NoiseTargets {
                    diseases: vec!["bronchitis".into(), "ear_infections".into()],
                    categories: vec![Category::Symptoms, Category::Medications, Category::Immunizations],
                    variables: Vec::new(),
                },
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let rates = [
            ("synonym_swap_rate", self.synonym_swap_rate),
            ("typo_rate", self.typo_rate),
            ("duplicate_conflict_rate", self.duplicate_conflict_rate),
            ("omission_rate", self.omission_rate),
            ("format_jitter_rate", self.format_jitter_rate),
        ];
        for (name, r) in rates {
            if !(0.0..=1.0).contains(&r) {
                return Err(NoiseError(format!("{name} = {r} is outside [0, 1]")));
            }
        }
        if let Some((k, v)) = self.ambiguity_boost.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(NoiseError(format!("ambiguity_boost[{k}] = {v} must be a non-negative number")));
        }
        Ok(())
    }
}

fn binding_of<'a>(spec: &'a VariableSpec, code: &str) -> Option<&'a CodeBinding> {
    spec.code_bindings.iter().find(|b| b.code == code)
}

/// A copy of the entry with a later timestamp and a different value.
fn conflicting_copy(e: &DraftEntry, spec: &VariableSpec, rng: &mut impl Rng) -> Option<DraftEntry> {
    let mut c = e.clone();
    c.event_id = format!("{}X", e.event_id);
    c.timestamp = e.timestamp + Days::new(rng.random_range(1..=60));
    if spec.carries_value() {
        c.value = match (&e.value, &spec.domain) {
            (EventValue::Quantity { value, unit }, Some(Domain::Numeric { min, max, decimals, .. })) => {
                let scale = 10f64.powi(*decimals as i32);
                let step = 1.0 / scale;
                let mut v = draw_numeric(rng, *min, *max, *decimals);
                if v == *value {
                    v = if *value + step <= *max { *value + step } else { *value - step };
                    v = (v * scale).round() / scale;
                }
                if v == *value {
                    return None;
                }
                EventValue::Quantity { value: v, unit: unit.clone() }
            }
            (EventValue::Text(t), Some(Domain::Options { values })) => {
                let others: Vec<&String> = values.iter().filter(|v| *v != t).collect();
                EventValue::Text((*others.choose(rng)?).clone())
            }
            (EventValue::Date(d), _) => EventValue::Date(*d - Days::new(rng.random_range(1..=30))),
            (EventValue::Bool(b), _) => EventValue::Bool(!b),
            _ => return None,
        };
        return Some(c);
    }
    if spec.is_concept_coded() {
        let others: Vec<&CodeBinding> = spec.code_bindings.iter().filter(|b| b.code != e.code).collect();
        let b = others.choose(rng)?;
        c.code = b.code.clone();
        c.display = b.display.clone();
        return Some(c);
    }
    match spec.value_kind {
        crate::types::ValueKind::Date => Some(c),
        _ => None,
    }
}

fn fresh_letter(rng: &mut impl Rng, old: char) -> char {
    loop {
        let c = (b'a' + rng.random_range(0..26u8)) as char;
        if c != old.to_ascii_lowercase() {
            return c;
        }
    }
}

/// Single-character substitution, deletion or insertion inside the display.
fn typo(display: &str, rng: &mut impl Rng) -> String {
    let chars: Vec<char> = display.chars().collect();
    let letters: Vec<usize> = (0..chars.len()).filter(|i| chars[*i].is_ascii_alphabetic()).collect();
    let Some(&pos) = letters.choose(rng) else {
        return display.to_string();
    };
    let mut out = chars.clone();
    match rng.random_range(0..3) {
        0 => out[pos] = fresh_letter(rng, chars[pos]),
        1 if letters.len() > 1 => {
            out.remove(pos);
        }
        _ => out.insert(pos, fresh_letter(rng, chars[pos])),
    }
    out.into_iter().collect()
}

/// Applies the profile to a document draft. Order: omission, conflicting
/// duplicate, synonym swap, typo, date-format jitter. Machine codes are
/// only changed by a conflicting duplicate of a concept-coded variable.
pub fn apply_noise(draft: &DocDraft, module: &DiseaseModule, profile: &NoiseProfile, seed: u64) -> DocDraft {
    if profile.is_zero() {
        return draft.clone();
    }
    let mut rng = rng_for(seed, "noise", stable_hash64(&[draft.doc_id.as_bytes()]));
    let mut entries = Vec::with_capacity(draft.entries.len());
    for e in &draft.entries {
        let targeted = profile.targets.matches(&draft.disease_id, e);
        let spec = e.variable_id.as_deref().and_then(|v| module.variable(v));
        if targeted && rng.random_bool(profile.omission_rate) {
            continue;
        }
        entries.push(e.clone());
        if let Some(spec) = spec {
            if targeted && rng.random_bool(profile.duplicate_conflict_rate) {
                if let Some(c) = conflicting_copy(e, spec, &mut rng) {
                    entries.push(c);
                }
            }
        }
    }
    for e in &mut entries {
        let targeted = profile.targets.matches(&draft.disease_id, e);
        let spec = e.variable_id.as_deref().and_then(|v| module.variable(v));
        if let (true, Some(spec)) = (targeted, spec) {
            let boost = spec
                .ambiguity_class
                .as_ref()
                .and_then(|c| profile.ambiguity_boost.get(c))
                .copied()
                .unwrap_or(1.0);
            if rng.random_bool((profile.synonym_swap_rate * boost).min(1.0)) {
                if let Some(b) = binding_of(spec, &e.code) {
                    if let Some(s) = b.synonyms.choose(&mut rng) {
                        e.display = s.clone();
                    }
                }
            }
            if rng.random_bool(profile.typo_rate) {
                e.display = typo(&e.display, &mut rng);
            }
        }
        let jitters = matches!(draft.format, FormatKind::CsvExtract | FormatKind::Narrative);
        if jitters && rng.random_bool(profile.format_jitter_rate) {
            e.date_style = DateStyle::Dotted;
        }
    }
    entries.sort_by(|a, b| (a.timestamp, &a.event_id).cmp(&(b.timestamp, &b.event_id)));
    DocDraft {
        entries,
        ..draft.clone()
    }
}
