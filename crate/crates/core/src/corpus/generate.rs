use std::collections::{BTreeMap, BTreeSet};

use chrono::{Days, NaiveDate, NaiveDateTime, NaiveTime};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::catalog::{Catalog, DiseaseModule, Domain, VariableSpec};
use super::ledger::{GroundTruthLedger, LedgerEntry};
use crate::canonical::{format_date, MISSING};
use crate::seed::rng_for;
use crate::types::{Category, CodeSystem, EventValue, ValueKind};

pub const MIN_EVENTS: usize = 3;
pub const MAX_EVENTS: usize = 200;

const GIVEN_FEMALE: &[&str] = &[
    "Anna", "Maria", "Laura", "Julia", "Sofia", "Emma", "Clara", "Helen", "Nora", "Ines", "Greta", "Lea",
    "Olivia", "Paula", "Rita", "Vera", "Alice", "Beatrice", "Carmen", "Diana",
];
const GIVEN_MALE: &[&str] = &[
    "Lukas", "Jonas", "Felix", "Paul", "David", "Simon", "Martin", "Tobias", "Erik", "Hugo", "Oscar",
    "Anton", "Bruno", "Carl", "Daniel", "Elias", "Frank", "Georg", "Henrik", "Ivan",
];
const FAMILY: &[&str] = &[
    "Novak", "Horvath", "Lindqvist", "Moreau", "Keller", "Brandt", "Okafor", "Tanaka", "Petrov", "Silva",
    "Romero", "Jensen", "Kowalski", "Nguyen", "Haddad", "Fischer", "Larsen", "Conti", "Dubois", "Varga",
    "Schreiber", "Marsh", "Quinlan", "Yilmaz", "Bergmann", "Castillo", "Delacroix", "Engstrom", "Falk",
    "Gallagher",
];
const STREETS: &[&str] = &[
    "Linden", "Maple", "Harbor", "Mill", "Orchard", "Chestnut", "Garden", "Station", "Meadow", "Bridge",
    "Cedar", "Hillcrest", "Willow", "Church", "Riverside",
];
const STREET_KINDS: &[&str] = &["Street", "Avenue", "Lane", "Road", "Way"];
const CITIES: &[&str] = &[
    "Northfield", "Eastbrook", "Westhaven", "Southport", "Lakeside", "Fairview", "Brookdale", "Ridgemont",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Address {
    pub line: String,
    pub city: String,
    pub postal_code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub given_name: String,
    pub family_name: String,
    pub birth_date: NaiveDate,
    pub sex: String,
    pub address: Address,
}

impl Demographics {
    pub fn full_name(&self) -> String {
        format!("{} {}", self.given_name, self.family_name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalEvent {
    pub event_id: String,
    pub patient_id: String,
    pub timestamp: NaiveDateTime,
    pub category: Category,
    pub system: CodeSystem,
    pub code: String,
    /// Preferred term of the bound concept.
    pub display: String,
    pub value: EventValue,
    /// Variable the event was generated for; `None` for background events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub disease_id: String,
    pub demographics: Demographics,
    pub events: Vec<ClinicalEvent>,
    /// variable_id -> true value in canonical text form (`None` when absent).
    pub truth: BTreeMap<String, String>,
}

impl PatientRecord {
    pub fn event(&self, event_id: &str) -> Option<&ClinicalEvent> {
        self.events.iter().find(|e| e.event_id == event_id)
    }
}

pub fn raw_patient_id(disease_id: &str, index: usize) -> String {
    format!("MRN-{}-{:06}", disease_id.to_uppercase(), index)
}

fn horizon() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 12, 31).unwrap()
}

fn demographics(module: &DiseaseModule, rng: &mut ChaCha8Rng) -> Demographics {
    let sex = match module.disease_id.as_str() {
        "prostate_cancer" => "male",
        "contraceptives" | "female_reproduction" => "female",
        _ if rng.random_bool(0.5) => "male",
        _ => "female",
    };
    let given = if sex == "male" { GIVEN_MALE } else { GIVEN_FEMALE };
    let start = NaiveDate::from_ymd_opt(1940, 1, 1).unwrap();
    let birth_date = start + Days::new(rng.random_range(0..24_000));
    Demographics {
        given_name: given.choose(rng).unwrap().to_string(),
        family_name: FAMILY.choose(rng).unwrap().to_string(),
        birth_date,
        sex: sex.to_string(),
        address: Address {
            line: format!(
                "{} {} {}",
                rng.random_range(1..400),
                STREETS.choose(rng).unwrap(),
                STREET_KINDS.choose(rng).unwrap()
            ),
            city: CITIES.choose(rng).unwrap().to_string(),
            postal_code: format!("{:05}", rng.random_range(10_000..99_999)),
        },
    }
}

/// Distinct minute-resolution timestamps between age one and the horizon.
struct Clock {
    first: NaiveDate,
    span_days: u64,
    used: BTreeSet<NaiveDateTime>,
}

impl Clock {
    fn new(birth: NaiveDate) -> Clock {
        let floor = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let first = (birth + Days::new(365)).max(floor);
        let span_days = (horizon() - first).num_days().max(1) as u64;
        Clock {
            first,
            span_days,
            used: BTreeSet::new(),
        }
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> NaiveDateTime {
        loop {
            let day = self.first + Days::new(rng.random_range(0..self.span_days));
            let t = NaiveTime::from_hms_opt(rng.random_range(7..19), rng.random_range(0..60), 0).unwrap();
            let ts = day.and_time(t);
            if self.used.insert(ts) {
                return ts;
            }
        }
    }
}

pub(crate) fn draw_numeric(rng: &mut impl Rng, min: f64, max: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let raw = if max > min { rng.random_range(min..=max) } else { min };
    ((raw * scale).round() / scale).clamp(min, max)
}

/// Value of an Observations event for the given variable.
pub(crate) fn draw_observation(spec: &VariableSpec, ts: &NaiveDateTime, rng: &mut impl Rng) -> EventValue {
    match (&spec.value_kind, &spec.domain) {
        (ValueKind::Numeric, Some(Domain::Numeric { min, max, decimals, unit })) => EventValue::Quantity {
            value: draw_numeric(rng, *min, *max, *decimals),
            unit: unit.clone(),
        },
        (_, Some(Domain::Options { values })) => EventValue::Text(values.choose(rng).unwrap().clone()),
        (ValueKind::Date, domain) => {
            let lag = match domain {
                Some(Domain::Date { max_lag_days }) => rng.random_range(0..=*max_lag_days as u64),
                _ => 0,
            };
            EventValue::Date(ts.date() - Days::new(lag))
        }
        _ => EventValue::Bool(rng.random_bool(0.5)),
    }
}

/// Ledger value implied by an event of the variable.
pub fn truth_value(spec: &VariableSpec, event: &ClinicalEvent) -> String {
    if spec.carries_value() {
        return event.value.render();
    }
    match spec.value_kind {
        ValueKind::Date => format_date(&event.timestamp.date()),
        ValueKind::Coded => spec
            .code_bindings
            .iter()
            .find(|b| b.code == event.code)
            .and_then(|b| b.value.clone())
            .unwrap_or_else(|| event.display.clone()),
        _ => "Yes".to_string(),
    }
}

struct Pending {
    timestamp: NaiveDateTime,
    category: Category,
    system: CodeSystem,
    code: String,
    display: String,
    value: EventValue,
    variable_id: Option<String>,
}

pub fn generate_patient(module: &DiseaseModule, patient_index: usize, seed: u64) -> PatientRecord {
    let mut rng = rng_for(seed, &module.disease_id, patient_index as u64);
    let patient_id = raw_patient_id(&module.disease_id, patient_index);
    let demographics = demographics(module, &mut rng);
    let mut clock = Clock::new(demographics.birth_date);

    let mut pending = Vec::new();
    for spec in &module.variable_specs {
        if !rng.random_bool(spec.presence) {
            continue;
        }
        let count = if rng.random_bool(spec.repeat_probability) { 2 } else { 1 };
        for _ in 0..count {
            let timestamp = clock.draw(&mut rng);
            let binding = spec.code_bindings.choose(&mut rng).unwrap();
            let value = if spec.carries_value() {
                draw_observation(spec, &timestamp, &mut rng)
            } else {
                EventValue::Present
            };
            pending.push(Pending {
                timestamp,
                category: spec.category,
                system: binding.system,
                code: binding.code.clone(),
                display: binding.display.clone(),
                value,
                variable_id: Some(spec.variable_id.clone()),
            });
        }
    }

    let mut background = rng.random_range(1..=6usize);
    if pending.len() + background < MIN_EVENTS {
        background = MIN_EVENTS - pending.len();
    }
    let background = background.min(MAX_EVENTS.saturating_sub(pending.len()));
    if !module.event_templates.is_empty() {
        for _ in 0..background {
            let t = module
                .event_templates
                .choose_weighted(&mut rng, |t| t.weight)
                .expect("weights validated positive");
            pending.push(Pending {
                timestamp: clock.draw(&mut rng),
                category: t.category,
                system: t.system,
                code: t.code.clone(),
                display: t.display.clone(),
                value: EventValue::Present,
                variable_id: None,
            });
        }
    }

    pending.sort_by_key(|p| p.timestamp);
    let events: Vec<ClinicalEvent> = pending
        .into_iter()
        .enumerate()
        .map(|(i, p)| ClinicalEvent {
            event_id: format!("{patient_id}-E{:03}", i + 1),
            patient_id: patient_id.clone(),
            timestamp: p.timestamp,
            category: p.category,
            system: p.system,
            code: p.code,
            display: p.display,
            value: p.value,
            variable_id: p.variable_id,
        })
        .collect();

    let truth = module
        .variable_specs
        .iter()
        .map(|spec| {
            let latest = events
                .iter()
                .filter(|e| e.variable_id.as_deref() == Some(spec.variable_id.as_str()))
                .max_by_key(|e| e.timestamp);
            let value = latest.map_or_else(|| MISSING.to_string(), |e| truth_value(spec, e));
            (spec.variable_id.clone(), value)
        })
        .collect();

    PatientRecord {
        patient_id,
        disease_id: module.disease_id.clone(),
        demographics,
        events,
        truth,
    }
}

pub fn ledger_entries(record: &PatientRecord) -> Vec<LedgerEntry> {
    record
        .truth
        .iter()
        .map(|(variable_id, value)| LedgerEntry {
            patient_id: record.patient_id.clone(),
            disease_id: record.disease_id.clone(),
            variable_id: variable_id.clone(),
            true_value: value.clone(),
            event_ids: record
                .events
                .iter()
                .filter(|e| e.variable_id.as_ref() == Some(variable_id))
                .map(|e| e.event_id.clone())
                .collect(),
        })
        .collect()
}

pub fn generate_corpus(
    catalog: &Catalog,
    patients_per_disease: usize,
    seed: u64,
) -> (Vec<PatientRecord>, GroundTruthLedger) {
    let jobs: Vec<(&DiseaseModule, usize)> = catalog
        .diseases
        .iter()
        .flat_map(|d| (0..patients_per_disease).map(move |i| (d, i)))
        .collect();
    let records: Vec<PatientRecord> = jobs
        .par_iter()
        .map(|(d, i)| generate_patient(d, *i, seed))
        .collect();
    let mut ledger = GroundTruthLedger {
        entries: records.iter().flat_map(ledger_entries).collect(),
    };
    ledger.sort();
    (records, ledger)
}
