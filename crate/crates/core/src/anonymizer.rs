//! Pseudonymization and deny-list scrubbing of documents before storage.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::PatientRecord;
use crate::seed::stable_hash64;
use crate::types::FormatKind;

pub const REDACTED: &str = "[REDACTED]";

#[derive(Debug, thiserror::Error)]
pub enum AnonymizerError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

/// Source patient id to `P_<n>` pseudonym.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityMap {
    pub salt: u64,
    pairs: BTreeMap<String, String>,
    #[serde(skip)]
    reverse: BTreeMap<String, String>,
}

impl IdentityMap {
    pub fn new(salt: u64) -> IdentityMap {
        IdentityMap {
            salt,
            pairs: BTreeMap::new(),
            reverse: BTreeMap::new(),
        }
    }

    /// Numbers ids by their rank under a keyed hash, so the numbering does
    /// not reveal generation order.
    pub fn build<'a>(ids: impl IntoIterator<Item = &'a str>, salt: u64) -> IdentityMap {
        let distinct: BTreeSet<&str> = ids.into_iter().collect();
        let mut ranked: Vec<(u64, &str)> = distinct
            .into_iter()
            .map(|id| (stable_hash64(&[&salt.to_be_bytes(), id.as_bytes()]), id))
            .collect();
        ranked.sort();
        let mut map = IdentityMap::new(salt);
        for (_, id) in ranked {
            map.get_or_assign(id);
        }
        map
    }

    pub fn pseudonym(&self, patient_id: &str) -> Option<&str> {
        self.pairs.get(patient_id).map(String::as_str)
    }

    /// Existing pseudonym, or the next unused number.
    pub fn get_or_assign(&mut self, patient_id: &str) -> String {
        if let Some(p) = self.pairs.get(patient_id) {
            return p.clone();
        }
        let p = format!("P_{}", self.pairs.len() + 1);
        self.pairs.insert(patient_id.to_string(), p.clone());
        self.reverse.insert(p.clone(), patient_id.to_string());
        p
    }

    pub fn source_of(&self, pseudonym: &str) -> Option<&str> {
        self.reverse.get(pseudonym).map(String::as_str)
    }

    pub fn is_pseudonym(&self, id: &str) -> bool {
        self.reverse.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Writes the map readable by the owner only.
    pub fn save(&self, path: &Path) -> Result<(), AnonymizerError> {
        let io = |source| AnonymizerError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let mut body = serde_json::to_string_pretty(self).expect("identity map serializes");
        body.push('\n');
        let mut options = std::fs::OpenOptions::new();
        options.write(true).create(true).truncate(true);
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            options.mode(0o600);
        }
        let mut file = options.open(path).map_err(io)?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            file.set_permissions(std::fs::Permissions::from_mode(0o600)).map_err(io)?;
        }
        std::io::Write::write_all(&mut file, body.as_bytes()).map_err(io)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<IdentityMap, AnonymizerError> {
        let text = std::fs::read_to_string(path).map_err(|source| AnonymizerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut map: IdentityMap = serde_json::from_str(&text).map_err(|e| AnonymizerError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        map.reverse = map.pairs.iter().map(|(k, v)| (v.clone(), k.clone())).collect();
        if map.reverse.len() != map.pairs.len() {
            return Err(AnonymizerError::Format {
                path: path.display().to_string(),
                message: "pseudonyms are not unique".into(),
            });
        }
        Ok(map)
    }
}

pub fn pseudonymize_patient(patient_id: &str, map: &mut IdentityMap) -> String {
    map.get_or_assign(patient_id)
}

/// Identifying strings taken from corpus demographics. Birth dates are kept
/// per patient since a bare date is only identifying in its own record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiiDenyList {
    pub global: BTreeSet<String>,
    pub per_patient: BTreeMap<String, BTreeSet<String>>,
}

impl PiiDenyList {
    pub fn from_records(records: &[PatientRecord], map: &IdentityMap) -> PiiDenyList {
        let mut deny = PiiDenyList::default();
        for r in records {
            let d = &r.demographics;
            deny.global.insert(d.full_name());
            deny.global.insert(format!("{} {}", d.family_name, d.given_name));
            deny.global.insert(format!("{}^{}", d.family_name, d.given_name));
            deny.global.insert(d.address.line.clone());
            deny.global.insert(r.patient_id.clone());
            let dates: BTreeSet<String> = [
                d.birth_date.format("%Y-%m-%d").to_string(),
                d.birth_date.format("%Y%m%d").to_string(),
                d.birth_date.format("%d.%m.%Y").to_string(),
            ]
            .into();
            deny.per_patient.insert(r.patient_id.clone(), dates.clone());
            if let Some(p) = map.pseudonym(&r.patient_id) {
                deny.per_patient.insert(p.to_string(), dates);
            }
        }
        deny
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty() && self.per_patient.is_empty()
    }

    pub fn tokens_for<'a>(&'a self, patient: &str) -> impl Iterator<Item = &'a String> {
        self.global.iter().chain(self.per_patient.get(patient).into_iter().flatten())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub doc_id: String,
    pub token: String,
    pub offset: usize,
}

/// Scrubs documents against a fixed identity map and deny list.
pub struct Scrubber<'a> {
    map: &'a IdentityMap,
    deny: &'a PiiDenyList,
    global: Option<AhoCorasick>,
    global_overlapping: Option<AhoCorasick>,
    global_tokens: Vec<&'a str>,
}

fn matcher<'t>(tokens: impl IntoIterator<Item = &'t str>, kind: MatchKind) -> Option<AhoCorasick> {
    let tokens: Vec<&str> = tokens.into_iter().filter(|t| !t.is_empty()).collect();
    if tokens.is_empty() {
        return None;
    }
    Some(
        AhoCorasickBuilder::new()
            .ascii_case_insensitive(true)
            .match_kind(kind)
            .build(tokens)
            .expect("deny tokens build"),
    )
}

fn truncate_year(s: &str) -> String {
    s.chars().take(4).collect()
}

fn scrub_hl7(body: &str) -> String {
    let mut out = String::with_capacity(body.len());
    for seg in body.split_inclusive('\r') {
        let (line, term) = match seg.strip_suffix('\r') {
            Some(l) => (l, "\r"),
            None => (seg, ""),
        };
        if line.starts_with("PID|") {
            let mut fields: Vec<String> = line.split('|').map(str::to_string).collect();
            for i in [5, 11] {
                if let Some(f) = fields.get_mut(i) {
                    if !f.is_empty() {
                        *f = REDACTED.to_string();
                    }
                }
            }
            if let Some(f) = fields.get_mut(7) {
                *f = truncate_year(f);
            }
            out.push_str(&fields.join("|"));
        } else {
            out.push_str(line);
        }
        out.push_str(term);
    }
    out
}

fn scrub_fhir(body: &str) -> String {
    let Ok(mut root) = serde_json::from_str::<Value>(body) else {
        return body.to_string();
    };
    let redacted = || serde_json::json!([{ "text": REDACTED }]);
    if let Some(entries) = root.get_mut("entry").and_then(Value::as_array_mut) {
        for e in entries {
            let Some(r) = e.get_mut("resource") else { continue };
            if r.get("resourceType").and_then(Value::as_str) != Some("Patient") {
                continue;
            }
            if let Some(obj) = r.as_object_mut() {
                if obj.contains_key("name") {
                    obj.insert("name".into(), redacted());
                }
                if obj.contains_key("address") {
                    obj.insert("address".into(), redacted());
                }
                if let Some(b) = obj.get("birthDate").and_then(Value::as_str) {
                    let year = truncate_year(b);
                    obj.insert("birthDate".into(), Value::String(year));
                }
            }
        }
    }
    let mut out = serde_json::to_string_pretty(&root).expect("bundle serializes");
    if body.ends_with('\n') {
        out.push('\n');
    }
    out
}

fn scrub_narrative(body: &str) -> String {
    let mut out = String::with_capacity(body.len());
    for line in body.split_inclusive('\n') {
        let content = line.trim_end_matches(['\n', '\r']);
        let end = &line[content.len()..];
        if content.starts_with("Name:") {
            out.push_str(&format!("Name: {REDACTED}"));
        } else if content.starts_with("Address:") {
            out.push_str(&format!("Address: {REDACTED}"));
        } else if let Some(dob) = content.strip_prefix("DOB:") {
            out.push_str(&format!("DOB: {}", truncate_year(dob.trim())));
        } else {
            out.push_str(content);
        }
        out.push_str(end);
    }
    out
}

impl<'a> Scrubber<'a> {
    pub fn new(map: &'a IdentityMap, deny: &'a PiiDenyList) -> Scrubber<'a> {
        let global_tokens: Vec<&str> = deny.global.iter().map(String::as_str).filter(|t| !t.is_empty()).collect();
        Scrubber {
            map,
            deny,
            global: matcher(global_tokens.iter().copied(), MatchKind::LeftmostLongest),
            global_overlapping: matcher(global_tokens.iter().copied(), MatchKind::Standard),
            global_tokens,
        }
    }

    /// Structured field redaction, raw id replacement, then a deny-list pass.
    pub fn scrub(&self, doc: &crate::scatter::MedicalDocument) -> crate::scatter::MedicalDocument {
        let structured = match doc.format {
            FormatKind::Hl7V2 => scrub_hl7(&doc.body),
            FormatKind::FhirJson => scrub_fhir(&doc.body),
            FormatKind::CsvExtract => doc.body.clone(),
            FormatKind::Narrative => scrub_narrative(&doc.body),
        };
        let pseudonym = self.map.pseudonym(&doc.patient_id).map(str::to_string);
        let (body, doc_id, patient_id) = match &pseudonym {
            Some(p) => (
                structured.replace(&doc.patient_id, p),
                doc.doc_id.replace(&doc.patient_id, p),
                p.clone(),
            ),
            None => (structured, doc.doc_id.clone(), doc.patient_id.clone()),
        };
        let body = match &self.global {
            Some(ac) => ac.replace_all(&body, &vec![REDACTED; self.global_tokens.len()]),
            None => body,
        };
        let local: Vec<&str> = self
            .deny
            .per_patient
            .get(&patient_id)
            .into_iter()
            .flatten()
            .map(String::as_str)
            .collect();
        let body = match matcher(local.iter().copied(), MatchKind::LeftmostLongest) {
            Some(ac) => ac.replace_all(&body, &vec![REDACTED; local.len()]),
            None => body,
        };
        crate::scatter::MedicalDocument {
            doc_id,
            patient_id,
            body,
            ..doc.clone()
        }
    }

    /// Every surviving deny token occurrence, overlapping ones included.
    pub fn verify(&self, docs: &[crate::scatter::MedicalDocument]) -> Vec<Violation> {
        let mut out = Vec::new();
        for doc in docs {
            let mut found: Vec<Violation> = Vec::new();
            if let Some(ac) = &self.global_overlapping {
                for m in ac.find_overlapping_iter(&doc.body) {
                    found.push(Violation {
                        doc_id: doc.doc_id.clone(),
                        token: self.global_tokens[m.pattern().as_usize()].to_string(),
                        offset: m.start(),
                    });
                }
            }
            let local: Vec<&str> = self
                .deny
                .per_patient
                .get(&doc.patient_id)
                .into_iter()
                .flatten()
                .map(String::as_str)
                .collect();
            if let Some(ac) = matcher(local.iter().copied(), MatchKind::Standard) {
                for m in ac.find_overlapping_iter(&doc.body) {
                    found.push(Violation {
                        doc_id: doc.doc_id.clone(),
                        token: local[m.pattern().as_usize()].to_string(),
                        offset: m.start(),
                    });
                }
            }
            found.sort_by(|a, b| (a.offset, &a.token).cmp(&(b.offset, &b.token)));
            out.extend(found);
        }
        out
    }
}

pub fn scrub_document(
    doc: &crate::scatter::MedicalDocument,
    map: &IdentityMap,
    deny: &PiiDenyList,
) -> crate::scatter::MedicalDocument {
    Scrubber::new(map, deny).scrub(doc)
}

pub fn verify_scrub(docs: &[crate::scatter::MedicalDocument], deny: &PiiDenyList) -> Vec<Violation> {
    let map = IdentityMap::new(0);
    Scrubber::new(&map, deny).verify(docs)
}
