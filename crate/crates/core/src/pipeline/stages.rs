use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::anonymizer::{IdentityMap, PiiDenyList, Scrubber, Violation};
use crate::canonical::format_timestamp;
use crate::corpus::{generate_corpus, read_ground_truth_ledger, write_ground_truth_ledger, Catalog, PatientRecord};
use crate::docstore::{DocStore, ObjectRef, TAG_CREATED, TAG_DISEASE, TAG_DOC, TAG_FORMAT, TAG_PATIENT};
use crate::eval::{build_report, write_report, EvalReport, ReportOptions};
use crate::extract::{build_registry, extract_patient_variables, ConflictPolicy, OntologyRegistry, VariableAssignment};
use crate::ingest::{parse_document, NarrativeMatcher, ParseOptions, ParsedDocument};
use crate::megatable::{assemble_disease_table, export_csv, export_json, MegaTable};
use crate::scatter::{scatter_patient, MedicalDocument};
use crate::seed::sub_seed;
use crate::types::FormatKind;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{stage}: missing input {path} (run `{producer}` first)")]
    MissingInput {
        stage: &'static str,
        path: PathBuf,
        producer: &'static str,
    },
    #[error("{stage}: {path}: {message}")]
    Io {
        stage: &'static str,
        path: PathBuf,
        message: String,
    },
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
}

impl PipelineError {
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::MissingInput { .. } => "missing_input",
            PipelineError::Io { .. } => "io",
            PipelineError::Stage { .. } => "stage",
        }
    }

    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::MissingInput { stage, .. }
            | PipelineError::Io { stage, .. }
            | PipelineError::Stage { stage, .. } => stage,
        }
    }
}

/// Output tree locations under the run's root.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Layout {
        Layout { root: root.to_path_buf() }
    }
    pub fn records(&self) -> PathBuf {
        self.root.join("corpus").join("records.jsonl")
    }
    pub fn ledger(&self) -> PathBuf {
        self.root.join("corpus").join("ledger.jsonl")
    }
    pub fn raw(&self) -> PathBuf {
        self.root.join("raw")
    }
    pub fn manifest(&self) -> PathBuf {
        self.raw().join("manifest.json")
    }
    pub fn secure(&self) -> PathBuf {
        self.root.join("secure")
    }
    pub fn identity_map(&self) -> PathBuf {
        self.secure().join("identity_map.json")
    }
    pub fn scrub_report(&self) -> PathBuf {
        self.secure().join("scrub_report.json")
    }
    pub fn store(&self) -> PathBuf {
        self.root.join("store")
    }
    pub fn parsed(&self) -> PathBuf {
        self.root.join("parsed").join("parsed.jsonl")
    }
    pub fn assignments(&self) -> PathBuf {
        self.root.join("extract").join("assignments.jsonl")
    }
    pub fn megatable_dir(&self, disease_id: &str) -> PathBuf {
        self.root.join(disease_id)
    }
    pub fn eval(&self) -> PathBuf {
        self.root.join("eval")
    }
}

fn io_err<'a>(stage: &'static str, path: &'a Path) -> impl Fn(std::fmt::Arguments) -> PipelineError + 'a {
    move |m| PipelineError::Io {
        stage,
        path: path.to_path_buf(),
        message: m.to_string(),
    }
}

fn stage_err(stage: &'static str, message: impl ToString) -> PipelineError {
    PipelineError::Stage {
        stage,
        message: message.to_string(),
    }
}

fn require(stage: &'static str, path: &Path, producer: &'static str) -> Result<(), PipelineError> {
    if path.exists() {
        Ok(())
    } else {
        Err(PipelineError::MissingInput {
            stage,
            path: path.to_path_buf(),
            producer,
        })
    }
}

fn ensure_parent(stage: &'static str, path: &Path) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(stage, dir)(format_args!("{e}")))?;
    }
    Ok(())
}

fn reset_dir(stage: &'static str, dir: &Path) -> Result<(), PipelineError> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| io_err(stage, dir)(format_args!("{e}")))?;
    }
    fs::create_dir_all(dir).map_err(|e| io_err(stage, dir)(format_args!("{e}")))
}

pub fn write_jsonl<T: Serialize>(stage: &'static str, path: &Path, items: &[T]) -> Result<(), PipelineError> {
    ensure_parent(stage, path)?;
    let err = io_err(stage, path);
    let f = fs::File::create(path).map_err(|e| err(format_args!("{e}")))?;
    let mut w = BufWriter::new(f);
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| err(format_args!("{e}")))?;
        writeln!(w, "{line}").map_err(|e| err(format_args!("{e}")))?;
    }
    w.flush().map_err(|e| err(format_args!("{e}")))
}

pub fn read_jsonl<T: DeserializeOwned>(stage: &'static str, path: &Path) -> Result<Vec<T>, PipelineError> {
    let err = io_err(stage, path);
    let f = fs::File::open(path).map_err(|e| err(format_args!("{e}")))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| err(format_args!("{e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| err(format_args!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

fn write_json<T: Serialize>(stage: &'static str, path: &Path, value: &T) -> Result<(), PipelineError> {
    ensure_parent(stage, path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| stage_err(stage, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(stage, path)(format_args!("{e}")))
}

fn read_json<T: DeserializeOwned>(stage: &'static str, path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(stage, path)(format_args!("{e}")))?;
    serde_json::from_str(&text).map_err(|e| io_err(stage, path)(format_args!("{e}")))
}

fn catalog(stage: &'static str, cfg: &RunConfig) -> Result<Catalog, PipelineError> {
    cfg.selected_catalog().map_err(|m| stage_err(stage, m))
}

pub fn load_records(stage: &'static str, layout: &Layout) -> Result<Vec<PatientRecord>, PipelineError> {
    require(stage, &layout.records(), "gen")?;
    read_jsonl(stage, &layout.records())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSummary {
    pub patients: usize,
    pub events: usize,
    pub ledger_entries: usize,
}

/// Generates the corpus and its ground-truth ledger.
pub fn stage_gen(cfg: &RunConfig) -> Result<GenSummary, PipelineError> {
    const S: &str = "gen";
    let layout = Layout::new(&cfg.out);
    let catalog = catalog(S, cfg)?;
    let (records, ledger) = generate_corpus(&catalog, cfg.patients_per_disease, cfg.seed);
    write_jsonl(S, &layout.records(), &records)?;
    write_ground_truth_ledger(&ledger, &layout.ledger()).map_err(|e| stage_err(S, e))?;
    Ok(GenSummary {
        patients: records.len(),
        events: records.iter().map(|r| r.events.len()).sum(),
        ledger_entries: ledger.entries.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub doc_id: String,
    pub patient_id: String,
    pub disease_id: String,
    pub format: FormatKind,
    pub created_at: String,
    pub file: String,
    pub object: ObjectRef,
    pub covered_event_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub documents: Vec<ManifestEntry>,
}

/// Fragments every record into documents under `raw/`.
pub fn stage_scatter(cfg: &RunConfig) -> Result<Manifest, PipelineError> {
    const S: &str = "scatter";
    let layout = Layout::new(&cfg.out);
    let catalog = catalog(S, cfg)?;
    let profile = cfg.noise_profile().map_err(|m| stage_err(S, m))?;
    let records = load_records(S, &layout)?;
    let docs: Vec<Vec<MedicalDocument>> = records
        .par_iter()
        .map(|r| {
            let module = catalog
                .disease(&r.disease_id)
                .ok_or_else(|| stage_err(S, format!("record {} names unknown disease {}", r.patient_id, r.disease_id)))?;
            scatter_patient(r, module, &profile, cfg.seed).map_err(|e| stage_err(S, e))
        })
        .collect::<Result<_, _>>()?;
    reset_dir(S, &layout.raw())?;
    let mut entries = Vec::new();
    for doc in docs.iter().flatten() {
        let rel = format!("{}/{}", doc.patient_id, doc.file_name());
        let path = layout.raw().join(&rel);
        ensure_parent(S, &path)?;
        fs::write(&path, &doc.body).map_err(|e| io_err(S, &path)(format_args!("{e}")))?;
        entries.push(ManifestEntry {
            doc_id: doc.doc_id.clone(),
            patient_id: doc.patient_id.clone(),
            disease_id: doc.disease_id.clone(),
            format: doc.format,
            created_at: format_timestamp(&doc.created_at),
            file: rel,
            object: ObjectRef::of(doc.body.as_bytes()),
            covered_event_ids: doc.covered_event_ids.clone(),
        });
    }
    let manifest = Manifest { documents: entries };
    write_json(S, &layout.manifest(), &manifest)?;
    Ok(manifest)
}

pub fn load_manifest(stage: &'static str, layout: &Layout) -> Result<Manifest, PipelineError> {
    require(stage, &layout.manifest(), "scatter")?;
    read_json(stage, &layout.manifest())
}

fn manifest_document(stage: &'static str, layout: &Layout, e: &ManifestEntry) -> Result<MedicalDocument, PipelineError> {
    let path = layout.raw().join(&e.file);
    let body = fs::read_to_string(&path).map_err(|err| io_err(stage, &path)(format_args!("{err}")))?;
    let created_at = NaiveDateTime::parse_from_str(&e.created_at, "%Y-%m-%dT%H:%M")
        .map_err(|err| io_err(stage, &path)(format_args!("created_at: {err}")))?;
    Ok(MedicalDocument {
        doc_id: e.doc_id.clone(),
        patient_id: e.patient_id.clone(),
        disease_id: e.disease_id.clone(),
        format: e.format,
        body,
        created_at,
        covered_event_ids: e.covered_event_ids.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScrubReport {
    pub anonymized: bool,
    pub documents: usize,
    pub objects: usize,
    pub violations: Vec<Violation>,
}

fn identity_salt(seed: u64) -> u64 {
    sub_seed(seed, "identity", 0)
}

/// Scrubs documents (unless disabled) and loads them into a fresh store.
pub fn stage_anonymize(cfg: &RunConfig) -> Result<ScrubReport, PipelineError> {
    const S: &str = "anonymize";
    let layout = Layout::new(&cfg.out);
    let records = load_records(S, &layout)?;
    let manifest = load_manifest(S, &layout)?;
    let raw: Vec<MedicalDocument> = manifest
        .documents
        .par_iter()
        .map(|e| manifest_document(S, &layout, e))
        .collect::<Result<_, _>>()?;
    reset_dir(S, &layout.secure())?;
    let (docs, violations) = if cfg.anonymize {
        let map = IdentityMap::build(records.iter().map(|r| r.patient_id.as_str()), identity_salt(cfg.seed));
        let deny = PiiDenyList::from_records(&records, &map);
        let scrubber = Scrubber::new(&map, &deny);
        let docs: Vec<MedicalDocument> = raw.par_iter().map(|d| scrubber.scrub(d)).collect();
        let violations = scrubber.verify(&docs);
        map.save(&layout.identity_map()).map_err(|e| stage_err(S, e))?;
        (docs, violations)
    } else {
        (raw, Vec::new())
    };
    reset_dir(S, &layout.store())?;
    let mut store = DocStore::open(&layout.store()).map_err(|e| stage_err(S, e))?;
    for d in &docs {
        let tags: BTreeMap<String, String> = [
            (TAG_FORMAT, d.format.as_str().to_string()),
            (TAG_DISEASE, d.disease_id.clone()),
            (TAG_PATIENT, d.patient_id.clone()),
            (TAG_CREATED, format_timestamp(&d.created_at)),
            (TAG_DOC, d.doc_id.clone()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        store.put_object(d.body.as_bytes(), tags).map_err(|e| stage_err(S, e))?;
    }
    store.flush().map_err(|e| stage_err(S, e))?;
    let report = ScrubReport {
        anonymized: cfg.anonymize,
        documents: docs.len(),
        objects: store.object_count(),
        violations,
    };
    write_json(S, &layout.scrub_report(), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedEntry {
    pub doc_id: String,
    pub disease_id: String,
    pub patient: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document: Option<ParsedDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn open_store(stage: &'static str, layout: &Layout) -> Result<DocStore, PipelineError> {
    require(stage, &layout.store().join("index.jsonl"), "anonymize")?;
    DocStore::open(&layout.store()).map_err(|e| stage_err(stage, e))
}

pub fn registry(stage: &'static str, cfg: &RunConfig) -> Result<OntologyRegistry, PipelineError> {
    let catalog = cfg.catalog().map_err(|m| stage_err(stage, m))?;
    build_registry(&catalog).map_err(|e| stage_err(stage, e))
}

/// Parses every stored document. In strict mode the first failure aborts.
pub fn stage_ingest(cfg: &RunConfig) -> Result<Vec<ParsedEntry>, PipelineError> {
    const S: &str = "ingest";
    let layout = Layout::new(&cfg.out);
    let store = open_store(S, &layout)?;
    let registry = registry(S, cfg)?;
    let matcher = NarrativeMatcher::new(&registry);
    let options = ParseOptions { strict: cfg.strict };
    let records = store.query_by_tags(&BTreeMap::new());
    let entries: Vec<ParsedEntry> = records
        .par_iter()
        .map(|rec| {
            let bytes = store.get_object(&rec.object).map_err(|e| stage_err(S, e))?;
            let tag = |k: &str| rec.tag(k).unwrap_or_default().to_string();
            let parsed = parse_document(&bytes, &matcher, options);
            let (document, error) = match parsed {
                Ok(d) => (Some(d), None),
                Err(e) if cfg.strict => return Err(stage_err(S, format!("{}: {e}", tag(TAG_DOC)))),
                Err(e) => (None, Some(e.to_string())),
            };
            Ok(ParsedEntry {
                doc_id: tag(TAG_DOC),
                disease_id: tag(TAG_DISEASE),
                patient: tag(TAG_PATIENT),
                document,
                error,
            })
        })
        .collect::<Result<_, _>>()?;
    write_jsonl(S, &layout.parsed(), &entries)?;
    Ok(entries)
}

/// Patient ids as they appear downstream of the anonymizer, per disease.
pub fn pipeline_patients(
    stage: &'static str,
    cfg: &RunConfig,
    layout: &Layout,
) -> Result<Vec<(String, String)>, PipelineError> {
    let records = load_records(stage, layout)?;
    let map = if cfg.anonymize {
        require(stage, &layout.identity_map(), "anonymize")?;
        Some(IdentityMap::load(&layout.identity_map()).map_err(|e| stage_err(stage, e))?)
    } else {
        None
    };
    records
        .iter()
        .map(|r| {
            let id = match &map {
                Some(m) => m
                    .pseudonym(&r.patient_id)
                    .ok_or_else(|| stage_err(stage, format!("no pseudonym for {}", r.patient_id)))?
                    .to_string(),
                None => r.patient_id.clone(),
            };
            Ok((r.disease_id.clone(), id))
        })
        .collect()
}

/// One assignment per (patient, variable), grouped by disease in catalog order.
pub fn extract_all(
    catalog: &Catalog,
    registry: &OntologyRegistry,
    patients: &[(String, String)],
    parsed: &[ParsedEntry],
    policy: &ConflictPolicy,
) -> Vec<VariableAssignment> {
    let mut by_patient: BTreeMap<&str, Vec<ParsedDocument>> = BTreeMap::new();
    for e in parsed {
        if let Some(d) = &e.document {
            by_patient.entry(&e.patient).or_default().push(d.clone());
        }
    }
    let order: BTreeMap<&str, usize> =
        catalog.diseases.iter().enumerate().map(|(i, d)| (d.disease_id.as_str(), i)).collect();
    let mut jobs: Vec<&(String, String)> = patients.iter().filter(|(d, _)| order.contains_key(d.as_str())).collect();
    jobs.sort_by_key(|(d, p)| {
        let n = p.rsplit('_').next().and_then(|s| s.parse::<u64>().ok()).unwrap_or(u64::MAX);
        (order[d.as_str()], n, p.clone())
    });
    let empty = Vec::new();
    jobs.par_iter()
        .flat_map_iter(|(d, p)| {
            let module = catalog.disease(d).expect("filtered to catalog diseases");
            let docs = by_patient.get(p.as_str()).unwrap_or(&empty);
            extract_patient_variables(p, module, docs, registry, policy)
        })
        .collect()
}

pub fn stage_extract(cfg: &RunConfig) -> Result<Vec<VariableAssignment>, PipelineError> {
    const S: &str = "extract";
    let layout = Layout::new(&cfg.out);
    require(S, &layout.parsed(), "ingest")?;
    let catalog = catalog(S, cfg)?;
    let registry = registry(S, cfg)?;
    let patients = pipeline_patients(S, cfg, &layout)?;
    let parsed: Vec<ParsedEntry> = read_jsonl(S, &layout.parsed())?;
    let assignments = extract_all(&catalog, &registry, &patients, &parsed, &ConflictPolicy::default());
    write_jsonl(S, &layout.assignments(), &assignments)?;
    Ok(assignments)
}

pub fn load_assignments(stage: &'static str, layout: &Layout) -> Result<Vec<VariableAssignment>, PipelineError> {
    require(stage, &layout.assignments(), "extract")?;
    read_jsonl(stage, &layout.assignments())
}

pub fn stage_assemble(cfg: &RunConfig) -> Result<Vec<MegaTable>, PipelineError> {
    const S: &str = "assemble";
    let layout = Layout::new(&cfg.out);
    let catalog = catalog(S, cfg)?;
    let assignments = load_assignments(S, &layout)?;
    let present: BTreeSet<&str> = assignments.iter().map(|a| a.disease_id.as_str()).collect();
    let tables: Vec<MegaTable> = catalog
        .diseases
        .par_iter()
        .filter(|d| present.contains(d.disease_id.as_str()))
        .map(|d| assemble_disease_table(&assignments, d).map_err(|e| stage_err(S, e)))
        .collect::<Result<_, _>>()?;
    for t in &tables {
        let dir = layout.megatable_dir(&t.disease_id);
        fs::create_dir_all(&dir).map_err(|e| io_err(S, &dir)(format_args!("{e}")))?;
        export_csv(t, &dir.join("megatable.csv")).map_err(|e| stage_err(S, e))?;
        export_json(t, &dir.join("megatable.json")).map_err(|e| stage_err(S, e))?;
    }
    Ok(tables)
}

pub fn stage_eval(cfg: &RunConfig) -> Result<EvalReport, PipelineError> {
    const S: &str = "eval";
    let layout = Layout::new(&cfg.out);
    require(S, &layout.ledger(), "gen")?;
    let catalog = catalog(S, cfg)?;
    let assignments = load_assignments(S, &layout)?;
    let ledger = read_ground_truth_ledger(&layout.ledger()).map_err(|e| stage_err(S, e))?;
    let map = if cfg.anonymize {
        require(S, &layout.identity_map(), "anonymize")?;
        Some(IdentityMap::load(&layout.identity_map()).map_err(|e| stage_err(S, e))?)
    } else {
        None
    };
    let options = ReportOptions {
        resamples: cfg.resamples,
        ..ReportOptions::new(cfg.seed)
    };
    let report = build_report(&ledger, &assignments, &catalog, map.as_ref(), &options).map_err(|e| stage_err(S, e))?;
    write_report(&report, &layout.eval()).map_err(|e| stage_err(S, e))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub gen: GenSummary,
    pub documents: usize,
    pub violations: usize,
    pub assignments: usize,
    pub tables: usize,
    pub overall_accuracy: f64,
    pub outliers: usize,
}

/// Every stage in order.
pub fn run_all(cfg: &RunConfig) -> Result<RunSummary, PipelineError> {
    let gen = stage_gen(cfg)?;
    let manifest = stage_scatter(cfg)?;
    let scrub = stage_anonymize(cfg)?;
    stage_ingest(cfg)?;
    let assignments = stage_extract(cfg)?;
    let tables = stage_assemble(cfg)?;
    let report = stage_eval(cfg)?;
    Ok(RunSummary {
        gen,
        documents: manifest.documents.len(),
        violations: scrub.violations.len(),
        assignments: assignments.len(),
        tables: tables.len(),
        overall_accuracy: report.overall.overall,
        outliers: report.outliers.outliers.len(),
    })
}
