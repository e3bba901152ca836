use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::stages::{extract_all, open_store, pipeline_patients, registry, Layout, ParsedEntry, PipelineError};
use crate::docstore::{TAG_DISEASE, TAG_DOC, TAG_PATIENT};
use crate::extract::ConflictPolicy;
use crate::ingest::{parse_document, NarrativeMatcher, ParseOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub documents: usize,
    pub statements: usize,
    pub assignments: usize,
    pub parse_seconds: f64,
    pub extract_seconds: f64,
    pub total_seconds: f64,
    pub documents_per_second: f64,
    pub ms_per_document: f64,
    pub us_per_assignment: f64,
}

fn rate(count: usize, seconds: f64) -> f64 {
    if count == 0 || seconds <= 0.0 {
        0.0
    } else {
        count as f64 / seconds
    }
}

/// Single-threaded ingest and extract over the stored corpus, timed.
pub fn throughput_probe(cfg: &RunConfig) -> Result<ProbeSummary, PipelineError> {
    const S: &str = "probe";
    let layout = Layout::new(&cfg.out);
    let store = open_store(S, &layout)?;
    let catalog = cfg.selected_catalog().map_err(|m| PipelineError::Stage { stage: S, message: m })?;
    let reg = registry(S, cfg)?;
    let patients = pipeline_patients(S, cfg, &layout)?;
    let records = store.query_by_tags(&BTreeMap::new());
    let blobs = records
        .iter()
        .map(|r| store.get_object(&r.object).map(|b| (r, b)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| PipelineError::Stage {
            stage: S,
            message: e.to_string(),
        })?;

    let start = Instant::now();
    let matcher = NarrativeMatcher::new(&reg);
    let options = ParseOptions { strict: cfg.strict };
    let parsed: Vec<ParsedEntry> = blobs
        .iter()
        .map(|(rec, bytes)| {
            let tag = |k: &str| rec.tag(k).unwrap_or_default().to_string();
            let doc = parse_document(bytes, &matcher, options);
            ParsedEntry {
                doc_id: tag(TAG_DOC),
                disease_id: tag(TAG_DISEASE),
                patient: tag(TAG_PATIENT),
                error: doc.as_ref().err().map(|e| e.to_string()),
                document: doc.ok(),
            }
        })
        .collect();
    let parse_seconds = start.elapsed().as_secs_f64();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| PipelineError::Stage {
            stage: S,
            message: e.to_string(),
        })?;
    let t = Instant::now();
    let assignments = pool.install(|| extract_all(&catalog, &reg, &patients, &parsed, &ConflictPolicy::default()));
    let extract_seconds = t.elapsed().as_secs_f64();
    let total = parse_seconds + extract_seconds;
    Ok(ProbeSummary {
        documents: parsed.len(),
        statements: parsed.iter().filter_map(|p| p.document.as_ref()).map(|d| d.statements.len()).sum(),
        assignments: assignments.len(),
        parse_seconds,
        extract_seconds,
        total_seconds: total,
        documents_per_second: rate(parsed.len(), total),
        ms_per_document: if parsed.is_empty() { 0.0 } else { parse_seconds * 1000.0 / parsed.len() as f64 },
        us_per_assignment: if assignments.is_empty() {
            0.0
        } else {
            extract_seconds * 1e6 / assignments.len() as f64
        },
    })
}
