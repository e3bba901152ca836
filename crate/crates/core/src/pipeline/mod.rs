//! Stage orchestration over an on-disk output tree.

mod config;
mod probe;
mod stages;

pub use config::{
    ConfigError, ConfigFile, RunConfig, DEFAULT_NOISE, DEFAULT_OUT, DEFAULT_PATIENTS, DEFAULT_RESAMPLES, OUT_ENV,
};
pub use probe::{throughput_probe, ProbeSummary};
pub use stages::{
    extract_all, load_assignments, load_manifest, load_records, read_jsonl, run_all, stage_anonymize,
    stage_assemble, stage_eval, stage_extract, stage_gen, stage_ingest, stage_scatter, write_jsonl, GenSummary,
    Layout, Manifest, ManifestEntry, ParsedEntry, PipelineError, RunSummary, ScrubReport,
};
