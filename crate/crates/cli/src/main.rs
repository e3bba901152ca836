use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use clinistruct::pipeline::{
    run_all, stage_anonymize, stage_assemble, stage_eval, stage_extract, stage_gen, stage_ingest, stage_scatter,
    throughput_probe, ConfigError, ConfigFile, PipelineError, RunConfig, OUT_ENV,
};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "clinistruct", version, about = "Synthetic clinical corpus to per-disease tables, with exact-match scoring")]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Master seed; required here or in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Patients generated per disease (default 50).
    #[arg(long, global = true)]
    patients_per_disease: Option<usize>,
    /// Restrict to these disease ids (repeatable or comma separated).
    #[arg(long = "disease", global = true, value_delimiter = ',')]
    diseases: Vec<String>,
    /// Noise preset (zero, mild, respiratory-otic) or a JSON profile path.
    #[arg(long, global = true)]
    noise: Option<String>,
    /// Store documents without de-identification.
    #[arg(long, global = true)]
    no_anonymize: bool,
    /// Fail on unknown segments and resources instead of warning.
    #[arg(long, global = true)]
    strict: bool,
    /// Output root (overrides the CLINISTRUCT_OUT environment variable).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Disease catalog JSON; the bundled catalog is used otherwise.
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    /// JSON config file with the same fields as the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Bootstrap resamples used by `eval`.
    #[arg(long, global = true)]
    resamples: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate patient records and the ground-truth ledger.
    Gen,
    /// Fragment records into FHIR, HL7, CSV and narrative documents.
    Scatter,
    /// De-identify documents and load them into the object store.
    Anonymize,
    /// Parse every stored document into canonical statements.
    Ingest,
    /// Resolve statements into one value per patient and variable.
    Extract,
    /// Build per-disease tables.
    Assemble,
    /// Score assignments against the ledger and write the report.
    Eval,
    /// Run every stage in order.
    All,
    /// Time single-threaded ingest and extract over the stored corpus.
    Probe,
}

impl Flags {
    fn as_config(&self) -> ConfigFile {
        ConfigFile {
            seed: self.seed,
            patients_per_disease: self.patients_per_disease,
            diseases: (!self.diseases.is_empty()).then(|| self.diseases.clone()),
            noise: self.noise.clone(),
            anonymize: self.no_anonymize.then_some(false),
            strict: self.strict.then_some(true),
            out: self.out.clone(),
            catalog: self.catalog.clone(),
            jobs: self.jobs,
            resamples: self.resamples,
        }
    }
}

enum Failure {
    Config(Vec<String>),
    Pipeline(PipelineError),
    Other(anyhow::Error),
}

impl Failure {
    fn to_json(&self) -> Value {
        match self {
            Failure::Config(problems) => json!({ "error": "config", "problems": problems }),
            Failure::Pipeline(e) => json!({ "error": e.kind(), "stage": e.stage(), "message": e.to_string() }),
            Failure::Other(e) => json!({ "error": "internal", "message": format!("{e:#}") }),
        }
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Pipeline(_) | Failure::Other(_) => 1,
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Pipeline(e)
    }
}

fn config(flags: &Flags) -> Result<RunConfig, Failure> {
    let file = match &flags.config {
        Some(p) if !p.exists() => return Err(Failure::Config(vec![format!("config {} does not exist", p.display())])),
        Some(p) => Some(ConfigFile::load(p).map_err(|m| Failure::Config(vec![m]))?),
        None => None,
    };
    let env_out = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    RunConfig::resolve(flags.as_config(), file, env_out).map_err(|ConfigError(p)| Failure::Config(p))
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v)
        .context("serializing summary")
        .map_err(Failure::Other)
}

fn run(cli: &Cli) -> Result<Value, Failure> {
    let cfg = config(&cli.flags)?;
    if let Some(n) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")
            .map_err(Failure::Other)?;
    }
    let summary = match cli.command {
        Command::Gen => to_value(&stage_gen(&cfg)?)?,
        Command::Scatter => json!({ "documents": stage_scatter(&cfg)?.documents.len() }),
        Command::Anonymize => to_value(&stage_anonymize(&cfg)?)?,
        Command::Ingest => {
            let parsed = stage_ingest(&cfg)?;
            json!({
                "documents": parsed.len(),
                "failed": parsed.iter().filter(|p| p.error.is_some()).count(),
                "statements": parsed.iter().filter_map(|p| p.document.as_ref()).map(|d| d.statements.len()).sum::<usize>(),
            })
        }
        Command::Extract => json!({ "assignments": stage_extract(&cfg)?.len() }),
        Command::Assemble => {
            let tables = stage_assemble(&cfg)?;
            json!({ "tables": tables.iter().map(|t| json!({ "disease_id": t.disease_id, "rows": t.rows.len(), "columns": t.columns.len() })).collect::<Vec<_>>() })
        }
        Command::Eval => {
            let r = stage_eval(&cfg)?;
            json!({ "overall": r.overall.overall, "sd_across_diseases": r.overall.sd_across_diseases, "outliers": r.outliers.outliers.len() })
        }
        Command::All => to_value(&run_all(&cfg)?)?,
        Command::Probe => to_value(&throughput_probe(&cfg)?)?,
    };
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.code())
        }
    }
}
