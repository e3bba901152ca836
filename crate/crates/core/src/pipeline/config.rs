use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{load_disease_catalog, Catalog};
use crate::scatter::NoiseProfile;

pub const OUT_ENV: &str = "CLINISTRUCT_OUT";
pub const DEFAULT_PATIENTS: usize = 50;
pub const DEFAULT_OUT: &str = "out";
pub const DEFAULT_NOISE: &str = "zero";
pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Config file contents; every field optional so flags can fill the gaps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub patients_per_disease: Option<usize>,
    pub diseases: Option<Vec<String>>,
    pub noise: Option<String>,
    pub anonymize: Option<bool>,
    pub strict: Option<bool>,
    pub out: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub resamples: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<ConfigFile, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: ConfigFile) -> ConfigFile {
        ConfigFile {
            seed: over.seed.or(self.seed),
            patients_per_disease: over.patients_per_disease.or(self.patients_per_disease),
            diseases: over.diseases.or(self.diseases),
            noise: over.noise.or(self.noise),
            anonymize: over.anonymize.or(self.anonymize),
            strict: over.strict.or(self.strict),
            out: over.out.or(self.out),
            catalog: over.catalog.or(self.catalog),
            jobs: over.jobs.or(self.jobs),
            resamples: over.resamples.or(self.resamples),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub patients_per_disease: usize,
    /// Empty means every catalog disease.
    pub diseases: Vec<String>,
    /// Preset name or path to a JSON noise profile.
    pub noise: String,
    pub anonymize: bool,
    pub strict: bool,
    pub out: PathBuf,
    pub catalog: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid configuration: {}", .0.join("; "))]
pub struct ConfigError(pub Vec<String>);

impl RunConfig {
    /// Resolves precedence: flags, then the output env var, then the
    /// config file, then defaults. Every problem is reported at once.
    pub fn resolve(flags: ConfigFile, file: Option<ConfigFile>, env_out: Option<PathBuf>) -> Result<RunConfig, ConfigError> {
        let env = ConfigFile {
            out: env_out,
            ..ConfigFile::default()
        };
        let merged = file.unwrap_or_default().overlay(env).overlay(flags);
        let mut problems = Vec::new();
        if merged.seed.is_none() {
            problems.push("seed is required (--seed or `seed` in the config file)".to_string());
        }
        let cfg = RunConfig {
            seed: merged.seed.unwrap_or_default(),
            patients_per_disease: merged.patients_per_disease.unwrap_or(DEFAULT_PATIENTS),
            diseases: merged.diseases.unwrap_or_default(),
            noise: merged.noise.unwrap_or_else(|| DEFAULT_NOISE.to_string()),
            anonymize: merged.anonymize.unwrap_or(true),
            strict: merged.strict.unwrap_or(false),
            out: merged.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            catalog: merged.catalog,
            jobs: merged.jobs,
            resamples: merged.resamples.unwrap_or(DEFAULT_RESAMPLES),
        };
        problems.extend(cfg.problems());
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError(problems))
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.patients_per_disease == 0 {
            out.push("patients_per_disease must be at least 1".into());
        }
        if self.jobs == Some(0) {
            out.push("jobs must be at least 1".into());
        }
        if self.resamples == 0 {
            out.push("resamples must be at least 1".into());
        }
        match self.catalog() {
            Ok(c) => {
                if let Err(e) = c.restrict(&self.diseases) {
                    out.push(e.to_string());
                }
            }
            Err(e) => out.push(e),
        }
        if let Err(e) = self.noise_profile() {
            out.push(e);
        }
        out
    }

    /// Full catalog (bundled unless a path is configured), before disease filtering.
    pub fn catalog(&self) -> Result<Catalog, String> {
        match &self.catalog {
            Some(p) if !p.exists() => Err(format!("catalog {} does not exist", p.display())),
            Some(p) => load_disease_catalog(p).map_err(|e| format!("catalog {}: {e}", p.display())),
            None => Ok(Catalog::bundled()),
        }
    }

    pub fn selected_catalog(&self) -> Result<Catalog, String> {
        self.catalog()?.restrict(&self.diseases).map_err(|e| e.to_string())
    }

    pub fn noise_profile(&self) -> Result<NoiseProfile, String> {
        if let Some(p) = NoiseProfile::preset(&self.noise) {
            return Ok(p);
        }
        let path = Path::new(&self.noise);
        if !path.exists() {
            return Err(format!("noise `{}` is neither a preset nor an existing file", self.noise));
        }
        let text = std::fs::read_to_string(path).map_err(|e| format!("noise {}: {e}", path.display()))?;
        let profile: NoiseProfile =
            serde_json::from_str(&text).map_err(|e| format!("noise {}: {e}", path.display()))?;
        profile.validate().map_err(|e| e.to_string())?;
        Ok(profile)
    }
}
