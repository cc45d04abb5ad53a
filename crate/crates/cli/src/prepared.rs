//! Reading a prepared dataset directory back.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use graft_core::data::{read_covariates_csv, read_load_csv, read_memory_csv, NormStats, WindowSample};
use graft_core::pipeline::{audit_leakage, prepare, DataSettings, Dataset, Prepared};

use crate::config::invalid;

pub const LOAD: &str = "load.csv";
pub const MEMORY: &str = "memory.csv";
pub const COVARIATES: &str = "covariates.csv";
pub const QUARANTINE: &str = "quarantine.csv";
pub const WINDOWS: &str = "windows.csv";
pub const NORM: &str = "norm.json";
pub const SETTINGS: &str = "settings.json";

pub struct PreparedDir {
    pub dir: PathBuf,
    pub settings: DataSettings,
    pub dataset: Dataset,
    pub prepared: Prepared,
}

impl PreparedDir {
    /// Loads the directory, re-derives the splits and audits them against
    /// the stored normalization.
    pub fn open(dir: &Path) -> Result<Self> {
        if !dir.join(SETTINGS).exists() {
            return Err(invalid(format!("{} is not a prepared dataset (no {SETTINGS})", dir.display())));
        }
        let settings: DataSettings = read_json(&dir.join(SETTINGS))?;
        let stored: NormStats = read_json(&dir.join(NORM))?;
        let optional = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
        let dataset = Dataset {
            panels: read_load_csv(&dir.join(LOAD))?,
            memory: optional(MEMORY).map(|p| read_memory_csv(&p)).transpose()?,
            covariates: optional(COVARIATES).map(|p| read_covariates_csv(&p)).transpose()?,
        };
        let prepared = prepare(&dataset, &settings)?;
        audit_leakage(&prepared.splits, &stored, &settings.boundaries)
            .with_context(|| format!("leakage audit of {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), settings, dataset, prepared })
    }

    pub fn channels(&self) -> usize {
        1 + self.dataset.covariate_count()
    }

    pub fn split(&self, name: &str) -> Result<&[WindowSample]> {
        let s = &self.prepared.splits;
        match name {
            "train" => Ok(&s.train),
            "val" => Ok(&s.val),
            "test" => Ok(&s.test),
            other => Err(invalid(format!("unknown split {other:?}; expected train, val or test"))),
        }
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}
