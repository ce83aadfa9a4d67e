//! Output directory layout: resolved config, seed manifest, CSV tables and a JSON summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::Result;
use crate::rng;

/// Version stamped into every CSV row.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const CONFIG_FILE: &str = "config.resolved.toml";
pub const MANIFEST_FILE: &str = "seeds.json";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Debug, Serialize)]
pub struct StreamEntry {
    pub task: String,
    pub replica: u64,
    pub purpose: u8,
    pub level: u8,
    pub stream: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedManifest {
    pub master_seed: u64,
    pub generator: &'static str,
    pub stream_layout: &'static str,
    pub streams: Vec<StreamEntry>,
}

impl SeedManifest {
    pub fn new(master_seed: u64) -> Self {
        SeedManifest {
            master_seed,
            generator: "ChaCha8 keyed by the master seed",
            stream_layout: "purpose << 56 | replica << 8 | level",
            streams: Vec::new(),
        }
    }

    pub fn add(&mut self, task: impl Into<String>, purpose: u8, replica: u64, level: u8) {
        self.streams.push(StreamEntry {
            task: task.into(),
            replica,
            purpose,
            level,
            stream: rng::stream_id(purpose, replica, level),
        });
    }
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(root.as_ref())?;
        Ok(OutputDir {
            root: root.as_ref().to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_config(&self, cfg: &ExperimentConfig) -> Result<()> {
        fs::write(self.path(CONFIG_FILE), cfg.to_toml()?)?;
        Ok(())
    }

    pub fn write_manifest(&self, m: &SeedManifest) -> Result<()> {
        self.write_json(MANIFEST_FILE, m)
    }

    pub fn write_summary<T: Serialize>(&self, summary: &T) -> Result<()> {
        self.write_json(SUMMARY_FILE, summary)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, v: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(v)?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        Ok(())
    }

    /// Writes `rows` under `header`, prefixing each with the schema version.
    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        let mut head = vec!["schema_version"];
        head.extend_from_slice(header);
        w.write_record(&head)?;
        let version = CSV_SCHEMA_VERSION.to_string();
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(std::iter::once(version.as_str()).chain(row.iter().map(String::as_str)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip formatting for CSV cells.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v}")
    }
}

pub fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}
