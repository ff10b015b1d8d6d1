//! Run directories: files are staged in a sibling temporary directory and
//! renamed into place once complete.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::Serialize;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CTFKIT_OUT_DIR";

/// Marker left in every run directory so a rerun may replace it.
const MARKER: &str = ".ctfkit-run";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    fn json(self) -> bool {
        self != Format::Csv
    }

    fn csv(self) -> bool {
        self != Format::Json
    }
}

/// Resolves the directory for a run: the flag, then the environment
/// variable joined with the subcommand name, then `./ctfkit-out/<sub>`.
pub fn resolve_dir(flag: Option<&Path>, sub: &str) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(d) if !d.is_empty() => PathBuf::from(d).join(sub),
        _ => PathBuf::from("ctfkit-out").join(sub),
    }
}

pub struct RunDir {
    target: PathBuf,
    format: Format,
    files: Vec<(String, Vec<u8>)>,
}

impl RunDir {
    pub fn new(target: PathBuf, format: Format) -> Self {
        RunDir { target, format, files: Vec::new() }
    }

    pub fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        if self.format.json() {
            let mut bytes = serde_json::to_vec_pretty(value)?;
            bytes.push(b'\n');
            self.files.push((name.to_string(), bytes));
        }
        Ok(())
    }

    pub fn csv(&mut self, name: &str, text: String) {
        if self.format.csv() {
            self.files.push((name.to_string(), text.into_bytes()));
        }
    }

    pub fn commit(self) -> Result<PathBuf> {
        let target = self.target;
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let leaf = target.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
        let staging = parent.join(format!(".{leaf}.tmp-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir(&staging).with_context(|| format!("creating {}", staging.display()))?;
        fs::write(staging.join(MARKER), b"")?;
        for (name, bytes) in &self.files {
            fs::write(staging.join(name), bytes).with_context(|| format!("writing {name}"))?;
        }
        if target.exists() {
            let replaceable = target.join(MARKER).exists() || fs::read_dir(&target)?.next().is_none();
            if !replaceable {
                fs::remove_dir_all(&staging)?;
                bail!("{} exists and is not a ctfkit run directory", target.display());
            }
            fs::remove_dir_all(&target).with_context(|| format!("replacing {}", target.display()))?;
        }
        fs::rename(&staging, &target).with_context(|| format!("moving results into {}", target.display()))?;
        Ok(target)
    }
}
