//! Run manifests: provenance record written next to every output.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{io, CliError, CliResult};

/// What produced an output: the command, a digest of the config it read, the
/// seed it used, and the files it touched.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// SHA-256 of the config in canonical (key-sorted) JSON form, so the
    /// digest is stable under field reordering and whitespace.
    pub config_digest: Option<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// UTC wall-clock time of the run (ISO 8601).
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: None,
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timestamp: now_iso8601(),
        }
    }

    pub fn with_config_text(mut self, text: &str) -> CliResult<Self> {
        self.config_digest = Some(digest_config(text)?);
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    /// Writes the manifest next to `anchor`: into `anchor/manifest.json` for
    /// a directory, or as `<name>.manifest.json` beside a file.
    pub fn write_beside(&self, anchor: &Path) -> CliResult<()> {
        let path = manifest_path(anchor);
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::input(anyhow::anyhow!("serializing manifest: {e}")))?;
        io::write_atomic(&path, text.as_bytes())
    }
}

pub fn manifest_path(anchor: &Path) -> PathBuf {
    if anchor.is_dir() {
        anchor.join("manifest.json")
    } else {
        let name = anchor
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".to_string());
        anchor.with_file_name(format!("{name}.manifest.json"))
    }
}

/// Canonical digest of a JSON document: parse, re-serialize with sorted keys,
/// hash. Two configs with the same fields in any order digest identically.
pub fn digest_config(text: &str) -> CliResult<String> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::input(anyhow::anyhow!("digesting config: {e}")))?;
    let canonical = serde_json::to_string(&value)
        .map_err(|e| CliError::input(anyhow::anyhow!("digesting config: {e}")))?;
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    Ok(format!("{:x}", h.finalize()))
}

/// Current UTC time as `YYYY-MM-DDTHH:MM:SSZ` without a date-time dependency.
pub fn now_iso8601() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let days = (secs / 86_400) as i64;
    let rem = secs % 86_400;
    let (y, m, d) = civil_from_days(days);
    format!(
        "{y:04}-{m:02}-{d:02}T{:02}:{:02}:{:02}Z",
        rem / 3600,
        (rem % 3600) / 60,
        rem % 60
    )
}

/// Gregorian date from days since 1970-01-01 (proleptic, no leap seconds).
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}
