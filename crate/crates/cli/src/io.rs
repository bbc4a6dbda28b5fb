//! File formats: spectrum, pair-table and profile CSVs, atomic writes.
//!
//! Formatted text rounds frequencies to millihertz and ratios to 1e-6; JSON
//! outputs keep full precision.

use std::fmt::Write as _;
use std::path::Path;

use modesplit_core::beam::{BeamProfile, BeamSpec};
use modesplit_core::splitting::ModePair;
use modesplit_core::synth::Spectrum;
use modesplit_core::xsection::{EllipseSection, Material};

use crate::{CliError, CliResult};

/// Frequency in hertz, millihertz resolution.
pub fn fmt_freq(f: f64) -> String {
    format!("{f:.3}")
}

/// Dimensionless ratio, 1e-6 resolution.
pub fn fmt_ratio(r: f64) -> String {
    format!("{r:.6}")
}

/// Writes via a temp file in the same directory plus a rename, so a crash
/// never leaves a truncated output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| {
                CliError::input(anyhow::anyhow!("creating {}: {e}", parent.display()))
            })?;
        }
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes)
        .map_err(|e| CliError::input(anyhow::anyhow!("writing {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::input(anyhow::anyhow!("renaming to {}: {e}", path.display())))
}

/// Spectrum CSV: `frequency_hz,psd` header, one bin per row.
pub fn write_spectrum_csv(path: &Path, spectrum: &Spectrum) -> CliResult<()> {
    let mut out = String::with_capacity(32 * spectrum.len());
    out.push_str("frequency_hz,psd\n");
    for (f, p) in spectrum.frequencies.iter().zip(&spectrum.psd) {
        let _ = writeln!(out, "{},{p:.9e}", fmt_freq(*f));
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a spectrum CSV; accepts the standard header or bare two-column data.
pub fn read_spectrum_csv(path: &Path) -> CliResult<Spectrum> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(anyhow::anyhow!("reading {}: {e}", path.display())))?;
    let mut frequencies = Vec::new();
    let mut psd = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let (a, b) = (cols.next().unwrap_or(""), cols.next().unwrap_or(""));
        if cols.next().is_some() {
            return Err(CliError::input(anyhow::anyhow!(
                "{}:{}: expected two columns",
                path.display(),
                lineno + 1
            )));
        }
        match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(f), Ok(p)) => {
                frequencies.push(f);
                psd.push(p);
            }
            // The only non-numeric row allowed is a leading header.
            _ if lineno == 0 => continue,
            _ => {
                return Err(CliError::input(anyhow::anyhow!(
                    "{}:{}: not numeric: {line:?}",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Spectrum::new(frequencies, psd).map_err(CliError::from_core)
}

/// Pair table CSV: `order,f_low_hz,f_high_hz,delta_hz,ratio`.
pub fn write_pairs_csv(path: &Path, pairs: &[ModePair]) -> CliResult<()> {
    let mut out = String::new();
    out.push_str("order,f_low_hz,f_high_hz,delta_hz,ratio\n");
    for p in pairs {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.order,
            fmt_freq(p.f_low),
            fmt_freq(p.f_high),
            fmt_freq(p.splitting()),
            fmt_ratio(p.ratio())
        );
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a radius profile CSV (`z_m,r1_m,r2_m`) into a tabulated beam.
pub fn read_profile_beam(path: &Path, material: Material, length: f64) -> CliResult<BeamSpec> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(anyhow::anyhow!("reading {}: {e}", path.display())))?;
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record
            .map_err(|e| CliError::input(anyhow::anyhow!("reading {}: {e}", path.display())))?;
        if record.len() != 3 {
            return Err(CliError::input(anyhow::anyhow!(
                "{}: expected columns z_m,r1_m,r2_m",
                path.display()
            )));
        }
        let parse = |i: usize| {
            record[i].parse::<f64>().map_err(|e| {
                CliError::input(anyhow::anyhow!("{}: {:?}: {e}", path.display(), &record[i]))
            })
        };
        let (z, r1, r2) = (parse(0)?, parse(1)?, parse(2)?);
        let section = EllipseSection::new(r1, r2).map_err(CliError::from_core)?;
        samples.push((z, section));
    }
    BeamSpec::new(material, length, BeamProfile::Tabulated(samples)).map_err(CliError::from_core)
}
