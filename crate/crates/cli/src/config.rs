//! JSON configuration documents and their translation into core types.

use std::path::Path;

use serde::Deserialize;

use modesplit_core::analyze::AnalyzeOptions;
use modesplit_core::beam::BeamSpec;
use modesplit_core::splitting::ConvergenceModel;
use modesplit_core::synth::SpectrumConfig;
use modesplit_core::thermal::ProjectionGeometry;
use modesplit_core::xsection::{EllipseSection, Material};

use crate::{CliError, CliResult};

/// Reads and parses a JSON config, returning the raw text alongside so the
/// manifest can digest exactly what was read.
pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<(T, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(anyhow::anyhow!("reading {}: {e}", path.display())))?;
    let parsed = serde_json::from_str(&text)
        .map_err(|e| CliError::input(anyhow::anyhow!("parsing {}: {e}", path.display())))?;
    Ok((parsed, text))
}

/// Material override; fused silica when omitted.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    /// Young's modulus (Pa).
    pub young_modulus: f64,
    /// Mass density (kg/m³).
    pub density: f64,
}

impl MaterialConfig {
    pub fn to_material(self) -> CliResult<Material> {
        Material::new(self.young_modulus, self.density).map_err(CliError::from_core)
    }
}

pub fn material_or_silica(cfg: Option<MaterialConfig>) -> CliResult<Material> {
    cfg.map_or(Ok(Material::silica()), MaterialConfig::to_material)
}

/// Low-order convergence of the splitting ratio, `R(n) = ε (1 + A e^{−α n})`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Excess amplitude A.
    pub amplitude: f64,
    /// Decay rate α per order.
    pub decay: f64,
    /// First order treated as plateau; 0 lets the analyzer decide.
    #[serde(default)]
    pub cutoff: u32,
}

impl ConvergenceConfig {
    pub fn to_model(self, epsilon: f64) -> CliResult<ConvergenceModel> {
        ConvergenceModel::new(epsilon, self.amplitude, self.decay, self.cutoff)
            .map_err(CliError::from_core)
    }
}

/// `simulate` input: one beam geometry, one or more ellipticities.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub material: Option<MaterialConfig>,
    /// Length between the clamps (m).
    pub length: f64,
    /// Mean cross-section radius (m); ignored when a profile CSV is given.
    #[serde(default)]
    pub mean_radius: f64,
    /// Ellipticities to tabulate, each producing one pair table.
    #[serde(default)]
    pub ellipticities: Vec<f64>,
    pub convergence: Option<ConvergenceConfig>,
    /// Tabulated radius profile (`z_m,r1_m,r2_m`); switches the command to
    /// the finite-difference solver.
    pub profile_csv: Option<String>,
    /// Finite-difference grid intervals for tabulated profiles.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_grid_points() -> usize {
    2000
}

/// `synth` input: beam, probe geometry and noise model.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub material: Option<MaterialConfig>,
    /// Length between the clamps (m).
    pub length: f64,
    /// Mean cross-section radius (m).
    pub mean_radius: f64,
    /// Cross-section ellipticity ε ≥ 1.
    pub ellipticity: f64,
    pub convergence: Option<ConvergenceConfig>,
    /// Probe angle from the higher-stiffness axis (degrees).
    pub theta_deg: f64,
    pub q_factor: f64,
    /// Band start (Hz).
    pub f_min: f64,
    /// Band end (Hz).
    pub f_max: f64,
    /// Frequency bin width (Hz).
    pub bin_width: f64,
    pub noise_floor: f64,
    pub noise_rms: f64,
    #[serde(default)]
    pub pink_amplitude: f64,
    /// Noise seed; `--seed` wins, entropy fills in when both are absent.
    pub seed: Option<u64>,
}

impl SynthConfig {
    pub fn to_spectrum_config(&self, seed: u64) -> CliResult<SpectrumConfig> {
        let material = material_or_silica(self.material)?;
        let section = EllipseSection::from_mean_radius(self.mean_radius, self.ellipticity)
            .map_err(CliError::from_core)?;
        let beam = BeamSpec::uniform(material, self.length, section).map_err(CliError::from_core)?;
        let convergence = self
            .convergence
            .map(|c| c.to_model(section.ellipticity()))
            .transpose()?;
        let geometry =
            ProjectionGeometry::from_degrees(self.theta_deg).map_err(CliError::from_core)?;
        Ok(SpectrumConfig {
            beam,
            convergence,
            geometry,
            q_factor: self.q_factor,
            f_min: self.f_min,
            f_max: self.f_max,
            bin_width: self.bin_width,
            noise_floor: self.noise_floor,
            noise_rms: self.noise_rms,
            pink_amplitude: self.pink_amplitude,
            seed,
        })
    }
}

/// `analyze` options; every field falls back to the library default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub min_prominence: Option<f64>,
    pub min_separation: Option<f64>,
    pub min_separation_rel: Option<f64>,
    pub baseline_window: Option<usize>,
    /// Convergence-cutoff override (mode order).
    pub cutoff: Option<u32>,
    /// Calibrated mean radius (m); enables axis-difference outputs.
    pub mean_radius: Option<f64>,
    pub sigma_mean_radius: Option<f64>,
}

impl AnalyzeConfig {
    pub fn to_options(&self) -> AnalyzeOptions {
        let d = AnalyzeOptions::default();
        AnalyzeOptions {
            min_prominence: self.min_prominence.or(d.min_prominence),
            min_separation: self.min_separation.unwrap_or(d.min_separation),
            min_separation_rel: self.min_separation_rel.unwrap_or(d.min_separation_rel),
            baseline_window: self.baseline_window.unwrap_or(d.baseline_window),
            cutoff: self.cutoff.or(d.cutoff),
            mean_radius: self.mean_radius.or(d.mean_radius),
            sigma_mean_radius: self.sigma_mean_radius.unwrap_or(d.sigma_mean_radius),
        }
    }
}

/// `sweep` input, tagged by `"mode"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepConfig {
    /// Splitting ratios over a (length × ellipticity) grid.
    Pairs {
        material: Option<MaterialConfig>,
        /// Mean cross-section radius (m).
        mean_radius: f64,
        /// Beam lengths (m).
        lengths: Vec<f64>,
        ellipticities: Vec<f64>,
        /// Inclusive order range `[min, max]`.
        orders: [u32; 2],
    },
    /// Synthesize-then-analyze round trips over noise seeds.
    Roundtrip {
        synth: SynthConfig,
        seeds: Vec<u64>,
        #[serde(default)]
        analyze: AnalyzeConfig,
    },
}
