//! Synthetic measurement spectra: mode pairs, projection, Lorentzian
//! lineshapes, noise, and enhancement-spectrum formation.
//!
//! This is the ground-truth instrument the inverse pipeline is tested
//! against: given a beam, a probe angle and a noise model it produces the
//! thermomechanical power spectrum a probe would record, bit-identical for
//! identical `(config, seed)`.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::beam::{eigenfrequency_exact, BeamSpec};
use crate::error::{Error, Result};
use crate::splitting::{ConvergenceModel, ModePair, PairAmplitudes};
use crate::thermal::{project, thermal_peak, ProjectionGeometry};
use crate::xsection::StiffnessAxis;

/// Everything needed to synthesize one spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub beam: BeamSpec,
    /// Optional low-order excess of the pair ratio.
    pub convergence: Option<ConvergenceModel>,
    pub geometry: ProjectionGeometry,
    /// Global quality factor applied to every mode.
    pub q_factor: f64,
    /// Band start (Hz).
    pub f_min: f64,
    /// Band end (Hz).
    pub f_max: f64,
    /// Frequency bin width (Hz).
    pub bin_width: f64,
    /// Constant background PSD.
    pub noise_floor: f64,
    /// RMS of the additive Gaussian perturbation per bin (clipped at zero).
    pub noise_rms: f64,
    /// Optional 1/f background term: floor(f) = noise_floor + pink/f.
    /// Off (zero) by default.
    #[serde(default)]
    pub pink_amplitude: f64,
    pub seed: u64,
}

impl SpectrumConfig {
    fn validate(&self) -> Result<()> {
        if !(self.f_min < self.f_max && self.f_min >= 0.0) {
            return Err(Error::InvalidInput("need 0 ≤ f_min < f_max"));
        }
        if !(self.bin_width > 0.0) {
            return Err(Error::InvalidInput("bin width must be > 0"));
        }
        if !(self.noise_floor >= 0.0 && self.noise_rms >= 0.0 && self.pink_amplitude >= 0.0) {
            return Err(Error::InvalidInput("noise levels must be ≥ 0"));
        }
        if !(self.q_factor > 1.0) {
            return Err(Error::InvalidInput("need Q > 1"));
        }
        Ok(())
    }
}

/// A one-sided power spectrum on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Uniform, increasing frequency grid (Hz).
    pub frequencies: Vec<f64>,
    /// PSD value per bin, ≥ 0.
    pub psd: Vec<f64>,
    /// Digest of the generating config, when synthesized.
    pub metadata: Option<String>,
}

impl Spectrum {
    /// Wraps raw data, checking the grid is uniform and increasing and the
    /// PSD nonnegative.
    pub fn new(frequencies: Vec<f64>, psd: Vec<f64>) -> Result<Self> {
        if frequencies.len() != psd.len() || frequencies.len() < 2 {
            return Err(Error::InvalidInput("grid and psd lengths must match (≥ 2)"));
        }
        let step = frequencies[1] - frequencies[0];
        if !(step > 0.0) {
            return Err(Error::InvalidInput("frequency grid must increase"));
        }
        for w in frequencies.windows(2) {
            let d = w[1] - w[0];
            if (d - step).abs() > 1e-6 * step {
                return Err(Error::InvalidInput("frequency grid must be uniform"));
            }
        }
        if psd.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput("psd values must be ≥ 0"));
        }
        Ok(Self {
            frequencies,
            psd,
            metadata: None,
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.frequencies[1] - self.frequencies[0]
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

/// Standard normal deviate via Box–Muller on explicit 53-bit uniforms, so the
/// stream is identical on every platform.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64;
    let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Ground-truth mode pairs whose peaks fall inside the band, with projected
/// peak areas attached (`area_low`/`area_high` are the *measured* areas after
/// projection onto the probe axis).
///
/// Areas follow equipartition (`msq ∝ 1/f²`), normalized so the lowest
/// in-band pair's unprojected lower mode has unit area.
pub fn pairs_in_band(config: &SpectrumConfig) -> Result<Vec<ModePair>> {
    config.validate()?;
    let eps = config
        .beam
        .uniform_section()
        .ok_or(Error::InvalidInput("synthesis needs a uniform profile"))?
        .ellipticity();
    if let Some(m) = &config.convergence {
        if (m.epsilon - eps).abs() > 1e-9 * eps {
            return Err(Error::InconsistentEllipticity);
        }
    }
    let mut pairs = Vec::new();
    let mut f_ref = None;
    for n in 1..=10_000_000u32 {
        let f_low = eigenfrequency_exact(&config.beam, StiffnessAxis::Lower, n)?;
        if f_low > config.f_max {
            break;
        }
        let r = config.convergence.as_ref().map_or(eps, |m| m.ratio(n));
        let f_high = f_low * r;
        if f_high < config.f_min {
            continue;
        }
        let f_ref = *f_ref.get_or_insert(f_low);
        // Equipartition in relative units: msq ∝ 1/f².
        let msq_low = (f_ref / f_low) * (f_ref / f_low);
        let msq_high = (f_ref / f_high) * (f_ref / f_high);
        let (area_high, area_low) = project(msq_high, msq_low, config.geometry);
        let mut pair = ModePair::new(n, f_low, f_high)?;
        pair.amplitudes = Some(PairAmplitudes {
            area_low,
            area_high,
            sigma_area_low: 0.0,
            sigma_area_high: 0.0,
        });
        pairs.push(pair);
    }
    if pairs.is_empty() {
        return Err(Error::EmptyBand);
    }
    Ok(pairs)
}

/// Synthesizes a spectrum and returns the ground-truth pairs alongside it.
pub fn synthesize_with_truth(config: &SpectrumConfig) -> Result<(Spectrum, Vec<ModePair>)> {
    let pairs = pairs_in_band(config)?;
    let n_bins = ((config.f_max - config.f_min) / config.bin_width).floor() as usize + 1;
    let frequencies: Vec<f64> = (0..n_bins)
        .map(|i| config.f_min + i as f64 * config.bin_width)
        .collect();

    let mut psd = alloc::vec![0.0f64; n_bins];
    for pair in &pairs {
        let amps = pair.amplitudes.expect("truth pairs carry amplitudes");
        let low = thermal_peak(pair.f_low, config.q_factor, amps.area_low)?;
        let high = thermal_peak(pair.f_high, config.q_factor, amps.area_high)?;
        for (s, &f) in psd.iter_mut().zip(&frequencies) {
            *s += low.psd(f) + high.psd(f);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for (s, &f) in psd.iter_mut().zip(&frequencies) {
        let mut floor = config.noise_floor;
        if config.pink_amplitude > 0.0 && f > 0.0 {
            floor += config.pink_amplitude / f;
        }
        let noise = if config.noise_rms > 0.0 {
            config.noise_rms * standard_normal(&mut rng)
        } else {
            0.0
        };
        *s = (*s + floor + noise).max(0.0);
    }
    let spectrum = Spectrum {
        frequencies,
        psd,
        metadata: None,
    };
    Ok((spectrum, pairs))
}

/// Synthesizes the spectrum a probe would record for the given config.
pub fn synthesize(config: &SpectrumConfig) -> Result<Spectrum> {
    synthesize_with_truth(config).map(|(s, _)| s)
}

/// Bin-wise ratio of a probed spectrum to its background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enhancement {
    pub frequencies: Vec<f64>,
    /// Ratio per bin; meaningless where `flagged` is set.
    pub ratio: Vec<f64>,
    /// Bins whose background fell below the divide threshold.
    pub flagged: Vec<bool>,
}

/// Forms the enhancement spectrum `probed / background`.
///
/// Bins where the background is below `floor_threshold` are flagged and the
/// ratio set to zero rather than divided.
pub fn enhancement(
    spectrum: &Spectrum,
    background: &Spectrum,
    floor_threshold: f64,
) -> Result<Enhancement> {
    if spectrum.frequencies != background.frequencies {
        return Err(Error::GridMismatch);
    }
    let mut ratio = Vec::with_capacity(spectrum.len());
    let mut flagged = Vec::with_capacity(spectrum.len());
    for (s, b) in spectrum.psd.iter().zip(&background.psd) {
        if *b < floor_threshold {
            ratio.push(0.0);
            flagged.push(true);
        } else {
            ratio.push(s / b);
            flagged.push(false);
        }
    }
    Ok(Enhancement {
        frequencies: spectrum.frequencies.clone(),
        ratio,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xsection::{EllipseSection, Material};
    use approx::assert_relative_eq;

    fn config(eps: f64, theta_deg: f64, seed: u64) -> SpectrumConfig {
        let section = EllipseSection::from_mean_radius(250e-9, eps).unwrap();
        SpectrumConfig {
            beam: BeamSpec::uniform(Material::silica(), 2.5e-3, section).unwrap(),
            convergence: None,
            geometry: ProjectionGeometry::from_degrees(theta_deg).unwrap(),
            q_factor: 1e4,
            f_min: 50e3,
            f_max: 120e3,
            bin_width: 2.0,
            noise_floor: 1e-10,
            noise_rms: 1e-11,
            pink_amplitude: 0.0,
            seed,
        }
    }

    #[test]
    fn deterministic_for_same_seed() {
        let cfg = config(1.0014, 60.0, 42);
        let a = synthesize(&cfg).unwrap();
        let b = synthesize(&cfg).unwrap();
        assert_eq!(a, b);
        let c = synthesize(&config(1.0014, 60.0, 43)).unwrap();
        assert_ne!(a.psd, c.psd);
    }

    #[test]
    fn empty_band_rejected() {
        let mut cfg = config(1.0014, 60.0, 1);
        cfg.f_min = 1.0;
        cfg.f_max = 100.0; // below the first eigenfrequency of this beam
        assert_eq!(synthesize(&cfg).unwrap_err(), Error::EmptyBand);
    }

    #[test]
    fn noiseless_single_pair_matches_closed_form() {
        let mut cfg = config(1.0060, 60.0, 7);
        // Narrow the band around one order.
        cfg.f_min = 104e3;
        cfg.f_max = 112e3;
        cfg.noise_floor = 0.0;
        cfg.noise_rms = 0.0;
        let (spectrum, pairs) = synthesize_with_truth(&cfg).unwrap();
        assert_eq!(pairs.len(), 1);
        let amps = pairs[0].amplitudes.unwrap();
        let low = thermal_peak(pairs[0].f_low, cfg.q_factor, amps.area_low).unwrap();
        let high = thermal_peak(pairs[0].f_high, cfg.q_factor, amps.area_high).unwrap();
        for (&f, &s) in spectrum.frequencies.iter().zip(&spectrum.psd) {
            let expect = low.psd(f) + high.psd(f);
            assert_relative_eq!(s, expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_theta_suppresses_high_frequency_mode() {
        let cfg = config(1.0060, 0.0, 3);
        let (_, pairs) = synthesize_with_truth(&cfg).unwrap();
        for p in &pairs {
            let amps = p.amplitudes.unwrap();
            assert_eq!(amps.area_high, 0.0);
            assert!(amps.area_low > 0.0);
        }
    }

    #[test]
    fn in_band_power_matches_pair_areas() {
        let mut cfg = config(1.0060, 60.0, 5);
        cfg.f_min = 90e3;
        cfg.f_max = 130e3;
        cfg.noise_rms = 0.0;
        cfg.noise_floor = 1e-9;
        let (spectrum, pairs) = synthesize_with_truth(&cfg).unwrap();
        // Keep only pairs far from the band edges so tail leakage is < 1%.
        let interior: f64 = pairs
            .iter()
            .filter(|p| p.f_low > 100e3 && p.f_high < 120e3)
            .map(|p| {
                let a = p.amplitudes.unwrap();
                a.area_low + a.area_high
            })
            .sum();
        assert!(interior > 0.0);
        let total: f64 = spectrum
            .psd
            .iter()
            .map(|s| (s - cfg.noise_floor) * cfg.bin_width)
            .sum();
        let edge: f64 = pairs
            .iter()
            .filter(|p| !(p.f_low > 100e3 && p.f_high < 120e3))
            .map(|p| {
                let a = p.amplitudes.unwrap();
                a.area_low + a.area_high
            })
            .sum();
        // Every interior pair's power must be present; edge pairs contribute
        // partially, so bound from both sides.
        assert!(total > 0.99 * interior);
        assert!(total < 1.01 * (interior + edge));
    }

    #[test]
    fn enhancement_identities() {
        let cfg = config(1.0060, 60.0, 11);
        let s = synthesize(&cfg).unwrap();
        let e = enhancement(&s, &s, 1e-30).unwrap();
        for (r, fl) in e.ratio.iter().zip(&e.flagged) {
            if !fl {
                assert_relative_eq!(*r, 1.0, max_relative = 1e-12);
            }
        }
        let flat = Spectrum::new(s.frequencies.clone(), alloc::vec![2.0; s.len()]).unwrap();
        let e = enhancement(&s, &flat, 1e-30).unwrap();
        for ((r, sv), fl) in e.ratio.iter().zip(&s.psd).zip(&e.flagged) {
            assert!(!fl);
            assert_relative_eq!(*r, sv / 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn enhancement_grid_mismatch_and_flagging() {
        let cfg = config(1.0060, 60.0, 13);
        let s = synthesize(&cfg).unwrap();
        let mut other = config(1.0060, 60.0, 13);
        other.f_min += 1.0;
        let t = synthesize(&other).unwrap();
        assert_eq!(enhancement(&s, &t, 1e-30).unwrap_err(), Error::GridMismatch);

        let zeros = Spectrum::new(s.frequencies.clone(), alloc::vec![0.0; s.len()]).unwrap();
        let e = enhancement(&s, &zeros, 1e-30).unwrap();
        assert!(e.flagged.iter().all(|f| *f));
    }

    #[test]
    fn spectrum_validation() {
        assert!(Spectrum::new(alloc::vec![1.0, 2.0, 4.0], alloc::vec![0.0; 3]).is_err());
        assert!(Spectrum::new(alloc::vec![1.0, 2.0], alloc::vec![0.0, -1.0]).is_err());
        assert!(Spectrum::new(alloc::vec![2.0, 1.0], alloc::vec![0.0, 0.0]).is_err());
    }
}
