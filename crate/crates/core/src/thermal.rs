//! Equipartition amplitude ratios, projection of the two orthogonal mode
//! deflections onto the probe axis, and inversion for the probe angle θ.
//!
//! All of these are ratio relations, so deflections are handled in relative
//! units; absolute calibration only enters through [`ThermalEnv`] when a
//! caller wants physical mean-square deflections.

use core::f64::consts::{FRAC_PI_2, PI};

#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::splitting::ModePair;

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Thermal bath driving the modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalEnv {
    /// Temperature (K).
    pub temperature: f64,
}

impl ThermalEnv {
    pub fn new(temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::InvalidInput("temperature must be > 0"));
        }
        Ok(Self { temperature })
    }

    /// Equipartition mean-square deflection `k_B T / (m_eff ω²)` (m²) of a
    /// mode with effective mass `m_eff` (kg) at frequency `f` (Hz).
    pub fn mean_square_deflection(&self, effective_mass: f64, f: f64) -> f64 {
        let omega = 2.0 * PI * f;
        BOLTZMANN * self.temperature / (effective_mass * omega * omega)
    }
}

/// Probe orientation: the angle θ between the probe axis and the beam's
/// higher-stiffness principal axis, in `[0, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionGeometry {
    pub theta: f64,
}

impl ProjectionGeometry {
    pub fn new(theta: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_2).contains(&theta) {
            return Err(Error::InvalidInput("θ must lie in [0, π/2]"));
        }
        Ok(Self { theta })
    }

    pub fn from_degrees(deg: f64) -> Result<Self> {
        Self::new(deg * PI / 180.0)
    }
}

/// Equipartition ratio of the pair's mean-square deflections:
/// `⟨d²_low-frequency⟩ / ⟨d²_high-frequency⟩ = (f_high / f_low)²`.
///
/// Equal modal mass and equal thermal energy make each mode's mean-square
/// deflection scale as `1/f²`.
pub fn amplitude_ratio(pair: &ModePair) -> f64 {
    let r = pair.ratio();
    r * r
}

/// Projects the two orthogonal mean-square deflections onto the probe axis.
///
/// Index 1 is the mode along the axis at angle θ from the probe (the
/// higher-stiffness axis); index 2 is the orthogonal mode:
/// `measured_1 = msq_1 sin²θ`, `measured_2 = msq_2 cos²θ`.
pub fn project(msq_1: f64, msq_2: f64, geom: ProjectionGeometry) -> (f64, f64) {
    let s = geom.theta.sin();
    let c = geom.theta.cos();
    (msq_1 * s * s, msq_2 * c * c)
}

/// Inverts the projection for the probe angle:
/// `θ = arctan sqrt( (measured_1 / measured_2) · f_ratio_squared )`
/// with `f_ratio_squared = (f_high / f_low)²`.
///
/// Returns `(θ, degenerate)`; `degenerate` is set when `measured_2 = 0`
/// forces θ to π/2.
pub fn angle_from_measurements(
    measured_1: f64,
    measured_2: f64,
    f_ratio_squared: f64,
) -> Result<(f64, bool)> {
    if !(measured_1 >= 0.0 && measured_2 >= 0.0 && f_ratio_squared > 0.0) {
        return Err(Error::InvalidInput(
            "need measured msq ≥ 0 and a positive frequency ratio",
        ));
    }
    if measured_2 == 0.0 {
        return Ok((FRAC_PI_2, true));
    }
    let t = (measured_1 / measured_2 * f_ratio_squared).sqrt();
    Ok((t.atan(), false))
}

/// Lorentzian power-spectral-density peak parameterized by the fit-stable
/// triple (center, full width, area).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakModel {
    /// Center frequency (Hz).
    pub f0: f64,
    /// Full width at half maximum Γ (Hz).
    pub gamma: f64,
    /// Integrated power `∫ S df` = mean-square deflection.
    pub area: f64,
}

impl PeakModel {
    pub fn new(f0: f64, gamma: f64, area: f64) -> Result<Self> {
        if !(f0 > 0.0 && gamma > 0.0 && area >= 0.0) {
            return Err(Error::InvalidInput("need f0 > 0, Γ > 0, area ≥ 0"));
        }
        Ok(Self { f0, gamma, area })
    }

    /// Quality factor `Q = f0 / Γ`.
    pub fn q(&self) -> f64 {
        self.f0 / self.gamma
    }

    /// Peak PSD value `S₀ = 2·area / (π Γ)`.
    pub fn height(&self) -> f64 {
        2.0 * self.area / (PI * self.gamma)
    }

    /// `S(f) = S₀ (Γ/2)² / ((f − f0)² + (Γ/2)²)`.
    pub fn psd(&self, f: f64) -> f64 {
        let hw = 0.5 * self.gamma;
        self.height() * hw * hw / ((f - self.f0) * (f - self.f0) + hw * hw)
    }
}

/// Thermally driven Lorentzian peak: width from Q, area equal to the mode's
/// mean-square deflection.
pub fn thermal_peak(f0: f64, q: f64, msq: f64) -> Result<PeakModel> {
    if !(q > 1.0) {
        return Err(Error::InvalidInput("need Q > 1"));
    }
    PeakModel::new(f0, f0 / q, msq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn amplitude_ratio_examples() {
        let degenerate = ModePair::new(1, 100.0, 100.0).unwrap();
        assert_eq!(amplitude_ratio(&degenerate), 1.0);
        let paper = ModePair::new(155, 503_000.0, 503_000.0 * 1.0014).unwrap();
        assert_relative_eq!(amplitude_ratio(&paper), 1.0028, max_relative = 1e-4);
        let octave = ModePair::new(1, 100.0, 200.0).unwrap();
        assert_eq!(amplitude_ratio(&octave), 4.0);
    }

    #[test]
    fn projection_limits() {
        let (m1, m2) = project(3.0, 5.0, ProjectionGeometry::new(0.0).unwrap());
        assert_eq!((m1, m2), (0.0, 5.0));
        let (m1, m2) = project(3.0, 5.0, ProjectionGeometry::new(FRAC_PI_2).unwrap());
        assert_relative_eq!(m1, 3.0, max_relative = 1e-12);
        assert!(m2 < 1e-30);
        let (m1, m2) = project(3.0, 5.0, ProjectionGeometry::from_degrees(45.0).unwrap());
        assert_relative_eq!(m1, 1.5, max_relative = 1e-12);
        assert_relative_eq!(m2, 2.5, max_relative = 1e-12);
    }

    #[test]
    fn projection_energy_split() {
        for deg in [1.0, 17.0, 45.0, 60.0, 89.0] {
            let geom = ProjectionGeometry::from_degrees(deg).unwrap();
            let (m1, m2) = project(2.0, 7.0, geom);
            assert_relative_eq!(m1 / 2.0 + m2 / 7.0, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn angle_examples() {
        let (theta, flag) = angle_from_measurements(3.0, 1.0, 1.0).unwrap();
        assert!(!flag);
        assert_relative_eq!(theta, 60f64.to_radians(), max_relative = 1e-12);
        let (theta, flag) = angle_from_measurements(0.0, 1.0, 1.5).unwrap();
        assert!(!flag);
        assert_eq!(theta, 0.0);
        let (theta, flag) = angle_from_measurements(1.0, 0.0, 1.5).unwrap();
        assert!(flag);
        assert_eq!(theta, FRAC_PI_2);
    }

    #[test]
    fn angle_roundtrip_through_projection() {
        let pair = ModePair::new(30, 503_000.0, 503_000.0 * 1.0014).unwrap();
        let ratio_sq = amplitude_ratio(&pair);
        for deg in [5.0, 30.0, 60.0, 85.0] {
            let theta = deg.to_radians();
            // Mode 1 is the higher-frequency (stiffer) mode: msq_1 = msq_2 / R².
            let msq_2 = 1.0;
            let msq_1 = msq_2 / ratio_sq;
            let (m1, m2) = project(msq_1, msq_2, ProjectionGeometry::new(theta).unwrap());
            let (back, flag) = angle_from_measurements(m1, m2, ratio_sq).unwrap();
            assert!(!flag);
            assert!((back - theta).abs() < 1e-10, "θ = {deg}°");
        }
    }

    #[test]
    fn equipartition_identity() {
        // (msq_low / msq_high) · (f_low / f_high)² = 1 for any pair.
        let pair = ModePair::new(7, 1234.0, 1250.0).unwrap();
        let msq_high = 1.0 / pair.f_high.powi(2);
        let msq_low = 1.0 / pair.f_low.powi(2);
        let check = (msq_low / msq_high) * (pair.f_low / pair.f_high).powi(2);
        assert_relative_eq!(check, 1.0, max_relative = 1e-12);
        assert_relative_eq!(msq_low / msq_high, amplitude_ratio(&pair), max_relative = 1e-12);
    }

    #[test]
    fn lorentzian_area_and_height() {
        let peak = thermal_peak(50_000.0, 1e4, 2.5).unwrap();
        assert_relative_eq!(peak.gamma, 5.0, max_relative = 1e-12);
        assert_relative_eq!(peak.height(), 2.0 * 2.5 / (PI * 5.0), max_relative = 1e-12);
        // Quadrature over ±50Γ recovers the area within ~1% (fat tails).
        let lo = peak.f0 - 50.0 * peak.gamma;
        let steps = 200_000;
        let h = 100.0 * peak.gamma / steps as f64;
        let mut integral = 0.0;
        for i in 0..steps {
            let f = lo + (i as f64 + 0.5) * h;
            integral += peak.psd(f) * h;
        }
        assert_relative_eq!(integral, peak.area, max_relative = 1.5e-2);
    }

    #[test]
    fn doubling_q_halves_width_doubles_height() {
        let a = thermal_peak(50_000.0, 1e4, 2.5).unwrap();
        let b = thermal_peak(50_000.0, 2e4, 2.5).unwrap();
        assert_relative_eq!(b.gamma, a.gamma / 2.0, max_relative = 1e-12);
        assert_relative_eq!(b.height(), 2.0 * a.height(), max_relative = 1e-12);
    }

    #[test]
    fn thermal_env_scaling() {
        let env = ThermalEnv::new(300.0).unwrap();
        let msq = env.mean_square_deflection(1e-12, 1000.0);
        // Doubling frequency quarters the deflection.
        assert_relative_eq!(
            env.mean_square_deflection(1e-12, 2000.0),
            msq / 4.0,
            max_relative = 1e-12
        );
        assert!(msq > 0.0);
    }
}
