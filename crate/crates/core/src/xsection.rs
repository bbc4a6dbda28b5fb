//! Elliptical cross-section geometry: area, area moments of inertia,
//! ellipticity and axis differences.

use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bending axis of a flexural mode, named by stiffness rather than by the
/// ellipse's own axis labels.
///
/// Displacement *along* the major semi-axis bends about the minor axis and
/// feels the larger area moment `π r1³ r2 / 4`; that is the higher-stiffness
/// (higher-frequency) mode. Displacement along the minor semi-axis feels
/// `π r1 r2³ / 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StiffnessAxis {
    /// Displacement along the major semi-axis; moment `π r1³ r2 / 4`.
    Higher,
    /// Displacement along the minor semi-axis; moment `π r1 r2³ / 4`.
    Lower,
}

/// Elliptical cross section with semi-axes `r1 ≥ r2 > 0` (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseSection {
    r1: f64,
    r2: f64,
}

impl EllipseSection {
    /// Builds a section from two semi-axes, normalizing so `r1 ≥ r2`.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidInput("semi-axes must be finite and > 0"));
        }
        let (r1, r2) = if a >= b { (a, b) } else { (b, a) };
        Ok(Self { r1, r2 })
    }

    /// Circular section of radius `r`.
    pub fn circle(r: f64) -> Result<Self> {
        Self::new(r, r)
    }

    /// Builds a section from a mean radius and an ellipticity `ε ≥ 1`.
    ///
    /// `r1 = 2εr/(1+ε)` and `r2 = 2r/(1+ε)`, so both the mean radius and the
    /// ellipticity round-trip exactly.
    pub fn from_mean_radius(mean_radius: f64, ellipticity: f64) -> Result<Self> {
        if !(ellipticity >= 1.0) {
            return Err(Error::InvalidInput("ellipticity must be ≥ 1"));
        }
        Self::new(
            2.0 * ellipticity * mean_radius / (1.0 + ellipticity),
            2.0 * mean_radius / (1.0 + ellipticity),
        )
    }

    /// Major semi-axis (m).
    pub fn r1(&self) -> f64 {
        self.r1
    }

    /// Minor semi-axis (m).
    pub fn r2(&self) -> f64 {
        self.r2
    }

    /// Mean of the two semi-axes (m).
    pub fn mean_radius(&self) -> f64 {
        0.5 * (self.r1 + self.r2)
    }

    /// Cross-section area `π r1 r2` (m²).
    pub fn area(&self) -> f64 {
        PI * self.r1 * self.r2
    }

    /// Area moment of inertia (m⁴) felt by displacement along the given axis.
    pub fn moment_for_displacement_along(&self, axis: StiffnessAxis) -> f64 {
        match axis {
            StiffnessAxis::Higher => PI * self.r1.powi(3) * self.r2 / 4.0,
            StiffnessAxis::Lower => PI * self.r1 * self.r2.powi(3) / 4.0,
        }
    }

    /// Ellipticity `ε = r1 / r2 ≥ 1`.
    pub fn ellipticity(&self) -> f64 {
        self.r1 / self.r2
    }

    /// Semi-axis difference `r1 − r2` (m).
    pub fn axis_difference(&self) -> f64 {
        self.r1 - self.r2
    }

    /// Diameter difference `2 (r1 − r2)` (m).
    pub fn diameter_difference(&self) -> f64 {
        2.0 * (self.r1 - self.r2)
    }
}

/// Semi-axis difference implied by a mean radius and an ellipticity
/// estimate, with first-order propagation of both uncertainties.
///
/// Returns `(r1 − r2, σ)` where `r1 − r2 = 2 r̄ (ε − 1)/(ε + 1)` and
/// `σ² = (4 r̄ σ_ε / (1+ε)²)² + (2 (ε−1) σ_r / (1+ε))²`. The diameter
/// difference and its uncertainty are twice these.
pub fn axis_difference_estimate(
    mean_radius: f64,
    sigma_mean_radius: f64,
    ellipticity: f64,
    sigma_ellipticity: f64,
) -> Result<(f64, f64)> {
    if !(mean_radius > 0.0 && sigma_mean_radius >= 0.0 && sigma_ellipticity >= 0.0) {
        return Err(Error::InvalidInput("need r̄ > 0 and nonnegative sigmas"));
    }
    let section = EllipseSection::from_mean_radius(mean_radius, ellipticity)?;
    let d_eps = 4.0 * mean_radius / (1.0 + ellipticity).powi(2);
    let d_r = 2.0 * (ellipticity - 1.0) / (1.0 + ellipticity);
    let sigma = ((d_eps * sigma_ellipticity).powi(2) + (d_r * sigma_mean_radius).powi(2)).sqrt();
    Ok((section.axis_difference(), sigma))
}

/// Isotropic linear-elastic material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Young's modulus (Pa).
    pub young_modulus: f64,
    /// Mass density (kg/m³).
    pub density: f64,
}

impl Material {
    pub fn new(young_modulus: f64, density: f64) -> Result<Self> {
        if !(young_modulus > 0.0 && density > 0.0) {
            return Err(Error::InvalidInput("E and ρ must be > 0"));
        }
        Ok(Self {
            young_modulus,
            density,
        })
    }

    /// Fused silica: E = 73 GPa, ρ = 2320 kg/m³.
    pub fn silica() -> Self {
        Self {
            young_modulus: 73e9,
            density: 2320.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn area_circle_250nm() {
        let s = EllipseSection::circle(250e-9).unwrap();
        assert_relative_eq!(s.area(), 1.9635e-13, max_relative = 1e-4);
    }

    #[test]
    fn area_slight_ellipse() {
        let s = EllipseSection::new(250e-9, 248.5e-9).unwrap();
        assert_relative_eq!(s.area(), 1.9517e-13, max_relative = 1e-4);
    }

    #[test]
    fn degenerate_section_rejected() {
        assert!(EllipseSection::new(0.0, 0.0).is_err());
        assert!(EllipseSection::new(1e-9, -1e-9).is_err());
        assert!(EllipseSection::new(f64::NAN, 1e-9).is_err());
    }

    #[test]
    fn moment_circle_250nm() {
        let s = EllipseSection::circle(250e-9).unwrap();
        let expected = 3.0680e-27;
        assert_relative_eq!(
            s.moment_for_displacement_along(StiffnessAxis::Higher),
            expected,
            max_relative = 1e-4
        );
        assert_relative_eq!(
            s.moment_for_displacement_along(StiffnessAxis::Lower),
            expected,
            max_relative = 1e-4
        );
    }

    #[test]
    fn moment_ratio_is_ellipticity_squared() {
        let s = EllipseSection::new(250e-9, 248.5e-9).unwrap();
        let ratio = s.moment_for_displacement_along(StiffnessAxis::Higher)
            / s.moment_for_displacement_along(StiffnessAxis::Lower);
        assert_relative_eq!(ratio, s.ellipticity().powi(2), max_relative = 1e-14);
    }

    #[test]
    fn ellipticity_paper_section() {
        let s = EllipseSection::new(250e-9, 248.5e-9).unwrap();
        assert_relative_eq!(s.ellipticity(), 1.006036, max_relative = 1e-6);
    }

    #[test]
    fn circle_has_unit_ellipticity_and_zero_differences() {
        let s = EllipseSection::circle(260e-9).unwrap();
        assert_eq!(s.ellipticity(), 1.0);
        assert_eq!(s.axis_difference(), 0.0);
        assert_eq!(s.diameter_difference(), 0.0);
    }

    #[test]
    fn mean_radius_construction() {
        // mean radius 260 nm, ε = 1.0014 → r1 − r2 ≈ 0.364 nm.
        let s = EllipseSection::from_mean_radius(260e-9, 1.0014).unwrap();
        assert_relative_eq!(s.axis_difference(), 0.364e-9, max_relative = 1e-3);
        assert_relative_eq!(s.diameter_difference(), 0.728e-9, max_relative = 1e-3);
        assert_relative_eq!(s.mean_radius(), 260e-9, max_relative = 1e-14);
    }

    #[test]
    fn constructor_normalizes_axis_order() {
        let s = EllipseSection::new(248.5e-9, 250e-9).unwrap();
        assert!(s.r1() >= s.r2());
    }
}
