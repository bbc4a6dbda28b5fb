//! Clamped–clamped Euler–Bernoulli flexural eigenproblem: analytic solution
//! for uniform beams, finite-difference solver for variable radius profiles,
//! and mode shapes.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::bandeig;
use crate::error::{Error, Result};
use crate::xsection::{EllipseSection, Material, StiffnessAxis};

/// Orders above this cap skip root finding and use the asymptote `(2n+1)π/2`.
pub const ROOT_ORDER_CAP: u32 = 1_000_000;

/// Radius profile along the beam axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BeamProfile {
    /// Constant cross section over the whole length.
    Uniform(EllipseSection),
    /// Piecewise-linear profile sampled at strictly increasing `z ∈ [0, L]`.
    Tabulated(Vec<(f64, EllipseSection)>),
}

/// A suspended beam: material, length and radius profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    pub material: Material,
    /// Length between the clamps (m).
    pub length: f64,
    pub profile: BeamProfile,
    /// Optional axial tension (N). Defaults to zero; a knob for exploring
    /// low-order behavior, not used by any acceptance path.
    #[serde(default)]
    pub tension: f64,
}

impl BeamSpec {
    pub fn new(material: Material, length: f64, profile: BeamProfile) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidInput("beam length must be finite and > 0"));
        }
        if let BeamProfile::Tabulated(samples) = &profile {
            if samples.len() < 2 {
                return Err(Error::InvalidInput("tabulated profile needs ≥ 2 samples"));
            }
            let tol = 1e-9 * length;
            if samples[0].0.abs() > tol || (samples[samples.len() - 1].0 - length).abs() > tol {
                return Err(Error::InvalidInput("tabulated profile must span [0, L]"));
            }
            for w in samples.windows(2) {
                if w[1].0 <= w[0].0 {
                    return Err(Error::InvalidInput("tabulated z must be strictly increasing"));
                }
            }
        }
        Ok(Self {
            material,
            length,
            profile,
            tension: 0.0,
        })
    }

    pub fn uniform(material: Material, length: f64, section: EllipseSection) -> Result<Self> {
        Self::new(material, length, BeamProfile::Uniform(section))
    }

    /// Cross section at axial position `z` (linear interpolation of both
    /// semi-axes for tabulated profiles).
    pub fn section_at(&self, z: f64) -> EllipseSection {
        match &self.profile {
            BeamProfile::Uniform(s) => *s,
            BeamProfile::Tabulated(samples) => {
                let z = z.clamp(samples[0].0, samples[samples.len() - 1].0);
                let idx = samples.partition_point(|(zi, _)| *zi <= z).min(samples.len() - 1);
                let hi = idx.max(1);
                let (z0, s0) = samples[hi - 1];
                let (z1, s1) = samples[hi];
                let t = (z - z0) / (z1 - z0);
                let r1 = s0.r1() + t * (s1.r1() - s0.r1());
                let r2 = s0.r2() + t * (s1.r2() - s0.r2());
                EllipseSection::new(r1, r2).expect("interpolated section stays valid")
            }
        }
    }

    /// The uniform section, if the profile is uniform.
    pub fn uniform_section(&self) -> Option<EllipseSection> {
        match &self.profile {
            BeamProfile::Uniform(s) => Some(*s),
            BeamProfile::Tabulated(_) => None,
        }
    }

    /// Aspect ratio `L / mean radius` at the midpoint section.
    pub fn aspect_ratio(&self) -> f64 {
        self.length / self.section_at(0.5 * self.length).mean_radius()
    }
}

/// One flexural eigenmode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// Mode order, starting at 1.
    pub order: u32,
    /// Eigenfrequency (Hz).
    pub frequency: f64,
    pub axis: StiffnessAxis,
    /// `(z, deflection)` samples, normalized so `max |deflection| = 1` and
    /// the first antinode is positive.
    pub shape: Vec<(f64, f64)>,
}

/// n-th positive root of the clamped–clamped characteristic equation
/// `cos x · cosh x = 1`, i.e. the dimensionless eigenvalue `β_n L`.
///
/// Evaluated in the overflow-safe form `cos x = sech x`; beyond
/// [`ROOT_ORDER_CAP`] the asymptote `(2n+1)π/2` is returned (the two agree
/// to machine precision long before that).
pub fn clamped_root(n: u32) -> f64 {
    assert!(n >= 1, "mode order starts at 1");
    if n > ROOT_ORDER_CAP {
        return (2.0 * n as f64 + 1.0) * PI / 2.0;
    }
    let g = |x: f64| {
        // sech(x) = 2 e^{-x} / (1 + e^{-2x}), stable for all x ≥ 0.
        let e = (-x).exp();
        x.cos() - 2.0 * e / (1.0 + e * e)
    };
    let mut lo = n as f64 * PI;
    let mut hi = lo + PI;
    let mut g_lo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if (g_mid >= 0.0) == (g_lo >= 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact linear-theory eigenfrequency of a uniform beam (Hz):
/// `f = (β_n L)² / (2π L²) · sqrt(E I / (ρ A))`.
pub fn eigenfrequency_exact(spec: &BeamSpec, axis: StiffnessAxis, n: u32) -> Result<f64> {
    let section = spec
        .uniform_section()
        .ok_or(Error::InvalidInput("exact eigenfrequency needs a uniform profile"))?;
    if n < 1 {
        return Err(Error::InvalidInput("mode order starts at 1"));
    }
    let x = clamped_root(n);
    let stiffness = spec.material.young_modulus * section.moment_for_displacement_along(axis);
    let mass_per_length = spec.material.density * section.area();
    Ok(x * x / (2.0 * PI * spec.length * spec.length) * (stiffness / mass_per_length).sqrt())
}

/// Large-order asymptotic eigenfrequency of a uniform circular beam (Hz):
/// `f = sqrt(E/ρ) · (2n+1)² π r / (16 L²)`.
pub fn eigenfrequency_asymptotic(spec: &BeamSpec, n: u32) -> Result<f64> {
    let section = spec
        .uniform_section()
        .ok_or(Error::InvalidInput("asymptotic eigenfrequency needs a uniform profile"))?;
    if section.ellipticity() != 1.0 {
        return Err(Error::InvalidInput("asymptotic formula assumes a circular section"));
    }
    if n < 1 {
        return Err(Error::InvalidInput("mode order starts at 1"));
    }
    let m = 2.0 * n as f64 + 1.0;
    let r = section.r1();
    Ok((spec.material.young_modulus / spec.material.density).sqrt() * m * m * PI * r
        / (16.0 * spec.length * spec.length))
}

/// Evaluates the clamped–clamped shape function at `u = β z ∈ [0, X]`,
/// `X = β L`, in exponentially-scaled form (no `cosh` overflow):
///
/// `w(u) = cosh u − cos u − σ (sinh u − sin u)` with
/// `σ = (cosh X − cos X) / (sinh X − sin X)`.
fn shape_value(u: f64, x_total: f64) -> f64 {
    let ex = (-x_total).exp();
    // Denominator of σ scaled by 2 e^{-X}.
    let d = 1.0 - ex * ex - 2.0 * x_total.sin() * ex;
    let sigma = (1.0 + ex * ex - 2.0 * x_total.cos() * ex) / d;
    // (1 − σ) e^u expressed without cancellation:
    // 1 − σ = 2 e^{-X} (cos X − sin X − e^{-X}) / d.
    let one_minus_sigma_eu =
        2.0 * (u - x_total).exp() * (x_total.cos() - x_total.sin() - ex) / d;
    0.5 * one_minus_sigma_eu + 0.5 * (1.0 + sigma) * (-u).exp() - u.cos() + sigma * u.sin()
}

/// Normalizes a sampled deflection in place: `max |w| = 1` and the first
/// antinode positive.
fn normalize_shape(w: &mut [f64]) {
    let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return;
    }
    for v in w.iter_mut() {
        *v /= max;
    }
    let first_antinode = w.iter().find(|v| v.abs() >= 0.9);
    if let Some(v) = first_antinode {
        if *v < 0.0 {
            for v in w.iter_mut() {
                *v = -*v;
            }
        }
    }
}

/// Analytic mode shape of a uniform beam, sampled on `samples + 1` nodes
/// including both clamped ends.
pub fn mode_shape(
    spec: &BeamSpec,
    axis: StiffnessAxis,
    n: u32,
    samples: usize,
) -> Result<Mode> {
    if spec.uniform_section().is_none() {
        return Err(Error::InvalidInput("analytic mode shape needs a uniform profile"));
    }
    if n < 1 || samples < 16 {
        return Err(Error::InvalidInput("need n ≥ 1 and samples ≥ 16"));
    }
    let x_total = clamped_root(n);
    let frequency = eigenfrequency_exact(spec, axis, n)?;
    let mut w: Vec<f64> = (0..=samples)
        .map(|i| {
            let u = x_total * i as f64 / samples as f64;
            shape_value(u, x_total)
        })
        .collect();
    // The formula is exactly zero at both ends; pin them against roundoff.
    w[0] = 0.0;
    w[samples] = 0.0;
    normalize_shape(&mut w);
    let shape = w
        .into_iter()
        .enumerate()
        .map(|(i, v)| (spec.length * i as f64 / samples as f64, v))
        .collect();
    Ok(Mode {
        order: n,
        frequency,
        axis,
        shape,
    })
}

/// Lowest `n_max` eigenmodes of `(E I(z) w″)″ − T w″ = ρ A(z) ω² w` with
/// clamped ends, by second-order finite differences on a uniform grid with
/// `grid_points` intervals and a banded symmetric-definite eigensolve.
///
/// For uniform profiles this agrees with [`eigenfrequency_exact`] to the
/// discretization error (second order in the grid step).
pub fn numerical_modes(
    spec: &BeamSpec,
    axis: StiffnessAxis,
    n_max: u32,
    grid_points: usize,
) -> Result<Vec<Mode>> {
    if n_max < 1 {
        return Err(Error::InvalidInput("need n_max ≥ 1"));
    }
    let required = 10 * n_max as usize;
    if grid_points < required {
        return Err(Error::Resolution {
            grid_points,
            required,
        });
    }
    let n_grid = grid_points; // intervals
    let n_unknowns = n_grid - 1;
    let h = spec.length / n_grid as f64;
    let e = spec.material.young_modulus;
    let rho = spec.material.density;

    // Bending stiffness E·I and mass ρ·A at every node.
    let mut ei = Vec::with_capacity(n_grid + 1);
    let mut mass = Vec::with_capacity(n_unknowns);
    for i in 0..=n_grid {
        let s = spec.section_at(i as f64 * h);
        ei.push(e * s.moment_for_displacement_along(axis));
        if i >= 1 && i <= n_unknowns {
            mass.push(rho * s.area() * h);
        }
    }

    // Stiffness from the bending energy  Σ_i c_i (E I)_i κ_i²  with nodal
    // curvature κ_i = (w_{i-1} − 2 w_i + w_{i+1}) / h² and clamped-end ghost
    // values w_{-1} = w_1, w_{N+1} = w_{N-1}; trapezoid weights c_i.
    let mut d0 = alloc::vec![0.0; n_unknowns];
    let mut d1 = alloc::vec![0.0; n_unknowns.saturating_sub(1)];
    let mut d2 = alloc::vec![0.0; n_unknowns.saturating_sub(2)];
    let inv_h4 = 1.0 / (h * h * h * h);
    let weight = |i: usize| if i == 0 || i == n_grid { 0.5 * h } else { h };
    // End curvatures: κ_0 = 2 w_1 / h², κ_N = 2 w_{N-1} / h².
    d0[0] += weight(0) * ei[0] * 4.0 * inv_h4;
    d0[n_unknowns - 1] += weight(n_grid) * ei[n_grid] * 4.0 * inv_h4;
    for i in 1..n_grid {
        let a = weight(i) * ei[i] * inv_h4;
        // Stencil over unknowns (w_0 = w_N = 0 drop out).
        let nodes = [i as isize - 1, i as isize, i as isize + 1];
        let coef = [1.0, -2.0, 1.0];
        for (p, &jp) in nodes.iter().enumerate() {
            if jp < 1 || jp > n_unknowns as isize {
                continue;
            }
            for (q, &jq) in nodes.iter().enumerate() {
                if jq < jp || jq > n_unknowns as isize {
                    continue;
                }
                let row = (jp - 1) as usize;
                let off = (jq - jp) as usize;
                let v = a * coef[p] * coef[q];
                match off {
                    0 => d0[row] += v,
                    1 => d1[row] += v,
                    2 => d2[row] += v,
                    _ => unreachable!(),
                }
            }
        }
    }
    // Axial tension adds  T Σ (w')²: tridiagonal with stencil (−1, 1)/h.
    if spec.tension != 0.0 {
        let t = spec.tension / h;
        for i in 0..n_grid {
            let nodes = [i as isize, i as isize + 1];
            let coef = [-1.0, 1.0];
            for (p, &jp) in nodes.iter().enumerate() {
                if jp < 1 || jp > n_unknowns as isize {
                    continue;
                }
                for (q, &jq) in nodes.iter().enumerate() {
                    if jq < jp || jq > n_unknowns as isize {
                        continue;
                    }
                    let row = (jp - 1) as usize;
                    let v = t * coef[p] * coef[q];
                    if jq == jp {
                        d0[row] += v;
                    } else {
                        d1[row] += v;
                    }
                }
            }
        }
    }

    let pairs = bandeig::lowest_eigenpairs(&d0, &d1, &d2, &mass, n_max as usize)?;
    let mut modes = Vec::with_capacity(pairs.len());
    for (order0, (lambda, vec)) in pairs.into_iter().enumerate() {
        let frequency = lambda.max(0.0).sqrt() / (2.0 * PI);
        let mut w = Vec::with_capacity(n_grid + 1);
        w.push(0.0);
        w.extend_from_slice(&vec);
        w.push(0.0);
        normalize_shape(&mut w);
        let shape = w
            .into_iter()
            .enumerate()
            .map(|(i, v)| (i as f64 * h, v))
            .collect();
        modes.push(Mode {
            order: order0 as u32 + 1,
            frequency,
            axis,
            shape,
        });
    }
    Ok(modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent oracle: bisection on the raw characteristic function
    /// cos x · cosh x − 1 (safe for the orders tested here).
    fn root_oracle(n: u32) -> f64 {
        let g = |x: f64| x.cos() * x.cosh() - 1.0;
        let mut lo = n as f64 * PI;
        let mut hi = lo + PI;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (g(mid) >= 0.0) == (g(lo) >= 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn paper_beam() -> BeamSpec {
        BeamSpec::uniform(
            Material::silica(),
            5e-3,
            EllipseSection::circle(250e-9).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn clamped_roots_match_oracle() {
        assert_relative_eq!(clamped_root(1), 4.7300408, max_relative = 1e-7);
        assert_relative_eq!(clamped_root(3), 10.9956078, max_relative = 1e-7);
        for n in 1..=10 {
            assert!((clamped_root(n) - root_oracle(n)).abs() < 1e-9, "n = {n}");
        }
    }

    #[test]
    fn clamped_root_approaches_asymptote() {
        let asym = |n: u32| (2.0 * n as f64 + 1.0) * PI / 2.0;
        assert!((clamped_root(10) - 32.9867229).abs() < 1e-7);
        assert!((clamped_root(10) - asym(10)).abs() < 1e-7);
        assert_relative_eq!(clamped_root(100), asym(100), max_relative = 1e-12);
        // Beyond the cap: asymptote by definition.
        assert_eq!(clamped_root(ROOT_ORDER_CAP + 1), asym(ROOT_ORDER_CAP + 1));
    }

    #[test]
    fn exact_frequencies_paper_beam() {
        let beam = paper_beam();
        let f1 = eigenfrequency_exact(&beam, StiffnessAxis::Lower, 1).unwrap();
        assert_relative_eq!(f1, 99.87, max_relative = 2e-4);
        let f10 = eigenfrequency_exact(&beam, StiffnessAxis::Lower, 10).unwrap();
        assert_relative_eq!(f10, 4857.2, max_relative = 1e-4);
    }

    #[test]
    fn elliptical_frequency_ratio_is_ellipticity() {
        let section = EllipseSection::new(250e-9, 248.5e-9).unwrap();
        let beam = BeamSpec::uniform(Material::silica(), 5e-3, section).unwrap();
        for n in [1, 5, 20] {
            let hi = eigenfrequency_exact(&beam, StiffnessAxis::Higher, n).unwrap();
            let lo = eigenfrequency_exact(&beam, StiffnessAxis::Lower, n).unwrap();
            assert_relative_eq!(hi / lo, section.ellipticity(), max_relative = 1e-12);
        }
    }

    #[test]
    fn asymptotic_frequency_paper_beam() {
        let beam = paper_beam();
        let f1 = eigenfrequency_asymptotic(&beam, 1).unwrap();
        assert_relative_eq!(f1, 99.14, max_relative = 2e-4);
        let exact10 = eigenfrequency_exact(&beam, StiffnessAxis::Lower, 10).unwrap();
        let asym10 = eigenfrequency_asymptotic(&beam, 10).unwrap();
        assert_relative_eq!(asym10, exact10, max_relative = 2e-4);
    }

    #[test]
    fn asymptotic_scales_inverse_square_length() {
        let short = paper_beam();
        let long = BeamSpec::uniform(
            Material::silica(),
            10e-3,
            EllipseSection::circle(250e-9).unwrap(),
        )
        .unwrap();
        let f_short = eigenfrequency_asymptotic(&short, 4).unwrap();
        let f_long = eigenfrequency_asymptotic(&long, 4).unwrap();
        assert_relative_eq!(f_short / f_long, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn asymptotic_ratio_converges_to_one() {
        // The roots alternate around (2n+1)π/2 with exponentially shrinking
        // amplitude, so the asymptotic/exact ratio oscillates about 1 while
        // its deviation decays monotonically.
        let beam = paper_beam();
        let mut prev_dev = f64::INFINITY;
        for n in 1..=20 {
            let ratio = eigenfrequency_asymptotic(&beam, n).unwrap()
                / eigenfrequency_exact(&beam, StiffnessAxis::Lower, n).unwrap();
            let dev = (ratio - 1.0).abs();
            assert!(dev <= prev_dev + 1e-12, "deviation must shrink, n = {n}");
            if n >= 5 {
                assert!(dev < 0.01, "n = {n}: {ratio}");
            }
            if n >= 10 {
                assert!(dev < 2e-4, "n = {n}: {ratio}");
            }
            prev_dev = dev;
        }
    }

    #[test]
    fn mode_shape_boundary_and_crossings() {
        let beam = paper_beam();
        for n in [1u32, 4, 15, 400] {
            let mode = mode_shape(&beam, StiffnessAxis::Lower, n, 4096).unwrap();
            let w: Vec<f64> = mode.shape.iter().map(|(_, v)| *v).collect();
            assert_eq!(w[0], 0.0);
            assert_eq!(w[w.len() - 1], 0.0);
            // Quadratic (clamped) growth from the ends: w(h) ≈ (βh)²/2.
            let bound = 1.5 * (clamped_root(n) / 4096.0).powi(2);
            assert!(w[1].abs() < bound, "n = {n}: w(h) = {}", w[1]);
            assert!(w[w.len() - 2].abs() < bound);
            let crossings = w
                .windows(2)
                .filter(|p| p[0] != 0.0 && p[1] != 0.0 && (p[0] < 0.0) != (p[1] < 0.0))
                .count();
            assert_eq!(crossings, n as usize - 1, "n = {n}");
            let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert_relative_eq!(max, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn first_mode_symmetric_single_antinode() {
        let beam = paper_beam();
        let mode = mode_shape(&beam, StiffnessAxis::Lower, 1, 1000).unwrap();
        let w: Vec<f64> = mode.shape.iter().map(|(_, v)| *v).collect();
        assert_relative_eq!(w[500], 1.0, max_relative = 1e-9);
        for i in 0..=500 {
            assert_relative_eq!(w[i], w[1000 - i], epsilon = 1e-9);
        }
        assert!(w.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn numerical_matches_exact_uniform() {
        let beam = paper_beam();
        let modes = numerical_modes(&beam, StiffnessAxis::Lower, 5, 1200).unwrap();
        for mode in &modes {
            let exact = eigenfrequency_exact(&beam, StiffnessAxis::Lower, mode.order).unwrap();
            assert_relative_eq!(mode.frequency, exact, max_relative = 1e-3);
        }
    }

    #[test]
    fn numerical_ratio_equals_ellipticity() {
        let section = EllipseSection::new(250e-9, 248.5e-9).unwrap();
        let beam = BeamSpec::uniform(Material::silica(), 5e-3, section).unwrap();
        // Modest grid on purpose: the stiffness norm grows as grid⁴ and the
        // lowest eigenvalue sits ~10 decades below it, so entry rounding
        // alone perturbs λ₁ by ~eps·‖B‖ — 1e-6 relative at 800 intervals,
        // 16× less here.
        let hi = numerical_modes(&beam, StiffnessAxis::Higher, 3, 400).unwrap();
        let lo = numerical_modes(&beam, StiffnessAxis::Lower, 3, 400).unwrap();
        for (h, l) in hi.iter().zip(&lo) {
            assert_relative_eq!(
                h.frequency / l.frequency,
                section.ellipticity(),
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn resolution_guard() {
        let beam = paper_beam();
        let err = numerical_modes(&beam, StiffnessAxis::Lower, 10, 50).unwrap_err();
        assert!(matches!(err, Error::Resolution { .. }));
    }

    #[test]
    fn tabulated_profile_roundtrip() {
        let s0 = EllipseSection::circle(250e-9).unwrap();
        let s1 = EllipseSection::circle(300e-9).unwrap();
        let spec = BeamSpec::new(
            Material::silica(),
            5e-3,
            BeamProfile::Tabulated(alloc::vec![(0.0, s0), (5e-3, s1)]),
        )
        .unwrap();
        let mid = spec.section_at(2.5e-3);
        assert_relative_eq!(mid.r1(), 275e-9, max_relative = 1e-12);
        // A tapered beam is stiffer than the thin-end uniform beam.
        let tapered = numerical_modes(&spec, StiffnessAxis::Lower, 1, 400).unwrap();
        let thin = BeamSpec::uniform(Material::silica(), 5e-3, s0).unwrap();
        let f_thin = eigenfrequency_exact(&thin, StiffnessAxis::Lower, 1).unwrap();
        assert!(tapered[0].frequency > f_thin);
    }

    #[test]
    fn tabulated_validation() {
        let s = EllipseSection::circle(250e-9).unwrap();
        assert!(BeamSpec::new(
            Material::silica(),
            5e-3,
            BeamProfile::Tabulated(alloc::vec![(0.0, s), (1e-3, s)]),
        )
        .is_err());
        assert!(BeamSpec::new(
            Material::silica(),
            5e-3,
            BeamProfile::Tabulated(alloc::vec![(0.0, s), (1e-3, s), (1e-3, s), (5e-3, s)]),
        )
        .is_err());
    }
}
