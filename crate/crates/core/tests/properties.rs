//! Property-based checks of the model's algebraic identities.

use modesplit_core::beam::{clamped_root, eigenfrequency_exact, BeamSpec};
use modesplit_core::splitting::{
    ellipticity_from_pairs, frequency_splitting, predict_pairs, ConvergenceModel, ModePair,
};
use modesplit_core::thermal::{amplitude_ratio, angle_from_measurements, project, ProjectionGeometry};
use modesplit_core::xsection::{EllipseSection, Material, StiffnessAxis};
use proptest::prelude::*;

fn section_strategy() -> impl Strategy<Value = EllipseSection> {
    (1e-9..1e-5f64, 1.0..1.2f64)
        .prop_map(|(r, eps)| EllipseSection::from_mean_radius(r, eps).unwrap())
}

proptest! {
    #[test]
    fn moment_ratio_is_ellipticity_squared(section in section_strategy()) {
        let hi = section.moment_for_displacement_along(StiffnessAxis::Higher);
        let lo = section.moment_for_displacement_along(StiffnessAxis::Lower);
        let eps = section.ellipticity();
        prop_assert!((hi / lo / (eps * eps) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn section_reconstruction_roundtrip(r in 1e-9..1e-5f64, eps in 1.0..1.2f64) {
        let section = EllipseSection::from_mean_radius(r, eps).unwrap();
        prop_assert!((section.ellipticity() / eps - 1.0).abs() < 1e-12);
        prop_assert!((section.mean_radius() / r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moments_monotone_in_semi_axes(section in section_strategy(), grow in 1.0001..1.5f64) {
        let bigger = EllipseSection::new(section.r1() * grow, section.r2() * grow).unwrap();
        for axis in [StiffnessAxis::Higher, StiffnessAxis::Lower] {
            prop_assert!(
                bigger.moment_for_displacement_along(axis)
                    > section.moment_for_displacement_along(axis)
            );
        }
        prop_assert!(bigger.area() > section.area());
    }

    #[test]
    fn clamped_roots_bracketed_and_monotone(n in 1u32..500) {
        let x = clamped_root(n);
        let pi = core::f64::consts::PI;
        prop_assert!(x > n as f64 * pi && x < (n as f64 + 1.0) * pi);
        prop_assert!(clamped_root(n + 1) > x);
    }

    #[test]
    fn projection_preserves_energy_fractions(
        msq_1 in 1e-6..1e6f64,
        msq_2 in 1e-6..1e6f64,
        deg in 1.0..89.0f64,
    ) {
        let geom = ProjectionGeometry::from_degrees(deg).unwrap();
        let (m1, m2) = project(msq_1, msq_2, geom);
        prop_assert!((m1 / msq_1 + m2 / msq_2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn angle_roundtrip(
        deg in 0.5..89.5f64,
        ratio in 1.0..1.05f64,
        scale in 1e-3..1e3f64,
    ) {
        let pair = ModePair::new(10, 1e5 * scale, 1e5 * scale * ratio).unwrap();
        let r2 = amplitude_ratio(&pair);
        // Equipartition fixes the unprojected deflections up to a common scale.
        let msq_2 = scale;
        let msq_1 = msq_2 / r2;
        let geom = ProjectionGeometry::from_degrees(deg).unwrap();
        let (m1, m2) = project(msq_1, msq_2, geom);
        let (theta, degenerate) = angle_from_measurements(m1, m2, r2).unwrap();
        prop_assert!(!degenerate);
        prop_assert!((theta.to_degrees() - deg).abs() < 1e-8);
    }

    #[test]
    fn ratio_splitting_identity(
        f_low in 1e2..1e7f64,
        excess in 0.0..0.1f64,
    ) {
        let pair = ModePair::new(3, f_low, f_low * (1.0 + excess)).unwrap();
        let lhs = frequency_splitting(&pair) / pair.f_low;
        prop_assert!((lhs - (pair.ratio() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn predicted_ratio_is_length_and_material_free(
        eps in 1.0..1.05f64,
        length in 1e-3..2e-2f64,
        n in 1u32..60,
    ) {
        let section = EllipseSection::from_mean_radius(250e-9, eps).unwrap();
        let spec = BeamSpec::uniform(Material::silica(), length, section).unwrap();
        let hi = eigenfrequency_exact(&spec, StiffnessAxis::Higher, n).unwrap();
        let lo = eigenfrequency_exact(&spec, StiffnessAxis::Lower, n).unwrap();
        prop_assert!((hi / lo / eps - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plateau_estimate_matches_generator(
        eps in 1.0005..1.02f64,
        amp in 0.0..5e-3f64,
        decay in 0.2..0.6f64,
    ) {
        let section = EllipseSection::from_mean_radius(250e-9, eps).unwrap();
        let spec = BeamSpec::uniform(Material::silica(), 5e-3, section).unwrap();
        let model = ConvergenceModel::new(eps, amp, decay, 0).unwrap();
        let pairs = predict_pairs(&spec, (2, 60), Some(&model)).unwrap();
        // Far past the decay the ratio is the plateau up to the residual
        // correction (≤ A e^{−40α} ≈ 1.7e-6 at the range extremes).
        let (est, _) = ellipticity_from_pairs(&pairs, Some(40)).unwrap();
        prop_assert!((est / eps - 1.0).abs() < 2e-6);
    }

    #[test]
    fn pair_ratio_scale_equivariant(
        eps in 1.0..1.05f64,
        scale in 1e-2..1e2f64,
    ) {
        let section = EllipseSection::from_mean_radius(250e-9, eps).unwrap();
        let spec = BeamSpec::uniform(Material::silica(), 5e-3, section).unwrap();
        let pairs = predict_pairs(&spec, (5, 10), None).unwrap();
        for p in &pairs {
            let scaled = ModePair::new(p.order, p.f_low * scale, p.f_high * scale).unwrap();
            prop_assert!((scaled.ratio() / p.ratio() - 1.0).abs() < 1e-12);
        }
    }
}
