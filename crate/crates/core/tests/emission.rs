use std::f64::consts::PI;

use nanofiber::dipole_emission::*;
use nanofiber::fiber_modes::FiberGeometry;
use proptest::prelude::*;

const LAMBDA: f64 = 1e-6;

fn fiber(x: f64) -> FiberGeometry {
    FiberGeometry::from_size_parameter(x, LAMBDA, 1.45).unwrap()
}

#[test]
fn far_field_integrates_to_one() {
    let g = fiber(1.2);
    for o in [Orientation::Radial, Orientation::Azimuthal, Orientation::Axial] {
        let d = DipoleEmitter::on_surface(&g, o);
        let p = far_field(&g, LAMBDA, &d, &RadiationQuadratureSpec::default(), &FarFieldGrid::default()).unwrap();
        assert!((p.integral() - 1.0).abs() < 2e-4, "{o}: {}", p.integral());
        assert!(p.min_value() >= 0.0);
    }
}

#[test]
fn far_field_is_mirror_symmetric_about_emitter_plane() {
    let g = fiber(1.0);
    let d = DipoleEmitter::new(&g, g.radius * 1.3, 0.0, Orientation::Radial).unwrap();
    let grid = FarFieldGrid {
        theta_nodes: 24,
        phi_points: 32,
    };
    let p = far_field(&g, LAMBDA, &d, &RadiationQuadratureSpec::default(), &grid).unwrap();
    for row in &p.values {
        for k in 1..grid.phi_points {
            let a = row[k];
            let b = row[grid.phi_points - k];
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12), "{a} vs {b}");
        }
    }
}

#[test]
fn parallel_and_serial_curves_agree() {
    let xs = linspace(0.6, 2.4, 5);
    let opts = CurveOptions::default();
    let a = efficiency_curve(&xs, &opts).unwrap();
    let b = efficiency_curve_serial(&xs, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn peak_value_is_frozen() {
    let p = curve_point(1.45, &CurveOptions::default()).unwrap();
    assert!((p.eta_c - 0.23065).abs() < 5e-5, "{}", p.eta_c);
}

#[test]
fn na_fraction_bounds() {
    assert!((na_collection_fraction(0.6).unwrap() - 0.1).abs() < 1e-15);
    assert_eq!(na_collection_fraction(1.0).unwrap(), 0.5);
    assert!(na_collection_fraction(0.0).is_err());
    assert!(na_collection_fraction(1.2).is_err());
}

#[test]
fn enhancement_is_continuous_in_emitter_azimuth() {
    let g = FiberGeometry::vacuum_clad(250e-9, 1.45).unwrap();
    let d = DipoleEmitter::on_surface(&g, Orientation::Radial);
    let phis = [0.8, 0.8 + 1e-5];
    let f = enhancement_sweep_phi0(&g, 780e-9, &d, &phis, 0.6, &EnhancementOptions::default()).unwrap();
    assert!((f[0] - f[1]).abs() < 1e-3 * f[0], "{f:?}");
    let single = enhancement_factor(&g, 780e-9, &DipoleEmitter { azimuth: 0.8, ..d }, 0.6, &EnhancementOptions::default()).unwrap();
    assert!((single - f[0]).abs() < 1e-12 * f[0]);
}

#[test]
fn distant_dipole_radiates_as_in_free_space() {
    let g = fiber(0.2);
    let d = DipoleEmitter::new(&g, 30.0 * LAMBDA / (2.0 * PI), 0.0, Orientation::Axial).unwrap();
    let r = radiation_rate(&g, LAMBDA, &d, &RadiationQuadratureSpec::default()).unwrap();
    assert!((r - 1.0).abs() < 0.01, "Γ_r/γ0 = {r}");
}

#[test]
fn rejects_emitter_inside_core() {
    let g = fiber(1.0);
    assert!(DipoleEmitter::new(&g, 0.5 * g.radius, 0.0, Orientation::Radial).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn efficiency_is_a_fraction(x in 0.3f64..3.0) {
        let p = curve_point(x, &CurveOptions::default()).unwrap();
        let b = &p.breakdown;
        prop_assert!((0.0..=1.0).contains(&p.eta_c));
        prop_assert!(b.gamma_radiation > 0.0 && b.gamma_guided_he11 >= 0.0);
        prop_assert!(b.gamma_guided_total >= b.gamma_guided_he11);
    }

    #[test]
    fn isotropic_is_axis_mean(x in 0.5f64..2.5) {
        let g = fiber(x);
        let d = DipoleEmitter::on_surface(&g, Orientation::IsotropicAverage);
        let rates = AxisRates::compute(&g, LAMBDA, &d, &RadiationQuadratureSpec::default()).unwrap();
        let iso = rates.breakdown(Orientation::IsotropicAverage, Denominator::AllGuided);
        let axes: Vec<_> = [Orientation::Radial, Orientation::Azimuthal, Orientation::Axial]
            .iter()
            .map(|&o| rates.breakdown(o, Denominator::AllGuided))
            .collect();
        let mean_r = axes.iter().map(|b| b.gamma_radiation).sum::<f64>() / 3.0;
        prop_assert!((iso.gamma_radiation - mean_r).abs() < 1e-12 * mean_r);
    }
}

#[test]
fn near_cutoff_rates_are_finite() {
    for x in [0.05, 0.08, 0.1, 0.12, 0.15, 0.2, 0.3] {
        let p = curve_point(x, &CurveOptions::default()).unwrap();
        let b = &p.breakdown;
        assert!(p.eta_c.is_finite() && b.gamma_guided_total.is_finite() && b.gamma_radiation.is_finite(), "x = {x}: {b:?}");
        assert!(p.eta_c < 1e-3);
    }
}
