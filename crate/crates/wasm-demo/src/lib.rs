//! wasm-bindgen wrappers behind `www/index.html`.
//!
//! Every export returns a flat `Float64Array` so the page can plot without
//! any glue beyond the generated bindings.

use nanofiber::dipole_emission::{
    curve_point, far_field, linspace, CurveOptions, DipoleEmitter, FarFieldGrid, Orientation,
    RadiationQuadratureSpec,
};
use nanofiber::fiber_modes::FiberGeometry;
use nanofiber::photon_synth::{simulate_emitter_stream, split_stream, EmitterModel, SimulationSeed};
use nanofiber::trace_analysis::{g2_histogram, G2Normalization};
use wasm_bindgen::prelude::*;

const WAVELENGTH: f64 = 1e-6;

fn js<E: std::fmt::Display>(e: E) -> JsError {
    JsError::new(&e.to_string())
}

/// Channeling efficiency over `points` size parameters, interleaved as
/// `[x0, eta0, x1, eta1, ...]`.
#[wasm_bindgen]
pub fn efficiency_curve(n1: f64, x_min: f64, x_max: f64, points: usize, orientation: &str) -> Result<Vec<f64>, JsError> {
    let opts = CurveOptions {
        core_index: n1,
        orientation: orientation.parse().map_err(js)?,
        ..CurveOptions::default()
    };
    let mut out = Vec::with_capacity(2 * points);
    for x in linspace(x_min, x_max, points.max(2)) {
        let p = curve_point(x, &opts).map_err(js)?;
        out.push(x);
        out.push(p.eta_c);
    }
    Ok(out)
}

/// Azimuthally integrated radiation pattern `dP/dθ` for a surface dipole,
/// interleaved as `[θ0, p0, θ1, p1, ...]` with `θ` in radians.
#[wasm_bindgen]
pub fn polar_pattern(n1: f64, x: f64, orientation: &str) -> Result<Vec<f64>, JsError> {
    let o: Orientation = orientation.parse().map_err(js)?;
    if o == Orientation::IsotropicAverage {
        return Err(JsError::new("pick a single dipole axis"));
    }
    let geom = FiberGeometry::from_size_parameter(x, WAVELENGTH, n1).map_err(js)?;
    let dipole = DipoleEmitter::on_surface(&geom, o);
    let grid = FarFieldGrid {
        theta_nodes: 96,
        phi_points: 48,
    };
    let p = far_field(&geom, WAVELENGTH, &dipole, &RadiationQuadratureSpec::default(), &grid).map_err(js)?;
    let dphi = 2.0 * std::f64::consts::PI / p.phi.len() as f64;
    let mut out = Vec::with_capacity(2 * p.theta.len());
    for (theta, row) in p.theta.iter().zip(&p.values) {
        out.push(*theta);
        out.push(row.iter().sum::<f64>() * dphi * theta.sin());
    }
    Ok(out)
}

/// Hanbury Brown and Twiss histogram of a simulated single emitter split
/// onto two detectors, interleaved as `[tau0, g0, tau1, g1, ...]` with `tau`
/// in nanoseconds. The last element is the zero-delay dip.
#[wasm_bindgen]
pub fn g2_demo(excitation_rate: f64, lifetime_ns: f64, background: f64, duration: f64, seed: u64) -> Result<Vec<f64>, JsError> {
    let model = EmitterModel {
        excitation_rate,
        decay_lifetime: lifetime_ns * 1e-9,
        on_rate: 1.0,
        off_rate: 0.0,
        detection_efficiency: [1.0, 1.0],
        background_rate: [background, background],
        intensity_jitter: 0.0,
    };
    let stream = simulate_emitter_stream(&model, duration, &SimulationSeed::new(seed)).map_err(js)?;
    let (a, b) = split_stream(&stream, 0.5, &SimulationSeed::new(seed.wrapping_add(1))).map_err(js)?;
    let tau_bin = (lifetime_ns * 1e-9 / 10.0).max(1e-10);
    let h = g2_histogram(&a, &b, 10.0 * lifetime_ns * 1e-9, tau_bin, G2Normalization::FullStream).map_err(js)?;
    let mut out = Vec::with_capacity(2 * h.tau.len() + 1);
    for (t, g) in h.tau.iter().zip(&h.g2) {
        out.push(t * 1e9);
        out.push(*g);
    }
    out.push(h.dip);
    Ok(out)
}
