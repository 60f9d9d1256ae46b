//! Spontaneous emission of a point dipole on (or near) a vacuum-clad fiber.
//!
//! Guided rates come from the unit-power mode fields at the emitter. The
//! radiation rate and far field come from a cylindrical-wave expansion of
//! the dipole field scattered by the infinite cylinder: for every axial
//! wavenumber `β = cos θ` and azimuthal order `m` a 4×4 system matches
//! `E_z, H_z, E_φ, H_φ` at `r = a`, and the outgoing amplitudes are summed in
//! power. Integrating over `θ` rather than `β` removes the inverse-square-root
//! behaviour at `β = ±k0`.
//!
//! Everything inside this module works in units of `1/k0` with the free-space
//! emitted power `P0 = 1/(12π)` of a unit dipole as the normaliser, so rates
//! are reported as `Γ/γ0`.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Matrix4x3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calibration::MeasuredValue;
use crate::error::{Error, Result};
use crate::fiber_modes::{
    solve_guided_modes, Circulation, Cylindrical, Direction, FiberGeometry, GuidedMode, ModeFamily, ModeKind,
};
use crate::numerics::quadrature::LegendreRule;
use crate::numerics::special::bessel_jy;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Free-space power of a unit dipole with `k = ε = μ = c = 1`.
const P0: f64 = 1.0 / (12.0 * PI);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Radial,
    Azimuthal,
    Axial,
    IsotropicAverage,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::Radial,
        Orientation::Azimuthal,
        Orientation::Axial,
        Orientation::IsotropicAverage,
    ];

    /// Reduces per-axis values `(radial, azimuthal, axial)`.
    pub fn pick(self, v: [f64; 3]) -> f64 {
        match self {
            Orientation::Radial => v[0],
            Orientation::Azimuthal => v[1],
            Orientation::Axial => v[2],
            Orientation::IsotropicAverage => (v[0] + v[1] + v[2]) / 3.0,
        }
    }

    fn weights(self) -> [f64; 3] {
        match self {
            Orientation::Radial => [1.0, 0.0, 0.0],
            Orientation::Azimuthal => [0.0, 1.0, 0.0],
            Orientation::Axial => [0.0, 0.0, 1.0],
            Orientation::IsotropicAverage => [1.0 / 3.0; 3],
        }
    }
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "radial" => Ok(Orientation::Radial),
            "azimuthal" => Ok(Orientation::Azimuthal),
            "axial" => Ok(Orientation::Axial),
            "isotropic" | "isotropic_average" => Ok(Orientation::IsotropicAverage),
            other => Err(Error::domain(format!("unknown orientation '{other}'"))),
        }
    }
}

impl std::fmt::Display for Orientation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Orientation::Radial => "radial",
            Orientation::Azimuthal => "azimuthal",
            Orientation::Axial => "axial",
            Orientation::IsotropicAverage => "isotropic_average",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipoleEmitter {
    /// Distance from the fiber axis in meters.
    pub radial_position: f64,
    /// Azimuth `φ0` of the emitter in radians.
    pub azimuth: f64,
    pub orientation: Orientation,
}

impl DipoleEmitter {
    pub fn new(geom: &FiberGeometry, radial_position: f64, azimuth: f64, orientation: Orientation) -> Result<Self> {
        if !(radial_position >= geom.radius) || !radial_position.is_finite() {
            return Err(Error::domain(format!(
                "emitter at r = {radial_position} lies inside the fiber (a = {})",
                geom.radius
            )));
        }
        Ok(Self {
            radial_position,
            azimuth,
            orientation,
        })
    }

    /// Emitter on the surface at `φ0 = 0`.
    pub fn on_surface(geom: &FiberGeometry, orientation: Orientation) -> Self {
        Self {
            radial_position: geom.radius,
            azimuth: 0.0,
            orientation,
        }
    }

    fn check(&self, geom: &FiberGeometry) -> Result<()> {
        Self::new(geom, self.radial_position, self.azimuth, self.orientation).map(|_| ())
    }
}

/// Which guided families enter the denominator of `η_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    #[default]
    AllGuided,
    FundamentalOnly,
}

impl std::str::FromStr for Denominator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "all" | "all_guided" => Ok(Denominator::AllGuided),
            "he11" | "fundamental" | "fundamental_only" => Ok(Denominator::FundamentalOnly),
            other => Err(Error::domain(format!("unknown denominator convention '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRate {
    pub family: ModeFamily,
    pub gamma_over_gamma0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub orientation: Orientation,
    pub gamma_guided_he11: f64,
    /// Sum over every guided family, HE11 included.
    pub gamma_guided_total: f64,
    pub per_family: Vec<FamilyRate>,
    pub gamma_radiation: f64,
    pub eta_c: f64,
    pub denominator: Denominator,
}

impl RateBreakdown {
    pub fn gamma_total(&self) -> f64 {
        self.gamma_guided_total + self.gamma_radiation
    }
}

/// How the azimuthal-order sum is truncated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderRule {
    /// Stop once the last two orders add less than `order_tolerance`
    /// (relative) for every dipole axis; `m_max` is then a hard cap.
    Adaptive,
    /// Sum exactly `|m| ≤ m_max`.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiationQuadratureSpec {
    pub m_max: u32,
    pub order_rule: OrderRule,
    /// Initial Gauss–Legendre node count in `θ` over `[0, π/2]`.
    pub nodes: usize,
    pub max_nodes: usize,
    /// Relative change allowed between successive node doublings.
    pub tolerance: f64,
    pub order_tolerance: f64,
}

impl Default for RadiationQuadratureSpec {
    fn default() -> Self {
        Self {
            m_max: 60,
            order_rule: OrderRule::Adaptive,
            nodes: 256,
            max_nodes: 4096,
            tolerance: 1e-5,
            order_tolerance: 1e-6,
        }
    }
}

impl RadiationQuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m_max < 5 {
            return Err(Error::domain(format!("m_max must be >= 5, got {}", self.m_max)));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-4) {
            return Err(Error::domain(format!(
                "quadrature tolerance must lie in (0, 1e-4], got {}",
                self.tolerance
            )));
        }
        if !(self.order_tolerance > 0.0) {
            return Err(Error::domain("order tolerance must be positive"));
        }
        if self.nodes < 2 || self.max_nodes < self.nodes {
            return Err(Error::domain("node counts must satisfy 2 <= nodes <= max_nodes"));
        }
        Ok(())
    }

    pub fn fixed_order(m_max: u32) -> Self {
        Self {
            m_max,
            order_rule: OrderRule::Fixed,
            ..Self::default()
        }
    }
}

/// Dimensionless problem: radius, emitter radius and core index in `1/k0`.
#[derive(Debug, Clone, Copy)]
struct Scatterer {
    a: f64,
    r0: f64,
    n1: f64,
}

impl Scatterer {
    fn new(geom: &FiberGeometry, wavelength: f64, dipole: &DipoleEmitter) -> Result<Self> {
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::domain(format!("wavelength must be positive, got {wavelength}")));
        }
        if geom.clad_index != 1.0 {
            return Err(Error::domain(format!(
                "emission model supports a vacuum cladding only, got n2 = {}",
                geom.clad_index
            )));
        }
        dipole.check(geom)?;
        let k0 = 2.0 * PI / wavelength;
        Ok(Self {
            a: geom.radius * k0,
            r0: dipole.radial_position * k0,
            n1: geom.core_index,
        })
    }
}

/// Outgoing amplitudes `(A_m, B_m)` of `E_z` and `H_z` for each dipole axis
/// at one `β`, for `m = -M..=M`.
#[derive(Debug, Clone)]
struct Harmonics {
    order: i32,
    /// Indexed by `m + order`.
    e: Vec<[Complex64; 3]>,
    h: Vec<[Complex64; 3]>,
}

impl Harmonics {
    fn get(&self, m: i32) -> ([Complex64; 3], [Complex64; 3]) {
        let i = (m + self.order) as usize;
        (self.e[i], self.h[i])
    }

    /// `Σ_m (|A_m|² + |B_m|²)` per axis.
    fn power_sum(&self) -> [f64; 3] {
        let mut s = [0.0; 3];
        for (e, h) in self.e.iter().zip(&self.h) {
            for j in 0..3 {
                s[j] += e[j].norm_sqr() + h[j].norm_sqr();
            }
        }
        s
    }

    /// `Σ_m (−i)^m c_m e^{im(φ−φ0)}` for `E_z` and `H_z` per axis.
    fn far_sum(&self, phi: f64, phi0: f64) -> ([Complex64; 3], [Complex64; 3]) {
        let mut e = [ZERO; 3];
        let mut h = [ZERO; 3];
        for m in -self.order..=self.order {
            let ph = Complex64::from_polar(1.0, m as f64 * (phi - phi0 - PI / 2.0));
            let (em, hm) = self.get(m);
            for j in 0..3 {
                e[j] += em[j] * ph;
                h[j] += hm[j] * ph;
            }
        }
        (e, h)
    }
}

fn hankel(m: i32, x: f64) -> (Complex64, Complex64) {
    let b = bessel_jy(m, x);
    (Complex64::new(b.j, b.y), Complex64::new(b.jp, b.yp))
}

/// Amplitudes of one azimuthal order; `None` when the Bessel values left the
/// representable range (only at orders whose contribution has long vanished).
fn order_amplitudes(s: &Scatterer, beta: f64, m: i32) -> Option<([Complex64; 3], [Complex64; 3])> {
    let kt = (1.0 - beta * beta).sqrt();
    let h = (s.n1 * s.n1 - beta * beta).sqrt();
    let a = s.a;
    let mf = m as f64;

    let core = bessel_jy(m, h * a);
    let (j1, j1p) = (core.j, core.jp);
    let out_a = bessel_jy(m, kt * a);
    let (j2, j2p) = (out_a.j, out_a.jp);
    let (h2, h2p) = hankel(m, kt * a);
    let (hs, hsp, js, jsp) = if s.r0 == s.a {
        (h2, h2p, j2, j2p)
    } else {
        let (hv, hd) = hankel(m, kt * s.r0);
        let b = bessel_jy(m, kt * s.r0);
        (hv, hd, b.j, b.jp)
    };
    let vals = [j1, j1p, j2, j2p, h2.re, h2.im, h2p.re, h2p.im, hs.re, hs.im, js, jsp];
    if vals.iter().any(|v| !v.is_finite()) {
        return None;
    }

    // incident coefficients of the axis-j unit dipole, Z at the source radius
    let pref = I / (8.0 * PI);
    let source = |z: Complex64, zp: Complex64, axis: usize| -> (Complex64, Complex64) {
        let (pr, pp, pz) = match axis {
            0 => (1.0, 0.0, 0.0),
            1 => (0.0, 1.0, 0.0),
            _ => (0.0, 0.0, 1.0),
        };
        let e = pref * (kt * kt * pz * z - I * beta * kt * pr * zp - (beta * mf / s.r0) * pp * z);
        let hh = pref * I * (kt * zp * pp + I * mf * z * pr / s.r0);
        (e, hh)
    };

    // unknowns (c, d, s_e, s_h), with columns scaled to order one
    let core_scale = 1.0 / j1.abs().max(j1p.abs()).max(f64::MIN_POSITIVE);
    let out_scale = 1.0 / h2.norm();
    let bm = beta * mf / a;
    let c = |v: f64| Complex64::new(v, 0.0);
    let h2s = h2 * out_scale;
    let h2ps = h2p * out_scale;
    let j1s = j1 * core_scale;
    let j1ps = j1p * core_scale;
    let m4 = Matrix4::new(
        c(j1s),
        ZERO,
        -h2s,
        ZERO,
        ZERO,
        c(j1s),
        ZERO,
        -h2s,
        c(-bm * j1s / (h * h)),
        -I * j1ps / h,
        bm * h2s / (kt * kt),
        I * h2ps / kt,
        I * s.n1 * s.n1 * j1ps / h,
        c(-bm * j1s / (h * h)),
        -I * h2ps / kt,
        bm * h2s / (kt * kt),
    );
    let mut rhs = Matrix4x3::<Complex64>::zeros();
    let mut outgoing = [(ZERO, ZERO); 3];
    for axis in 0..3 {
        let (ereg, hreg) = source(hs, hsp, axis);
        outgoing[axis] = source(Complex64::new(js, 0.0), Complex64::new(jsp, 0.0), axis);
        rhs[(0, axis)] = ereg * j2;
        rhs[(1, axis)] = hreg * j2;
        rhs[(2, axis)] = (-bm * ereg * j2 - I * kt * hreg * j2p) / (kt * kt);
        rhs[(3, axis)] = (-bm * hreg * j2 + I * kt * ereg * j2p) / (kt * kt);
    }
    let sol = m4.lu().solve(&rhs)?;
    let mut e = [ZERO; 3];
    let mut hz = [ZERO; 3];
    for axis in 0..3 {
        e[axis] = outgoing[axis].0 + sol[(2, axis)] * out_scale;
        hz[axis] = outgoing[axis].1 + sol[(3, axis)] * out_scale;
    }
    if e.iter().chain(&hz).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    Some((e, hz))
}

fn harmonics(s: &Scatterer, beta: f64, spec: &RadiationQuadratureSpec) -> Result<Harmonics> {
    let cap = spec.m_max as i32;
    let mut e = vec![[ZERO; 3]; (2 * cap + 1) as usize];
    let mut h = e.clone();
    let mut running = [0.0; 3];
    let mut previous_small = false;
    let mut used = cap;
    for k in 0..=cap {
        let mut contribution = [0.0; 3];
        let orders: &[i32] = if k == 0 { &[0] } else { &[k, -k] };
        let mut vanished = false;
        for &m in orders {
            match order_amplitudes(s, beta, m) {
                Some((em, hm)) => {
                    let i = (m + cap) as usize;
                    e[i] = em;
                    h[i] = hm;
                    for j in 0..3 {
                        contribution[j] += em[j].norm_sqr() + hm[j].norm_sqr();
                    }
                }
                None => vanished = true,
            }
        }
        for j in 0..3 {
            running[j] += contribution[j];
        }
        if vanished {
            if k < 2 {
                return Err(Error::domain(format!("cylinder functions out of range at order {k}")));
            }
            used = k - 1;
            break;
        }
        if spec.order_rule == OrderRule::Adaptive && k >= 2 {
            let small = (0..3).all(|j| contribution[j] <= spec.order_tolerance * running[j]);
            if small && previous_small {
                used = k;
                break;
            }
            previous_small = small;
            if k == cap {
                let total: f64 = running.iter().sum();
                return Err(Error::Convergence {
                    what: format!("azimuthal order sum at beta = {beta}"),
                    last: total,
                    previous: total - contribution.iter().sum::<f64>(),
                });
            }
        }
    }
    let lo = (cap - used) as usize;
    let hi = (cap + used) as usize;
    Ok(Harmonics {
        order: used,
        e: e[lo..=hi].to_vec(),
        h: h[lo..=hi].to_vec(),
    })
}

/// `dP/dθ` per axis: `4π Σ_m (|A_m|² + |B_m|²) / sin θ`.
fn power_density(s: &Scatterer, theta: f64, spec: &RadiationQuadratureSpec) -> Result<[f64; 3]> {
    let hm = harmonics(s, theta.cos(), spec)?;
    let p = hm.power_sum();
    let st = theta.sin();
    Ok([4.0 * PI * p[0] / st, 4.0 * PI * p[1] / st, 4.0 * PI * p[2] / st])
}

/// Radiated power per axis over the full sphere at a fixed node count,
/// using the `z → −z` mirror symmetry of the emitted intensity.
fn radiated_power(s: &Scatterer, nodes: usize, spec: &RadiationQuadratureSpec) -> Result<[f64; 3]> {
    let rule = LegendreRule::new(nodes)?;
    let mut total = [0.0; 3];
    for (theta, w) in rule.mapped(0.0, PI / 2.0) {
        let d = power_density(s, theta, spec)?;
        for j in 0..3 {
            total[j] += 2.0 * w * d[j];
        }
    }
    Ok(total)
}

/// `Γ_r/γ0` per axis `(radial, azimuthal, axial)` for an emitter at `r0`.
pub fn radiation_rates(
    geom: &FiberGeometry,
    wavelength: f64,
    dipole: &DipoleEmitter,
    quad: &RadiationQuadratureSpec,
) -> Result<[f64; 3]> {
    quad.validate()?;
    let s = Scatterer::new(geom, wavelength, dipole)?;
    let mut n = quad.nodes;
    let mut prev = radiated_power(&s, n, quad)?;
    loop {
        let next_n = 2 * n;
        if next_n > quad.max_nodes {
            let p: f64 = prev.iter().sum();
            return Err(Error::Convergence {
                what: "radiation-rate theta quadrature".into(),
                last: p / P0 / 3.0,
                previous: f64::NAN,
            });
        }
        let next = radiated_power(&s, next_n, quad)?;
        let converged = (0..3).all(|j| (next[j] - prev[j]).abs() <= quad.tolerance * next[j].abs().max(1e-300));
        if converged {
            return Ok([next[0] / P0, next[1] / P0, next[2] / P0]);
        }
        if 2 * next_n > quad.max_nodes {
            return Err(Error::Convergence {
                what: "radiation-rate theta quadrature".into(),
                last: next.iter().sum::<f64>() / P0 / 3.0,
                previous: prev.iter().sum::<f64>() / P0 / 3.0,
            });
        }
        prev = next;
        n = next_n;
    }
}

/// `Γ_r/γ0` for the emitter's orientation.
pub fn radiation_rate(
    geom: &FiberGeometry,
    wavelength: f64,
    dipole: &DipoleEmitter,
    quad: &RadiationQuadratureSpec,
) -> Result<f64> {
    Ok(dipole.orientation.pick(radiation_rates(geom, wavelength, dipole, quad)?))
}

/// `Γ_g/γ0` per axis for one guided family, summed over both directions and
/// every polarization state of the family.
pub fn guided_rates(mode: &GuidedMode, dipole: &DipoleEmitter) -> [f64; 3] {
    let pos = Cylindrical::new(dipole.radial_position, dipole.azimuth, 0.0);
    let circulations: &[Circulation] = match mode.family.kind {
        ModeKind::TE | ModeKind::TM => &[Circulation::Positive],
        ModeKind::HE | ModeKind::EH => &[Circulation::Positive, Circulation::Negative],
    };
    let mut out = [0.0; 3];
    for dir in [Direction::Forward, Direction::Backward] {
        for &circ in circulations {
            let f = mode.field(pos, dir, circ);
            for j in 0..3 {
                out[j] += f.e[j].norm_sqr();
            }
        }
    }
    // Fermi golden rule against unit-power modes: Γ/γ0 = (3π/4k²) Σ |e_j|²
    out.map(|v| 0.75 * PI * v)
}

pub fn guided_rate(mode: &GuidedMode, dipole: &DipoleEmitter) -> f64 {
    dipole.orientation.pick(guided_rates(mode, dipole))
}

/// Rates for every dipole axis at one emitter position; reduced to a
/// [`RateBreakdown`] for any orientation without recomputation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisRates {
    pub guided: Vec<(ModeFamily, [f64; 3])>,
    pub radiation: [f64; 3],
}

impl AxisRates {
    pub fn compute(
        geom: &FiberGeometry,
        wavelength: f64,
        dipole: &DipoleEmitter,
        quad: &RadiationQuadratureSpec,
    ) -> Result<Self> {
        let radiation = radiation_rates(geom, wavelength, dipole, quad)?;
        let guided = solve_guided_modes(geom, wavelength)?
            .iter()
            .map(|m| (m.family, guided_rates(m, dipole)))
            .collect();
        Ok(Self { guided, radiation })
    }

    pub fn breakdown(&self, orientation: Orientation, denominator: Denominator) -> RateBreakdown {
        let per_family: Vec<FamilyRate> = self
            .guided
            .iter()
            .map(|(family, v)| FamilyRate {
                family: *family,
                gamma_over_gamma0: orientation.pick(*v),
            })
            .collect();
        let he11 = per_family
            .iter()
            .filter(|f| f.family.is_fundamental())
            .map(|f| f.gamma_over_gamma0)
            .fold(0.0, |a, b| a + b);
        let total = per_family.iter().map(|f| f.gamma_over_gamma0).fold(0.0, |a, b| a + b);
        let radiation = orientation.pick(self.radiation);
        let guided_den = match denominator {
            Denominator::AllGuided => total,
            Denominator::FundamentalOnly => he11,
        };
        let den = guided_den + radiation;
        RateBreakdown {
            orientation,
            gamma_guided_he11: he11,
            gamma_guided_total: total,
            per_family,
            gamma_radiation: radiation,
            eta_c: if den > 0.0 { he11 / den } else { 0.0 },
            denominator,
        }
    }
}

pub fn channeling_efficiency(
    geom: &FiberGeometry,
    wavelength: f64,
    dipole: &DipoleEmitter,
    denominator: Denominator,
    quad: &RadiationQuadratureSpec,
) -> Result<RateBreakdown> {
    Ok(AxisRates::compute(geom, wavelength, dipole, quad)?.breakdown(dipole.orientation, denominator))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub size_parameter: f64,
    pub eta_c: f64,
    pub breakdown: RateBreakdown,
}

/// Settings shared by the size-parameter sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveOptions {
    pub core_index: f64,
    pub orientation: Orientation,
    pub denominator: Denominator,
    pub quad: RadiationQuadratureSpec,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            core_index: 1.45,
            orientation: Orientation::IsotropicAverage,
            denominator: Denominator::AllGuided,
            quad: RadiationQuadratureSpec::default(),
        }
    }
}

/// Wavelength used for dimensionless sweeps; results depend on `k0 a` only.
const REFERENCE_WAVELENGTH: f64 = 1e-6;

pub fn curve_point(x: f64, opts: &CurveOptions) -> Result<CurvePoint> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("size parameter must be positive, got {x}")));
    }
    let geom = FiberGeometry::from_size_parameter(x, REFERENCE_WAVELENGTH, opts.core_index)?;
    let dipole = DipoleEmitter::on_surface(&geom, opts.orientation);
    let b = channeling_efficiency(&geom, REFERENCE_WAVELENGTH, &dipole, opts.denominator, &opts.quad)?;
    Ok(CurvePoint {
        size_parameter: x,
        eta_c: b.eta_c,
        breakdown: b,
    })
}

/// `η_c` on a grid of size parameters, on-surface emitter. The output order
/// follows `xs` regardless of how the points are scheduled.
pub fn efficiency_curve(xs: &[f64], opts: &CurveOptions) -> Result<Vec<CurvePoint>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        xs.par_iter().map(|&x| curve_point(x, opts)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        efficiency_curve_serial(xs, opts)
    }
}

pub fn efficiency_curve_serial(xs: &[f64], opts: &CurveOptions) -> Result<Vec<CurvePoint>> {
    xs.iter().map(|&x| curve_point(x, opts)).collect()
}

/// Evenly spaced grid including both ends.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarFieldGrid {
    /// Gauss–Legendre nodes in `θ` over `[0, π]`.
    pub theta_nodes: usize,
    /// Uniform samples in `φ` over `[0, 2π)`.
    pub phi_points: usize,
}

impl Default for FarFieldGrid {
    fn default() -> Self {
        Self {
            theta_nodes: 160,
            phi_points: 128,
        }
    }
}

/// Radiated power per unit solid angle, normalized so the sphere integral
/// is one. `values[i][k]` belongs to `(theta[i], phi[k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarFieldPattern {
    pub theta: Vec<f64>,
    pub theta_weights: Vec<f64>,
    pub phi: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// `Γ_r/γ0` used as the normaliser.
    pub gamma_radiation: f64,
    pub orientation: Orientation,
}

impl FarFieldPattern {
    /// Quadrature of the pattern over the sphere.
    pub fn integral(&self) -> f64 {
        let dphi = 2.0 * PI / self.phi.len() as f64;
        self.theta
            .iter()
            .zip(&self.theta_weights)
            .zip(&self.values)
            .map(|((t, w), row)| w * t.sin() * dphi * row.iter().sum::<f64>())
            .sum()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `dP/dΩ` per axis in units of `P0`, from the harmonics at one `θ`.
fn far_intensity(hm: &Harmonics, theta: f64, phi: f64, phi0: f64) -> [f64; 3] {
    let (e, h) = hm.far_sum(phi, phi0);
    let st2 = theta.sin().powi(2);
    let mut out = [0.0; 3];
    for j in 0..3 {
        out[j] = 2.0 / st2 * (e[j].norm_sqr() + h[j].norm_sqr()) / P0;
    }
    out
}

pub fn far_field(
    geom: &FiberGeometry,
    wavelength: f64,
    dipole: &DipoleEmitter,
    quad: &RadiationQuadratureSpec,
    grid: &FarFieldGrid,
) -> Result<FarFieldPattern> {
    if grid.phi_points < 4 {
        return Err(Error::domain("far-field grid needs at least 4 azimuthal samples"));
    }
    let rates = radiation_rates(geom, wavelength, dipole, quad)?;
    let s = Scatterer::new(geom, wavelength, dipole)?;
    let rule = LegendreRule::new(grid.theta_nodes)?;
    let weights = dipole.orientation.weights();
    let gamma_r = dipole.orientation.pick(rates);
    let phi: Vec<f64> = (0..grid.phi_points)
        .map(|k| 2.0 * PI * k as f64 / grid.phi_points as f64)
        .collect();
    let mut theta = Vec::with_capacity(rule.len());
    let mut theta_weights = Vec::with_capacity(rule.len());
    let mut values = Vec::with_capacity(rule.len());
    for (t, w) in rule.mapped(0.0, PI) {
        let hm = harmonics(&s, t.cos(), quad)?;
        let row = phi
            .iter()
            .map(|&p| {
                let v = far_intensity(&hm, t, p, dipole.azimuth);
                (0..3).map(|j| weights[j] * v[j]).sum::<f64>() / gamma_r
            })
            .collect();
        theta.push(t);
        theta_weights.push(w);
        values.push(row);
    }
    Ok(FarFieldPattern {
        theta,
        theta_weights,
        phi,
        values,
        gamma_radiation: gamma_r,
        orientation: dipole.orientation,
    })
}

/// Solid-angle fraction `(1 − √(1 − NA²))/2` accepted by an objective in
/// vacuum.
pub fn na_collection_fraction(numerical_aperture: f64) -> Result<f64> {
    if !(numerical_aperture > 0.0 && numerical_aperture <= 1.0) {
        return Err(Error::domain(format!(
            "numerical aperture must lie in (0, 1], got {numerical_aperture}"
        )));
    }
    Ok((1.0 - (1.0 - numerical_aperture * numerical_aperture).sqrt()) / 2.0)
}

/// What the collected cone power is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnhancementNormalization {
    /// Cone power with the fiber over cone power of the same dipole in free
    /// space.
    #[default]
    FreeSpaceReference,
    /// Fraction of the radiated (non-guided) power inside the cone over the
    /// solid-angle fraction of the cone.
    RadiatedFraction,
}

impl std::str::FromStr for EnhancementNormalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "free_space" | "free_space_reference" => Ok(Self::FreeSpaceReference),
            "radiated_fraction" | "fraction" => Ok(Self::RadiatedFraction),
            other => Err(Error::domain(format!("unknown enhancement normalization '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnhancementOptions {
    pub normalization: EnhancementNormalization,
    /// Quadrature nodes across the cone in polar and azimuthal direction.
    pub cone_theta_nodes: usize,
    pub cone_phi_nodes: usize,
    pub quad: RadiationQuadratureSpec,
}

impl Default for EnhancementOptions {
    fn default() -> Self {
        Self {
            normalization: EnhancementNormalization::FreeSpaceReference,
            cone_theta_nodes: 48,
            cone_phi_nodes: 48,
            quad: RadiationQuadratureSpec::default(),
        }
    }
}

/// Cartesian direction of each dipole axis for an emitter at `φ0`.
fn axis_vectors(phi0: f64) -> [[f64; 3]; 3] {
    let (s, c) = phi0.sin_cos();
    [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Free-space fraction of a dipole's power inside a cone of half-angle `α`
/// about `n`, for a dipole whose cosine with the cone axis is `cos_d`.
fn free_space_cone_fraction(cos_d: f64, alpha: f64) -> f64 {
    let ca = alpha.cos();
    let c3 = 1.0 - ca.powi(3);
    let c2 = cos_d * cos_d;
    let s2 = 1.0 - c2;
    let along = 2.0 * PI * c2 * c3 / 3.0 + PI * s2 * ((1.0 - ca) - c3 / 3.0);
    3.0 / (8.0 * PI) * (2.0 * PI * (1.0 - ca) - along)
}

/// Cone about `−ŷ` (toward the objective below the fiber).
struct Cone {
    alpha: f64,
    nodes: Vec<(f64, f64, Vec<(f64, f64)>)>,
}

impl Cone {
    fn new(na: f64, theta_nodes: usize, phi_nodes: usize) -> Result<Self> {
        na_collection_fraction(na)?;
        let alpha = na.asin();
        let ca = alpha.cos();
        let t_rule = LegendreRule::new(theta_nodes)?;
        let p_rule = LegendreRule::new(phi_nodes)?;
        let mut nodes = Vec::new();
        // θ = π/2 + α sin τ smooths the square-root edge of the cone
        for (tau, wt) in t_rule.mapped(-PI / 2.0, PI / 2.0) {
            let theta = PI / 2.0 + alpha * tau.sin();
            let dtheta = alpha * tau.cos() * wt;
            let half = (ca / theta.sin()).min(1.0).acos();
            let phis = p_rule
                .mapped(-PI / 2.0 - half, -PI / 2.0 + half)
                .collect::<Vec<_>>();
            nodes.push((theta, dtheta, phis));
        }
        Ok(Self { alpha, nodes })
    }
}

/// Power inside the cone per axis (units of `P0`) for each `φ0`, together
/// with the `φ0`-averaged value over `[0, π]`.
struct ConePower {
    per_phi0: Vec<[f64; 3]>,
    averaged: [f64; 3],
}

fn cone_power(s: &Scatterer, cone: &Cone, phi0s: &[f64], quad: &RadiationQuadratureSpec) -> Result<ConePower> {
    let mut per_phi0 = vec![[0.0; 3]; phi0s.len()];
    let mut averaged = [0.0; 3];
    for (theta, dtheta, phis) in &cone.nodes {
        let hm = harmonics(s, theta.cos(), quad)?;
        let st = theta.sin();
        for &(phi, dphi) in phis {
            let dw = st * dtheta * dphi;
            for (k, &phi0) in phi0s.iter().enumerate() {
                let v = far_intensity(&hm, *theta, phi, phi0);
                for j in 0..3 {
                    per_phi0[k][j] += v[j] * dw;
                }
            }
            let v = semicircle_average_intensity(&hm, *theta, phi);
            for j in 0..3 {
                averaged[j] += v[j] * dw;
            }
        }
    }
    Ok(ConePower { per_phi0, averaged })
}

/// `dP/dΩ` averaged over `φ0` uniform on `[0, π]`, in closed form: the
/// average of `e^{−ikφ0}` is `1` for `k = 0`, `0` for even `k`, and
/// `−2i/(πk)` for odd `k`.
fn semicircle_average_intensity(hm: &Harmonics, theta: f64, phi: f64) -> [f64; 3] {
    let n = hm.order;
    let coef = |m: i32| Complex64::from_polar(1.0, m as f64 * (phi - PI / 2.0));
    let kernel = |k: i32| -> Complex64 {
        if k == 0 {
            Complex64::new(1.0, 0.0)
        } else if k % 2 == 0 {
            ZERO
        } else {
            Complex64::new(0.0, -2.0 / (PI * k as f64))
        }
    };
    let mut out = [0.0; 3];
    let st2 = theta.sin().powi(2);
    for j in 0..3 {
        let mut acc = ZERO;
        for m in -n..=n {
            let (em, hmm) = hm.get(m);
            let (a_m, b_m) = (em[j] * coef(m), hmm[j] * coef(m));
            for mp in -n..=n {
                let (ep, hp) = hm.get(mp);
                let (a_p, b_p) = (ep[j] * coef(mp), hp[j] * coef(mp));
                acc += (a_m * a_p.conj() + b_m * b_p.conj()) * kernel(m - mp);
            }
        }
        out[j] = 2.0 / st2 * acc.re / P0;
    }
    out
}

fn enhancement_from_cone(
    cone_p: [f64; 3],
    orientation: Orientation,
    phi0: Option<f64>,
    alpha: f64,
    normalization: EnhancementNormalization,
    radiated: Option<[f64; 3]>,
    na_frac: f64,
) -> f64 {
    let w = orientation.weights();
    let collected: f64 = (0..3).map(|j| w[j] * cone_p[j]).sum();
    match normalization {
        EnhancementNormalization::FreeSpaceReference => {
            let reference = match (orientation, phi0) {
                (Orientation::IsotropicAverage, _) | (_, None) => na_frac,
                (_, Some(p)) => {
                    let axes = axis_vectors(p);
                    // cone axis is −ŷ
                    (0..3).map(|j| w[j] * free_space_cone_fraction(-axes[j][1], alpha)).sum()
                }
            };
            collected / reference
        }
        EnhancementNormalization::RadiatedFraction => {
            let r = radiated.expect("radiated power required");
            let total: f64 = (0..3).map(|j| w[j] * r[j]).sum();
            collected / total / na_frac
        }
    }
}

/// `F(φ0)` for the emitter's orientation and azimuth.
pub fn enhancement_factor(
    geom: &FiberGeometry,
    wavelength: f64,
    dipole: &DipoleEmitter,
    numerical_aperture: f64,
    opts: &EnhancementOptions,
) -> Result<f64> {
    Ok(enhancement_sweep_phi0(geom, wavelength, dipole, &[dipole.azimuth], numerical_aperture, opts)?[0])
}

/// `F(φ0)` at several azimuths, sharing the cylindrical-wave solves.
pub fn enhancement_sweep_phi0(
    geom: &FiberGeometry,
    wavelength: f64,
    dipole: &DipoleEmitter,
    phi0s: &[f64],
    numerical_aperture: f64,
    opts: &EnhancementOptions,
) -> Result<Vec<f64>> {
    opts.quad.validate()?;
    let na_frac = na_collection_fraction(numerical_aperture)?;
    let s = Scatterer::new(geom, wavelength, dipole)?;
    let cone = Cone::new(numerical_aperture, opts.cone_theta_nodes, opts.cone_phi_nodes)?;
    let power = cone_power(&s, &cone, phi0s, &opts.quad)?;
    let radiated = match opts.normalization {
        EnhancementNormalization::RadiatedFraction => Some(radiation_rates(geom, wavelength, dipole, &opts.quad)?),
        EnhancementNormalization::FreeSpaceReference => None,
    };
    Ok(power
        .per_phi0
        .iter()
        .zip(phi0s)
        .map(|(p, &phi0)| {
            enhancement_from_cone(
                *p,
                dipole.orientation,
                Some(phi0),
                cone.alpha,
                opts.normalization,
                radiated,
                na_frac,
            )
        })
        .collect())
}

/// Mean of `F(φ0)` for an isotropic emitter on the surface, `φ0` uniform
/// over the upper semicircle `[0, π]`.
pub fn surface_averaged_enhancement(
    geom: &FiberGeometry,
    wavelength: f64,
    numerical_aperture: f64,
    opts: &EnhancementOptions,
) -> Result<f64> {
    opts.quad.validate()?;
    let na_frac = na_collection_fraction(numerical_aperture)?;
    let dipole = DipoleEmitter::on_surface(geom, Orientation::IsotropicAverage);
    let s = Scatterer::new(geom, wavelength, &dipole)?;
    let cone = Cone::new(numerical_aperture, opts.cone_theta_nodes, opts.cone_phi_nodes)?;
    let power = cone_power(&s, &cone, &[], &opts.quad)?;
    let radiated = match opts.normalization {
        EnhancementNormalization::RadiatedFraction => Some(radiation_rates(geom, wavelength, &dipole, &opts.quad)?),
        EnhancementNormalization::FreeSpaceReference => None,
    };
    Ok(enhancement_from_cone(
        power.averaged,
        Orientation::IsotropicAverage,
        None,
        cone.alpha,
        opts.normalization,
        radiated,
        na_frac,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhancementSweep {
    /// `(diameter in meters, F̄)` per point.
    pub points: Vec<(f64, f64)>,
    /// Mean over the sweep; sigma is the sample standard deviation.
    pub average: MeasuredValue,
    pub max_deviation: f64,
}

/// Surface-averaged enhancement over a set of fiber diameters.
pub fn average_enhancement(
    diameters: &[f64],
    core_index: f64,
    wavelength: f64,
    numerical_aperture: f64,
    opts: &EnhancementOptions,
) -> Result<EnhancementSweep> {
    if diameters.is_empty() {
        return Err(Error::domain("diameter sweep is empty"));
    }
    let one = |d: f64| -> Result<(f64, f64)> {
        let geom = FiberGeometry::vacuum_clad(d / 2.0, core_index)?;
        Ok((d, surface_averaged_enhancement(&geom, wavelength, numerical_aperture, opts)?))
    };
    #[cfg(feature = "parallel")]
    let points: Vec<(f64, f64)> = {
        use rayon::prelude::*;
        diameters.par_iter().map(|&d| one(d)).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let points: Vec<(f64, f64)> = diameters.iter().map(|&d| one(d)).collect::<Result<_>>()?;

    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let var = if points.len() > 1 {
        points.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let max_deviation = points.iter().map(|p| (p.1 - mean).abs()).fold(0.0, f64::max);
    Ok(EnhancementSweep {
        points,
        average: MeasuredValue::new(mean, var.sqrt())?.with_label("average_enhancement"),
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const LAMBDA: f64 = 780e-9;

    fn quick() -> RadiationQuadratureSpec {
        RadiationQuadratureSpec {
            nodes: 64,
            ..RadiationQuadratureSpec::default()
        }
    }

    #[test]
    fn distant_emitter_sees_free_space() {
        let g = FiberGeometry::from_size_parameter(0.05, LAMBDA, 1.45).unwrap();
        // r0 = 40 a, i.e. k0 r0 = 2
        let d = DipoleEmitter::new(&g, 40.0 * g.radius, 0.0, Orientation::Radial).unwrap();
        let r = radiation_rates(&g, LAMBDA, &d, &quick()).unwrap();
        for v in r {
            assert_abs_diff_eq!(v, 1.0, epsilon = 2e-3);
        }
    }

    #[test]
    fn surface_emitter_keeps_near_field_image_as_fiber_shrinks() {
        let rates = |x: f64| {
            let g = FiberGeometry::from_size_parameter(x, LAMBDA, 1.45).unwrap();
            let d = DipoleEmitter::on_surface(&g, Orientation::Radial);
            radiation_rates(&g, LAMBDA, &d, &quick()).unwrap()
        };
        let small = rates(0.02);
        let smaller = rates(0.01);
        assert!(small[0] > 1.5 && small[1] < 0.5, "{small:?}");
        for j in 0..3 {
            assert_abs_diff_eq!(small[j], smaller[j], epsilon = 0.01);
        }
        assert_abs_diff_eq!(small[2], 1.0, epsilon = 0.01);
    }

    #[test]
    fn isotropic_is_the_axis_mean() {
        let v = [0.3, 0.6, 1.2];
        assert_eq!(Orientation::IsotropicAverage.pick(v), (0.3 + 0.6 + 1.2) / 3.0);
    }

    #[test]
    fn na_fraction_examples() {
        assert_abs_diff_eq!(na_collection_fraction(0.6).unwrap(), 0.1, epsilon = 1e-15);
        assert_eq!(na_collection_fraction(1.0).unwrap(), 0.5);
        assert!(na_collection_fraction(0.0).is_err());
        assert!(na_collection_fraction(1.2).is_err());
        assert!(na_collection_fraction(1e-8).unwrap() < 1e-15);
    }

    #[test]
    fn free_space_cone_fraction_orientation_mean_is_solid_angle() {
        let alpha = 0.6f64.asin();
        let m = (free_space_cone_fraction(1.0, alpha) + 2.0 * free_space_cone_fraction(0.0, alpha)) / 3.0;
        assert_abs_diff_eq!(m, 0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(free_space_cone_fraction(1.0, PI / 2.0), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn emitter_inside_glass_is_rejected() {
        let g = FiberGeometry::vacuum_clad(200e-9, 1.45).unwrap();
        assert!(DipoleEmitter::new(&g, 150e-9, 0.0, Orientation::Radial).is_err());
        let wrong_clad = FiberGeometry::new(200e-9, 1.45, 1.33).unwrap();
        let d = DipoleEmitter::on_surface(&wrong_clad, Orientation::Radial);
        assert!(radiation_rate(&wrong_clad, LAMBDA, &d, &quick()).is_err());
    }

    #[test]
    fn quadrature_spec_limits() {
        let mut q = RadiationQuadratureSpec::default();
        q.m_max = 4;
        assert!(q.validate().is_err());
        q.m_max = 5;
        q.tolerance = 1e-3;
        assert!(q.validate().is_err());
    }
}
