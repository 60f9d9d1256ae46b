//! Exact guided modes of a step-index cylindrical waveguide.
//!
//! Internally every length is measured in units of `1/k0` (so the vacuum
//! wavenumber is 1) and fields use `ε0 = μ0 = c = 1`. A mode with azimuthal
//! order `l` is written through its axial components
//!
//! ```text
//! core:      E_z = A J_l(h r) e^{i(lφ+βz)},          H_z = B J_l(h r) e^{i(lφ+βz)}
//! cladding:  E_z = C K_l(q r)/K_l(w) e^{i(lφ+βz)},   H_z = D K_l(q r)/K_l(w) e^{i(lφ+βz)}
//! ```
//!
//! with `u = h a`, `w = q a`, and the transverse components following from
//! Maxwell's equations. Stored coefficients are scaled so that each mode
//! carries unit time-averaged power through the cross-section.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calibration::{power_law, MeasuredValue, Propagation};
use crate::error::{Error, Result};
use crate::numerics::roots::{refine_bracketed, sign_change_brackets};
use crate::numerics::special::{bessel_j, bessel_jy, bessel_k_ratio, bessel_k_scaled};

/// Below this V-number no mode is reported.
pub const V_FLOOR: f64 = 1e-6;

/// Relative tolerance on the transverse core parameter `u` at a root.
const ROOT_REL_TOL: f64 = 1e-14;

/// A root is accepted only if its relative dispersion residual is below this.
pub const RESIDUAL_ACCEPT: f64 = 1e-10;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberGeometry {
    /// Fiber radius in meters.
    pub radius: f64,
    pub core_index: f64,
    pub clad_index: f64,
}

impl FiberGeometry {
    pub fn new(radius: f64, core_index: f64, clad_index: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::domain(format!("fiber radius must be positive, got {radius}")));
        }
        if !(clad_index >= 1.0) {
            return Err(Error::domain(format!("cladding index must be >= 1, got {clad_index}")));
        }
        if !(core_index > clad_index) {
            return Err(Error::domain(format!(
                "core index {core_index} must exceed cladding index {clad_index}"
            )));
        }
        Ok(Self {
            radius,
            core_index,
            clad_index,
        })
    }

    /// Bare fiber in vacuum.
    pub fn vacuum_clad(radius: f64, core_index: f64) -> Result<Self> {
        Self::new(radius, core_index, 1.0)
    }

    /// Vacuum-clad fiber whose size parameter `k0 a` equals `x` at `wavelength`.
    pub fn from_size_parameter(x: f64, wavelength: f64, core_index: f64) -> Result<Self> {
        Self::vacuum_clad(x * wavelength / (2.0 * PI), core_index)
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    /// `k0 a` at the given vacuum wavelength.
    pub fn size_parameter(&self, wavelength: f64) -> f64 {
        2.0 * PI * self.radius / wavelength
    }
}

fn check_wavelength(wavelength: f64) -> Result<()> {
    if !(wavelength > 0.0) || !wavelength.is_finite() {
        return Err(Error::domain(format!("wavelength must be positive, got {wavelength}")));
    }
    Ok(())
}

/// `V = k0 a √(n1² − n2²)`.
///
/// `FiberGeometry` cannot represent `n1 = n2`; [`v_number_raw`] covers the
/// index-matched limit.
pub fn v_number(geom: &FiberGeometry, wavelength: f64) -> Result<f64> {
    v_number_raw(geom.radius, geom.core_index, geom.clad_index, wavelength)
}

pub fn v_number_raw(radius: f64, core_index: f64, clad_index: f64, wavelength: f64) -> Result<f64> {
    check_wavelength(wavelength)?;
    if !(radius > 0.0) {
        return Err(Error::domain(format!("fiber radius must be positive, got {radius}")));
    }
    if core_index < clad_index {
        return Err(Error::domain("core index below cladding index"));
    }
    Ok(2.0 * PI * radius / wavelength * (core_index * core_index - clad_index * clad_index).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeKind {
    HE,
    EH,
    TE,
    TM,
}

/// Conventional mode label, e.g. HE11 or TM01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeFamily {
    pub kind: ModeKind,
    /// Azimuthal order `l` (0 for TE/TM).
    pub l: u32,
    /// Radial order, starting at 1.
    pub m: u32,
}

impl ModeFamily {
    pub const HE11: ModeFamily = ModeFamily {
        kind: ModeKind::HE,
        l: 1,
        m: 1,
    };

    pub fn is_fundamental(&self) -> bool {
        *self == Self::HE11
    }

    /// Independent polarization states per propagation direction.
    pub fn polarizations(&self) -> u32 {
        match self.kind {
            ModeKind::TE | ModeKind::TM => 1,
            ModeKind::HE | ModeKind::EH => 2,
        }
    }
}

impl fmt::Display for ModeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{}{}", self.kind, self.l, self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// Sense of rotation of the quasi-circular basis, `e^{+ilφ}` or `e^{-ilφ}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Circulation {
    Positive,
    Negative,
}

impl Circulation {
    fn sign(self) -> f64 {
        match self {
            Circulation::Positive => 1.0,
            Circulation::Negative => -1.0,
        }
    }
}

/// Position in cylindrical coordinates, meters and radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylindrical {
    pub r: f64,
    pub phi: f64,
    pub z: f64,
}

impl Cylindrical {
    pub fn new(r: f64, phi: f64, z: f64) -> Self {
        Self { r, phi, z }
    }
}

/// Complex field amplitudes in cylindrical components `(r, φ, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeField {
    pub e: [Complex64; 3],
    pub h: [Complex64; 3],
}

impl ModeField {
    /// Time-averaged axial Poynting flux `½ Re(E × H*)·ẑ`.
    pub fn axial_flux(&self) -> f64 {
        0.5 * (self.e[0] * self.h[1].conj() - self.e[1] * self.h[0].conj()).re
    }
}

/// A solved bound mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidedMode {
    pub family: ModeFamily,
    pub geometry: FiberGeometry,
    pub wavelength: f64,
    /// Effective index `β / k0`.
    pub n_eff: f64,
    pub u: f64,
    pub w: f64,
    pub v_number: f64,
    /// Core circular amplitudes `(iβA + B, iβA − B)` of the forward,
    /// positive-circulation member at unit power, where `A`, `B` multiply
    /// `J_l` in `E_z`, `H_z`. Cladding amplitudes are these times `J_l(u)`
    /// with the radial profile `K_l(qr)/K_l(w)`.
    pub circular: [Complex64; 2],
    /// Factor that brought the raw solution to unit power.
    pub norm: f64,
}

impl GuidedMode {
    /// Propagation constant in 1/m.
    pub fn beta(&self) -> f64 {
        self.n_eff * self.k0()
    }

    pub fn k0(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    fn size_parameter(&self) -> f64 {
        self.geometry.size_parameter(self.wavelength)
    }

    /// Relative residual of the eigenvalue equation at the stored root.
    pub fn dispersion_residual(&self) -> f64 {
        let d = Dispersion::new(&self.geometry, self.size_parameter(), self.family.kind, self.family.l);
        let (value, scale) = d.evaluate(Root { u: self.u, w: self.w });
        (value / scale).abs()
    }

    /// Fields at `pos` for the chosen direction and circulation.
    ///
    /// Points with `r < a` use the core solution, `r ≥ a` the cladding one.
    pub fn field(&self, pos: Cylindrical, direction: Direction, circulation: Circulation) -> ModeField {
        let a = self.geometry.radius;
        let region = if pos.r < a { Region::Core } else { Region::Cladding };
        self.field_in(region, pos, direction, circulation)
    }

    fn field_in(&self, region: Region, pos: Cylindrical, direction: Direction, circulation: Circulation) -> ModeField {
        let k0 = self.k0();
        let x = self.size_parameter();
        // dimensionless radius, kept off the axis where l/r is singular
        let r = (pos.r * k0).max(1e-12 * x);
        let l = self.family.l as i32;
        let f = direction.sign();
        let p = circulation.sign();
        let beta = self.n_eff;

        // profiles Z_l, (Z' − lZ/r)/κ², (Z' + lZ/r)/κ² and region constants
        let (z, r_plus, r_minus, eps, kt2, scale) = match region {
            Region::Core => {
                let h = self.u / x;
                let arg = h * r;
                let n1 = self.geometry.core_index;
                (
                    bessel_j(l, arg),
                    -bessel_j(l + 1, arg) / h,
                    bessel_j(l - 1, arg) / h,
                    n1 * n1,
                    h * h,
                    1.0,
                )
            }
            Region::Cladding => {
                let q = self.w / x;
                let arg = q * r;
                let (kl, _) = bessel_k_scaled(l, self.w);
                let ratio = |n: i32| {
                    let (kn, _) = bessel_k_scaled(n, self.w);
                    bessel_k_ratio(n, arg, self.w) * kn / kl
                };
                let n2 = self.geometry.clad_index;
                (
                    ratio(l),
                    ratio(l + 1) / q,
                    ratio(l - 1) / q,
                    n2 * n2,
                    -(q * q),
                    bessel_j(l, self.u),
                )
            }
        };
        let ep = self.circular[0] * scale;
        let em = self.circular[1] * scale;
        let b2 = beta * beta;
        let hp = I / (2.0 * beta) * (ep * (b2 + eps) + em * kt2);
        let hm = I / (2.0 * beta) * (-ep * kt2 - em * (b2 + eps));
        let a_coef = (ep + em) / (2.0 * I * beta);
        let b_coef = (ep - em) / 2.0;

        // circular components E_± = E_r ± iE_φ for the requested member
        let (e_plus, e_minus, h_plus, h_minus) = if p > 0.0 {
            (f * ep * r_plus, f * em * r_minus, hp * r_plus, hm * r_minus)
        } else {
            (f * em * r_minus, f * ep * r_plus, -hm * r_minus, -hp * r_plus)
        };
        let e_z = a_coef * z;
        let h_z = b_coef * (f * p) * z;
        let e_r = (e_plus + e_minus) / 2.0;
        let e_phi = (e_plus - e_minus) / (2.0 * I);
        let h_r = (h_plus + h_minus) / 2.0;
        let h_phi = (h_plus - h_minus) / (2.0 * I);

        let phase = Complex64::from_polar(1.0, p * l as f64 * pos.phi + f * beta * pos.z * k0);
        ModeField {
            e: [e_r * phase, e_phi * phase, e_z * phase],
            h: [h_r * phase, h_phi * phase, h_z * phase],
        }
    }

    /// Largest relative jump of `E_z, E_φ, H_z, H_φ` across `r = a`.
    pub fn boundary_mismatch(&self) -> f64 {
        let pos = Cylindrical::new(self.geometry.radius, 0.3, 0.0);
        let mut worst: f64 = 0.0;
        for dir in [Direction::Forward, Direction::Backward] {
            for circ in [Circulation::Positive, Circulation::Negative] {
                let inside = self.field_in(Region::Core, pos, dir, circ);
                let outside = self.field_in(Region::Cladding, pos, dir, circ);
                let pairs = [
                    (inside.e[1], outside.e[1]),
                    (inside.e[2], outside.e[2]),
                    (inside.h[1], outside.h[1]),
                    (inside.h[2], outside.h[2]),
                ];
                let scale = inside
                    .e
                    .iter()
                    .chain(inside.h.iter())
                    .map(|c| c.norm())
                    .fold(0.0, f64::max);
                for (a, b) in pairs {
                    worst = worst.max((a - b).norm() / scale);
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Core,
    Cladding,
}

/// A point on the dispersion curve; `u² + w² = V²` with both kept to full
/// relative precision.
#[derive(Debug, Clone, Copy)]
struct Root {
    u: f64,
    w: f64,
}

/// Width of the near-cutoff window, relative to V, scanned in `ln w`.
const LOG_WINDOW: f64 = 0.1;

/// Pole-free eigenvalue function.
///
/// TE/TM use the textbook forms multiplied through by `u J_0 · w K_0`. The
/// hybrid form is the textbook equation times `w² (u J_l)²`: it has no
/// poles, and the `1/w⁴` terms that cancel between the two sides near
/// cutoff are removed analytically, so weakly guided roots stay resolvable.
struct Dispersion {
    kind: ModeKind,
    l: i32,
    n1: f64,
    n2: f64,
    v: f64,
    x: f64,
}

impl Dispersion {
    fn new(geom: &FiberGeometry, x: f64, kind: ModeKind, l: u32) -> Self {
        let n1 = geom.core_index;
        let n2 = geom.clad_index;
        Self {
            kind,
            l: l as i32,
            n1,
            n2,
            v: x * (n1 * n1 - n2 * n2).sqrt(),
            x,
        }
    }

    fn from_u(&self, u: f64) -> Root {
        Root {
            u,
            w: (self.v * self.v - u * u).max(0.0).sqrt(),
        }
    }

    fn from_log_w(&self, t: f64) -> Root {
        let w = t.exp();
        Root {
            u: self.v * (1.0 - (w / self.v).powi(2)).sqrt(),
            w,
        }
    }

    fn n_eff_of(&self, r: Root) -> f64 {
        ((self.n1 * self.n1 * r.w * r.w + self.n2 * self.n2 * r.u * r.u) / (self.v * self.v)).sqrt()
    }

    /// Residual and a magnitude scale for the same expression.
    fn evaluate(&self, r: Root) -> (f64, f64) {
        let Root { u, w } = r;
        match self.kind {
            ModeKind::TE | ModeKind::TM => {
                let j0 = bessel_jy(0, u).j;
                let j1 = bessel_jy(1, u).j;
                let (k0, _) = bessel_k_scaled(0, w);
                let (k1, _) = bessel_k_scaled(1, w);
                let (c1, c2) = if self.kind == ModeKind::TE {
                    (1.0, 1.0)
                } else {
                    (self.n1 * self.n1, self.n2 * self.n2)
                };
                let t1 = c1 * j1 * w * k0;
                let t2 = c2 * k1 * u * j0;
                (t1 + t2, t1.abs() + t2.abs())
            }
            ModeKind::HE | ModeKind::EH => {
                let jb = bessel_jy(self.l, u);
                let l = self.l as f64;
                let n1s = self.n1 * self.n1;
                let n2s = self.n2 * self.n2;
                let delta = n1s - n2s;
                let v2 = self.v * self.v;
                let (u2, w2) = (u * u, w * w);
                // K_l'/(w K_l) = -l/w² + bt
                let bt = -self.k_lower_ratio(w) / w;
                let uj = u * jb.j;
                let terms = [
                    uj * uj * n2s * (-2.0 * l * bt),
                    uj * uj * n2s * bt * bt * w2,
                    -uj * uj * l * l * n2s * (2.0 / u2 + w2 / (u2 * u2)),
                    -uj * uj * l * l * delta / v2,
                    -uj * uj * l * l * delta * (2.0 * w2 / (u2 * v2) + w2 * w2 / (u2 * u2 * v2)),
                    (n1s + n2s) * uj * jb.jp * (-l + bt * w2),
                    n1s * jb.jp * jb.jp * w2,
                ];
                let value: f64 = terms.iter().sum();
                let scale: f64 = terms.iter().map(|t| t.abs()).sum();
                (value, scale)
            }
        }
    }

    /// `K_{l-1}(w) / K_l(w)`.
    fn k_lower_ratio(&self, w: f64) -> f64 {
        let (k, _) = bessel_k_scaled(self.l, w);
        let (km, _) = bessel_k_scaled(self.l - 1, w);
        km / k
    }

    /// `+1` on the EH branch, `-1` on the HE branch.
    fn hybrid_branch(&self, r: Root) -> f64 {
        let Root { u, w } = r;
        let jb = bessel_jy(self.l, u);
        let y = -(self.l as f64) / (w * w) - self.k_lower_ratio(w) / w;
        let n1s = self.n1 * self.n1;
        let mid = -(n1s + self.n2 * self.n2) * y / (2.0 * n1s);
        // sign(J'/(uJ) − mid), multiplied through by (uJ)² to stay finite
        (jb.jp * u * jb.j - mid * (u * jb.j).powi(2)).signum()
    }

    /// Roots ordered by increasing `u`.
    fn roots(&self) -> Result<Vec<Root>> {
        let u_lo = self.v * 1e-7;
        let w_split = LOG_WINDOW * self.v;
        let u_split = self.v * (1.0 - LOG_WINDOW * LOG_WINDOW).sqrt();
        let mut out = Vec::new();

        let f = |u: f64| self.evaluate(self.from_u(u)).0;
        let samples = (400.0 * self.v).max(4000.0) as usize;
        for (a, b) in sign_change_brackets(f, u_lo, u_split, samples) {
            let r = self.from_u(refine_bracketed(f, a, b, ROOT_REL_TOL)?);
            if self.accept(r) && r.u > u_lo {
                out.push(r);
            }
        }

        let w_min = self.w_min();
        if w_split > w_min {
            let g = |t: f64| self.evaluate(self.from_log_w(t)).0;
            let (t_lo, t_hi) = (w_min.ln(), w_split.ln());
            let mut near: Vec<Root> = Vec::new();
            for (a, b) in sign_change_brackets(g, t_lo, t_hi, 4000) {
                let r = self.from_log_w(refine_bracketed(g, a, b, ROOT_REL_TOL)?);
                if self.accept(r) && r.w < w_split {
                    near.push(r);
                }
            }
            // larger w first is smaller u
            near.sort_by(|p, q| q.w.total_cmp(&p.w));
            out.extend(near);
        }
        Ok(out)
    }

    /// Smallest `w` searched, where `K_{l+1}(w)` still fits in an `f64`.
    /// Roots below it have fields spread over more than 1e100 radii.
    fn w_min(&self) -> f64 {
        4.0 * 10f64.powf(-300.0 / (self.l as f64 + 1.0))
    }

    fn accept(&self, r: Root) -> bool {
        let (value, scale) = self.evaluate(r);
        (value / scale).abs() < RESIDUAL_ACCEPT
    }
}

fn build_mode(geom: &FiberGeometry, wavelength: f64, d: &Dispersion, family: ModeFamily, root: Root) -> GuidedMode {
    let x = d.x;
    let Root { u, w } = root;
    let n_eff = d.n_eff_of(root);
    let l = family.l as i32;
    let h = u / x;
    let q = w / x;

    // raw circular amplitudes; hybrid ratio from E_φ continuity
    let circular = match family.kind {
        ModeKind::TE => [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
        ModeKind::TM => [I * n_eff, I * n_eff],
        ModeKind::HE | ModeKind::EH => {
            let j = bessel_jy(l, u).j;
            let (kl, _) = bessel_k_scaled(l, w);
            let (k_up, _) = bessel_k_scaled(l + 1, w);
            let (k_down, _) = bessel_k_scaled(l - 1, w);
            let alpha_plus = bessel_j(l + 1, u) / h + j * k_up / (q * kl);
            let alpha_minus = bessel_j(l - 1, u) / h - j * k_down / (q * kl);
            [-I * alpha_minus, I * alpha_plus]
        }
    };
    let mut mode = GuidedMode {
        family,
        geometry: *geom,
        wavelength,
        n_eff,
        u,
        w,
        v_number: d.v,
        circular,
        norm: 1.0,
    };
    // near cutoff one amplitude is ~1/w², so scale before squaring
    let scale = circular.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for c in mode.circular.iter_mut() {
        *c /= scale;
    }
    let norm = 1.0 / raw_power(&mode).sqrt();
    for c in mode.circular.iter_mut() {
        *c *= norm;
    }
    mode.norm = norm / scale;
    mode
}

/// Axial power of the forward, positive-circulation member, from the
/// closed-form Lommel integrals of `|(∂r ∓ l/r) Z_l|² r`.
fn raw_power(mode: &GuidedMode) -> f64 {
    let x = mode.geometry.size_parameter(mode.wavelength);
    let a = x;
    let l = mode.family.l as i32;
    let u = mode.u;
    let w = mode.w;
    let h = u / x;
    let q = w / x;
    let beta = mode.n_eff;

    let j = |n: i32| bessel_j(n, u);
    let kk = |n: i32| bessel_k_scaled(n, w).0;
    let k_l = kk(l);
    // ratios to K_l, with the outer orders from the recurrence so nothing
    // overflows near cutoff
    let r_up = kk(l + 1) / k_l;
    let r_down = kk(l - 1) / k_l;
    let r_up2 = 1.0 + 2.0 * (l + 1) as f64 / w * r_up;
    let r_down2 = 1.0 - 2.0 * (l - 1) as f64 / w * r_down;

    let core_plus = h * h * a * a / 2.0 * (j(l + 1).powi(2) - j(l) * j(l + 2));
    let core_minus = h * h * a * a / 2.0 * (j(l - 1).powi(2) - j(l - 2) * j(l));
    let clad_plus = q * q * a * a / 2.0 * (r_up2 - r_up * r_up);
    let clad_minus = q * q * a * a / 2.0 * (r_down2 - r_down * r_down);

    let n1s = mode.geometry.core_index.powi(2);
    let n2s = mode.geometry.clad_index.powi(2);
    let b2 = beta * beta;
    let region = |ep: Complex64, em: Complex64, eps: f64, kt2: f64, plus: f64, minus: f64| {
        let hp = I / (2.0 * beta) * (ep * (b2 + eps) + em * kt2);
        let hm = I / (2.0 * beta) * (-ep * kt2 - em * (b2 + eps));
        let s = I * (ep * hp.conj() * plus - em * hm.conj() * minus);
        PI / 2.0 * s.re / (kt2 * kt2)
    };
    let [ep, em] = mode.circular;
    let jl = j(l);
    region(ep, em, n1s, h * h, core_plus, core_minus) + region(ep * jl, em * jl, n2s, -(q * q), clad_plus, clad_minus)
}

fn classify_hybrid(d: &Dispersion, roots: &[Root], l: u32) -> Vec<(ModeFamily, Root)> {
    // roots ascending in u = descending in β; radial order counts per branch
    let mut he = 0;
    let mut eh = 0;
    roots
        .iter()
        .map(|&u| {
            let kind = if d.hybrid_branch(u) < 0.0 {
                he += 1;
                (ModeKind::HE, he)
            } else {
                eh += 1;
                (ModeKind::EH, eh)
            };
            (
                ModeFamily {
                    kind: kind.0,
                    l,
                    m: kind.1,
                },
                u,
            )
        })
        .collect()
}

/// All modes of one kind and azimuthal order, ordered by decreasing `n_eff`.
///
/// For `kind` HE or EH, both branches of the hybrid equation at order `l`
/// are solved together and the result filtered to `kind`.
pub fn solve_family(geom: &FiberGeometry, wavelength: f64, kind: ModeKind, l: u32) -> Result<Vec<GuidedMode>> {
    check_wavelength(wavelength)?;
    let v = v_number(geom, wavelength)?;
    if v < V_FLOOR {
        return Ok(Vec::new());
    }
    let x = geom.size_parameter(wavelength);
    let (kind_eq, l_eq) = match kind {
        ModeKind::TE | ModeKind::TM => (kind, 0),
        ModeKind::HE | ModeKind::EH => {
            if l == 0 {
                return Err(Error::domain("hybrid modes need azimuthal order >= 1"));
            }
            (ModeKind::HE, l)
        }
    };
    let d = Dispersion::new(geom, x, kind_eq, l_eq);
    let roots = d.roots()?;
    let labelled: Vec<(ModeFamily, Root)> = match kind {
        ModeKind::TE | ModeKind::TM => roots
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                (
                    ModeFamily {
                        kind,
                        l: 0,
                        m: i as u32 + 1,
                    },
                    u,
                )
            })
            .collect(),
        _ => classify_hybrid(&d, &roots, l)
            .into_iter()
            .filter(|(fam, _)| fam.kind == kind)
            .collect(),
    };
    let d_kind = Dispersion::new(geom, x, kind, l_eq);
    Ok(labelled
        .into_iter()
        .map(|(fam, u)| build_mode(geom, wavelength, &d_kind, fam, u))
        .collect())
}

/// The HE11 mode, which exists at every positive V.
pub fn fundamental_mode(geom: &FiberGeometry, wavelength: f64) -> Result<Option<GuidedMode>> {
    let he1 = solve_family(geom, wavelength, ModeKind::HE, 1)?;
    Ok(he1.into_iter().find(|m| m.family.is_fundamental()))
}

/// Every guided mode at this wavelength, HE11 first, then by decreasing
/// effective index.
pub fn solve_guided_modes(geom: &FiberGeometry, wavelength: f64) -> Result<Vec<GuidedMode>> {
    check_wavelength(wavelength)?;
    let v = v_number(geom, wavelength)?;
    if v < V_FLOOR {
        return Ok(Vec::new());
    }
    let x = geom.size_parameter(wavelength);
    let mut modes = Vec::new();
    for kind in [ModeKind::TE, ModeKind::TM] {
        modes.extend(solve_family(geom, wavelength, kind, 0)?);
    }
    for l in 1.. {
        let d = Dispersion::new(geom, x, ModeKind::HE, l);
        let roots = d.roots()?;
        if roots.is_empty() {
            break;
        }
        for (fam, u) in classify_hybrid(&d, &roots, l) {
            modes.push(build_mode(geom, wavelength, &d, fam, u));
        }
    }
    modes.sort_by(|a, b| b.n_eff.total_cmp(&a.n_eff));
    if let Some(pos) = modes.iter().position(|m| m.family.is_fundamental()) {
        let he11 = modes.remove(pos);
        modes.insert(0, he11);
    }
    Ok(modes)
}

/// `k0 a = π d / λ` with a propagated uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeParameter {
    pub value: f64,
    pub sigma: f64,
}

pub fn size_parameter(diameter: &MeasuredValue, wavelength: &MeasuredValue, mode: Propagation) -> Result<SizeParameter> {
    if !(wavelength.value > 0.0) {
        return Err(Error::domain("wavelength must be positive"));
    }
    if diameter.value < 0.0 {
        return Err(Error::domain("diameter must be non-negative"));
    }
    let x = power_law(PI, &[(diameter, 1.0), (wavelength, -1.0)], mode)?;
    Ok(SizeParameter {
        value: x.value,
        sigma: x.sigma,
    })
}
