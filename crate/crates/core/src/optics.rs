//! Cavity and membrane optics.
//!
//! The cavity is a plano-concave Fabry-Pérot resonator: a flat mirror at
//! `x = 0` and a curved mirror of radius `roc` at `x = L`. The membrane sits
//! at `x = z` from the flat mirror. Longitudinal physics is one-dimensional
//! and scalar: the membrane is a thin symmetric scatterer with amplitude
//! coefficients `(r, t)` and both end mirrors are treated as perfect
//! reflectors when locating resonances. Fields propagate as `exp(+i k x)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::backaction::MechanicalMode;
use crate::constants::{C, PI, TAU};
use crate::{Error, Result};

/// Per-pass clipping loss below which the defect aperture is considered
/// harmless for sideband-resolved operation.
pub const CLIPPING_LOSS_BUDGET: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityGeometry {
    /// Mirror separation in meters.
    pub length: f64,
    /// Radius of curvature of the curved mirror in meters.
    pub roc: f64,
    pub wavelength: f64,
    /// Power transmission of the input (flat) mirror.
    pub t_in: f64,
    /// Power transmission of the curved mirror.
    pub t_out: f64,
    /// Additional round-trip power loss (scatter, absorption).
    pub internal_loss: f64,
}

impl CavityGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(Error::domain("wavelength must be > 0"));
        }
        if !(self.length > 0.0) {
            return Err(Error::domain("cavity length must be > 0"));
        }
        if !(self.length < self.roc) {
            return Err(Error::domain(format!(
                "unstable resonator: L = {} m must be < R = {} m",
                self.length, self.roc
            )));
        }
        for (name, v) in [("t_in", self.t_in), ("t_out", self.t_out), ("internal_loss", self.internal_loss)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::domain(format!("{name} = {v} outside [0, 1)")));
            }
        }
        if self.round_trip_loss() <= 0.0 {
            return Err(Error::domain("total round-trip loss must be > 0"));
        }
        Ok(())
    }

    pub fn round_trip_loss(&self) -> f64 {
        self.t_in + self.t_out + self.internal_loss
    }

    pub fn fsr_hz(&self) -> f64 {
        C / (2.0 * self.length)
    }

    /// Optical angular frequency of the nominal wavelength.
    pub fn omega_c(&self) -> f64 {
        TAU * C / self.wavelength
    }

    /// Longitudinal mode number closest to the nominal wavelength.
    pub fn nearest_mode_number(&self) -> u64 {
        (2.0 * self.length / self.wavelength).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MembraneSpec {
    pub thickness: f64,
    pub refractive_index: f64,
    /// Distance from the flat mirror in meters.
    pub position: f64,
    pub defect_diameter: f64,
    /// Tilt relative to the flat mirror, radians.
    #[serde(default)]
    pub tilt: f64,
    /// Transverse overlap between membrane displacement and the optical mode.
    pub mode_overlap: f64,
}

impl MembraneSpec {
    pub fn validate(&self, geom: &CavityGeometry) -> Result<()> {
        if !(self.thickness > 0.0) {
            return Err(Error::domain("membrane thickness must be > 0"));
        }
        if !(self.refractive_index >= 1.0) {
            return Err(Error::domain("membrane refractive index must be >= 1"));
        }
        if !(self.position > 0.0 && self.position < geom.length) {
            return Err(Error::domain(format!(
                "membrane position {} m outside (0, L = {} m)",
                self.position, geom.length
            )));
        }
        if !(self.defect_diameter > 0.0) {
            return Err(Error::domain("defect diameter must be > 0"));
        }
        if !(self.mode_overlap > 0.0 && self.mode_overlap <= 1.0) {
            return Err(Error::domain("mode overlap must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Fundamental Gaussian mode of the plano-concave resonator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianMode {
    pub waist: f64,
    /// Waist location measured from the flat mirror (always 0 here).
    pub waist_position: f64,
    pub rayleigh_range: f64,
    pub wavelength: f64,
}

impl GaussianMode {
    pub fn from_waist(waist: f64, wavelength: f64) -> Self {
        GaussianMode { waist, waist_position: 0.0, rayleigh_range: PI * waist * waist / wavelength, wavelength }
    }

    /// 1/e² intensity radius at distance `z` from the flat mirror.
    pub fn spot_radius_at(&self, z: f64) -> f64 {
        let u = (z - self.waist_position) / self.rayleigh_range;
        self.waist * (1.0 + u * u).sqrt()
    }

    /// Wavefront radius of curvature at `z` (infinite at the waist).
    pub fn wavefront_radius_at(&self, z: f64) -> f64 {
        let dz = z - self.waist_position;
        if dz == 0.0 {
            f64::INFINITY
        } else {
            dz * (1.0 + (self.rayleigh_range / dz).powi(2))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmptyCavity {
    pub fsr_hz: f64,
    /// Total energy decay rate, rad/s.
    pub kappa: f64,
    /// Input-mirror contribution to `kappa`, rad/s.
    pub kappa_ext: f64,
    pub finesse: f64,
    pub mode: GaussianMode,
}

impl EmptyCavity {
    pub fn overcoupling(&self) -> f64 {
        self.kappa_ext / self.kappa
    }
}

pub fn empty_cavity_props(geom: &CavityGeometry) -> Result<EmptyCavity> {
    geom.validate()?;
    let fsr_hz = geom.fsr_hz();
    // kappa / 2pi = FSR / F and F = 2pi / loss  =>  kappa = FSR * loss
    let kappa = fsr_hz * geom.round_trip_loss();
    let kappa_ext = fsr_hz * geom.t_in;
    let finesse = TAU / geom.round_trip_loss();
    let z_r = (geom.length * (geom.roc - geom.length)).sqrt();
    let waist = (geom.wavelength * z_r / PI).sqrt();
    Ok(EmptyCavity { fsr_hz, kappa, kappa_ext, finesse, mode: GaussianMode::from_waist(waist, geom.wavelength) })
}

/// Finesse implied by a measured linewidth `kappa` (rad/s) for a cavity of
/// the given length.
pub fn finesse_from_linewidth(length: f64, kappa: f64) -> Result<f64> {
    if !(length > 0.0 && kappa > 0.0) {
        return Err(Error::domain("length and kappa must be > 0"));
    }
    Ok(C / (2.0 * length) / (kappa / TAU))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembraneCoefficients {
    pub r: Complex64,
    pub t: Complex64,
}

/// Amplitude reflection and transmission of a lossless dielectric slab in
/// vacuum at normal incidence, from the characteristic-matrix method.
pub fn membrane_coefficients(mem: &MembraneSpec, wavelength: f64) -> MembraneCoefficients {
    slab_coefficients(mem.refractive_index, mem.thickness, TAU * C / wavelength).0
}

/// Slab coefficients at angular frequency `omega`, plus the continuous
/// (unwrapped) transmission phase.
fn slab_coefficients(n: f64, d: f64, omega: f64) -> (MembraneCoefficients, f64) {
    let delta = n * d * omega / C;
    let (s, c) = delta.sin_cos();
    // Characteristic matrix [[cos, -i sin/n], [-i n sin, cos]] between two
    // vacuum half-spaces.
    let m11 = Complex64::new(c, 0.0);
    let m12 = Complex64::new(0.0, -s / n);
    let m21 = Complex64::new(0.0, -n * s);
    let m22 = m11;
    let den = m11 + m12 + m21 + m22;
    let r = (m11 + m12 - m21 - m22) / den;
    let t = Complex64::new(2.0, 0.0) / den;
    // arg t lies within pi/2 of the single-pass phase delta.
    let a = t.arg();
    let phase = a + TAU * ((delta - a) / TAU).round();
    (MembraneCoefficients { r, t }, phase)
}

/// One longitudinal resonance of the membrane-in-the-middle cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MimResonance {
    pub mode_number: u64,
    /// Resonance angular frequency, rad/s.
    pub omega: f64,
    /// Local FSR deviation `(omega_{N+1} - omega_N)/2pi - c/2L`, Hz.
    pub delta_fsr_hz: f64,
}

/// Composite two-sub-cavity resonator with perfect end mirrors.
#[derive(Debug, Clone, Copy)]
pub struct MimCavity {
    pub length: f64,
    pub position: f64,
    pub thickness: f64,
    pub index: f64,
}

impl MimCavity {
    pub fn new(geom: &CavityGeometry, mem: &MembraneSpec) -> Self {
        MimCavity { length: geom.length, position: mem.position, thickness: mem.thickness, index: mem.refractive_index }
    }

    fn transparent(&self) -> bool {
        self.thickness == 0.0 || self.index == 1.0
    }

    /// Continuous round-trip phase minus the mirror phases. Resonance `N`
    /// satisfies `round_trip_phase(omega) = 2 pi N`.
    ///
    /// Looking from the long sub-cavity, the short sub-cavity plus membrane
    /// reflects with `(r + (r² - t²) e^{i phi}) / (1 + r e^{i phi})`,
    /// `phi = 2 k z`. For a lossless symmetric slab `r² - t² = -e^{2 i theta}`
    /// with `theta = arg t`, so the reflection phase splits into smooth
    /// pieces that never wrap while `|r| < 1`.
    pub fn round_trip_phase(&self, omega: f64) -> f64 {
        let k = omega / C;
        if self.transparent() {
            return 2.0 * k * self.length;
        }
        let (MembraneCoefficients { r, .. }, theta) = slab_coefficients(self.index, self.thickness, omega);
        let phi = 2.0 * k * self.position;
        let psi = 2.0 * theta + phi;
        let one = Complex64::new(1.0, 0.0);
        let a1 = (one - r * Complex64::from_polar(1.0, -psi)).arg();
        let a2 = (one + r * Complex64::from_polar(1.0, phi)).arg();
        2.0 * theta + 2.0 * k * self.length + a1 - a2
    }

    /// Resonance angular frequency of longitudinal mode `n` by bisection on
    /// the round-trip phase, converged to floating-point resolution.
    pub fn resonance(&self, n: u64) -> Result<f64> {
        let spacing = PI * C / self.length;
        let nominal = n as f64 * spacing;
        if self.transparent() {
            return Ok(nominal);
        }
        let target = TAU * n as f64;
        let f = |w: f64| self.round_trip_phase(w) - target;
        let mut lo = nominal - 0.5 * spacing;
        let mut hi = nominal + 0.5 * spacing;
        let mut widen = 0;
        while f(lo) > 0.0 || f(hi) < 0.0 {
            widen += 1;
            if widen > 16 || lo <= 0.0 {
                return Err(Error::Numerical(format!(
                    "could not bracket resonance N = {n} (z = {} m, |r| large or z outside cavity?)",
                    self.position
                )));
            }
            if f(lo) > 0.0 {
                lo -= 0.5 * spacing;
            }
            if f(hi) < 0.0 {
                hi += 0.5 * spacing;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Shift of mode `n` from the empty-cavity comb, rad/s.
    pub fn resonance_shift(&self, n: u64) -> Result<f64> {
        Ok(self.resonance(n)? - n as f64 * PI * C / self.length)
    }

    fn with_position(&self, position: f64) -> Self {
        MimCavity { position, ..*self }
    }
}

/// Resonances for every mode number in `modes` (inclusive range).
pub fn mim_resonances(
    geom: &CavityGeometry,
    mem: &MembraneSpec,
    modes: std::ops::RangeInclusive<u64>,
) -> Result<Vec<MimResonance>> {
    let cav = MimCavity::new(geom, mem);
    let (first, last) = (*modes.start(), *modes.end());
    if last < first {
        return Ok(Vec::new());
    }
    let omegas = (first..=last + 1).map(|n| cav.resonance(n)).collect::<Result<Vec<_>>>()?;
    let fsr = geom.fsr_hz();
    Ok(omegas
        .windows(2)
        .zip(first..)
        .map(|(w, n)| {
            let delta_fsr_hz = if cav.transparent() { 0.0 } else { (w[1] - w[0]) / TAU - fsr };
            MimResonance { mode_number: n, omega: w[0], delta_fsr_hz }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingProfile {
    pub mode_number: u64,
    /// Ordered `(z [m], g0 [rad/s])` samples.
    pub samples: Vec<(f64, f64)>,
    /// `2 (omega_c / L) |r| x_zpf xi`, rad/s.
    pub g0_max_analytic: f64,
}

impl CouplingProfile {
    pub fn max_g0(&self) -> f64 {
        self.samples.iter().map(|s| s.1).fold(0.0, f64::max)
    }
}

pub fn g0_max_analytic(geom: &CavityGeometry, mem: &MembraneSpec, mech: &MechanicalMode) -> f64 {
    let r = membrane_coefficients(mem, geom.wavelength).r.norm();
    2.0 * (geom.omega_c() / geom.length) * r * mech.x_zpf * mem.mode_overlap
}

/// `|d omega_N / dz|` at membrane position `z`, from a symmetric difference
/// with step `lambda/2000` refined by one Richardson step.
pub fn dispersion_slope(cav: &MimCavity, n: u64, z: f64, wavelength: f64) -> Result<f64> {
    let h = wavelength / 2000.0;
    if z + h == z || z - h == z || h < 1e-15 {
        return Err(Error::Numerical(format!("derivative step {h} m underflows at z = {z} m")));
    }
    let central = |h: f64| -> Result<f64> {
        let up = cav.with_position(z + h).resonance(n)?;
        let dn = cav.with_position(z - h).resonance(n)?;
        Ok((up - dn) / (2.0 * h))
    };
    let d1 = central(h)?;
    let d2 = central(0.5 * h)?;
    let rich = (4.0 * d2 - d1) / 3.0;
    if !rich.is_finite() {
        return Err(Error::Numerical(format!("non-finite dispersion slope at z = {z} m")));
    }
    Ok(rich)
}

/// Samples `g0(z) = |d omega_N / dz| x_zpf xi` over one half-wavelength
/// starting at the membrane's configured position.
pub fn coupling_vs_position(
    geom: &CavityGeometry,
    mem: &MembraneSpec,
    mech: &MechanicalMode,
    samples: usize,
) -> Result<CouplingProfile> {
    if !(mech.x_zpf > 0.0) {
        return Err(Error::domain("x_zpf must be > 0"));
    }
    if samples < 2 {
        return Err(Error::domain("need at least 2 position samples"));
    }
    let n = geom.nearest_mode_number();
    let cav = MimCavity::new(geom, mem);
    let period = 0.5 * geom.wavelength;
    let scale = mech.x_zpf * mem.mode_overlap;
    let samples = (0..samples)
        .map(|i| {
            let z = mem.position + period * i as f64 / samples as f64;
            dispersion_slope(&cav, n, z, geom.wavelength).map(|s| (z, s.abs() * scale))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CouplingProfile { mode_number: n, samples, g0_max_analytic: g0_max_analytic(geom, mem, mech) })
}

/// Fraction of a Gaussian beam's power falling outside a centered circular
/// defect of diameter `defect_diameter`: `exp(-D² / (2 w²))`.
///
/// This counts only power hitting the perforated region; scattering into
/// higher-order modes from the phase step is not modeled, so the result is a
/// lower bound on the excess cavity loss.
pub fn clipping_loss(spot_radius: f64, defect_diameter: f64) -> Result<f64> {
    if !(spot_radius > 0.0) || defect_diameter < 0.0 || defect_diameter.is_nan() {
        return Err(Error::domain("need spot radius > 0 and defect diameter >= 0"));
    }
    Ok((-(defect_diameter * defect_diameter) / (2.0 * spot_radius * spot_radius)).exp())
}

/// Membrane-to-mirror tilt from the back-reflection fringe period, using the
/// double-pass convention `theta = lambda / (2 period)`.
pub fn tilt_from_fringes(wavelength: f64, fringe_period: f64) -> Result<f64> {
    if !(fringe_period > 0.0) {
        return Err(Error::domain("fringe period must be > 0"));
    }
    Ok(wavelength / (2.0 * fringe_period))
}

/// Single-pass convention `theta = lambda / period`.
pub fn tilt_from_fringes_single_pass(wavelength: f64, fringe_period: f64) -> Result<f64> {
    Ok(2.0 * tilt_from_fringes(wavelength, fringe_period)?)
}
