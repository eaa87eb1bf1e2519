//! Dynamical backaction in the weak-coupling, adiabatic regime.
//!
//! Sign convention: `delta = omega_laser - omega_cavity`, so red detuning is
//! negative and cools the mechanical mode.

use num_complex::Complex64;
use serde::Serialize;

use crate::constants::{HBAR, K_B};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MechanicalMode {
    pub omega_m: f64,
    /// Intrinsic energy damping rate, rad/s.
    pub gamma_m: f64,
    pub m_eff: f64,
    pub x_zpf: f64,
}

pub fn zero_point_fluctuation(m_eff: f64, omega_m: f64) -> f64 {
    (HBAR / (2.0 * m_eff * omega_m)).sqrt()
}

impl MechanicalMode {
    pub fn from_mass(omega_m: f64, gamma_m: f64, m_eff: f64) -> Result<Self> {
        let mode = MechanicalMode { omega_m, gamma_m, m_eff, x_zpf: zero_point_fluctuation(m_eff, omega_m) };
        mode.validate()?;
        Ok(mode)
    }

    pub fn from_quality_factor(omega_m: f64, quality_factor: f64, m_eff: f64) -> Result<Self> {
        if !(quality_factor > 0.0) {
            return Err(Error::domain("quality factor must be > 0"));
        }
        Self::from_mass(omega_m, omega_m / quality_factor, m_eff)
    }

    pub fn quality_factor(&self) -> f64 {
        self.omega_m / self.gamma_m
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("omega_m", self.omega_m), ("gamma_m", self.gamma_m), ("m_eff", self.m_eff), ("x_zpf", self.x_zpf)]
        {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive and finite")));
            }
        }
        let expect = zero_point_fluctuation(self.m_eff, self.omega_m);
        if ((self.x_zpf - expect) / expect).abs() > 1e-9 {
            return Err(Error::domain(format!(
                "x_zpf = {:e} m inconsistent with m_eff and omega_m (expected {expect:e} m)",
                self.x_zpf
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpticalDrive {
    pub input_power: f64,
    pub detuning: f64,
    /// Spatial mode-matching efficiency in (0, 1].
    pub mode_match: f64,
    pub kappa_ext: f64,
    pub laser_omega: f64,
}

impl OpticalDrive {
    pub fn validate(&self, kappa: f64) -> Result<()> {
        if !(self.input_power >= 0.0) {
            return Err(Error::domain("input power must be >= 0"));
        }
        if !(self.mode_match > 0.0 && self.mode_match <= 1.0) {
            return Err(Error::domain("mode matching must lie in (0, 1]"));
        }
        if !(self.kappa_ext > 0.0 && self.kappa_ext <= kappa) {
            return Err(Error::domain("need 0 < kappa_ext <= kappa"));
        }
        if !(self.laser_omega > 0.0) {
            return Err(Error::domain("laser frequency must be > 0"));
        }
        Ok(())
    }

    pub fn with_power(&self, input_power: f64) -> Self {
        OpticalDrive { input_power, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BackactionResult {
    pub n_cav: f64,
    pub gamma_opt: f64,
    pub spring_shift: f64,
    /// `gamma_m + gamma_opt`
    pub gamma_eff: f64,
    pub n_f: f64,
}

/// Mean intracavity photon number for a coherent drive through the input
/// mirror.
pub fn intracavity_photons(drive: &OpticalDrive, kappa: f64) -> f64 {
    let flux = drive.mode_match * drive.input_power / (HBAR * drive.laser_omega);
    drive.kappa_ext * flux / (0.25 * kappa * kappa + drive.detuning * drive.detuning)
}

fn lorentz(kappa: f64, x: f64) -> f64 {
    1.0 / (0.25 * kappa * kappa + x * x)
}

/// `kappa/((kappa/2)² + (delta+omega)²) - kappa/((kappa/2)² + (delta-omega)²)`,
/// the optical damping per `g0² n_cav`.
pub fn damping_kernel(delta: f64, kappa: f64, omega_m: f64) -> f64 {
    kappa * (lorentz(kappa, delta + omega_m) - lorentz(kappa, delta - omega_m))
}

pub fn spring_kernel(delta: f64, kappa: f64, omega_m: f64) -> f64 {
    (delta + omega_m) * lorentz(kappa, delta + omega_m) + (delta - omega_m) * lorentz(kappa, delta - omega_m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BackactionRates {
    pub gamma_opt: f64,
    pub spring_shift: f64,
}

pub fn backaction_rates(g0: f64, n_cav: f64, delta: f64, kappa: f64, omega_m: f64) -> BackactionRates {
    let g2 = g0 * g0 * n_cav;
    BackactionRates {
        gamma_opt: g2 * damping_kernel(delta, kappa, omega_m),
        spring_shift: g2 * spring_kernel(delta, kappa, omega_m),
    }
}

/// Sideband parameters needed for the quantum-backaction floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumLimit {
    pub kappa: f64,
    pub delta: f64,
    pub omega_m: f64,
}

/// Steady-state occupation `n_f = gamma_m n_th / (gamma_opt + gamma_m)`.
///
/// With `quantum_limit` set, the Stokes scattering floor
/// `gamma_opt * n_min` is added to the numerator, where
/// `n_min = L(delta - omega) / (L(delta + omega) - L(delta - omega))`.
pub fn steady_state_occupation(
    gamma_m: f64,
    n_th: f64,
    gamma_opt: f64,
    quantum_limit: Option<QuantumLimit>,
) -> Result<f64> {
    if !(gamma_m > 0.0) {
        return Err(Error::domain("gamma_m must be > 0"));
    }
    if gamma_opt <= -gamma_m {
        return Err(Error::Instability { gamma_opt, neg_gamma_m: -gamma_m });
    }
    let floor = match quantum_limit {
        None => 0.0,
        Some(q) => {
            let heat = lorentz(q.kappa, q.delta - q.omega_m);
            let cool = lorentz(q.kappa, q.delta + q.omega_m);
            if cool == heat {
                return Err(Error::domain("quantum limit undefined at zero detuning"));
            }
            gamma_opt * heat / (cool - heat)
        }
    };
    Ok((gamma_m * n_th + floor) / (gamma_opt + gamma_m))
}

/// Bose-Einstein occupation at temperature `t` (kelvin).
pub fn occupation_from_temperature(t: f64, omega_m: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega_m / (K_B * t)).exp_m1()
}

/// Inverse of [`occupation_from_temperature`].
pub fn temperature_from_occupation(n: f64, omega_m: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    HBAR * omega_m / (K_B * (1.0 / n).ln_1p())
}

/// Full backaction state of the mode at one operating point.
pub fn backaction_state(
    g0: f64,
    n_cav: f64,
    delta: f64,
    kappa: f64,
    omega_m: f64,
    gamma_m: f64,
    n_th: f64,
) -> Result<BackactionResult> {
    let rates = backaction_rates(g0, n_cav, delta, kappa, omega_m);
    let n_f = steady_state_occupation(gamma_m, n_th, rates.gamma_opt, None)?;
    Ok(BackactionResult {
        n_cav,
        gamma_opt: rates.gamma_opt,
        spring_shift: rates.spring_shift,
        gamma_eff: gamma_m + rates.gamma_opt,
        n_f,
    })
}

/// Cavity amplitude reflection `1 - kappa_ext / (kappa/2 - i delta)`.
pub fn cavity_reflection(delta: f64, kappa: f64, kappa_ext: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) - kappa_ext / Complex64::new(0.5 * kappa, -delta)
}

/// Ideal PDH error signal (phase-quadrature demodulation, unit carrier and
/// sideband amplitudes).
pub fn pdh_error(delta: f64, kappa: f64, kappa_ext: f64, mod_freq: f64) -> f64 {
    let r = |d: f64| cavity_reflection(d, kappa, kappa_ext);
    let r0 = r(delta);
    (r0 * r(delta - mod_freq).conj() - r0.conj() * r(delta + mod_freq)).im
}

pub fn pdh_error_signal(delta_sweep: &[f64], kappa: f64, kappa_ext: f64, mod_freq: f64) -> Vec<f64> {
    delta_sweep.iter().map(|&d| pdh_error(d, kappa, kappa_ext, mod_freq)).collect()
}
