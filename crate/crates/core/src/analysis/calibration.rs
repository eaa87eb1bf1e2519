//! Absolute calibration of the vacuum coupling rate.
//!
//! Two independent routes: the slope of the fitted linewidth against
//! intracavity photon number, and the phase-modulation tone comparison
//! (Gorodetsky method). The tone route uses the near-resonant form
//! `g0² = beta² omega_mod² A_mech / (4 n A_cal)`, valid for
//! `omega_mod ≈ omega_m`; detuning-dependent transduction corrections are not
//! modelled.

use serde::Serialize;

use super::lorentzian::{fit_lorentzian_excluding, LorentzianFit};
use crate::backaction::{damping_kernel, occupation_from_temperature, temperature_from_occupation};
use crate::constants::TAU;
use crate::heating::HeatingModel;
use crate::spectra::{synthesize_spectrum, CalTone, Spectrum, SpectrumScene};
use crate::{Error, Result};

/// Minimum tone-to-peak separation, in mechanical linewidths.
pub const MIN_TONE_SEPARATION: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct G0Estimate {
    /// rad/s
    pub g0: f64,
    /// Standard error of `g0`; absent with only two points.
    pub sigma: Option<f64>,
    /// Fitted `gamma_eff` at zero photons, rad/s.
    pub intercept: f64,
}

/// Infers `g0` from the linear growth of `gamma_eff` with `n_cav` at fixed
/// red detuning `delta`.
pub fn infer_g0_from_damping(series: &[(f64, f64)], delta: f64, kappa: f64, omega_m: f64) -> Result<G0Estimate> {
    if !(delta < 0.0) {
        return Err(Error::domain("damping calibration needs red detuning (delta < 0)"));
    }
    if series.iter().any(|(n, g)| !n.is_finite() || !g.is_finite()) {
        return Err(Error::input("non-finite damping data"));
    }
    let n = series.len() as f64;
    let xb = series.iter().map(|p| p.0).sum::<f64>() / n;
    let yb = series.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = series.iter().map(|p| (p.0 - xb).powi(2)).sum();
    if series.len() < 2 || !(sxx > 0.0) {
        return Err(Error::input("need at least 2 distinct photon numbers"));
    }
    let sxy: f64 = series.iter().map(|p| (p.0 - xb) * (p.1 - yb)).sum();
    let slope = sxy / sxx;
    let intercept = yb - slope * xb;
    let kernel = damping_kernel(delta, kappa, omega_m);
    if !(slope > 0.0) || !(kernel > 0.0) {
        return Err(Error::Inconsistent(format!("linewidth slope {slope:e} per photon does not indicate cooling")));
    }
    let g0 = (slope / kernel).sqrt();
    let sigma = (series.len() > 2).then(|| {
        let sse: f64 = series.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let sigma_slope = (sse / (n - 2.0) / sxx).sqrt();
        // d g0 / d slope = g0 / (2 slope)
        g0 * sigma_slope / (2.0 * slope)
    });
    Ok(G0Estimate { g0, sigma, intercept })
}

/// Mechanical peak and calibration tone measured from one spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakAreas {
    pub mech: LorentzianFit,
    /// Tone area above the fitted model, PSD units x Hz.
    pub a_cal: f64,
    pub tone_hz: f64,
}

/// Fits the mechanical peak with the tone bin masked and takes the tone
/// area as the excess of that bin over the fitted model.
pub fn measure_peaks(spectrum: &Spectrum, omega_mod: f64) -> Result<PeakAreas> {
    let tone_hz = omega_mod / TAU;
    let bin = spectrum
        .bin_of(tone_hz)
        .ok_or_else(|| Error::input(format!("calibration tone at {tone_hz} Hz lies outside the spectrum")))?;
    let mech = fit_lorentzian_excluding(spectrum, None, &[bin])?;
    if !mech.converged {
        return Err(Error::Numerical("mechanical peak fit did not converge".into()));
    }
    if (tone_hz - mech.center_hz).abs() <= MIN_TONE_SEPARATION * mech.fwhm_hz {
        return Err(Error::input(format!(
            "calibration tone {:.3e} Hz from the peak overlaps it (fwhm {:.3e} Hz)",
            (tone_hz - mech.center_hz).abs(),
            mech.fwhm_hz
        )));
    }
    let level = mech.eval(spectrum.freq_hz()[bin]);
    let excess = spectrum.psd()[bin] - level;
    // a tone must clear the periodogram scatter of its own bin
    let scatter = level / (spectrum.meta().n_averages.max(1) as f64).sqrt();
    if !(excess > 5.0 * scatter) {
        return Err(Error::input(format!("no calibration tone found at {tone_hz} Hz")));
    }
    Ok(PeakAreas { mech, a_cal: excess * spectrum.bin_width(), tone_hz })
}

/// `g0` from the area ratio, given the mode occupation `n_mode`.
pub fn gorodetsky_g0_from_areas(a_mech: f64, a_cal: f64, tone: &CalTone, n_mode: f64) -> Result<f64> {
    if !(a_mech > 0.0 && a_cal > 0.0 && n_mode > 0.0) {
        return Err(Error::domain("areas and occupation must be > 0"));
    }
    Ok((tone.beta * tone.omega_mod).abs() / 2.0 * (a_mech / (n_mode * a_cal)).sqrt())
}

/// Mode occupation implied by the area ratio for a known `g0`.
pub fn gorodetsky_occupation_from_areas(a_mech: f64, a_cal: f64, tone: &CalTone, g0: f64) -> Result<f64> {
    if !(a_mech > 0.0 && a_cal > 0.0 && g0 > 0.0) {
        return Err(Error::domain("areas and g0 must be > 0"));
    }
    Ok((tone.beta * tone.omega_mod).powi(2) * a_mech / (4.0 * g0 * g0 * a_cal))
}

pub fn gorodetsky_g0(spectrum: &Spectrum, tone: &CalTone, n_mode: f64) -> Result<f64> {
    let m = measure_peaks(spectrum, tone.omega_mod)?;
    gorodetsky_g0_from_areas(m.mech.area, m.a_cal, tone, n_mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BathEstimate {
    pub n_mode: f64,
    pub n_th: f64,
    /// K
    pub t_bath: f64,
}

/// Bath temperature from a tone-calibrated spectrum and known `g0`.
///
/// `gamma_opt` removes backaction from the mode occupation:
/// `n_th = n_mode gamma_eff / (gamma_eff - gamma_opt)`, with `gamma_eff`
/// taken from the fitted linewidth.
pub fn gorodetsky_bath(
    spectrum: &Spectrum,
    tone: &CalTone,
    g0: f64,
    omega_m: f64,
    gamma_opt: f64,
) -> Result<BathEstimate> {
    let m = measure_peaks(spectrum, tone.omega_mod)?;
    let n_mode = gorodetsky_occupation_from_areas(m.mech.area, m.a_cal, tone, g0)?;
    let gamma_eff = TAU * m.mech.fwhm_hz;
    let gamma_m = gamma_eff - gamma_opt;
    if !(gamma_m > 0.0) {
        return Err(Error::Inconsistent(format!(
            "optical damping {gamma_opt:e} rad/s exceeds the fitted linewidth {gamma_eff:e} rad/s"
        )));
    }
    let n_th = n_mode * gamma_eff / gamma_m;
    Ok(BathEstimate { n_mode, n_th, t_bath: temperature_from_occupation(n_th, omega_m) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GorodetskyRun {
    /// Coupling calibrated at the hot stage, rad/s.
    pub g0: f64,
    pub hot: PeakAreas,
    pub cold: PeakAreas,
    pub bath: BathEstimate,
}

/// Two-stage protocol: calibrate `g0` with the bath held at the known
/// temperature `t_hot`, then infer the bath temperature of a second run at
/// `t_cold` using that `g0`.
///
/// Both temperatures are effective bath temperatures, so the scene's
/// power-dependent heating is switched off for the two stages.
/// The calibration stage assumes the mode sits at the occupation of `t_hot`.
/// Absorption heating in `scene.heating` violates that assumption and biases
/// `g0` accordingly; the cold stage then reports the heated bath.
///
/// The probe in `scene` must sit on the cavity resonance, where backaction
/// vanishes and the mode occupation equals the bath occupation. Each stage
/// places the tone `tone_offset` linewidths above the mechanical peak and
/// spans `half_span` linewidths to each side.
pub fn run_gorodetsky_protocol(
    scene: &SpectrumScene,
    t_hot: f64,
    t_cold: f64,
    beta: f64,
    tone_offset: f64,
    half_span: f64,
    n_bins: usize,
) -> Result<GorodetskyRun> {
    if scene.drive.detuning != 0.0 {
        return Err(Error::domain("Gorodetsky probe must be on resonance (detuning = 0)"));
    }
    if !(tone_offset > MIN_TONE_SEPARATION && half_span > tone_offset) {
        return Err(Error::domain("need 3 < tone_offset < half_span"));
    }
    let omega_m = scene.mech.omega_m;
    let at = |t: f64, seed: u64| -> Result<(SpectrumScene, CalTone, (f64, f64))> {
        // each stage temperature is the full effective bath; no extra optical heating
        let heating =
            HeatingModel { n_base: occupation_from_temperature(t, omega_m), heat_coeff: 0.0, ..scene.heating };
        let mut s = SpectrumScene { heating, seed, cal_tone: None, ..scene.clone() };
        let op = s.operating_point()?;
        let tone = CalTone { beta, omega_mod: op.omega_eff + tone_offset * op.backaction.gamma_eff };
        s.cal_tone = Some(tone);
        let hw = half_span * op.fwhm_hz();
        Ok((s, tone, (op.center_hz() - hw, op.center_hz() + hw)))
    };

    let (hot_scene, hot_tone, (lo, hi)) = at(t_hot, scene.seed)?;
    let hot = measure_peaks(&synthesize_spectrum(&hot_scene, lo, hi, n_bins)?, hot_tone.omega_mod)?;
    // the experimenter knows the cryostat temperature, not the heated bath
    let n_hot = occupation_from_temperature(t_hot, omega_m);
    let g0 = gorodetsky_g0_from_areas(hot.mech.area, hot.a_cal, &hot_tone, n_hot)?;

    let (cold_scene, cold_tone, (lo, hi)) = at(t_cold, scene.seed.wrapping_add(0x9E37_79B9_7F4A_7C15))?;
    let cold_spec = synthesize_spectrum(&cold_scene, lo, hi, n_bins)?;
    let cold = measure_peaks(&cold_spec, cold_tone.omega_mod)?;
    let n_mode = gorodetsky_occupation_from_areas(cold.mech.area, cold.a_cal, &cold_tone, g0)?;
    let bath = BathEstimate { n_mode, n_th: n_mode, t_bath: temperature_from_occupation(n_mode, omega_m) };
    Ok(GorodetskyRun { g0, hot, cold, bath })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backaction::backaction_rates;
    use approx::assert_relative_eq;

    const OMEGA: f64 = TAU * 1.3e6;
    const KAPPA: f64 = TAU * 2.0e6;

    #[test]
    fn damping_inverse_is_exact() {
        let g0 = TAU * 1.2;
        let delta = -TAU * 1.5e6;
        let gm = 0.01;
        let series: Vec<_> = [1e5, 5e5, 1e6, 3e6]
            .iter()
            .map(|&n| (n, gm + backaction_rates(g0, n, delta, KAPPA, OMEGA).gamma_opt))
            .collect();
        let est = infer_g0_from_damping(&series, delta, KAPPA, OMEGA).unwrap();
        assert_relative_eq!(est.g0, g0, max_relative = 1e-9);
        assert_relative_eq!(est.intercept, gm, max_relative = 1e-6);
        assert!(est.sigma.unwrap() < 1e-9 * g0);
        let two = infer_g0_from_damping(&series[..2], delta, KAPPA, OMEGA).unwrap();
        assert!(two.sigma.is_none());
    }

    #[test]
    fn damping_kernel_resolved_sideband_limit() {
        let kappa = 1e-4 * OMEGA;
        assert_relative_eq!(damping_kernel(-OMEGA, kappa, OMEGA), 4.0 / kappa, max_relative = 1e-8);
    }

    #[test]
    fn damping_rejects_bad_series() {
        let d = -TAU * 1.5e6;
        assert!(matches!(
            infer_g0_from_damping(&[(1.0, 1.0), (2.0, 0.5)], d, KAPPA, OMEGA),
            Err(Error::Inconsistent(_))
        ));
        assert!(matches!(infer_g0_from_damping(&[(1.0, 1.0), (1.0, 2.0)], d, KAPPA, OMEGA), Err(Error::Input(_))));
        assert!(matches!(infer_g0_from_damping(&[(1.0, 1.0), (2.0, 2.0)], -d, KAPPA, OMEGA), Err(Error::Domain(_))));
    }

    #[test]
    fn area_formulas_are_inverse() {
        let tone = CalTone { beta: 0.01, omega_mod: OMEGA };
        let g0 = gorodetsky_g0_from_areas(3.0, 0.2, &tone, 1234.0).unwrap();
        let n = gorodetsky_occupation_from_areas(3.0, 0.2, &tone, g0).unwrap();
        assert_relative_eq!(n, 1234.0, max_relative = 1e-14);
        assert!(gorodetsky_g0_from_areas(0.0, 0.2, &tone, 1.0).is_err());
    }
}
