//! Synthetic direct-detection photocurrent spectra.
//!
//! PSDs are one-sided densities on a uniform frequency grid in Hz. The
//! mechanical contribution is a Lorentzian whose integral over frequency
//! equals the peak area `A = K P² n_f`; the shot-noise floor is `shot_coeff P`.
//! Analyzer averaging is modeled per bin as a scaled chi-squared variate with
//! `2 n_averages` degrees of freedom and unit mean.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::Serialize;

use crate::backaction::MechanicalMode;
use crate::backaction::{backaction_state, intracavity_photons, BackactionResult, OpticalDrive};
use crate::constants::{HBAR, TAU};
use crate::heating::HeatingModel;
use crate::{Error, Result};

/// Phase-modulation calibration tone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalTone {
    /// Modulation depth, rad.
    pub beta: f64,
    /// Modulation angular frequency, rad/s.
    pub omega_mod: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumScene {
    pub kappa: f64,
    pub kappa_ext: f64,
    /// Free spectral range, used to turn photon number into circulating power.
    pub fsr_hz: f64,
    pub mech: MechanicalMode,
    pub drive: OpticalDrive,
    pub heating: HeatingModel,
    pub g0: f64,
    /// Peak area per (W² phonon).
    pub transduction: f64,
    /// Background PSD per W of input power.
    pub shot_coeff: f64,
    pub cal_tone: Option<CalTone>,
    pub n_averages: u32,
    pub seed: u64,
}

/// Everything the mechanical peak depends on at one drive setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub backaction: BackactionResult,
    /// Circulating intracavity power, W.
    pub intracavity_power: f64,
    pub n_th: f64,
    /// Heating-modified intrinsic damping, rad/s.
    pub gamma_m: f64,
    pub omega_eff: f64,
    /// `K P² n_f`
    pub peak_area: f64,
}

impl OperatingPoint {
    pub fn center_hz(&self) -> f64 {
        self.omega_eff / TAU
    }

    pub fn fwhm_hz(&self) -> f64 {
        self.backaction.gamma_eff / TAU
    }
}

impl SpectrumScene {
    pub fn validate(&self) -> Result<()> {
        if self.n_averages < 1 {
            return Err(Error::domain("n_averages must be >= 1"));
        }
        if !(self.transduction >= 0.0 && self.shot_coeff >= 0.0) {
            return Err(Error::domain("transduction and shot coefficient must be >= 0"));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::domain("kappa must be > 0"));
        }
        self.drive.validate(self.kappa)?;
        self.mech.validate()?;
        self.heating.validate()
    }

    pub fn with_drive(&self, input_power: f64, detuning: f64) -> Self {
        SpectrumScene { drive: OpticalDrive { input_power, detuning, ..self.drive }, ..self.clone() }
    }

    pub fn n_cav(&self) -> f64 {
        intracavity_photons(&self.drive, self.kappa)
    }

    pub fn operating_point(&self) -> Result<OperatingPoint> {
        let n_cav = self.n_cav();
        let intracavity_power = n_cav * HBAR * self.drive.laser_omega * self.fsr_hz;
        let n_th = self.heating.bath_occupation(intracavity_power);
        let gamma_m = self.heating.damping_of_bath(n_th);
        let backaction =
            backaction_state(self.g0, n_cav, self.drive.detuning, self.kappa, self.mech.omega_m, gamma_m, n_th)?;
        let p = self.drive.input_power;
        Ok(OperatingPoint {
            backaction,
            intracavity_power,
            n_th,
            gamma_m,
            omega_eff: self.mech.omega_m + backaction.spring_shift,
            peak_area: self.transduction * p * p * backaction.n_f,
        })
    }

    /// Integrated area of the calibration tone for the current drive.
    pub fn cal_tone_area(&self, tone: &CalTone) -> f64 {
        let p = self.drive.input_power;
        self.transduction * p * p * (tone.beta * tone.omega_mod).powi(2) / (4.0 * self.g0 * self.g0)
    }

    /// Frequency span centred on the expected peak, `half_width` linewidths
    /// to each side.
    pub fn suggested_span(&self, half_width: f64) -> Result<(f64, f64)> {
        let op = self.operating_point()?;
        let hw = half_width * op.fwhm_hz();
        Ok((op.center_hz() - hw, op.center_hz() + hw))
    }
}

/// Noiseless mean PSD of the shot floor plus mechanical Lorentzian.
pub fn mean_psd(f_hz: f64, background: f64, area: f64, center_hz: f64, fwhm_hz: f64) -> f64 {
    let hw = 0.5 * fwhm_hz;
    let x = f_hz - center_hz;
    background + area / std::f64::consts::PI * hw / (x * x + hw * hw)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumMeta {
    pub rbw_hz: f64,
    pub power_w: f64,
    pub detuning_hz: f64,
    pub seed: u64,
    pub n_averages: u32,
    /// Set when the peak is narrower than three bins.
    pub coarse_grid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    freq_hz: Vec<f64>,
    psd: Vec<f64>,
    meta: SpectrumMeta,
}

impl Spectrum {
    pub fn new(freq_hz: Vec<f64>, psd: Vec<f64>, meta: SpectrumMeta) -> Result<Self> {
        if freq_hz.len() != psd.len() {
            return Err(Error::domain("frequency and PSD lengths differ"));
        }
        if freq_hz.len() < 2 {
            return Err(Error::domain("spectrum needs at least 2 bins"));
        }
        if let Some(i) = psd.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("PSD bin {i} is negative or non-finite")));
        }
        if let Some(i) = check_uniform(&freq_hz) {
            return Err(Error::domain(format!("frequency grid not uniform at bin {i}")));
        }
        Ok(Spectrum { freq_hz, psd, meta })
    }

    pub fn freq_hz(&self) -> &[f64] {
        &self.freq_hz
    }

    pub fn psd(&self) -> &[f64] {
        &self.psd
    }

    pub fn meta(&self) -> &SpectrumMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.psd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psd.is_empty()
    }

    pub fn bin_width(&self) -> f64 {
        (self.freq_hz[self.len() - 1] - self.freq_hz[0]) / (self.len() - 1) as f64
    }

    /// Index of the bin nearest to `f_hz`, if inside the grid.
    pub fn bin_of(&self, f_hz: f64) -> Option<usize> {
        let df = self.bin_width();
        let half = 0.5 * df;
        if f_hz < self.freq_hz[0] - half || f_hz > self.freq_hz[self.len() - 1] + half {
            return None;
        }
        Some((((f_hz - self.freq_hz[0]) / df).round() as usize).min(self.len() - 1))
    }
}

/// Returns the first index where the spacing departs from the mean spacing.
fn check_uniform(freq: &[f64]) -> Option<usize> {
    let n = freq.len();
    let df = (freq[n - 1] - freq[0]) / (n - 1) as f64;
    if !(df > 0.0) {
        return Some(1);
    }
    let scale = freq[0].abs().max(freq[n - 1].abs());
    let tol = 1e-6 * df + 8.0 * f64::EPSILON * scale;
    (1..n).find(|&i| ((freq[i] - freq[i - 1]) - df).abs() > tol)
}

pub fn synthesize_spectrum(scene: &SpectrumScene, f_start: f64, f_stop: f64, n_bins: usize) -> Result<Spectrum> {
    build_spectrum(scene, f_start, f_stop, n_bins, true)
}

/// The ensemble-mean spectrum (no periodogram noise), same grid and metadata
/// as [`synthesize_spectrum`].
pub fn expected_spectrum(scene: &SpectrumScene, f_start: f64, f_stop: f64, n_bins: usize) -> Result<Spectrum> {
    build_spectrum(scene, f_start, f_stop, n_bins, false)
}

fn build_spectrum(scene: &SpectrumScene, f_start: f64, f_stop: f64, n_bins: usize, noisy: bool) -> Result<Spectrum> {
    scene.validate()?;
    if n_bins < 64 {
        return Err(Error::domain("need at least 64 bins"));
    }
    let op = scene.operating_point()?;
    if op.backaction.gamma_eff <= 0.0 {
        return Err(Error::Instability { gamma_opt: op.backaction.gamma_opt, neg_gamma_m: -op.gamma_m });
    }
    let center = op.center_hz();
    if !(f_start < center && center < f_stop) {
        return Err(Error::domain(format!("peak at {center} Hz outside [{f_start}, {f_stop}] Hz")));
    }
    let df = (f_stop - f_start) / (n_bins - 1) as f64;
    let background = scene.shot_coeff * scene.drive.input_power;
    let fwhm = op.fwhm_hz();

    let m = scene.n_averages as f64;
    let gamma = Gamma::new(m, 1.0 / m).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);

    let freq: Vec<f64> = (0..n_bins).map(|i| f_start + df * i as f64).collect();
    let psd: Vec<f64> = freq
        .iter()
        .map(|&f| {
            let mean = mean_psd(f, background, op.peak_area, center, fwhm);
            if noisy {
                mean * gamma.sample(&mut rng)
            } else {
                mean
            }
        })
        .collect();
    let meta = SpectrumMeta {
        rbw_hz: df,
        power_w: scene.drive.input_power,
        detuning_hz: scene.drive.detuning / TAU,
        seed: scene.seed,
        n_averages: scene.n_averages,
        coarse_grid: fwhm < 3.0 * df,
    };
    let spectrum = Spectrum::new(freq, psd, meta)?;
    match scene.cal_tone {
        Some(tone) => inject_calibration_tone(&spectrum, scene, &tone),
        None => Ok(spectrum),
    }
}

/// Adds a coherent phase-modulation tone one bin wide. Its area is chosen so
/// that `A_mech / A_cal = 4 g0² n_f / (beta² omega_mod²)`.
pub fn inject_calibration_tone(spectrum: &Spectrum, scene: &SpectrumScene, tone: &CalTone) -> Result<Spectrum> {
    let f_mod = tone.omega_mod / TAU;
    let bin = spectrum
        .bin_of(f_mod)
        .ok_or_else(|| Error::domain(format!("calibration tone at {f_mod} Hz outside spectrum")))?;
    let mut out = spectrum.clone();
    out.psd[bin] += scene.cal_tone_area(tone) / spectrum.bin_width();
    Ok(out)
}

/// Sampled PDH error-signal sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSignal {
    pub detuning_hz: Vec<f64>,
    pub error: Vec<f64>,
    pub mod_freq_hz: f64,
    pub seed: u64,
}

/// PDH sweep over `[-span_hz, span_hz]` with additive Gaussian noise of
/// standard deviation `noise_rel` times the peak error amplitude.
pub fn synthesize_pdh_sweep(
    kappa: f64,
    kappa_ext: f64,
    mod_freq: f64,
    span_hz: f64,
    n_points: usize,
    noise_rel: f64,
    seed: u64,
) -> Result<ErrorSignal> {
    if n_points < 16 || !(span_hz > 0.0) {
        return Err(Error::domain("need >= 16 points and a positive span"));
    }
    let detuning_hz: Vec<f64> =
        (0..n_points).map(|i| -span_hz + 2.0 * span_hz * i as f64 / (n_points - 1) as f64).collect();
    let deltas: Vec<f64> = detuning_hz.iter().map(|d| d * TAU).collect();
    let clean = crate::backaction::pdh_error_signal(&deltas, kappa, kappa_ext, mod_freq);
    let amp = clean.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let error = if noise_rel > 0.0 {
        let normal = Normal::new(0.0, noise_rel * amp).map_err(|e| Error::Numerical(e.to_string()))?;
        clean.iter().map(|v| v + normal.sample(&mut rng)).collect()
    } else {
        clean
    };
    Ok(ErrorSignal { detuning_hz, error, mod_freq_hz: mod_freq / TAU, seed })
}

pub fn write_spectrum<W: Write>(spectrum: &Spectrum, mut w: W) -> Result<()> {
    let m = &spectrum.meta;
    writeln!(w, "# rbw_hz={:e}", m.rbw_hz)?;
    writeln!(w, "# power_w={:e}", m.power_w)?;
    writeln!(w, "# detuning_hz={:e}", m.detuning_hz)?;
    writeln!(w, "# seed={}", m.seed)?;
    writeln!(w, "# n_averages={}", m.n_averages)?;
    writeln!(w, "# coarse_grid={}", m.coarse_grid)?;
    writeln!(w, "freq_hz,psd")?;
    for (f, p) in spectrum.freq_hz.iter().zip(&spectrum.psd) {
        writeln!(w, "{f:e},{p:e}")?;
    }
    w.flush()?;
    Ok(())
}

struct Table {
    header: Vec<(usize, String, String)>,
    rows: Vec<(usize, f64, f64)>,
}

fn read_table<R: BufRead>(r: R, columns: &str) -> Result<Table> {
    let mut header = Vec::new();
    let mut rows = Vec::new();
    let mut seen_columns = false;
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.ends_with('\r') {
            return Err(Error::parse(lineno, "CR line ending; expected LF"));
        }
        if let Some(rest) = line.strip_prefix('#') {
            if seen_columns {
                return Err(Error::parse(lineno, "header line after data"));
            }
            let (k, v) =
                rest.trim().split_once('=').ok_or_else(|| Error::parse(lineno, "header line is not key=value"))?;
            header.push((lineno, k.trim().to_string(), v.trim().to_string()));
            continue;
        }
        if !seen_columns {
            if line.trim() != columns {
                return Err(Error::parse(lineno, format!("expected column line `{columns}`")));
            }
            seen_columns = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| Error::parse(lineno, "expected two comma-separated values"))?;
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|e| Error::parse(lineno, format!("bad number `{}`: {e}", s.trim())))
        };
        rows.push((lineno, parse(a)?, parse(b)?));
    }
    if !seen_columns {
        return Err(Error::parse(0, "missing column line"));
    }
    if rows.len() < 2 {
        return Err(Error::parse(0, "fewer than 2 data rows"));
    }
    Ok(Table { header, rows })
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse::<T>().map_err(|_| Error::parse(line, format!("bad value `{v}` for `{key}`")))
}

pub fn read_spectrum<R: BufRead>(r: R) -> Result<Spectrum> {
    let table = read_table(r, "freq_hz,psd")?;
    let (mut rbw, mut power, mut detuning, mut seed) = (None, None, None, None);
    let mut n_averages = 1;
    let mut coarse_grid = false;
    for (line, k, v) in &table.header {
        match k.as_str() {
            "rbw_hz" => rbw = Some(parse_value::<f64>(*line, k, v)?),
            "power_w" => power = Some(parse_value::<f64>(*line, k, v)?),
            "detuning_hz" => detuning = Some(parse_value::<f64>(*line, k, v)?),
            "seed" => seed = Some(parse_value::<u64>(*line, k, v)?),
            "n_averages" => n_averages = parse_value::<u32>(*line, k, v)?,
            "coarse_grid" => coarse_grid = parse_value::<bool>(*line, k, v)?,
            _ => return Err(Error::parse(*line, format!("unknown header key `{k}`"))),
        }
    }
    let missing = |k: &str| Error::parse(0, format!("missing header key `{k}`"));
    let meta = SpectrumMeta {
        rbw_hz: rbw.ok_or_else(|| missing("rbw_hz"))?,
        power_w: power.ok_or_else(|| missing("power_w"))?,
        detuning_hz: detuning.ok_or_else(|| missing("detuning_hz"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        n_averages,
        coarse_grid,
    };
    for &(line, _, p) in &table.rows {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::parse(line, format!("negative or non-finite PSD value {p}")));
        }
    }
    let freq: Vec<f64> = table.rows.iter().map(|r| r.1).collect();
    if let Some(i) = check_uniform(&freq) {
        return Err(Error::parse(table.rows[i].0, "non-uniform frequency grid"));
    }
    let psd = table.rows.iter().map(|r| r.2).collect();
    Spectrum::new(freq, psd, meta)
}

pub fn write_error_signal<W: Write>(sig: &ErrorSignal, mut w: W) -> Result<()> {
    writeln!(w, "# kind=pdh")?;
    writeln!(w, "# mod_freq_hz={:e}", sig.mod_freq_hz)?;
    writeln!(w, "# seed={}", sig.seed)?;
    writeln!(w, "detuning_hz,error")?;
    for (d, e) in sig.detuning_hz.iter().zip(&sig.error) {
        writeln!(w, "{d:e},{e:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_error_signal<R: BufRead>(r: R) -> Result<ErrorSignal> {
    let table = read_table(r, "detuning_hz,error")?;
    let mut mod_freq = None;
    let mut seed = 0;
    for (line, k, v) in &table.header {
        match k.as_str() {
            "kind" if v == "pdh" => {}
            "kind" => return Err(Error::parse(*line, format!("unsupported kind `{v}`"))),
            "mod_freq_hz" => mod_freq = Some(parse_value::<f64>(*line, k, v)?),
            "seed" => seed = parse_value::<u64>(*line, k, v)?,
            _ => return Err(Error::parse(*line, format!("unknown header key `{k}`"))),
        }
    }
    for w in table.rows.windows(2) {
        if !(w[1].1 > w[0].1) {
            return Err(Error::parse(w[1].0, "detuning not strictly increasing"));
        }
    }
    Ok(ErrorSignal {
        detuning_hz: table.rows.iter().map(|r| r.1).collect(),
        error: table.rows.iter().map(|r| r.2).collect(),
        mod_freq_hz: mod_freq.ok_or_else(|| Error::parse(0, "missing header key `mod_freq_hz`"))?,
        seed,
    })
}
