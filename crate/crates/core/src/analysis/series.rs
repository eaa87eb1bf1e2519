//! End-to-end noise thermometry over a power and detuning sweep.
//!
//! Each `(P, delta)` point is synthesized and fitted independently; the
//! merge step regresses `A / P²` against input power per detuning and
//! combines the slopes by inverse variance. Because `A / P² ∝ n_f`, ideal
//! backaction cooling gives `s = -1` and the decoherence exponent is
//! `alpha = 1 + s`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::calibration::{infer_g0_from_damping, G0Estimate};
use super::lorentzian::{fit_lorentzian, LorentzianFit};
use super::powerlaw::{fit_powerlaw, PowerLawFit, PowerLawPoint};
use crate::constants::TAU;
use crate::spectra::{synthesize_spectrum, Spectrum, SpectrumScene};
use crate::{Error, Result};

/// Converged points a detuning needs to enter the report.
pub const MIN_POINTS_PER_DETUNING: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPlan {
    /// Input powers, W, positive and ascending.
    pub powers: Vec<f64>,
    /// Detunings, rad/s.
    pub detunings: Vec<f64>,
    /// Spectrum half-span in expected linewidths.
    pub span_linewidths: f64,
    pub n_bins: usize,
    /// Weight the power-law fits by the fitted area errors.
    pub weighted: bool,
}

impl SeriesPlan {
    pub fn validate(&self) -> Result<()> {
        if self.powers.is_empty() || self.detunings.is_empty() {
            return Err(Error::domain("series needs at least one power and one detuning"));
        }
        if self.powers.iter().any(|p| !(*p > 0.0)) || self.powers.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("powers must be positive and strictly ascending"));
        }
        if self.detunings.iter().any(|d| !d.is_finite()) {
            return Err(Error::domain("detunings must be finite"));
        }
        if !(self.span_linewidths > 0.0) {
            return Err(Error::domain("span_linewidths must be > 0"));
        }
        Ok(())
    }
}

/// Seed of point `index` derived from the series seed, independent of
/// evaluation order.
pub fn point_seed(series_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(series_seed);
    rng.set_stream(index);
    rng.random()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub power_w: f64,
    pub detuning: f64,
    pub seed: u64,
    pub n_cav: f64,
    pub expected_center_hz: f64,
    pub expected_fwhm_hz: f64,
    pub expected_area: f64,
    pub fit: Option<LorentzianFit>,
    /// Failure message when the point could not be synthesized or fitted.
    pub error: Option<String>,
}

impl SeriesPoint {
    pub fn converged(&self) -> bool {
        self.fit.is_some_and(|f| f.converged)
    }

    pub fn a_over_p2(&self) -> Option<f64> {
        self.fit.filter(|f| f.converged).map(|f| f.area / (self.power_w * self.power_w))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetuningSummary {
    pub detuning: f64,
    pub n_converged: usize,
    /// `A / P²` against input power.
    pub vs_power: PowerLawFit,
    /// `A / P²` against intracavity photon number.
    pub vs_ncav: PowerLawFit,
    pub g0: Option<G0Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermometryReport {
    pub points: Vec<SeriesPoint>,
    pub detunings: Vec<DetuningSummary>,
    /// Inverse-variance mean of the per-detuning slopes against power.
    pub slope_s: f64,
    pub sigma_s: f64,
    /// `1 + slope_s`
    pub alpha: f64,
    /// All detunings pooled against `n_cav`.
    pub pooled_ncav: PowerLawFit,
    pub g0_hz: Option<f64>,
    pub g0_sigma_hz: Option<f64>,
    /// Set when a tone calibration accompanies the series.
    pub t_bath_mk: Option<f64>,
    pub omega_m: f64,
}

fn run_point(scene: &SpectrumScene, plan: &SeriesPlan, power: f64, detuning: f64, seed: u64) -> SeriesPoint {
    let s = SpectrumScene { seed, ..scene.with_drive(power, detuning) };
    let mut point = SeriesPoint {
        power_w: power,
        detuning,
        seed,
        n_cav: s.n_cav(),
        expected_center_hz: f64::NAN,
        expected_fwhm_hz: f64::NAN,
        expected_area: f64::NAN,
        fit: None,
        error: None,
    };
    let result = (|| -> Result<LorentzianFit> {
        let op = s.operating_point()?;
        point.expected_center_hz = op.center_hz();
        point.expected_fwhm_hz = op.fwhm_hz();
        point.expected_area = op.peak_area;
        let (lo, hi) = s.suggested_span(plan.span_linewidths)?;
        let spectrum = synthesize_spectrum(&s, lo, hi, plan.n_bins)?;
        fit_lorentzian(&spectrum, None)
    })();
    match result {
        Ok(fit) => {
            if !fit.converged {
                point.error = Some("fit did not converge".into());
            }
            point.fit = Some(fit);
        }
        Err(e) => point.error = Some(e.to_string()),
    }
    point
}

/// Synthesizes the spectrum one series point would use. Same seed
/// derivation as [`run_cooling_series`].
pub fn series_spectrum(scene: &SpectrumScene, plan: &SeriesPlan, index: usize) -> Result<Spectrum> {
    let n_p = plan.powers.len();
    let (power, detuning) = (plan.powers[index % n_p], plan.detunings[index / n_p]);
    let s = SpectrumScene { seed: point_seed(scene.seed, index as u64), ..scene.with_drive(power, detuning) };
    let (lo, hi) = s.suggested_span(plan.span_linewidths)?;
    synthesize_spectrum(&s, lo, hi, plan.n_bins)
}

fn inverse_variance(values: &[(f64, f64)]) -> (f64, f64) {
    if values.iter().any(|(_, s)| !(*s > 0.0)) {
        let n = values.len() as f64;
        return (values.iter().map(|v| v.0).sum::<f64>() / n, 0.0);
    }
    let sw: f64 = values.iter().map(|(_, s)| 1.0 / (s * s)).sum();
    let mean = values.iter().map(|(v, s)| v / (s * s)).sum::<f64>() / sw;
    (mean, 1.0 / sw.sqrt())
}

/// Synthesizes and fits every point of the sweep, ordered detuning-major,
/// power-minor. Per-point failures are recorded, not returned.
pub fn run_series_points(scene: &SpectrumScene, plan: &SeriesPlan) -> Result<Vec<SeriesPoint>> {
    scene.validate()?;
    plan.validate()?;
    let n_p = plan.powers.len();
    Ok((0..n_p * plan.detunings.len())
        .into_par_iter()
        .map(|i| {
            let seed = point_seed(scene.seed, i as u64);
            run_point(scene, plan, plan.powers[i % n_p], plan.detunings[i / n_p], seed)
        })
        .collect())
}

/// Runs the full sweep and assembles the report.
pub fn run_cooling_series(scene: &SpectrumScene, plan: &SeriesPlan) -> Result<ThermometryReport> {
    let points = run_series_points(scene, plan)?;
    assemble_report(points, scene.mech.omega_m, scene.kappa, plan.weighted)
}

/// Merge step: regressions and `g0` over the fitted points.
pub fn assemble_report(
    points: Vec<SeriesPoint>,
    omega_m: f64,
    kappa: f64,
    weighted: bool,
) -> Result<ThermometryReport> {
    let mut detunings: Vec<f64> = Vec::new();
    for p in &points {
        if !detunings.contains(&p.detuning) {
            detunings.push(p.detuning);
        }
    }
    let mut summaries = Vec::new();
    for &d in &detunings {
        let good: Vec<&SeriesPoint> = points.iter().filter(|p| p.detuning == d && p.converged()).collect();
        if good.len() < MIN_POINTS_PER_DETUNING {
            continue;
        }
        let pts = |x: &dyn Fn(&SeriesPoint) -> f64| -> Vec<PowerLawPoint> {
            good.iter()
                .map(|p| {
                    let f = p.fit.unwrap();
                    let p2 = p.power_w * p.power_w;
                    (x(p), f.area / p2, Some(f.area_err / p2))
                })
                .collect()
        };
        let vs_power = fit_powerlaw(&pts(&|p| p.power_w), weighted)?;
        let vs_ncav = fit_powerlaw(&pts(&|p| p.n_cav), weighted)?;
        let damping: Vec<(f64, f64)> = good.iter().map(|p| (p.n_cav, TAU * p.fit.unwrap().fwhm_hz)).collect();
        let g0 = if d < 0.0 { infer_g0_from_damping(&damping, d, kappa, omega_m).ok() } else { None };
        summaries.push(DetuningSummary { detuning: d, n_converged: good.len(), vs_power, vs_ncav, g0 });
    }
    if summaries.is_empty() {
        return Err(Error::Numerical(format!("no detuning has {MIN_POINTS_PER_DETUNING} converged points; no report")));
    }
    let slopes: Vec<(f64, f64)> = summaries.iter().map(|s| (s.vs_power.exponent, s.vs_power.sigma_exponent)).collect();
    let (slope_s, sigma_s) = inverse_variance(&slopes);

    let pooled: Vec<PowerLawPoint> = points
        .iter()
        .filter(|p| summaries.iter().any(|s| s.detuning == p.detuning))
        .filter_map(|p| p.a_over_p2().map(|a| (p.n_cav, a, Some(p.fit.unwrap().area_err / (p.power_w * p.power_w)))))
        .collect();
    let pooled_ncav = fit_powerlaw(&pooled, weighted)?;

    let g0s: Vec<(f64, f64)> = summaries.iter().filter_map(|s| s.g0.map(|g| (g.g0, g.sigma.unwrap_or(0.0)))).collect();
    let (g0_hz, g0_sigma_hz) = if g0s.is_empty() {
        (None, None)
    } else {
        let (g, s) = inverse_variance(&g0s);
        (Some(g / TAU), Some(s / TAU))
    };

    Ok(ThermometryReport {
        points,
        detunings: summaries,
        slope_s,
        sigma_s,
        alpha: 1.0 + slope_s,
        pooled_ncav,
        g0_hz,
        g0_sigma_hz,
        t_bath_mk: None,
        omega_m,
    })
}

pub const REPORT_COLUMNS: &str = "power_w,detuning_hz,seed,n_cav,converged,center_hz,center_err_hz,\
fwhm_hz,fwhm_err_hz,shift_hz,area,area_err,background,a_over_p2,status";

impl ThermometryReport {
    /// One row per point, columns as in [`REPORT_COLUMNS`]. Failed points
    /// leave the fit columns empty.
    pub fn table_csv(&self) -> String {
        let mut out = String::from(REPORT_COLUMNS);
        out.push('\n');
        let f_m = self.omega_m / TAU;
        for p in &self.points {
            let _ = write!(out, "{:e},{:e},{},{:e},{},", p.power_w, p.detuning / TAU, p.seed, p.n_cav, p.converged());
            match p.fit {
                Some(f) => {
                    let _ = write!(
                        out,
                        "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},",
                        f.center_hz,
                        f.center_err,
                        f.fwhm_hz,
                        f.fwhm_err,
                        f.center_hz - f_m,
                        f.area,
                        f.area_err,
                        f.background,
                        f.area / (p.power_w * p.power_w)
                    );
                }
                None => out.push_str(",,,,,,,,,"),
            }
            let status = p.error.as_deref().unwrap_or("ok").replace([',', '\n'], ";");
            out.push_str(&status);
            out.push('\n');
        }
        out
    }

    /// `key=value` lines.
    pub fn summary(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_else(|| "nan".into());
        let mut out = String::new();
        let _ = writeln!(out, "slope_s={:e}", self.slope_s);
        let _ = writeln!(out, "sigma_s={:e}", self.sigma_s);
        let _ = writeln!(out, "alpha={:e}", self.alpha);
        let _ = writeln!(out, "g0_hz={}", opt(self.g0_hz));
        let _ = writeln!(out, "g0_sigma_hz={}", opt(self.g0_sigma_hz));
        let _ = writeln!(out, "t_bath_mk={}", opt(self.t_bath_mk));
        let _ = writeln!(out, "slope_pooled_ncav={:e}", self.pooled_ncav.exponent);
        let _ = writeln!(out, "sigma_pooled_ncav={:e}", self.pooled_ncav.sigma_exponent);
        let converged = self.points.iter().filter(|p| p.converged()).count();
        let _ = writeln!(out, "points={}", self.points.len());
        let _ = writeln!(out, "points_converged={converged}");
        for d in &self.detunings {
            let tag = format!("{}", d.detuning / TAU);
            let _ = writeln!(out, "slope_s[{tag}]={:e}", d.vs_power.exponent);
            let _ = writeln!(out, "sigma_s[{tag}]={:e}", d.vs_power.sigma_exponent);
            let _ = writeln!(out, "slope_ncav[{tag}]={:e}", d.vs_ncav.exponent);
            let _ = writeln!(out, "g0_hz[{tag}]={}", opt(d.g0.map(|g| g.g0 / TAU)));
        }
        out
    }
}
