use serde::Serialize;

use super::lm::{levenberg_marquardt, LmResult, Model};
use crate::spectra::{mean_psd, Spectrum};
use crate::{Error, Result};

/// Half-width of the automatic fit window, in linewidths.
pub const AUTO_WINDOW_LINEWIDTHS: f64 = 20.0;
pub const MIN_WINDOW_BINS: usize = 16;

/// Number of model-variance reweighting passes after the unweighted fit.
const REWEIGHT_PASSES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LorentzianFit {
    pub center_hz: f64,
    pub fwhm_hz: f64,
    /// Integrated peak area, PSD units x Hz.
    pub area: f64,
    pub background: f64,
    pub center_err: f64,
    pub fwhm_err: f64,
    pub area_err: f64,
    pub background_err: f64,
    /// False when the optimizer stalled, or when the fitted line is
    /// non-positive or narrower than one bin (no resolved peak).
    pub converged: bool,
    /// sqrt of the weighted residual sum of squares.
    pub residual_norm: f64,
    /// Window actually fitted, Hz.
    pub window: (f64, f64),
}

impl LorentzianFit {
    pub fn eval(&self, f_hz: f64) -> f64 {
        mean_psd(f_hz, self.background, self.area, self.center_hz, self.fwhm_hz)
    }
}

struct Lorentzian;

impl Model for Lorentzian {
    fn n_params(&self) -> usize {
        4
    }

    // p = [center, fwhm, area, background]
    fn eval(&self, p: &[f64], f: f64) -> f64 {
        mean_psd(f, p[3], p[2], p[0], p[1])
    }

    fn gradient(&self, p: &[f64], f: f64, out: &mut [f64]) {
        let (c, gamma, a) = (p[0], p[1], p[2]);
        let h = 0.5 * gamma;
        let x = f - c;
        let d = x * x + h * h;
        let k = a / std::f64::consts::PI;
        out[0] = k * h * 2.0 * x / (d * d);
        out[1] = k * (d - 2.0 * h * h) / (2.0 * d * d);
        out[2] = h / (std::f64::consts::PI * d);
        out[3] = 1.0;
    }

    fn admissible(&self, p: &[f64]) -> bool {
        p[1] > 0.0 && p.iter().all(|v| v.is_finite())
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

struct Guess {
    center: f64,
    fwhm: f64,
    area: f64,
    background: f64,
}

/// Peak bin (lowest frequency wins ties), half-maximum crossings and the
/// trapezoidal excess over the median level.
fn initial_guess(f: &[f64], y: &[f64], df: f64) -> Guess {
    let background = median(y);
    let mut imax = 0;
    for (i, &v) in y.iter().enumerate() {
        if v > y[imax] {
            imax = i;
        }
    }
    let half = background + 0.5 * (y[imax] - background);
    let mut lo = imax;
    while lo > 0 && y[lo - 1] > half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < y.len() && y[hi + 1] > half {
        hi += 1;
    }
    let fwhm = ((hi - lo) as f64 * df).max(df);
    let area = y
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1] - 2.0 * background) * df)
        .sum::<f64>()
        .max(1e-3 * (y[imax] - background).max(f64::MIN_POSITIVE) * fwhm);
    Guess { center: f[imax], fwhm, area, background }
}

fn slice_window(spectrum: &Spectrum, lo: f64, hi: f64, exclude: &[usize]) -> (Vec<f64>, Vec<f64>) {
    spectrum
        .freq_hz()
        .iter()
        .zip(spectrum.psd())
        .enumerate()
        .filter(|(i, (f, _))| **f >= lo && **f <= hi && !exclude.contains(i))
        .map(|(_, (f, p))| (*f, *p))
        .unzip()
}

fn fit_window(f: &[f64], y: &[f64], guess: &Guess, df: f64) -> LmResult {
    let p0 = [guess.center, guess.fwhm, guess.area, guess.background];
    let peak = guess.area / (0.5 * std::f64::consts::PI * guess.fwhm);
    let scales = [df, df * 1e-3, guess.area.abs() * 1e-3, peak.abs() * 1e-6];
    let mut w = vec![1.0; f.len()];
    let mut r = levenberg_marquardt(&Lorentzian, &p0, &scales, f, y, &w);
    for _ in 0..REWEIGHT_PASSES {
        if !Lorentzian.admissible(&r.params) {
            break;
        }
        let floor = y.iter().fold(0.0f64, |a, v| a.max(v.abs())) * 1e-12;
        for (wi, &fi) in w.iter_mut().zip(f) {
            let m = Lorentzian.eval(&r.params, fi).abs().max(floor).max(f64::MIN_POSITIVE);
            *wi = 1.0 / (m * m);
        }
        r = levenberg_marquardt(&Lorentzian, &r.params, &scales, f, y, &w);
    }
    r
}

/// Least-squares fit of a constant background plus one Lorentzian.
///
/// Without an explicit `window` the fit is centred on the maximum bin and
/// spans `±20` linewidths, first from the half-maximum estimate and then
/// once more from the fitted linewidth. After an unweighted pass the fit is
/// repeated with weights `1 / model²`, matching the multiplicative
/// periodogram noise, and the reported errors come from that weighted
/// covariance scaled by the reduced chi-square.
pub fn fit_lorentzian(spectrum: &Spectrum, window: Option<(f64, f64)>) -> Result<LorentzianFit> {
    fit_lorentzian_excluding(spectrum, window, &[])
}

/// [`fit_lorentzian`] with the bins in `exclude` left out of both the
/// initial guess and the fit.
pub fn fit_lorentzian_excluding(
    spectrum: &Spectrum,
    window: Option<(f64, f64)>,
    exclude: &[usize],
) -> Result<LorentzianFit> {
    if spectrum.psd().iter().any(|v| !v.is_finite()) {
        return Err(Error::input("spectrum contains non-finite values"));
    }
    let df = spectrum.bin_width();
    let (mut lo, mut hi) = match window {
        Some(w) => w,
        None => {
            let (f, y) = slice_window(spectrum, f64::NEG_INFINITY, f64::INFINITY, exclude);
            if f.len() < MIN_WINDOW_BINS {
                return Err(Error::input("too few usable bins"));
            }
            let g = initial_guess(&f, &y, df);
            let hw = AUTO_WINDOW_LINEWIDTHS * g.fwhm;
            (g.center - hw, g.center + hw)
        }
    };
    let mut refine = window.is_none();
    loop {
        let (f, y) = slice_window(spectrum, lo, hi, exclude);
        if f.is_empty() {
            return Err(Error::input(format!("fit window [{lo}, {hi}] Hz contains no bins")));
        }
        if f.len() < MIN_WINDOW_BINS {
            return Err(Error::input(format!(
                "fit window [{lo}, {hi}] Hz holds {} bins, need {MIN_WINDOW_BINS}",
                f.len()
            )));
        }
        let guess = initial_guess(&f, &y, df);
        let r = fit_window(&f, &y, &guess, df);
        let p = &r.params;
        let err = |i: usize| r.covariance[(i, i)].max(0.0).sqrt();
        let fit = LorentzianFit {
            center_hz: p[0],
            fwhm_hz: p[1],
            area: p[2],
            background: p[3],
            center_err: err(0),
            fwhm_err: err(1),
            area_err: err(2),
            background_err: err(3),
            converged: r.converged && p[1] >= df && p[2] > 0.0,
            residual_norm: r.chi2.sqrt(),
            window: (lo, hi),
        };
        if refine && fit.converged {
            refine = false;
            let hw = AUTO_WINDOW_LINEWIDTHS * fit.fwhm_hz;
            let (nlo, nhi) = (fit.center_hz - hw, fit.center_hz + hw);
            let first = spectrum.freq_hz()[0];
            let last = spectrum.freq_hz()[spectrum.len() - 1];
            // skip the refit when the window would not change
            if ((nlo.max(first) - lo.max(first)).abs() > df) || ((nhi.min(last) - hi.min(last)).abs() > df) {
                lo = nlo;
                hi = nhi;
                continue;
            }
        }
        return Ok(fit);
    }
}
