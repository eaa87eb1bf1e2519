use serde::Serialize;

use super::lm::{levenberg_marquardt, Model};
use crate::backaction::pdh_error;
use crate::constants::TAU;
use crate::spectra::ErrorSignal;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdhFit {
    /// rad/s
    pub kappa: f64,
    pub kappa_ext: f64,
    pub scale: f64,
    pub sigma_kappa: f64,
    pub converged: bool,
}

/// Half the spacing of the two central extrema of the error signal, in units
/// of `kappa`, for `kappa_ext/kappa` near 1 and well-resolved sidebands.
const EXTREMA_SPACING_PER_KAPPA: f64 = 1.02;

struct Pdh {
    mod_freq: f64,
}

impl Model for Pdh {
    fn n_params(&self) -> usize {
        3
    }

    // p = [scale, kappa, kappa_ext / kappa]
    fn eval(&self, p: &[f64], delta: f64) -> f64 {
        p[0] * pdh_error(delta, p[1], p[1] * p[2], self.mod_freq)
    }

    fn admissible(&self, p: &[f64]) -> bool {
        p[1] > 0.0 && p[2] > 0.0 && p[2] <= 1.0
    }
}

/// Fits `scale`, `kappa` and the overcoupling ratio to a PDH sweep with known
/// modulation frequency.
pub fn fit_pdh(signal: &ErrorSignal) -> Result<PdhFit> {
    let n = signal.detuning_hz.len();
    if n < 16 || signal.error.len() != n {
        return Err(Error::input("PDH sweep needs >= 16 points of matching length"));
    }
    if signal.error.iter().chain(&signal.detuning_hz).any(|v| !v.is_finite()) {
        return Err(Error::input("PDH sweep contains non-finite values"));
    }
    if !(signal.mod_freq_hz > 0.0) {
        return Err(Error::input("modulation frequency must be > 0"));
    }
    let model = Pdh { mod_freq: TAU * signal.mod_freq_hz };
    let x: Vec<f64> = signal.detuning_hz.iter().map(|d| TAU * d).collect();
    let y = &signal.error;

    // central extrema, inside half a sideband spacing
    let half = 0.5 * signal.mod_freq_hz;
    let central = || (0..n).filter(|&i| signal.detuning_hz[i].abs() < half);
    let imax = central().max_by(|&a, &b| y[a].total_cmp(&y[b]));
    let imin = central().min_by(|&a, &b| y[a].total_cmp(&y[b]));
    let (imax, imin) = match (imax, imin) {
        (Some(a), Some(b)) if a != b => (a, b),
        _ => return Err(Error::input("no central PDH slope inside the sweep")),
    };
    let spacing = (x[imax] - x[imin]).abs();
    let kappa0 = spacing / EXTREMA_SPACING_PER_KAPPA;
    let ratio0 = 0.9;
    let shape: Vec<f64> = x.iter().map(|&d| model.eval(&[1.0, kappa0, ratio0], d)).collect();
    let ss: f64 = shape.iter().map(|m| m * m).sum();
    if !(ss > 0.0) {
        return Err(Error::Numerical("degenerate PDH initial guess".into()));
    }
    let scale0 = shape.iter().zip(y).map(|(m, y)| m * y).sum::<f64>() / ss;
    let p0 = [scale0, kappa0, ratio0];
    let w = vec![1.0; n];
    let r = levenberg_marquardt(&model, &p0, &[scale0.abs() * 1e-6, kappa0 * 1e-6, 1e-6], &x, y, &w);
    let p = &r.params;
    Ok(PdhFit {
        kappa: p[1],
        kappa_ext: p[1] * p[2],
        scale: p[0],
        sigma_kappa: r.covariance[(1, 1)].max(0.0).sqrt(),
        converged: r.converged,
    })
}
