use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Standard error of `exponent`.
    pub sigma_exponent: f64,
    pub r_squared: f64,
}

impl PowerLawFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.prefactor * x.powf(self.exponent)
    }
}

/// One observation `(x, y, sigma_y)`.
pub type PowerLawPoint = (f64, f64, Option<f64>);

/// Linear regression of `ln y` on `ln x`.
///
/// Unweighted by default. With `weighted = true` each point gets weight
/// `(y / sigma_y)²`, the inverse variance of `ln y` to first order, and every
/// point must carry a positive `sigma_y`. The slope error is the classical
/// standard error with the residual variance estimated from the data.
pub fn fit_powerlaw(points: &[PowerLawPoint], weighted: bool) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::input(format!("power-law fit needs >= 3 points, got {}", points.len())));
    }
    let mut u = Vec::with_capacity(points.len());
    let mut v = Vec::with_capacity(points.len());
    let mut w = Vec::with_capacity(points.len());
    for (i, &(x, y, s)) in points.iter().enumerate() {
        if !(x > 0.0 && y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::domain(format!("point {i}: x and y must be finite and > 0")));
        }
        u.push(x.ln());
        v.push(y.ln());
        w.push(if weighted {
            match s {
                Some(s) if s > 0.0 && s.is_finite() => (y / s).powi(2),
                _ => return Err(Error::domain(format!("point {i}: weighted fit needs sigma_y > 0"))),
            }
        } else {
            1.0
        });
    }
    let sw: f64 = w.iter().sum();
    let ub = u.iter().zip(&w).map(|(u, w)| u * w).sum::<f64>() / sw;
    let vb = v.iter().zip(&w).map(|(v, w)| v * w).sum::<f64>() / sw;
    let suu: f64 = u.iter().zip(&w).map(|(u, w)| w * (u - ub).powi(2)).sum();
    if !(suu > 0.0) {
        return Err(Error::input("x values are not distinct"));
    }
    let suv: f64 = u.iter().zip(&v).zip(&w).map(|((u, v), w)| w * (u - ub) * (v - vb)).sum();
    let svv: f64 = v.iter().zip(&w).map(|(v, w)| w * (v - vb).powi(2)).sum();
    let slope = suv / suu;
    let intercept = vb - slope * ub;
    let sse: f64 = u.iter().zip(&v).zip(&w).map(|((u, v), w)| w * (v - intercept - slope * u).powi(2)).sum();
    let n = points.len() as f64;
    let sigma = (sse / (n - 2.0) / suu).max(0.0).sqrt();
    let r_squared = if svv > 0.0 { 1.0 - sse / svv } else { 1.0 };
    Ok(PowerLawFit { exponent: slope, prefactor: intercept.exp(), sigma_exponent: sigma, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn ideal_cooling_slope() {
        let pts: Vec<_> = logspace(1e-6, 1e-5, 12).into_iter().map(|x| (x, 3.0 / x, None)).collect();
        let fit = fit_powerlaw(&pts, false).unwrap();
        assert!((fit.exponent + 1.0).abs() < 1e-12);
        assert!(fit.sigma_exponent < 1e-12);
        assert!((fit.prefactor / 3.0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn noisy_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<_> = logspace(1.0, 10.0, 12)
            .into_iter()
            .map(|x| {
                let y = 2.0 * x.powf(-0.67) * (1.0 + 0.05 * (rng.random::<f64>() * 2.0 - 1.0) * 3f64.sqrt());
                (x, y, Some(0.05 * y))
            })
            .collect();
        for weighted in [false, true] {
            let fit = fit_powerlaw(&pts, weighted).unwrap();
            assert!((fit.exponent + 0.67).abs() < 0.05, "{fit:?}");
            assert!(fit.sigma_exponent > 0.0 && fit.sigma_exponent < 0.05);
        }
    }

    #[test]
    fn bad_inputs() {
        let two = [(1.0, 1.0, None), (2.0, 0.5, None)];
        assert!(matches!(fit_powerlaw(&two, false), Err(Error::Input(_))));
        let neg = [(1.0, 1.0, None), (2.0, -0.5, None), (3.0, 1.0, None)];
        assert!(matches!(fit_powerlaw(&neg, false), Err(Error::Domain(_))));
        let same = [(2.0, 1.0, None), (2.0, 0.5, None), (2.0, 1.0, None)];
        assert!(matches!(fit_powerlaw(&same, false), Err(Error::Input(_))));
        let unweighted = [(1.0, 1.0, None), (2.0, 0.5, None), (3.0, 0.3, None)];
        assert!(matches!(fit_powerlaw(&unweighted, true), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn exact_data_exact_exponent(s in -3.0f64..3.0, c in 1e-3f64..1e3, x0 in 1e-6f64..1.0, n in 3usize..30) {
            let pts: Vec<_> = logspace(x0, 100.0 * x0, n).into_iter().map(|x| (x, c * x.powf(s), None)).collect();
            let fit = fit_powerlaw(&pts, false).unwrap();
            prop_assert!((fit.exponent - s).abs() <= 1e-12);
            prop_assert!(fit.sigma_exponent >= 0.0);
        }
    }
}
