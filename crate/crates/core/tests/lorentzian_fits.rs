//! Monte-Carlo behaviour of the Lorentzian fit on synthetic periodograms.

use mimtwin::analysis::fit_lorentzian;
use mimtwin::config::RunConfig;
use mimtwin::constants::TAU;
use mimtwin::spectra::{expected_spectrum, synthesize_spectrum, SpectrumScene};

fn scene() -> SpectrumScene {
    let s = RunConfig::preset("measured-heating").unwrap().scene().unwrap();
    SpectrumScene { n_averages: 100, ..s.with_drive(5e-6, -TAU * 1.5e6) }
}

fn within(x: f64, truth: f64, sigma: f64, k: f64) -> bool {
    sigma > 0.0 && (x - truth).abs() <= k * sigma
}

#[test]
fn three_sigma_coverage_over_100_seeds() {
    let base = scene();
    let op = base.operating_point().unwrap();
    let (lo, hi) = base.suggested_span(30.0).unwrap();
    let mut hits = 0;
    for seed in 0..100 {
        let sp = synthesize_spectrum(&SpectrumScene { seed, ..base.clone() }, lo, hi, 2401).unwrap();
        let f = fit_lorentzian(&sp, None).unwrap();
        if f.converged
            && within(f.center_hz, op.center_hz(), f.center_err, 3.0)
            && within(f.fwhm_hz, op.fwhm_hz(), f.fwhm_err, 3.0)
            && within(f.area, op.peak_area, f.area_err, 3.0)
        {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}/100 seeds within 3 sigma");
}

#[test]
fn noiseless_fit_is_exact_across_operating_points() {
    let base = scene();
    for (p, det_hz) in [(1e-6, -1.0e6), (5e-6, -1.5e6), (10e-6, -2.0e6f64)] {
        let s = base.with_drive(p, TAU * det_hz);
        let op = s.operating_point().unwrap();
        let (lo, hi) = s.suggested_span(30.0).unwrap();
        let f = fit_lorentzian(&expected_spectrum(&s, lo, hi, 2401).unwrap(), None).unwrap();
        assert!(f.converged);
        assert!(((f.center_hz - op.center_hz()) / op.fwhm_hz()).abs() < 1e-6);
        assert!(((f.fwhm_hz - op.fwhm_hz()) / op.fwhm_hz()).abs() < 1e-6);
        assert!(((f.area - op.peak_area) / op.peak_area).abs() < 1e-6);
    }
}

#[test]
fn flat_spectrum_has_no_peak() {
    let s = SpectrumScene { transduction: 0.0, ..scene() };
    let (lo, hi) = s.suggested_span(30.0).unwrap();
    for seed in 0..10 {
        let sp = synthesize_spectrum(&SpectrumScene { seed, ..s.clone() }, lo, hi, 2401).unwrap();
        match fit_lorentzian(&sp, None) {
            Ok(f) => assert!(!f.converged || f.area.abs() <= 3.0 * f.area_err, "seed {seed}: {f:?}"),
            Err(e) => assert!(matches!(e, mimtwin::Error::Numerical(_)), "seed {seed}: {e}"),
        }
    }
}

#[test]
fn background_tracks_power() {
    let base = scene();
    let fitted = |p: f64| {
        let s = base.with_drive(p, base.drive.detuning);
        let (lo, hi) = s.suggested_span(30.0).unwrap();
        fit_lorentzian(&expected_spectrum(&s, lo, hi, 2401).unwrap(), None).unwrap().background
    };
    let ratio = fitted(8e-6) / fitted(4e-6);
    assert!((ratio - 2.0).abs() < 1e-6, "ratio {ratio}");
}
