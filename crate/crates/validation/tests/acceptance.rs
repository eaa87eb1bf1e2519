//! One line per acceptance criterion, `criterion N: PASS|FAIL name: detail`.
//!
//! Runs as a plain binary (no libtest harness) so every line is printed even
//! when output capture is on. Exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mimtwin::analysis::{fit_pdh, fit_powerlaw, run_cooling_series, run_gorodetsky_protocol, ThermometryReport};
use mimtwin::backaction::{damping_kernel, intracavity_photons, steady_state_occupation, OpticalDrive};
use mimtwin::config::RunConfig;
use mimtwin::constants::{C, TAU};
use mimtwin::heating::HeatingModel;
use mimtwin::optics::{
    coupling_vs_position, empty_cavity_props, finesse_from_linewidth, membrane_coefficients, MembraneSpec, MimCavity,
};
use mimtwin::spectra::synthesize_pdh_sweep;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestError, TestRunner};

const PROPERTY_CASES: u32 = 1000;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn preset(name: &str) -> RunConfig {
    RunConfig::preset(name).expect("built-in preset")
}

fn within_rel(x: f64, target: f64, rel: f64) -> bool {
    ((x - target) / target).abs() <= rel
}

fn series(cfg: &RunConfig, seed: u64) -> ThermometryReport {
    let mut scene = cfg.scene().expect("preset scene");
    scene.seed = seed;
    run_cooling_series(&scene, &cfg.series_plan()).expect("series report")
}

fn finesse() -> Outcome {
    let start = Instant::now();
    let f = finesse_from_linewidth(24e-3, TAU * 2.0e6).unwrap();
    let cav = empty_cavity_props(&preset("measured-heating").cavity).unwrap();
    let elapsed = start.elapsed();
    let pass = within_rel(f, 3.1e3, 0.05) && within_rel(cav.finesse, 3.1e3, 0.05) && elapsed < Duration::from_millis(1);
    outcome(pass, format!("finesse = {f:.1}, preset cavity {:.1} (3.1e3 +/- 5%), {elapsed:?} (< 1 ms)", cav.finesse))
}

/// Airy formula for a lossless slab in vacuum, independent of the
/// characteristic-matrix code path.
fn airy_reflection(n: f64, d: f64, wavelength: f64) -> Complex64 {
    let r01 = (1.0 - n) / (1.0 + n);
    let phase = Complex64::from_polar(1.0, 2.0 * TAU * n * d / wavelength);
    r01 * (1.0 - phase) / (1.0 - r01 * r01 * phase)
}

fn coupling_ceiling() -> Outcome {
    let cfg = preset("measured-heating");
    let r = membrane_coefficients(&cfg.membrane, cfg.cavity.wavelength).r.norm();
    let oracle = airy_reflection(cfg.membrane.refractive_index, cfg.membrane.thickness, cfg.cavity.wavelength).norm();
    let mech = cfg.mechanical_mode().unwrap();
    let g0 = mimtwin::optics::g0_max_analytic(&cfg.cavity, &cfg.membrane, &mech) / TAU;
    let pass = within_rel(g0, 8.0, 0.10) && (r - oracle).abs() <= 1e-6 && (r - 0.47).abs() < 0.005;
    outcome(pass, format!("g0_max/2pi = {g0:.3} Hz (8 +/- 10%), |r| = {r:.6}, oracle {oracle:.6}"))
}

fn numerical_coupling() -> Outcome {
    let cfg = preset("measured-heating");
    let mech = cfg.mechanical_mode().unwrap();
    let profile = coupling_vs_position(&cfg.cavity, &cfg.membrane, &mech, 400).unwrap();
    let ratio = profile.max_g0() / profile.g0_max_analytic;
    outcome(
        (ratio - 1.0).abs() <= 0.05,
        format!(
            "max_z g0 = {:.3} Hz vs analytic {:.3} Hz, ratio {ratio:.4} (1 +/- 5%)",
            profile.max_g0() / TAU,
            profile.g0_max_analytic / TAU
        ),
    )
}

fn photon_number() -> Outcome {
    let cfg = preset("measured-heating");
    let scene = cfg.scene().unwrap();
    let drive = |p: f64| OpticalDrive { input_power: p, detuning: -TAU * 1.5e6, ..scene.drive };
    let n = intracavity_photons(&drive(5e-6), scene.kappa);
    let ratio = n / 2.2e6;
    let mut worst: f64 = 0.0;
    for p in [1e-9, 3.3e-7, 5e-6, 1e-3, 0.7] {
        let lin = intracavity_photons(&drive(p), scene.kappa) / (p / 5e-6);
        worst = worst.max(((lin - n) / n).abs());
    }
    let pass = (0.5..=2.0).contains(&ratio) && worst <= 1e-12 && within_rel(scene.kappa_ext / scene.kappa, 0.95, 1e-12);
    outcome(
        pass,
        format!("n_cav = {n:.4e} ({ratio:.3}x of 2.2e6, factor-2 band), linearity error {worst:.1e} (<= 1e-12)"),
    )
}

fn thermometry_measured() -> Outcome {
    let cfg = preset("measured-heating");
    let start = Instant::now();
    let mut hits = 0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    const SEEDS: u64 = 50;
    for seed in 1..=SEEDS {
        let r = series(&cfg, seed);
        lo = lo.min(r.slope_s);
        hi = hi.max(r.slope_s);
        if (r.slope_s + 0.67).abs() <= 0.05 && (r.alpha - 0.33).abs() <= 0.05 {
            hits += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = hits * 10 >= SEEDS * 9 && elapsed < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "{hits}/{SEEDS} seeds with s = -0.67 +/- 0.05 and alpha = 0.33 +/- 0.05 (need >= 90%), s in [{lo:.4}, {hi:.4}], {:.1} s (< 60 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn thermometry_no_heating() -> Outcome {
    let cfg = preset("no-heating");
    let slopes: Vec<f64> = (1..=10).map(|seed| series(&cfg, seed).slope_s).collect();
    let worst = slopes.iter().map(|s| (s + 1.0).abs()).fold(0.0, f64::max);
    outcome(worst <= 0.03, format!("10 seeds, max |s + 1| = {worst:.4} (<= 0.03)"))
}

fn literature_exponent() -> Outcome {
    let h = HeatingModel::literature();
    let alpha = h.effective_exponent();
    let identity = alpha == h.beta_temp * (1.0 + h.beta_damp);
    let cfg = preset("literature-heating");
    let pass = identity && (alpha - 0.55).abs() <= 0.005 && cfg.heating == h;
    outcome(pass, format!("alpha = {alpha:.4} = {} * (1 + {}), target 0.55", h.beta_temp, h.beta_damp))
}

fn pdh_round_trip() -> Outcome {
    let cfg = preset("measured-heating");
    let scene = cfg.scene().unwrap();
    let p = &cfg.pdh;
    let mut worst: f64 = 0.0;
    for seed in 1..=10 {
        let sig = synthesize_pdh_sweep(
            scene.kappa,
            scene.kappa_ext,
            TAU * p.mod_freq_hz,
            p.span_hz,
            p.n_points,
            p.noise_rel,
            seed,
        )
        .unwrap();
        let fit = fit_pdh(&sig).unwrap();
        worst = worst.max(((fit.kappa - scene.kappa) / scene.kappa).abs());
    }
    outcome(
        worst <= 0.02,
        format!("10 seeds, kappa/2pi = 2.0 MHz recovered with max relative error {worst:.2e} (<= 2%)"),
    )
}

fn gorodetsky_round_trip() -> Outcome {
    let cfg = preset("measured-heating");
    let c = &cfg.calibration;
    let mut scene = cfg.calibration_scene().unwrap();
    let g0_true = scene.g0;
    let (mut g_worst, mut t_worst): (f64, f64) = (0.0, 0.0);
    for seed in 1..=10 {
        scene.seed = seed;
        let run =
            run_gorodetsky_protocol(&scene, c.t_hot, c.t_cold, c.beta, c.tone_offset, c.half_span, c.n_bins).unwrap();
        g_worst = g_worst.max(((run.g0 - g0_true) / g0_true).abs());
        t_worst = t_worst.max(((run.bath.t_bath - c.t_cold) / c.t_cold).abs());
    }
    outcome(
        g_worst <= 0.05 && t_worst <= 0.15 && c.t_cold == 0.643,
        format!("10 seeds, g0 max error {g_worst:.3} (<= 5%), T_bath = 643 mK max error {t_worst:.3} (<= 15%)"),
    )
}

fn g0_inference() -> Outcome {
    let cfg = preset("measured-heating");
    let r = series(&cfg, cfg.seed);
    let g0 = r.g0_hz.unwrap_or(f64::NAN);
    outcome(within_rel(g0, 1.2, 0.05), format!("g0/2pi = {g0:.4} Hz from linewidth vs n_cav (1.2 +/- 5%)"))
}

fn shot_noise_linearity() -> Outcome {
    let mut cfg = preset("measured-heating");
    cfg.series.powers_w = (0..13).map(|i| 1e-6 * 10f64.powf(i as f64 / 4.0)).collect();
    cfg.series.detunings_hz = vec![-1.5e6];
    let r = series(&cfg, cfg.seed);
    let pts: Vec<_> = r
        .points
        .iter()
        .filter_map(|p| p.fit.filter(|f| f.converged).map(|f| (p.power_w, f.background, Some(f.background_err))))
        .collect();
    let fit = fit_powerlaw(&pts, false).unwrap();
    let decades = (pts.last().unwrap().0 / pts[0].0).log10();
    outcome(
        (fit.exponent - 1.0).abs() <= 0.02 && decades >= 3.0 - 1e-9,
        format!("background ~ P^{:.4} over {decades:.1} decades, {} points (1.00 +/- 0.02)", fit.exponent, pts.len()),
    )
}

fn property(name: &str, result: Result<(), TestError<impl std::fmt::Debug>>) -> (bool, String) {
    match result {
        Ok(()) => (true, format!("{name} ok")),
        Err(e) => (false, format!("{name} FAILED: {e}")),
    }
}

fn property_suites() -> Outcome {
    let config = Config { cases: PROPERTY_CASES, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new(config);
    let mut results = Vec::new();

    let r = runner.run(&(1.1f64..3.5, 1e-9f64..1e-6, 400e-9f64..2e-6), |(n, d, lam)| {
        let mem = MembraneSpec {
            thickness: d,
            refractive_index: n,
            position: 1e-3,
            defect_diameter: 1e-4,
            tilt: 0.0,
            mode_overlap: 1.0,
        };
        let c = membrane_coefficients(&mem, lam);
        let sum = c.r.norm_sqr() + c.t.norm_sqr();
        prop_assert!((sum - 1.0).abs() < 1e-12, "|r|^2 + |t|^2 = {sum}");
        Ok(())
    });
    results.push(property("unitarity", r));

    let r = runner.run(&(1e3f64..1e8, 1e3f64..1e8, -1e8f64..1e8), |(kappa, omega, delta)| {
        let a = damping_kernel(delta, kappa, omega);
        let b = damping_kernel(-delta, kappa, omega);
        prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE), "{a} vs {b}");
        Ok(())
    });
    results.push(property("antisymmetry", r));

    let r = runner.run(&(1e3f64..1e8, 1e3f64..1e8, 1e-3f64..1e8), |(kappa, omega, neg)| {
        let k = damping_kernel(-neg, kappa, omega);
        prop_assert!(k > 0.0, "kernel {k} at delta = {}", -neg);
        Ok(())
    });
    results.push(property("red-damping", r));

    let r = runner.run(&(0.5e-3f64..20e-3, 1.2f64..3.0, 10e-9f64..200e-9), |(z, n, d)| {
        let cav = MimCavity { length: 24e-3, position: z, thickness: d, index: n };
        let lam = 805e-9;
        let mode = (2.0 * cav.length / lam).round() as u64;
        let shift = |c: &MimCavity| c.resonance_shift(mode).map_err(|e| TestCaseError::fail(e.to_string()));
        let a = shift(&cav)?;
        let b = shift(&MimCavity { position: z + 0.5 * lam, ..cav })?;
        // one half-wavelength moves the standing wave by one full period
        let fsr = C * std::f64::consts::PI / cav.length;
        prop_assert!((a - b).abs() <= 1e-3 * fsr, "shift {a} vs {b} rad/s");
        Ok(())
    });
    results.push(property("lambda/2-periodicity", r));

    let r = runner.run(&(1e-3f64..1e3, 1.0f64..1e7, -0.99f64..1e4), |(gamma_m, n_th, rel)| {
        let gamma_opt = rel * gamma_m;
        let n_f = steady_state_occupation(gamma_m, n_th, gamma_opt, None).unwrap();
        let lhs = n_f * (gamma_opt + gamma_m);
        let rhs = gamma_m * n_th;
        prop_assert!(((lhs - rhs) / rhs).abs() <= 1e-12, "{lhs} vs {rhs}");
        Ok(())
    });
    results.push(property("occupation-identity", r));

    let r = runner.run(
        &(1e3f64..1e8, 1e3f64..1e8, 1e-3f64..1e8, 1e-6f64..1e6, 1e-4f64..1e3, 1.0f64..1e7),
        |(kappa, omega, neg, g2n, gamma_m, n_th)| {
            let gamma_opt = g2n * damping_kernel(-neg, kappa, omega);
            let n_f = steady_state_occupation(gamma_m, n_th, gamma_opt, None).unwrap();
            prop_assert!(n_f <= n_th, "n_f {n_f} > n_th {n_th}");
            Ok(())
        },
    );
    results.push(property("red-cooling", r));

    let pass = results.iter().all(|(ok, _)| *ok);
    let detail: Vec<_> = results.into_iter().map(|(_, s)| s).collect();
    outcome(pass, format!("{PROPERTY_CASES} cases each: {}", detail.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("finesse", finesse),
        ("coupling ceiling", coupling_ceiling),
        ("numerical vs analytic coupling", numerical_coupling),
        ("photon number", photon_number),
        ("thermometry, measured heating", thermometry_measured),
        ("thermometry, no heating", thermometry_no_heating),
        ("literature exponent", literature_exponent),
        ("PDH round trip", pdh_round_trip),
        ("Gorodetsky round trip", gorodetsky_round_trip),
        ("g0 inference", g0_inference),
        ("shot-noise linearity", shot_noise_linearity),
        ("property suites", property_suites),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {tag} {name}: {}", i + 1, o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
