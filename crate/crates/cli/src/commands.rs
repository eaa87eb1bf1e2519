use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use mimtwin::analysis::series::{assemble_report, run_series_points, series_spectrum};
use mimtwin::analysis::{fit_lorentzian, fit_pdh, run_gorodetsky_protocol, SeriesPoint, ThermometryReport};
use mimtwin::config::RunConfig;
use mimtwin::constants::TAU;
use mimtwin::optics::{
    clipping_loss, coupling_vs_position, membrane_coefficients, mim_resonances, tilt_from_fringes,
    tilt_from_fringes_single_pass, CLIPPING_LOSS_BUDGET,
};
use mimtwin::spectra::{read_error_signal, read_spectrum, synthesize_pdh_sweep, write_error_signal, write_spectrum};

use crate::failure::Failure;

pub const DEFAULT_OUT_DIR: &str = "mimtwin-out";

pub fn load_config(path: Option<&Path>, preset: Option<&str>, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            RunConfig::from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::preset(preset.unwrap_or("measured-heating"))?,
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

pub fn out_dir(cfg: &RunConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.out_dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Writes to stdout. A closed reader (e.g. `| head`) ends the process
/// quietly, as it would for a C tool killed by SIGPIPE.
pub fn emit(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        r => Ok(r?),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

pub fn design(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let cav = cfg.empty_cavity()?;
    let mech = cfg.mechanical_mode()?;
    let mem = &cfg.membrane;
    let r = membrane_coefficients(mem, cfg.cavity.wavelength).r.norm();
    let spot = cav.mode.spot_radius_at(mem.position);
    let clip = clipping_loss(spot, mem.defect_diameter)?;
    let profile = coupling_vs_position(&cfg.cavity, mem, &mech, cfg.design.coupling_samples)
        .map_err(|e| Failure::Numerical(e.to_string()))?;
    let (lam, period) = (cfg.design.fringe_wavelength, cfg.design.fringe_period);

    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("fsr_hz", format!("{:e}", cav.fsr_hz));
    kv("kappa_hz", format!("{:e}", cav.kappa / TAU));
    kv("kappa_ext_hz", format!("{:e}", cav.kappa_ext / TAU));
    kv("finesse", format!("{:e}", cav.finesse));
    kv("waist_m", format!("{:e}", cav.mode.waist));
    kv("rayleigh_range_m", format!("{:e}", cav.mode.rayleigh_range));
    kv("spot_at_membrane_m", format!("{:e}", spot));
    kv("membrane_r", format!("{r:e}"));
    kv("x_zpf_m", format!("{:e}", mech.x_zpf));
    kv("g0_max_hz", format!("{:e}", profile.g0_max_analytic / TAU));
    kv("g0_max_numerical_hz", format!("{:e}", profile.max_g0() / TAU));
    kv("clipping_loss", format!("{clip:e}"));
    kv("clipping_budget", format!("{CLIPPING_LOSS_BUDGET:e}"));
    kv("clipping_within_budget", (clip < CLIPPING_LOSS_BUDGET).to_string());
    kv("tilt_double_pass_rad", format!("{:e}", tilt_from_fringes(lam, period)?));
    kv("tilt_single_pass_rad", format!("{:e}", tilt_from_fringes_single_pass(lam, period)?));
    emit(&s)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("design.txt"), &s)?;
    }
    Ok(())
}

pub fn sweep_position(cfg: &RunConfig, n_modes: u64, dir: &Path) -> Result<(), Failure> {
    if n_modes < 2 {
        return Err(Failure::Input("--n-modes must be >= 2".into()));
    }
    let mech = cfg.mechanical_mode()?;
    let n0 = cfg.cavity.nearest_mode_number();
    let modes = mim_resonances(&cfg.cavity, &cfg.membrane, n0..=n0 + n_modes - 1)
        .map_err(|e| Failure::Numerical(e.to_string()))?;
    let profile = coupling_vs_position(&cfg.cavity, &cfg.membrane, &mech, cfg.design.coupling_samples)
        .map_err(|e| Failure::Numerical(e.to_string()))?;

    let mut table = String::from("mode_number,omega_rad_s,delta_fsr_hz\n");
    for m in &modes {
        let _ = writeln!(table, "{},{:e},{:e}", m.mode_number, m.omega, m.delta_fsr_hz);
    }
    let mut curve = String::from("z_m,g0_hz\n");
    for (z, g) in &profile.samples {
        let _ = writeln!(curve, "{z:e},{:e}", g / TAU);
    }
    create_dir(dir)?;
    write_file(&dir.join("modes.csv"), &table)?;
    write_file(&dir.join("coupling.csv"), &curve)?;
    let max_dev = modes.iter().map(|m| m.delta_fsr_hz.abs()).fold(0.0, f64::max);
    emit(&format!(
        "modes={}\nmax_abs_delta_fsr_hz={max_dev:e}\ng0_max_hz={:e}\ng0_max_numerical_hz={:e}\n",
        modes.len(),
        profile.g0_max_analytic / TAU,
        profile.max_g0() / TAU
    ))?;
    Ok(())
}

fn spectrum_name(point: usize) -> String {
    format!("point_{point:03}.csv")
}

fn fig_csvs(report: &ThermometryReport) -> [(&'static str, String); 4] {
    let f_m = report.omega_m / TAU;
    let mut b = String::from("detuning_hz,power_w,n_cav,shift_hz,shift_err_hz,expected_shift_hz\n");
    let mut c = String::from("detuning_hz,power_w,background,background_err\n");
    let mut d = String::from("detuning_hz,power_w,n_cav,fwhm_hz,fwhm_err_hz,expected_fwhm_hz\n");
    let mut e = String::from("detuning_hz,power_w,n_cav,a_over_p2,a_over_p2_err,powerlaw_fit\n");
    for p in report.points.iter().filter(|p| p.converged()) {
        let f = p.fit.expect("converged point has a fit");
        let det = p.detuning / TAU;
        let p2 = p.power_w * p.power_w;
        let _ = writeln!(
            b,
            "{det:e},{:e},{:e},{:e},{:e},{:e}",
            p.power_w,
            p.n_cav,
            f.center_hz - f_m,
            f.center_err,
            p.expected_center_hz - f_m
        );
        let _ = writeln!(c, "{det:e},{:e},{:e},{:e}", p.power_w, f.background, f.background_err);
        let _ = writeln!(
            d,
            "{det:e},{:e},{:e},{:e},{:e},{:e}",
            p.power_w, p.n_cav, f.fwhm_hz, f.fwhm_err, p.expected_fwhm_hz
        );
        let line = report
            .detunings
            .iter()
            .find(|s| s.detuning == p.detuning)
            .map(|s| format!("{:e}", s.vs_power.eval(p.power_w)))
            .unwrap_or_default();
        let _ = writeln!(e, "{det:e},{:e},{:e},{:e},{:e},{line}", p.power_w, p.n_cav, f.area / p2, f.area_err / p2);
    }
    [("frequency_shift.csv", b), ("background.csv", c), ("linewidth.csv", d), ("occupation.csv", e)]
}

pub fn simulate_series(cfg: &RunConfig, dir: &Path) -> Result<(), Failure> {
    let scene = cfg.scene()?;
    let plan = cfg.series_plan();
    let points = run_series_points(&scene, &plan)?;
    for (i, p) in points.iter().enumerate() {
        if let Some(msg) = &p.error {
            eprintln!("point {i} (P = {:e} W, detuning = {:e} Hz): {msg}", p.power_w, p.detuning / TAU);
        }
    }
    let mut report = assemble_report(points, scene.mech.omega_m, scene.kappa, plan.weighted)
        .map_err(|e| Failure::NoReport(e.to_string()))?;

    let c = &cfg.calibration;
    let cal_scene = cfg.calibration_scene()?;
    let cal = run_gorodetsky_protocol(&cal_scene, c.t_hot, c.t_cold, c.beta, c.tone_offset, c.half_span, c.n_bins);
    match &cal {
        Ok(run) => report.t_bath_mk = Some(run.bath.t_bath * 1e3),
        Err(e) => eprintln!("calibration: {e}"),
    }

    let spectra_dir = dir.join("spectra");
    create_dir(&spectra_dir)?;
    for i in 0..report.points.len() {
        // failed points have no spectrum to store
        if let Ok(sp) = series_spectrum(&scene, &plan, i) {
            let path = spectra_dir.join(spectrum_name(i));
            let file = File::create(&path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            write_spectrum(&sp, &mut w)?;
            w.flush()?;
        }
    }
    write_file(&dir.join("report.csv"), &report.table_csv())?;
    write_file(&dir.join("summary.txt"), &report.summary())?;
    for (name, body) in fig_csvs(&report) {
        write_file(&dir.join(name), &body)?;
    }

    let p = &cfg.pdh;
    let sig = synthesize_pdh_sweep(
        scene.kappa,
        scene.kappa_ext,
        TAU * p.mod_freq_hz,
        p.span_hz,
        p.n_points,
        p.noise_rel,
        cfg.seed,
    )?;
    let mut w = BufWriter::new(File::create(dir.join("pdh_sweep.csv"))?);
    write_error_signal(&sig, &mut w)?;
    w.flush()?;
    let pdh = fit_pdh(&sig)?;
    write_file(
        &dir.join("pdh_fit.txt"),
        &format!(
            "kappa_hz={:e}\nsigma_kappa_hz={:e}\nkappa_ext_hz={:e}\nconverged={}\n",
            pdh.kappa / TAU,
            pdh.sigma_kappa / TAU,
            pdh.kappa_ext / TAU,
            pdh.converged
        ),
    )?;
    if let Ok(run) = &cal {
        write_file(
            &dir.join("calibration.txt"),
            &format!(
                "g0_hz={:e}\nn_mode_cold={:e}\nt_bath_mk={:e}\nhot_area_mech={:e}\nhot_area_cal={:e}\ncold_area_mech={:e}\ncold_area_cal={:e}\n",
                run.g0 / TAU,
                run.bath.n_mode,
                run.bath.t_bath * 1e3,
                run.hot.mech.area,
                run.hot.a_cal,
                run.cold.mech.area,
                run.cold.a_cal
            ),
        )?;
    }
    emit(&report.summary())
}

/// Status cell for a failed file, quoted so commas in the message survive.
fn csv_error(e: &mimtwin::Error) -> String {
    format!("\"error: {}\"", e.to_string().replace('"', "\"\""))
}

pub fn fit(cfg: &RunConfig, files: &[PathBuf], powerlaw: bool, pdh: bool, out: Option<&Path>) -> Result<(), Failure> {
    let mut bad = 0usize;
    let mut csv = String::new();
    let mut points = Vec::new();
    if pdh {
        csv.push_str("file,status,kappa_hz,sigma_kappa_hz,kappa_ext_hz,converged\n");
        for f in files {
            let res = File::open(f)
                .map_err(mimtwin::Error::from)
                .and_then(|h| read_error_signal(BufReader::new(h)))
                .and_then(|s| fit_pdh(&s));
            match res {
                Ok(p) => {
                    let _ = writeln!(
                        csv,
                        "{},ok,{:e},{:e},{:e},{}",
                        f.display(),
                        p.kappa / TAU,
                        p.sigma_kappa / TAU,
                        p.kappa_ext / TAU,
                        p.converged
                    );
                }
                Err(e) => {
                    bad += 1;
                    let _ = writeln!(csv, "{},{},,,,", f.display(), csv_error(&e));
                }
            }
        }
    } else {
        let scene = cfg.scene()?;
        csv.push_str(
            "file,status,power_w,detuning_hz,center_hz,center_err_hz,fwhm_hz,fwhm_err_hz,area,area_err,background,converged\n",
        );
        for f in files {
            let res = File::open(f)
                .map_err(mimtwin::Error::from)
                .and_then(|h| read_spectrum(BufReader::new(h)))
                .and_then(|s| fit_lorentzian(&s, None).map(|fit| (s, fit)));
            match res {
                Ok((s, fit)) => {
                    let m = s.meta();
                    let _ = writeln!(
                        csv,
                        "{},ok,{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                        f.display(),
                        m.power_w,
                        m.detuning_hz,
                        fit.center_hz,
                        fit.center_err,
                        fit.fwhm_hz,
                        fit.fwhm_err,
                        fit.area,
                        fit.area_err,
                        fit.background,
                        fit.converged
                    );
                    let detuning = TAU * m.detuning_hz;
                    points.push(SeriesPoint {
                        power_w: m.power_w,
                        detuning,
                        seed: m.seed,
                        n_cav: scene.with_drive(m.power_w, detuning).n_cav(),
                        expected_center_hz: f64::NAN,
                        expected_fwhm_hz: f64::NAN,
                        expected_area: f64::NAN,
                        fit: Some(fit),
                        error: (!fit.converged).then(|| "fit did not converge".to_string()),
                    });
                }
                Err(e) => {
                    bad += 1;
                    let _ = writeln!(csv, "{},{},,,,,,,,,,", f.display(), csv_error(&e));
                }
            }
        }
    }
    emit(&csv)?;
    let summary = if powerlaw {
        let mech = cfg.mechanical_mode()?;
        let scene = cfg.scene()?;
        let report = assemble_report(points, mech.omega_m, scene.kappa, cfg.series.weighted)
            .map_err(|e| Failure::NoReport(e.to_string()))?;
        emit(&report.summary())?;
        Some(report.summary())
    } else {
        None
    };
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("fits.csv"), &csv)?;
        if let Some(s) = summary {
            write_file(&dir.join("powerlaw_summary.txt"), &s)?;
        }
    }
    if bad > 0 {
        return Err(Failure::Input(format!("{bad} of {} files failed", files.len())));
    }
    Ok(())
}
