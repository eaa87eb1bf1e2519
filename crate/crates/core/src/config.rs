//! Run configuration: one JSON document with a section per module.
//!
//! Parsing rejects unknown keys and reports the offending field path.
//! [`RunConfig::validate`] checks every nested invariant before any
//! computation; all builders assume a validated config.

use serde::{Deserialize, Serialize};

use crate::analysis::SeriesPlan;
use crate::backaction::{zero_point_fluctuation, MechanicalMode, OpticalDrive};
use crate::constants::{C, TAU};
use crate::heating::HeatingModel;
use crate::optics::{empty_cavity_props, CavityGeometry, EmptyCavity, MembraneSpec};
use crate::spectra::SpectrumScene;
use crate::{Error, Result};

pub const PRESETS: [&str; 3] = ["measured-heating", "no-heating", "literature-heating"];

/// Relative tolerance on a user-supplied `x_zpf`.
pub const X_ZPF_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicalConfig {
    pub frequency_hz: f64,
    pub quality_factor: f64,
    /// kg
    pub m_eff: f64,
    /// Optional cross-check, m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_zpf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    /// W
    pub input_power: f64,
    pub detuning_hz: f64,
    pub mode_match: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub g0_hz: f64,
    pub transduction: f64,
    pub shot_coeff: f64,
    pub n_averages: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub powers_w: Vec<f64>,
    pub detunings_hz: Vec<f64>,
    pub span_linewidths: f64,
    pub n_bins: usize,
    #[serde(default)]
    pub weighted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdhConfig {
    pub mod_freq_hz: f64,
    pub span_hz: f64,
    pub n_points: usize,
    /// Additive noise relative to the peak error amplitude.
    pub noise_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Phase-modulation depth, rad.
    pub beta: f64,
    /// On-resonance probe power, W.
    pub probe_power: f64,
    /// Bath temperature of the calibration stage, K.
    pub t_hot: f64,
    /// Bath temperature of the measurement stage, K.
    pub t_cold: f64,
    /// Tone offset from the peak, linewidths.
    pub tone_offset: f64,
    pub half_span: f64,
    pub n_bins: usize,
}

/// Inputs for the design report that are not part of any domain type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    /// Back-reflection fringe period across the membrane, m.
    pub fringe_period: f64,
    /// Wavelength of the fringe measurement, m.
    pub fringe_wavelength: f64,
    /// Positions sampled per half-wavelength in the coupling sweep.
    pub coupling_samples: usize,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig { fringe_period: 0.8e-3, fringe_wavelength: 830e-9, coupling_samples: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub seed: u64,
    pub cavity: CavityGeometry,
    pub membrane: MembraneSpec,
    pub mechanical: MechanicalConfig,
    pub drive: DriveConfig,
    pub heating: HeatingModel,
    pub scene: SceneConfig,
    pub series: SeriesConfig,
    pub pdh: PdhConfig,
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub design: DesignConfig,
}

fn at(path: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Domain(msg) | Error::Input(msg) => Error::Config { path: path.to_string(), msg },
        other => other,
    }
}

fn check(ok: bool, path: &str, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config { path: path.into(), msg: msg.into() })
    }
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let heating = match name {
            "measured-heating" => HeatingModel::measured(),
            "no-heating" => HeatingModel::disabled(),
            "literature-heating" => HeatingModel::literature(),
            other => {
                return Err(Error::Config {
                    path: "preset".into(),
                    msg: format!("unknown preset `{other}`; known: {}", PRESETS.join(", ")),
                })
            }
        };
        let length = 24e-3;
        // total round-trip loss giving kappa/2pi = 2.0 MHz, 95% of it through the input mirror
        let loss = TAU * 2.0e6 / (C / (2.0 * length));
        let t_in = 0.95 * loss;
        let t_out = 5e-5;
        Ok(RunConfig {
            preset: Some(name.to_string()),
            out_dir: None,
            seed: 1,
            cavity: CavityGeometry {
                length,
                roc: 25e-3,
                wavelength: 805e-9,
                t_in,
                t_out,
                internal_loss: loss - t_in - t_out,
            },
            membrane: MembraneSpec {
                thickness: 50e-9,
                refractive_index: 2.0,
                position: 1e-3,
                defect_diameter: 230e-6,
                tilt: 0.0,
                mode_overlap: 1.0,
            },
            mechanical: MechanicalConfig { frequency_hz: 1.30e6, quality_factor: 1e9, m_eff: 2.1162e-11, x_zpf: None },
            drive: DriveConfig { input_power: 5e-6, detuning_hz: -1.5e6, mode_match: 0.8 },
            heating,
            scene: SceneConfig { g0_hz: 1.2, transduction: 3.5e12, shot_coeff: 1e6, n_averages: 100 },
            series: SeriesConfig {
                powers_w: logspace(1e-6, 10e-6, 12),
                detunings_hz: vec![-1.0e6, -1.5e6, -2.0e6],
                span_linewidths: 30.0,
                n_bins: 2401,
                weighted: false,
            },
            pdh: PdhConfig { mod_freq_hz: 20e6, span_hz: 30e6, n_points: 3001, noise_rel: 0.01 },
            calibration: CalibrationConfig {
                beta: 1e-3,
                probe_power: 1e-6,
                t_hot: 4.0,
                t_cold: 0.643,
                tone_offset: 10.0,
                half_span: 40.0,
                n_bins: 4001,
            },
            design: DesignConfig::default(),
        })
    }

    /// Parses and validates. Errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Config { path: e.path().to_string(), msg: e.inner().to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.cavity.validate().map_err(at("cavity"))?;
        self.membrane.validate(&self.cavity).map_err(at("membrane"))?;

        let m = &self.mechanical;
        check(m.frequency_hz > 0.0, "mechanical.frequency_hz", "must be > 0")?;
        check(m.quality_factor > 0.0, "mechanical.quality_factor", "must be > 0")?;
        check(m.m_eff > 0.0, "mechanical.m_eff", "must be > 0")?;
        if let Some(x) = m.x_zpf {
            let expect = zero_point_fluctuation(m.m_eff, TAU * m.frequency_hz);
            check(
                ((x - expect) / expect).abs() <= X_ZPF_TOLERANCE,
                "mechanical.x_zpf",
                &format!("{x:e} m inconsistent with m_eff and frequency (expected {expect:e} m)"),
            )?;
        }

        let d = &self.drive;
        check(d.input_power >= 0.0, "drive.input_power", "must be >= 0")?;
        check(d.detuning_hz.is_finite(), "drive.detuning_hz", "must be finite")?;
        check(d.mode_match > 0.0 && d.mode_match <= 1.0, "drive.mode_match", "must lie in (0, 1]")?;

        self.heating.validate().map_err(at("heating"))?;

        let s = &self.scene;
        check(s.g0_hz > 0.0, "scene.g0_hz", "must be > 0")?;
        check(s.transduction >= 0.0, "scene.transduction", "must be >= 0")?;
        check(s.shot_coeff >= 0.0, "scene.shot_coeff", "must be >= 0")?;
        check(s.n_averages >= 1, "scene.n_averages", "must be >= 1")?;

        self.series_plan().validate().map_err(at("series"))?;
        check(self.series.n_bins >= 64, "series.n_bins", "must be >= 64")?;

        let p = &self.pdh;
        check(p.mod_freq_hz > 0.0, "pdh.mod_freq_hz", "must be > 0")?;
        check(p.span_hz > 0.0, "pdh.span_hz", "must be > 0")?;
        check(p.n_points >= 16, "pdh.n_points", "must be >= 16")?;
        check(p.noise_rel >= 0.0, "pdh.noise_rel", "must be >= 0")?;

        let c = &self.calibration;
        check(c.beta > 0.0, "calibration.beta", "must be > 0")?;
        check(c.probe_power > 0.0, "calibration.probe_power", "must be > 0")?;
        check(c.t_hot > 0.0, "calibration.t_hot", "must be > 0")?;
        check(c.t_cold > 0.0, "calibration.t_cold", "must be > 0")?;
        check(c.tone_offset > 3.0, "calibration.tone_offset", "must exceed 3 linewidths")?;
        check(c.half_span > c.tone_offset, "calibration.half_span", "must exceed tone_offset")?;
        check(c.n_bins >= 64, "calibration.n_bins", "must be >= 64")?;

        let g = &self.design;
        check(g.fringe_period > 0.0, "design.fringe_period", "must be > 0")?;
        check(g.fringe_wavelength > 0.0, "design.fringe_wavelength", "must be > 0")?;
        check(g.coupling_samples >= 2, "design.coupling_samples", "must be >= 2")?;
        Ok(())
    }

    pub fn empty_cavity(&self) -> Result<EmptyCavity> {
        empty_cavity_props(&self.cavity)
    }

    pub fn mechanical_mode(&self) -> Result<MechanicalMode> {
        MechanicalMode::from_quality_factor(
            TAU * self.mechanical.frequency_hz,
            self.mechanical.quality_factor,
            self.mechanical.m_eff,
        )
    }

    pub fn scene(&self) -> Result<SpectrumScene> {
        let cav = self.empty_cavity()?;
        let scene = SpectrumScene {
            kappa: cav.kappa,
            kappa_ext: cav.kappa_ext,
            fsr_hz: cav.fsr_hz,
            mech: self.mechanical_mode()?,
            drive: OpticalDrive {
                input_power: self.drive.input_power,
                detuning: TAU * self.drive.detuning_hz,
                mode_match: self.drive.mode_match,
                kappa_ext: cav.kappa_ext,
                laser_omega: self.cavity.omega_c(),
            },
            heating: self.heating,
            g0: TAU * self.scene.g0_hz,
            transduction: self.scene.transduction,
            shot_coeff: self.scene.shot_coeff,
            cal_tone: None,
            n_averages: self.scene.n_averages,
            seed: self.seed,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn series_plan(&self) -> SeriesPlan {
        SeriesPlan {
            powers: self.series.powers_w.clone(),
            detunings: self.series.detunings_hz.iter().map(|d| TAU * d).collect(),
            span_linewidths: self.series.span_linewidths,
            n_bins: self.series.n_bins,
            weighted: self.series.weighted,
        }
    }

    /// Scene for the tone calibration: on-resonance weak probe.
    pub fn calibration_scene(&self) -> Result<SpectrumScene> {
        let s = self.scene()?;
        Ok(s.with_drive(self.calibration.probe_power, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let cfg = RunConfig::preset(name).unwrap();
            cfg.validate().unwrap();
            let back = RunConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
        }
        assert!(matches!(RunConfig::preset("nope"), Err(Error::Config { .. })));
    }

    #[test]
    fn default_linewidth_is_two_megahertz() {
        let cav = RunConfig::preset("measured-heating").unwrap().empty_cavity().unwrap();
        assert_relative_eq!(cav.kappa / TAU, 2.0e6, max_relative = 1e-12);
        assert_relative_eq!(cav.kappa_ext / cav.kappa, 0.95, max_relative = 1e-12);
    }

    fn json_error(edit: impl Fn(&mut serde_json::Value)) -> Error {
        let mut v = serde_json::to_value(RunConfig::preset("measured-heating").unwrap()).unwrap();
        edit(&mut v);
        RunConfig::from_json(&v.to_string()).unwrap_err()
    }

    fn path_of(e: Error) -> String {
        match e {
            Error::Config { path, .. } => path,
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn field_paths_in_errors() {
        assert_eq!(path_of(json_error(|v| v["cavity"]["roc"] = 0.02.into())), "cavity");
        assert_eq!(path_of(json_error(|v| v["cavity"]["lenght"] = 0.02.into())), "cavity.lenght");
        assert_eq!(path_of(json_error(|v| v["scene"]["g0_hz"] = "x".into())), "scene.g0_hz");
        assert_eq!(path_of(json_error(|v| v["drive"]["mode_match"] = 1.5.into())), "drive.mode_match");
        assert_eq!(path_of(json_error(|v| v["series"]["powers_w"] = vec![2e-6, 1e-6].into())), "series");
        assert_eq!(path_of(json_error(|v| v["bogus"] = 1.into())), "bogus");
    }

    #[test]
    fn x_zpf_cross_check() {
        let expect = zero_point_fluctuation(2.1162e-11, TAU * 1.30e6);
        let e = json_error(|v| v["mechanical"]["x_zpf"] = (expect * (1.0 + 2e-6)).into());
        assert_eq!(path_of(e), "mechanical.x_zpf");
        let mut v = serde_json::to_value(RunConfig::preset("measured-heating").unwrap()).unwrap();
        v["mechanical"]["x_zpf"] = (expect * (1.0 + 5e-7)).into();
        RunConfig::from_json(&v.to_string()).unwrap();
    }
}
