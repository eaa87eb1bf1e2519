//! Measurement pipeline: spectral and error-signal fits, power-law
//! regression, coupling calibration and the cooling-series report.

pub mod calibration;
mod lm;
pub mod lorentzian;
pub mod pdh;
pub mod powerlaw;
pub mod series;

pub use calibration::{
    gorodetsky_bath, gorodetsky_g0, infer_g0_from_damping, measure_peaks, run_gorodetsky_protocol, BathEstimate,
    G0Estimate, GorodetskyRun, PeakAreas,
};
pub use lorentzian::{fit_lorentzian, fit_lorentzian_excluding, LorentzianFit};
pub use pdh::{fit_pdh, PdhFit};
pub use powerlaw::{fit_powerlaw, PowerLawFit, PowerLawPoint};
pub use series::{run_cooling_series, SeriesPlan, SeriesPoint, ThermometryReport};
