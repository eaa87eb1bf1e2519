//! Full cooling series on the built-in presets.

use mimtwin::analysis::run_cooling_series;
use mimtwin::config::RunConfig;

fn report(name: &str) -> mimtwin::analysis::ThermometryReport {
    let cfg = RunConfig::preset(name).unwrap();
    run_cooling_series(&cfg.scene().unwrap(), &cfg.series_plan()).unwrap()
}

#[test]
fn literature_preset_recovers_its_exponent() {
    let r = report("literature-heating");
    assert!((r.alpha - 0.55).abs() <= 0.05, "alpha {}", r.alpha);
}

#[test]
fn report_serializations_cover_every_point() {
    let r = report("measured-heating");
    let csv = r.table_csv();
    assert_eq!(csv.lines().count(), r.points.len() + 1);
    assert!(csv.lines().skip(1).all(|l| l.split(',').count() == csv.lines().next().unwrap().split(',').count()));
    let summary = r.summary();
    for key in ["slope_s=", "sigma_s=", "alpha=", "g0_hz=", "t_bath_mk="] {
        assert!(summary.lines().any(|l| l.starts_with(key)), "missing {key}");
    }
    assert_eq!(r.alpha - r.slope_s, 1.0);
}
