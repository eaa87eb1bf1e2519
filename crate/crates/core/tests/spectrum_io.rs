use std::time::{Duration, Instant};

use mimtwin::config::RunConfig;
use mimtwin::spectra::{read_spectrum, synthesize_spectrum, write_spectrum};

#[test]
fn million_bin_round_trip_under_one_second() {
    let scene = RunConfig::preset("measured-heating").unwrap().scene().unwrap();
    let (lo, hi) = scene.suggested_span(2000.0).unwrap();
    let sp = synthesize_spectrum(&scene, lo, hi, 1_000_000).unwrap();
    let start = Instant::now();
    let mut buf = Vec::new();
    write_spectrum(&sp, &mut buf).unwrap();
    let back = read_spectrum(buf.as_slice()).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(back, sp);
    assert!(elapsed < Duration::from_secs(1), "{elapsed:?}");
}
