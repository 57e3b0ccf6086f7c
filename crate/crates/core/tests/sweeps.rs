use vlpkf::availability::LayoutModel;
use vlpkf::config::ExperimentConfig;
use vlpkf::experiment::{calibrate, sweep_blocking, sweep_leds, sweep_leds_with};
use vlpkf::report::{emit_results, parse_results, OutputFormat, Scheme};

fn cfg(routes: usize, schemes: &[Scheme]) -> ExperimentConfig {
    ExperimentConfig { routes, schemes: schemes.to_vec(), ..ExperimentConfig::default() }
}

#[test]
fn one_finite_row_per_scheme_and_probability() {
    let probs = [0.0, 0.2, 0.6];
    let report = sweep_blocking(&cfg(6, &Scheme::ALL), &probs).unwrap();
    let rows = report.rows();
    assert_eq!(rows.len(), probs.len() * Scheme::ALL.len());
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.sweep_value, probs[i / Scheme::ALL.len()]);
        assert_eq!(row.scheme, Scheme::ALL[i % Scheme::ALL.len()]);
        assert!(row.rmse_m.is_finite() && row.rmse_m >= 0.0);
        assert_eq!((row.routes, row.seed), (6, 1));
    }
}

#[test]
fn full_blocking_drops_the_unfiltered_row() {
    let report = sweep_blocking(&cfg(3, &[Scheme::None, Scheme::Conventional, Scheme::Fixed]), &[1.0]).unwrap();
    let rows = report.rows();
    assert_eq!(rows.iter().map(|r| r.scheme).collect::<Vec<_>>(), [Scheme::Conventional, Scheme::Fixed]);
    // both filters only predict from the same prior
    assert_eq!(rows[0].rmse_m, rows[1].rmse_m);
}

#[test]
fn seed_changes_results() {
    let a = sweep_blocking(&cfg(3, &[Scheme::None]), &[0.2]).unwrap();
    let b = sweep_blocking(&ExperimentConfig { master_seed: 2, ..cfg(3, &[Scheme::None]) }, &[0.2]).unwrap();
    assert_eq!(a, sweep_blocking(&cfg(3, &[Scheme::None]), &[0.2]).unwrap());
    assert_ne!(a.rows()[0].rmse_m, b.rows()[0].rmse_m);
}

#[test]
fn results_round_trip_through_files() {
    let rows = sweep_blocking(&cfg(2, &[Scheme::None, Scheme::Fixed]), &[0.1, 0.3]).unwrap().rows();
    let dir = tempfile::tempdir().unwrap();
    for format in [OutputFormat::Csv, OutputFormat::Json] {
        let path = dir.path().join("rows");
        emit_results(&rows, &path, format).unwrap();
        let back = parse_results(std::fs::File::open(&path).unwrap(), format).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert!((a.rmse_m - b.rmse_m).abs() <= 5e-6 * a.rmse_m);
            assert_eq!((a.scheme, a.routes, a.seed, a.sweep_value), (b.scheme, b.routes, b.seed, b.sweep_value));
        }
    }
    let missing = dir.path().join("no").join("such.csv");
    assert!(matches!(emit_results(&rows, &missing, OutputFormat::Csv), Err(vlpkf::Error::Io(_))));
}

#[test]
fn unfiltered_error_falls_with_more_leds() {
    // from 3 to 4 LEDs the single-AP bearing gets worse (see hybrid_error_falls_with_more_leds)
    let counts = [3, 4, 5, 6, 7];
    let report = sweep_leds(&cfg(200, &[Scheme::None]), &counts).unwrap();
    let rmse: Vec<f64> = report.rows().iter().map(|r| r.rmse_m).collect();
    assert!(rmse[1..].windows(2).all(|w| w[1] <= w[0]), "{rmse:?}");
}

#[test]
fn hybrid_error_falls_with_more_leds() {
    // isolated bumps between neighboring counts occur; the trend over the range holds
    let table = calibrate(&ExperimentConfig::default(), &[3, 7, 20]).unwrap();
    for model in LayoutModel::measuring().skip(1) {
        let omega: Vec<f64> = [3, 7, 20].iter().map(|&n| table.omega(model, n).unwrap()).collect();
        assert!(omega.windows(2).all(|w| w[1] < w[0]), "{model}: {omega:?}");
    }
}

#[test]
fn led_sweep_uses_coefficients_of_each_count() {
    let c = ExperimentConfig {
        calibration: vlpkf::calibration::CalibrationSettings { grid_spacing_m: 0.5, draws: 2 },
        ..cfg(2, &[Scheme::Calibrated])
    };
    let table = calibrate(&c, &[3, 7]).unwrap();
    let report = sweep_leds_with(&c, &[3, 7], Some(&table)).unwrap();
    let eta = |i: usize| *report.points[i].schemes[0].coefficients.unwrap().etas();
    assert_ne!(eta(0), eta(1));
    let expected = vlpkf::calibration::calibrated_coefficients(&table, 3).unwrap();
    assert_eq!(eta(0), *expected.etas());
}

#[test]
fn calibration_is_a_function_of_config_and_seed() {
    let c = ExperimentConfig {
        calibration: vlpkf::calibration::CalibrationSettings { grid_spacing_m: 0.5, draws: 2 },
        ..ExperimentConfig::default()
    };
    let a = calibrate(&c, &[5]).unwrap();
    assert_eq!(a, calibrate(&ExperimentConfig { threads: Some(1), ..c.clone() }, &[5]).unwrap());
    assert_ne!(a, calibrate(&ExperimentConfig { master_seed: 5, ..c }, &[5]).unwrap());
}
