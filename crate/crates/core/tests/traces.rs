use nanofiber::calibration::{CalibrationConstants, MeasuredValue, Propagation};
use nanofiber::photon_synth::*;
use nanofiber::trace_analysis::*;
use proptest::prelude::*;

fn quiet_model(background: f64) -> EmitterModel {
    EmitterModel {
        excitation_rate: 0.0,
        background_rate: [background, background],
        intensity_jitter: 0.0,
        ..EmitterModel::reference()
    }
}

fn guided_trace(model: &EmitterModel, seconds: f64, seed: u64) -> CountTrace {
    let calib = CalibrationConstants::reference_setup();
    simulate_dual_channel(0.2, &calib, model, seconds, 0.1, &SimulationSeed::new(seed))
        .unwrap()
        .0
}

fn clean_emitter() -> EmitterModel {
    EmitterModel {
        intensity_jitter: 0.0,
        ..EmitterModel::reference()
    }
}

#[test]
fn two_level_trace_has_one_emitter() {
    let t = guided_trace(&EmitterModel::reference(), 300.0, 11);
    let seg = detect_levels(&t, &LevelOptions::default()).unwrap();
    assert_eq!(seg.emitter_count, 1, "{:?}", seg.level_values);
    assert_eq!(seg.level_values.len(), 2);
    assert!((seg.level_values[1] - 45.3).abs() < 2.0, "{:?}", seg.level_values);
}

#[test]
fn constant_background_has_no_emitter() {
    let t = guided_trace(&quiet_model(20_000.0), 100.0, 3);
    let seg = detect_levels(&t, &LevelOptions::default()).unwrap();
    assert_eq!(seg.emitter_count, 0, "{:?}", seg.level_values);
}

#[test]
fn two_independent_emitters_give_three_levels() {
    let a = guided_trace(&clean_emitter(), 600.0, 21);
    let b = guided_trace(&clean_emitter(), 600.0, 22);
    let counts = a.counts.iter().zip(&b.counts).map(|(x, y)| x + y).collect();
    let sum = CountTrace::new(0.1, 0.0, counts).unwrap();
    let seg = detect_levels(&sum, &LevelOptions::default()).unwrap();
    assert_eq!(seg.emitter_count, 2, "{:?}", seg.level_values);
}

#[test]
fn too_short_trace_is_rejected() {
    let t = CountTrace::new(0.1, 0.0, vec![3.0; MIN_TRACE_BINS - 1]).unwrap();
    assert!(detect_levels(&t, &LevelOptions::default()).is_err());
}

#[test]
fn poisson_level_mean_matches_rate() {
    // 50 counts per 1 ms bin is 50 kcps
    let model = quiet_model(50_000.0);
    let calib = CalibrationConstants::reference_setup();
    let (t, _) = simulate_dual_channel(0.5, &calib, &model, 4.0, 1e-3, &SimulationSeed::new(5)).unwrap();
    let fits = fit_count_histogram(&t, 1.0).unwrap();
    assert_eq!(fits.len(), 1);
    let f = &fits[0];
    assert!((f.mean - 50.0).abs() < 3.0 * f.mean_error, "{f:?}");
    assert!((f.sigma - 50f64.sqrt()).abs() < 0.1 * 50f64.sqrt());
}

#[test]
fn histogram_mean_tracks_on_segments() {
    for seed in 0..10 {
        let t = guided_trace(&EmitterModel::reference(), 300.0, 100 + seed);
        let report = analyze_channel(&t, &AnalysisOptions::default()).unwrap();
        let seg = &report.segmentation;
        let top = seg.top_level();
        // the dwell filter folds short off runs into on segments; keep only bins nearest the on level
        let cut = 0.5 * (seg.level_values[0] + seg.level_values[top]);
        let on: Vec<f64> = t
            .level_values()
            .iter()
            .zip(seg.labels())
            .filter(|(v, l)| *l == top && **v > cut)
            .map(|(v, _)| *v)
            .collect();
        let n = on.len() as f64;
        let mean = on.iter().sum::<f64>() / n;
        let sd = (on.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let fit = &report.fits[top];
        assert!((fit.mean - mean).abs() < 2.0 * sd / n.sqrt(), "seed {seed}: fit {} empirical {mean}", fit.mean);
    }
}

#[test]
fn reference_rates_give_expected_efficiency() {
    let r = channeling_from_counts(
        &MeasuredValue::new(44.3, 5.4).unwrap(),
        &MeasuredValue::new(24.8, 3.7).unwrap(),
        &MeasuredValue::new(7.13, 0.84).unwrap(),
        Propagation::Linear,
    )
    .unwrap();
    assert!((r.ratio_nr_over_ng.value - 3.99).abs() < 0.01);
    assert!((r.ratio_nr_over_ng.sigma - 1.55).abs() < 0.02);
    assert!((r.eta_c.value - 0.200).abs() < 0.001);
    assert!((r.eta_c.sigma - 0.062).abs() < 0.002);
}

#[test]
fn trivial_efficiency_cases() {
    let one = MeasuredValue::exact(10.0);
    let r = channeling_from_counts(&one, &MeasuredValue::exact(0.0), &MeasuredValue::exact(7.0), Propagation::Linear).unwrap();
    assert_eq!(r.eta_c.value, 1.0);
    let r = channeling_from_counts(&one, &one, &MeasuredValue::exact(2.0), Propagation::Linear).unwrap();
    assert!((r.eta_c.value - 1.0 / 3.0).abs() < 1e-15);
    assert!(channeling_from_counts(&MeasuredValue::exact(0.0), &one, &one, Propagation::Linear).is_err());
}

fn scan_fixture(seed: u64) -> (CountTrace, Vec<ScanPeak>) {
    let peaks: Vec<ScanPeak> = (0..8)
        .map(|k| ScanPeak {
            position: 150.0 + 500.0 * k as f64,
            height: 600.0 + 40.0 * k as f64,
            fwhm: 1.5,
        })
        .collect();
    let scan = synthetic_scan(0.0, 0.25, 15_200, &peaks, 15.0, &SimulationSeed::new(seed)).unwrap();
    (scan, peaks)
}

#[test]
fn eight_peak_scan() {
    let (scan, truth) = scan_fixture(2);
    let found = find_peaks(&scan, &PeakOptions::default()).unwrap();
    assert_eq!(found.len(), 8);
    for (p, t) in found.iter().zip(&truth) {
        assert!((p.position - t.position).abs() < 0.1, "{p:?}");
        assert!((p.fwhm - 1.5).abs() < 0.1, "{p:?}");
    }
}

#[test]
fn flat_scan_has_no_peaks() {
    let scan = synthetic_scan(0.0, 0.25, 4000, &[], 15.0, &SimulationSeed::new(4)).unwrap();
    assert!(find_peaks(&scan, &PeakOptions::default()).unwrap().is_empty());
}

#[test]
fn single_peak_is_centred() {
    let peak = ScanPeak {
        position: 37.3,
        height: 60.0,
        fwhm: 2.0,
    };
    let scan = synthetic_scan(0.0, 0.2, 400, &[peak], 5.0, &SimulationSeed::new(9)).unwrap();
    let found = find_peaks(&scan, &PeakOptions::default()).unwrap();
    assert_eq!(found.len(), 1);
    assert!((found[0].position - 37.3).abs() < 0.1, "{:?}", found[0]);
}

fn counts_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u32..500, 1..200).prop_map(|v| v.into_iter().map(f64::from).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_csv_round_trip(counts in counts_strategy(), bin in 1e-4f64..10.0, start in -5.0f64..5.0, scan in any::<bool>()) {
        let axis = if scan { TraceAxis::Position } else { TraceAxis::Time };
        let t = CountTrace::with_axis(axis, bin, start, counts).unwrap();
        let back = CountTrace::parse(&t.to_csv(), &TraceFormat::default()).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn channeling_inverts_exactly(eta in 0.01f64..0.99, c in 0.1f64..20.0, ng in 1.0f64..1e3) {
        let nr = ng * (1.0 / eta - 1.0) / c;
        let r = channeling_from_counts(
            &MeasuredValue::exact(ng),
            &MeasuredValue::exact(nr),
            &MeasuredValue::exact(c),
            Propagation::Linear,
        ).unwrap();
        prop_assert!((r.eta_c.value - eta).abs() <= 1e-12);
        prop_assert!((r.eta_c.value - 1.0 / (1.0 + r.ratio_nr_over_ng.value)).abs() <= 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn level_detection_is_scale_invariant(seed in 0u64..1000, scale in 0.5f64..4.0) {
        let t = guided_trace(&EmitterModel::reference(), 120.0, seed);
        let counts = t.counts.iter().map(|c| c * scale).collect();
        let scaled = CountTrace::new(t.bin_width, t.start, counts).unwrap();
        let opts = LevelOptions::default();
        let scaled_opts = LevelOptions {
            histogram_bin: opts.histogram_bin * scale,
            min_separation: opts.min_separation * scale,
            ..opts
        };
        let a = detect_levels(&t, &opts).unwrap();
        let b = detect_levels(&scaled, &scaled_opts).unwrap();
        prop_assert_eq!(a.emitter_count, b.emitter_count);
        for (x, y) in a.level_values.iter().zip(&b.level_values) {
            prop_assert!((x * scale - y).abs() < 0.02 * y.abs().max(scale), "{:?} {:?}", a.level_values, b.level_values);
        }
    }
}
