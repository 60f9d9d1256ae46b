use nanofiber::calibration::{CalibrationConstants, MeasuredValue, Propagation};
use nanofiber::photon_synth::*;
use nanofiber::trace_analysis::*;

fn steady(excitation: f64, lifetime: f64, background: f64) -> EmitterModel {
    EmitterModel {
        excitation_rate: excitation,
        decay_lifetime: lifetime,
        on_rate: 1.0,
        off_rate: 0.0,
        detection_efficiency: [0.5, 0.5],
        background_rate: [background, background],
        intensity_jitter: 0.0,
    }
}

#[test]
fn identical_seeds_are_bit_identical() {
    let m = EmitterModel::reference();
    let a = simulate_emitter_stream(&m, 2.0, &SimulationSeed::new(7)).unwrap();
    let b = simulate_emitter_stream(&m, 2.0, &SimulationSeed::new(7)).unwrap();
    let c = simulate_emitter_stream(&m, 2.0, &SimulationSeed::new(8)).unwrap();
    assert_eq!(a.to_text(), b.to_text());
    assert_ne!(a.times, c.times);
    let calib = CalibrationConstants::reference_setup();
    let x = simulate_dual_channel(0.2, &calib, &m, 30.0, 0.1, &SimulationSeed::new(7)).unwrap();
    let y = simulate_dual_channel(0.2, &calib, &m, 30.0, 0.1, &SimulationSeed::new(7)).unwrap();
    assert_eq!(x.0.to_csv(), y.0.to_csv());
    assert_eq!(x.1.to_csv(), y.1.to_csv());
}

#[test]
fn streams_are_strictly_increasing() {
    let s = simulate_emitter_stream(&EmitterModel::reference(), 5.0, &SimulationSeed::new(1)).unwrap();
    assert!(s.times.windows(2).all(|w| w[1] > w[0]));
    assert!(s.times.iter().all(|&t| t > 0.0 && t < 5.0));
}

#[test]
fn detected_rate_matches_renewal_rate() {
    let m = steady(5e6, 100e-9, 2000.0);
    let duration = 0.5;
    let s = simulate_emitter_stream(&m, duration, &SimulationSeed::new(2)).unwrap();
    // a photon needs one excitation and one decay
    let expected = (0.5 / (1.0 / 5e6 + 100e-9) + 2000.0) * duration;
    let n = s.len() as f64;
    assert!((n - expected).abs() < 3.0 * expected.sqrt(), "{n} vs {expected}");
    assert!((m.mean_detected_rate() * duration - expected).abs() < 1e-6 * expected);
}

#[test]
fn no_excitation_leaves_background() {
    let m = steady(0.0, 1e-8, 5000.0);
    let s = simulate_emitter_stream(&m, 4.0, &SimulationSeed::new(3)).unwrap();
    let n = s.len() as f64;
    assert!((n - 20_000.0).abs() < 3.0 * 20_000f64.sqrt());
}

#[test]
fn split_is_a_binomial_partition() {
    let s = simulate_emitter_stream(&steady(0.0, 0.0, 1e5), 1.0, &SimulationSeed::new(4)).unwrap();
    let (a, b) = split_stream(&s, 0.5, &SimulationSeed::new(5)).unwrap();
    let n = s.len() as f64;
    assert!((a.len() as f64 - b.len() as f64).abs() < 3.0 * n.sqrt());
    let mut union: Vec<f64> = a.times.iter().chain(&b.times).copied().collect();
    union.sort_by(f64::total_cmp);
    assert_eq!(union, s.times);
    assert_eq!((a.channel, b.channel), (Some(1), Some(2)));

    let (none, all) = split_stream(&s, 0.0, &SimulationSeed::new(5)).unwrap();
    assert!(none.is_empty());
    assert_eq!(all.times, s.times);
}

#[test]
fn independent_poisson_streams_are_flat() {
    let m = steady(0.0, 0.0, 2e5);
    let a = simulate_emitter_stream(&m, 25.0, &SimulationSeed::new(10)).unwrap();
    let b = simulate_emitter_stream(&m, 25.0, &SimulationSeed::new(11)).unwrap();
    let h = g2_histogram(&a, &b, 1e-6, 5e-8, G2Normalization::FullStream).unwrap();
    assert!(h.pairs >= 1_000_000, "{} pairs", h.pairs);
    for (g, c) in h.g2.iter().zip(&h.coincidences) {
        // three binomial standard errors per bin
        let tol = 3.0 / (*c as f64).sqrt();
        assert!((g - 1.0).abs() < tol.max(0.02), "g2 {g} with {c} counts");
    }
}

#[test]
fn single_emitter_is_antibunched() {
    let m = EmitterModel {
        detection_efficiency: [1.0, 1.0],
        ..steady(2e7, 50e-9, 0.0)
    };
    let s = simulate_emitter_stream(&m, 0.05, &SimulationSeed::new(12)).unwrap();
    let (a, b) = split_stream(&s, 0.5, &SimulationSeed::new(13)).unwrap();
    let h = g2_histogram(&a, &b, 500e-9, 5e-9, G2Normalization::FullStream).unwrap();
    assert!(h.dip < 0.1, "dip {}", h.dip);
    assert!(h.is_single_emitter());
    // far from zero delay the correlation has recovered
    assert!((h.g2[0] - 1.0).abs() < 0.1);
}

#[test]
fn full_efficiency_darkens_radiation_channel() {
    let m = EmitterModel {
        background_rate: [0.0, 0.0],
        ..EmitterModel::reference()
    };
    let calib = CalibrationConstants::reference_setup();
    let (g, r) = simulate_dual_channel(1.0, &calib, &m, 20.0, 0.1, &SimulationSeed::new(14)).unwrap();
    assert!(r.counts.iter().all(|&c| c == 0.0));
    assert!(g.counts.iter().any(|&c| c > 0.0));
}

fn on_state_means(g: &CountTrace, r: &CountTrace) -> (f64, f64) {
    let cut = 0.5 * g.counts.iter().copied().fold(0.0, f64::max);
    let on: Vec<usize> = (0..g.len()).filter(|&i| g.counts[i] > cut).collect();
    let n = on.len() as f64;
    (
        on.iter().map(|&i| g.counts[i]).sum::<f64>() / n,
        on.iter().map(|&i| r.counts[i]).sum::<f64>() / n,
    )
}

#[test]
fn observed_ratio_follows_calibration() {
    let m = EmitterModel {
        background_rate: [0.0, 0.0],
        intensity_jitter: 0.0,
        ..EmitterModel::reference()
    };
    let calib = CalibrationConstants::reference_setup();
    let (g, r) = simulate_dual_channel(0.2, &calib, &m, 200.0, 0.1, &SimulationSeed::new(15)).unwrap();
    let (mg, mr) = on_state_means(&g, &r);
    let expected = 4.0 / calib.c.value;
    assert!((mr / mg - expected).abs() < 0.01, "{} vs {expected}", mr / mg);
    assert!((expected - 0.561).abs() < 0.001);
}

#[test]
fn symmetric_paths_give_equal_rates() {
    let calib = CalibrationConstants::new(
        MeasuredValue::exact(0.3),
        MeasuredValue::exact(0.5),
        MeasuredValue::exact(0.3),
        MeasuredValue::exact(1.0),
        Propagation::Linear,
    )
    .unwrap();
    let m = EmitterModel {
        background_rate: [0.0, 0.0],
        intensity_jitter: 0.0,
        ..EmitterModel::reference()
    };
    let (g, r) = simulate_dual_channel(0.5, &calib, &m, 200.0, 0.1, &SimulationSeed::new(16)).unwrap();
    let (mg, mr) = on_state_means(&g, &r);
    assert!((mr / mg - 1.0).abs() < 0.01);
}

#[test]
fn unknown_generator_is_rejected() {
    let seed = SimulationSeed {
        seed: 1,
        generator: "mt19937".into(),
    };
    assert!(simulate_emitter_stream(&EmitterModel::reference(), 1.0, &seed).is_err());
}
