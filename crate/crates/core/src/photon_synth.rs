//! Seeded Monte-Carlo photon streams and count traces with known ground
//! truth: a blinking two-level emitter, detector splitting, and the paired
//! guided/radiation channels of the collection setup.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationConstants;
use crate::error::{Error, Result};
use crate::trace_analysis::{CountTrace, TimestampStream, TraceAxis};

/// Identifier of the only supported generator.
pub const GENERATOR: &str = "chacha20";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimulationSeed {
    pub seed: u64,
    pub generator: String,
}

impl SimulationSeed {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            generator: GENERATOR.to_string(),
        }
    }

    pub fn rng(&self) -> Result<ChaCha20Rng> {
        if self.generator != GENERATOR {
            return Err(Error::domain(format!(
                "unsupported generator '{}', expected '{GENERATOR}'",
                self.generator
            )));
        }
        Ok(ChaCha20Rng::seed_from_u64(self.seed))
    }
}

impl From<u64> for SimulationSeed {
    fn from(seed: u64) -> Self {
        Self::new(seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterModel {
    /// Pump rate from the ground state, 1/s.
    pub excitation_rate: f64,
    /// Excited-state lifetime, s.
    pub decay_lifetime: f64,
    /// Off → on switching rate, 1/s.
    pub on_rate: f64,
    /// On → off switching rate, 1/s.
    pub off_rate: f64,
    /// Per channel; channel 0 is used for single streams.
    pub detection_efficiency: [f64; 2],
    /// Per channel, counts/s.
    pub background_rate: [f64; 2],
    /// Relative standard deviation of a per-bin multiplicative intensity
    /// factor shared by both channels of a binned trace.
    #[serde(default)]
    pub intensity_jitter: f64,
}

impl EmitterModel {
    /// A blinking quantum dot whose guided on-state rate is about 44 kcps
    /// behind the reference collection setup.
    pub fn reference() -> Self {
        Self {
            excitation_rate: 8.88e5,
            decay_lifetime: 20e-9,
            on_rate: 0.5,
            off_rate: 0.5,
            detection_efficiency: [1.0, 1.0],
            background_rate: [1000.0, 1000.0],
            intensity_jitter: 0.12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            self.excitation_rate,
            self.decay_lifetime,
            self.on_rate,
            self.off_rate,
            self.background_rate[0],
            self.background_rate[1],
            self.intensity_jitter,
        ];
        if rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::domain("emitter rates, lifetime and jitter must be finite and non-negative"));
        }
        if self.detection_efficiency.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::domain("detection efficiencies must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Fraction of time the emitter is on.
    pub fn duty_cycle(&self) -> f64 {
        match (self.on_rate, self.off_rate) {
            (_, off) if off == 0.0 => 1.0,
            (on, off) => on / (on + off),
        }
    }

    /// Photon emission rate while on: one excitation and one decay per
    /// photon.
    pub fn emission_rate(&self) -> f64 {
        if self.excitation_rate == 0.0 {
            return 0.0;
        }
        1.0 / (1.0 / self.excitation_rate + self.decay_lifetime)
    }

    /// Expected detected rate of [`simulate_emitter_stream`].
    pub fn mean_detected_rate(&self) -> f64 {
        self.emission_rate() * self.duty_cycle() * self.detection_efficiency[0] + self.background_rate[0]
    }
}

fn exp_sample<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    if rate == f64::INFINITY {
        0.0
    } else if rate <= 0.0 {
        f64::INFINITY
    } else {
        Exp::new(rate).expect("positive rate").sample(rng)
    }
}

fn poisson<R: Rng>(rng: &mut R, mean: f64) -> f64 {
    if mean <= 0.0 {
        0.0
    } else {
        Poisson::new(mean).expect("positive mean").sample(rng)
    }
}

/// On intervals of the telegraph process over `[0, duration)`, starting
/// from its stationary distribution.
fn telegraph<R: Rng>(rng: &mut R, model: &EmitterModel, duration: f64) -> Vec<(f64, f64)> {
    let mut on = rng.gen::<f64>() < model.duty_cycle();
    let mut t = 0.0;
    let mut out = Vec::new();
    while t < duration {
        let dwell = exp_sample(rng, if on { model.off_rate } else { model.on_rate });
        let end = (t + dwell).min(duration);
        if on {
            out.push((t, end));
        }
        t = end;
        on = !on;
    }
    out
}

fn poisson_times<R: Rng>(rng: &mut R, rate: f64, duration: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let mut t = exp_sample(rng, rate);
    while t < duration {
        out.push(t);
        t += exp_sample(rng, rate);
    }
    out
}

/// Detected photon times of one blinking two-level emitter plus background.
///
/// While on, each photon needs an excitation (rate `excitation_rate`)
/// followed by a decay (`decay_lifetime`), so two emissions never coincide.
/// Switching off abandons the current cycle; switching on starts from the
/// ground state.
pub fn simulate_emitter_stream(model: &EmitterModel, duration: f64, seed: &SimulationSeed) -> Result<TimestampStream> {
    model.validate()?;
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::domain(format!("duration must be positive, got {duration}")));
    }
    let mut rng = seed.rng()?;
    let mut signal = Vec::new();
    if model.excitation_rate > 0.0 {
        let decay = if model.decay_lifetime > 0.0 {
            1.0 / model.decay_lifetime
        } else {
            f64::INFINITY
        };
        for (start, end) in telegraph(&mut rng, model, duration) {
            let mut t = start;
            loop {
                t += exp_sample(&mut rng, model.excitation_rate) + exp_sample(&mut rng, decay);
                if t >= end {
                    break;
                }
                if rng.gen::<f64>() < model.detection_efficiency[0] {
                    signal.push(t);
                }
            }
        }
    }
    let background = poisson_times(&mut rng, model.background_rate[0], duration);
    let mut times = merge(signal, background);
    times.dedup();
    TimestampStream::new(times, None)?.with_window(0.0, duration)
}

fn merge(a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Routes each event independently to the first output with probability
/// `ratio`. Outputs are labelled channels 1 and 2.
pub fn split_stream(
    stream: &TimestampStream,
    ratio: f64,
    seed: &SimulationSeed,
) -> Result<(TimestampStream, TimestampStream)> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::domain(format!("split ratio must lie in [0, 1], got {ratio}")));
    }
    let mut rng = seed.rng()?;
    let mut first = Vec::new();
    let mut second = Vec::new();
    for &t in &stream.times {
        if rng.gen::<f64>() < ratio {
            first.push(t);
        } else {
            second.push(t);
        }
    }
    let wrap = |times, ch| {
        let mut s = TimestampStream::new(times, Some(ch))?;
        s.window = stream.window;
        Ok::<_, Error>(s)
    };
    Ok((wrap(first, 1)?, wrap(second, 2)?))
}

/// Binned guided and radiation traces for a known channeling efficiency.
///
/// The emitter state is held for a whole bin (taken at the bin centre).
/// On-state photon rates are `n_g = η·R` and `n_r = (1 − η)·R` with `R` the
/// model emission rate; observed rates are `½·κg·e₀·n_g` and
/// `κr·ηr·e₁·n_r` with `e` the model detection efficiencies, each plus its
/// channel background. The analysis constant `C` is consistent with this
/// when `e₀/e₁` equals the calibration detector ratio.
pub fn simulate_dual_channel(
    eta_c_true: f64,
    calib: &CalibrationConstants,
    model: &EmitterModel,
    duration: f64,
    bin_width: f64,
    seed: &SimulationSeed,
) -> Result<(CountTrace, CountTrace)> {
    if !(eta_c_true > 0.0 && eta_c_true <= 1.0) {
        return Err(Error::domain(format!("eta_c must lie in (0, 1], got {eta_c_true}")));
    }
    model.validate()?;
    if !(bin_width > 0.0) || !(duration >= bin_width) {
        return Err(Error::domain("need 0 < bin_width <= duration"));
    }
    let mut rng = seed.rng()?;
    let bins = (duration / bin_width).floor() as usize;
    let on_intervals = telegraph(&mut rng, model, bins as f64 * bin_width);
    let r = model.emission_rate();
    let guided_on = 0.5 * calib.kappa_g.value * model.detection_efficiency[0] * eta_c_true * r;
    let radiation_on =
        calib.kappa_r.value * calib.eta_r.value * model.detection_efficiency[1] * (1.0 - eta_c_true) * r;
    let jitter = (model.intensity_jitter > 0.0).then(|| Normal::new(1.0, model.intensity_jitter).unwrap());

    let mut guided = Vec::with_capacity(bins);
    let mut radiation = Vec::with_capacity(bins);
    let mut k = 0;
    for i in 0..bins {
        let mid = (i as f64 + 0.5) * bin_width;
        while k < on_intervals.len() && on_intervals[k].1 <= mid {
            k += 1;
        }
        let on = k < on_intervals.len() && on_intervals[k].0 <= mid;
        let scale = if on {
            jitter.map_or(1.0, |j| j.sample(&mut rng).max(0.0))
        } else {
            0.0
        };
        guided.push(poisson(&mut rng, (scale * guided_on + model.background_rate[0]) * bin_width));
        radiation.push(poisson(&mut rng, (scale * radiation_on + model.background_rate[1]) * bin_width));
    }
    Ok((
        CountTrace::new(bin_width, 0.0, guided)?,
        CountTrace::new(bin_width, 0.0, radiation)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPeak {
    /// Micrometers.
    pub position: f64,
    /// Expected counts above background at the centre.
    pub height: f64,
    pub fwhm: f64,
}

/// Poisson-noisy spatial scan of Gaussian features on a flat background.
pub fn synthetic_scan(
    start: f64,
    step: f64,
    points: usize,
    peaks: &[ScanPeak],
    background: f64,
    seed: &SimulationSeed,
) -> Result<CountTrace> {
    if peaks.iter().any(|p| !(p.fwhm > 0.0) || p.height < 0.0) || background < 0.0 {
        return Err(Error::domain("peak widths must be positive and heights non-negative"));
    }
    let mut rng = seed.rng()?;
    let counts = (0..points)
        .map(|i| {
            let x = start + step * i as f64;
            let mean = background
                + peaks
                    .iter()
                    .map(|p| {
                        let s = p.fwhm / crate::trace_analysis::FWHM_PER_SIGMA;
                        p.height * (-(x - p.position).powi(2) / (2.0 * s * s)).exp()
                    })
                    .sum::<f64>();
            poisson(&mut rng, mean)
        })
        .collect();
    CountTrace::with_axis(TraceAxis::Position, step, start, counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dark_emitter_gives_background_only() {
        let m = EmitterModel {
            excitation_rate: 0.0,
            background_rate: [500.0, 0.0],
            ..EmitterModel::reference()
        };
        let s = simulate_emitter_stream(&m, 10.0, &SimulationSeed::new(3)).unwrap();
        let n = s.len() as f64;
        assert!((n - 5000.0).abs() < 3.0 * 5000f64.sqrt(), "{n}");
    }

    #[test]
    fn split_extremes() {
        let m = EmitterModel::reference();
        let s = simulate_emitter_stream(&m, 0.5, &SimulationSeed::new(1)).unwrap();
        let (a, b) = split_stream(&s, 0.0, &SimulationSeed::new(2)).unwrap();
        assert!(a.is_empty());
        assert_eq!(b.times, s.times);
    }

    #[test]
    fn unknown_generator_is_rejected() {
        let seed = SimulationSeed {
            seed: 1,
            generator: "mt19937".into(),
        };
        assert!(seed.rng().is_err());
    }

    #[test]
    fn unit_efficiency_leaves_radiation_dark() {
        let m = EmitterModel {
            background_rate: [0.0, 0.0],
            ..EmitterModel::reference()
        };
        let calib = CalibrationConstants::reference_setup();
        let (_, r) = simulate_dual_channel(1.0, &calib, &m, 2.0, 0.01, &SimulationSeed::new(5)).unwrap();
        assert!(r.counts.iter().all(|c| *c == 0.0));
    }
}
