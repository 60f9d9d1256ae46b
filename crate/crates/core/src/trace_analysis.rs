//! Reduction of photon-count data: blinking levels, count-rate histogram
//! fits, the efficiency extraction, photon-correlation histograms, and peak
//! finding on spatial scans.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::calibration::{power_law, MeasuredValue, Propagation};
use crate::error::{Error, Result};
use crate::numerics::least_squares::{levenberg_marquardt, LmOptions};

/// Minimum number of bins [`detect_levels`] accepts.
fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub const MIN_TRACE_BINS: usize = 20;

/// Reduced residual above which a histogram fit is rejected.
pub const FIT_RESIDUAL_LIMIT: f64 = 5.0;

/// `g²(0)` below this classifies the source as a single emitter.
pub const SINGLE_EMITTER_THRESHOLD: f64 = 0.5;

/// `2√(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceAxis {
    /// Seconds; counts per time bin.
    #[default]
    Time,
    /// Micrometers along a scan.
    Position,
}

impl TraceAxis {
    fn header(self) -> &'static str {
        match self {
            TraceAxis::Time => "time_s,counts",
            TraceAxis::Position => "position_um,counts",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTrace {
    pub axis: TraceAxis,
    /// Bin width in seconds (time traces) or micrometers (scans).
    pub bin_width: f64,
    pub start: f64,
    pub counts: Vec<f64>,
}

/// Overrides for [`CountTrace::parse`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TraceFormat {
    /// Used when the file neither declares a bin width nor has two rows.
    pub bin_width: Option<f64>,
}

impl CountTrace {
    pub fn new(bin_width: f64, start: f64, counts: Vec<f64>) -> Result<Self> {
        Self::with_axis(TraceAxis::Time, bin_width, start, counts)
    }

    pub fn with_axis(axis: TraceAxis, bin_width: f64, start: f64, counts: Vec<f64>) -> Result<Self> {
        if !(bin_width > 0.0) || !bin_width.is_finite() {
            return Err(Error::domain(format!("bin width must be positive, got {bin_width}")));
        }
        if !start.is_finite() {
            return Err(Error::domain("trace start must be finite"));
        }
        if let Some(c) = counts.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return Err(Error::domain(format!("counts must be finite and non-negative, got {c}")));
        }
        Ok(Self {
            axis,
            bin_width,
            start,
            counts,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.bin_width * self.counts.len() as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        self.start + self.bin_width * i as f64
    }

    /// Values used for level detection: kcps for time traces, raw counts
    /// for scans.
    pub fn level_values(&self) -> Vec<f64> {
        match self.axis {
            TraceAxis::Time => self.counts.iter().map(|c| c / self.bin_width / 1e3).collect(),
            TraceAxis::Position => self.counts.clone(),
        }
    }

    pub fn parse(text: &str, format: &TraceFormat) -> Result<Self> {
        let mut axis = None;
        let mut declared_width = None;
        let mut declared_start = None;
        let mut rows: Vec<(usize, f64, f64)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((key, value)) = comment.split_once('=') {
                    let parse = || {
                        value.trim().parse::<f64>().map_err(|_| Error::Parse {
                            line: line_no,
                            message: format!("bad number in '{line}'"),
                        })
                    };
                    match key.trim() {
                        "bin_width" => declared_width = Some(parse()?),
                        "start" => declared_start = Some(parse()?),
                        _ => {}
                    }
                }
                continue;
            }
            if rows.is_empty() && axis.is_none() && line.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E')
            {
                let header: String = line.split(',').map(str::trim).collect::<Vec<_>>().join(",");
                axis = Some(match header.as_str() {
                    "time_s,counts" => TraceAxis::Time,
                    "position_um,counts" => TraceAxis::Position,
                    other => return Err(Error::Schema(format!("unexpected header '{other}'"))),
                });
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 2 fields, found {}", fields.len()),
                });
            }
            let num = |s: &str| {
                s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("'{s}' is not a finite number"),
                })
            };
            let t = num(fields[0])?;
            let c = num(fields[1])?;
            if c < 0.0 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("negative count {c}"),
                });
            }
            rows.push((line_no, t, c));
        }
        if rows.is_empty() {
            return Err(Error::EmptyTrace);
        }
        for w in rows.windows(2) {
            if !(w[1].1 > w[0].1) {
                return Err(Error::Schema(format!(
                    "coordinate not increasing at line {} ({} after {})",
                    w[1].0, w[1].1, w[0].1
                )));
            }
        }
        let bin_width = match (declared_width, format.bin_width) {
            (Some(w), _) => w,
            (None, Some(w)) => w,
            (None, None) if rows.len() >= 2 => rows[1].1 - rows[0].1,
            _ => return Err(Error::Schema("cannot infer bin width from a single row".into())),
        };
        let start = declared_start.unwrap_or(rows[0].1);
        for (i, &(line_no, t, _)) in rows.iter().enumerate() {
            let expected = start + bin_width * i as f64;
            if (t - expected).abs() > 1e-6 * bin_width + 1e-12 * expected.abs() {
                return Err(Error::Schema(format!(
                    "line {line_no}: coordinate {t} is off the uniform grid (expected {expected})"
                )));
            }
        }
        Self::with_axis(
            axis.unwrap_or_default(),
            bin_width,
            start,
            rows.into_iter().map(|r| r.2).collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>, format: &TraceFormat) -> Result<Self> {
        Self::parse(&read_file(path.as_ref())?, format)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# bin_width = {}", self.bin_width);
        let _ = writeln!(out, "# start = {}", self.start);
        out.push_str(self.axis.header());
        out.push('\n');
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.coordinate(i), c);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_csv())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelOptions {
    /// Histogram bin in level units (kcps for time traces).
    pub histogram_bin: f64,
    /// Minimum distance between two histogram modes.
    pub min_separation: f64,
    /// Runs shorter than this many bins are merged into a neighbour.
    pub min_dwell: usize,
    /// Gaussian smoothing of the histogram, in histogram bins.
    pub smoothing: f64,
    /// Minimum prominence of a mode relative to the tallest one.
    pub min_relative_prominence: f64,
    /// Known background level; otherwise the lowest level is background.
    pub background: Option<f64>,
}

impl Default for LevelOptions {
    fn default() -> Self {
        Self {
            histogram_bin: 1.0,
            min_separation: 3.0,
            min_dwell: 3,
            smoothing: 1.5,
            min_relative_prominence: 0.05,
            background: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start_bin: usize,
    /// Exclusive.
    pub end_bin: usize,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlinkSegmentation {
    /// Mean value of each level, ascending.
    pub level_values: Vec<f64>,
    pub segments: Vec<Segment>,
    pub background_level: Option<usize>,
    pub emitter_count: usize,
}

impl BlinkSegmentation {
    /// Level index of every bin.
    pub fn labels(&self) -> Vec<usize> {
        let n = self.segments.last().map_or(0, |s| s.end_bin);
        let mut out = vec![0; n];
        for s in &self.segments {
            out[s.start_bin..s.end_bin].fill(s.level);
        }
        out
    }

    /// Fraction of bins spent in each level.
    pub fn occupancy(&self) -> Vec<f64> {
        let n = self.segments.last().map_or(0, |s| s.end_bin) as f64;
        let mut occ = vec![0.0; self.level_values.len()];
        for s in &self.segments {
            occ[s.level] += (s.end_bin - s.start_bin) as f64 / n;
        }
        occ
    }

    /// Highest level, the state with every emitter on.
    pub fn top_level(&self) -> usize {
        self.level_values.len() - 1
    }
}

fn smoothed_histogram(values: &[f64], bin: f64, sigma_bins: f64) -> (f64, Vec<f64>) {
    let pad = (4.0 * sigma_bins).ceil() as i64 + 1;
    let lo_idx = (values.iter().copied().fold(f64::INFINITY, f64::min) / bin).floor() as i64 - pad;
    let hi_idx = (values.iter().copied().fold(f64::NEG_INFINITY, f64::max) / bin).floor() as i64 + pad;
    let n = (hi_idx - lo_idx + 1) as usize;
    let mut hist = vec![0.0; n];
    for v in values {
        hist[((v / bin).floor() as i64 - lo_idx) as usize] += 1.0;
    }
    if sigma_bins <= 0.0 {
        return (lo_idx as f64 * bin, hist);
    }
    let half = (4.0 * sigma_bins).ceil() as i64;
    let kernel: Vec<f64> = (-half..=half)
        .map(|k| (-(k as f64).powi(2) / (2.0 * sigma_bins * sigma_bins)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        for (j, w) in kernel.iter().enumerate() {
            let src = i as i64 + j as i64 - half;
            if src >= 0 && (src as usize) < n {
                *o += w * hist[src as usize];
            }
        }
        *o /= norm;
    }
    (lo_idx as f64 * bin, out)
}

/// Local maxima of `h` with their topographic prominence.
fn prominent_maxima(h: &[f64]) -> Vec<(usize, f64)> {
    let n = h.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if h[i] > h[i - 1] {
            // walk across a plateau
            let mut j = i;
            while j + 1 < n && h[j + 1] == h[i] {
                j += 1;
            }
            if j + 1 < n && h[j + 1] < h[i] {
                let peak = (i + j) / 2;
                let mut left_min = h[i];
                let mut k = i;
                while k > 0 {
                    k -= 1;
                    if h[k] > h[i] {
                        break;
                    }
                    left_min = left_min.min(h[k]);
                }
                let mut right_min = h[i];
                let mut k = j;
                while k + 1 < n {
                    k += 1;
                    if h[k] > h[i] {
                        break;
                    }
                    right_min = right_min.min(h[k]);
                }
                out.push((peak, h[i] - left_min.max(right_min)));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn nearest(levels: &[f64], v: f64) -> usize {
    levels
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn runs(labels: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            out.push((start, i, labels[start]));
            start = i;
        }
    }
    out
}

/// Blinking levels by histogram-mode seeding, nearest-level assignment, and
/// a minimum-dwell filter.
pub fn detect_levels(trace: &CountTrace, opts: &LevelOptions) -> Result<BlinkSegmentation> {
    if trace.len() < MIN_TRACE_BINS {
        return Err(Error::InsufficientData {
            needed: MIN_TRACE_BINS,
            got: trace.len(),
        });
    }
    if !(opts.histogram_bin > 0.0) || opts.min_separation < 0.0 {
        return Err(Error::domain("histogram bin must be positive and separation non-negative"));
    }
    let values = trace.level_values();
    let (origin, hist) = smoothed_histogram(&values, opts.histogram_bin, opts.smoothing);
    let maxima = prominent_maxima(&hist);
    let tallest = hist.iter().copied().fold(0.0, f64::max);
    let mut candidates: Vec<(usize, f64)> = maxima
        .into_iter()
        .filter(|&(_, p)| p >= opts.min_relative_prominence * tallest)
        .collect();
    candidates.sort_by(|a, b| hist[b.0].total_cmp(&hist[a.0]).then(a.0.cmp(&b.0)));
    let mut seeds: Vec<f64> = Vec::new();
    for (idx, _) in candidates {
        let centre = origin + (idx as f64 + 0.5) * opts.histogram_bin;
        if seeds.iter().all(|s| (s - centre).abs() >= opts.min_separation) {
            seeds.push(centre);
        }
    }
    if seeds.is_empty() {
        seeds.push(values.iter().sum::<f64>() / values.len() as f64);
    }
    seeds.sort_by(f64::total_cmp);

    let mut labels: Vec<usize> = values.iter().map(|&v| nearest(&seeds, v)).collect();
    let min_dwell = opts.min_dwell.max(1);
    loop {
        let rs = runs(&labels);
        if rs.len() <= 1 {
            break;
        }
        let Some(pos) = rs.iter().position(|r| r.1 - r.0 < min_dwell) else {
            break;
        };
        let (s, e, _) = rs[pos];
        let mean = values[s..e].iter().sum::<f64>() / (e - s) as f64;
        let neighbours: Vec<usize> = [pos.checked_sub(1), Some(pos + 1).filter(|&p| p < rs.len())]
            .into_iter()
            .flatten()
            .map(|p| rs[p].2)
            .collect();
        let target = neighbours
            .into_iter()
            .min_by(|a, b| (seeds[*a] - mean).abs().total_cmp(&(seeds[*b] - mean).abs()))
            .unwrap();
        labels[s..e].fill(target);
    }

    // drop empty levels, re-estimate values, keep ascending order
    let mut sums = vec![(0.0, 0usize); seeds.len()];
    for (&l, &v) in labels.iter().zip(&values) {
        sums[l].0 += v;
        sums[l].1 += 1;
    }
    let mut kept: Vec<(usize, f64)> = sums
        .iter()
        .enumerate()
        .filter(|(_, s)| s.1 > 0)
        .map(|(i, s)| (i, s.0 / s.1 as f64))
        .collect();
    kept.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut remap = vec![usize::MAX; seeds.len()];
    for (new, (old, _)) in kept.iter().enumerate() {
        remap[*old] = new;
    }
    let level_values: Vec<f64> = kept.iter().map(|k| k.1).collect();
    let labels: Vec<usize> = labels.iter().map(|&l| remap[l]).collect();
    let segments = runs(&labels)
        .into_iter()
        .map(|(s, e, l)| Segment {
            start_bin: s,
            end_bin: e,
            level: l,
        })
        .collect();

    let background_level = match opts.background {
        Some(bg) => {
            let i = nearest(&level_values, bg);
            ((level_values[i] - bg).abs() < opts.min_separation.max(opts.histogram_bin)).then_some(i)
        }
        None => Some(0),
    };
    let emitter_count = level_values.len() - usize::from(background_level.is_some());
    Ok(BlinkSegmentation {
        level_values,
        segments,
        background_level,
        emitter_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// All levels fitted together as a Gaussian mixture.
    JointHistogram,
    /// Only the bins assigned to this level were histogrammed and fitted.
    LevelHistogram,
    /// Too few occupied histogram bins for a fit; sample moments.
    Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub level: usize,
    /// Number of trace bins represented by the component.
    pub amplitude: f64,
    pub mean: f64,
    pub sigma: f64,
    /// `sigma / √n` with `n` the bins assigned to the level.
    pub mean_error: f64,
    pub fit_residual: f64,
    pub method: FitMethod,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramFitMode {
    /// One mixture over the whole-trace histogram.
    #[default]
    Joint,
    /// Each level fitted on its own bins only.
    PerLevel,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * puruspe::erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn bin_index(v: f64, bin: f64) -> i64 {
    (v / bin + 1e-9).floor() as i64
}

/// Histogram with edges on multiples of `bin`, occupied range only.
///
/// With a `quantum` (values are integer multiples of it) the returned edges
/// are moved to the half-quantum points that bound the lattice values in
/// each bin, so a continuous density integrates to the right mass.
fn histogram(values: &[f64], bin: f64, quantum: Option<f64>) -> (Vec<f64>, Vec<f64>) {
    let lo = values.iter().map(|v| bin_index(*v, bin)).min().unwrap_or(0);
    let hi = values.iter().map(|v| bin_index(*v, bin)).max().unwrap_or(0);
    let n = (hi - lo + 1) as usize;
    let mut counts = vec![0.0; n];
    for v in values {
        counts[(bin_index(*v, bin) - lo) as usize] += 1.0;
    }
    let edges = (0..=n)
        .map(|i| {
            let e = (lo + i as i64) as f64 * bin;
            match quantum {
                Some(q) => ((e / q - 1e-9).ceil() - 0.5) * q,
                None => e,
            }
        })
        .collect();
    (edges, counts)
}

/// Spacing of the value lattice when every count is an integer.
fn count_quantum(trace: &CountTrace) -> Option<f64> {
    trace.counts.iter().all(|c| c.fract() == 0.0).then(|| match trace.axis {
        TraceAxis::Time => 1.0 / (trace.bin_width * 1e3),
        TraceAxis::Position => 1.0,
    })
}

fn occupied(values: &[f64], bin: f64) -> usize {
    histogram(values, bin, None).1.iter().filter(|c| **c > 0.0).count()
}

#[derive(Debug, Clone, Copy)]
struct Component {
    n: f64,
    mu: f64,
    sigma: f64,
}

fn moments(values: &[f64], bin: f64) -> Component {
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Component {
        n,
        mu,
        // a point mass still spreads over one histogram bin
        sigma: var.sqrt().max(bin / 12f64.sqrt()),
    }
}

/// Median and MAD-based width; short runs folded into a level by the dwell
/// filter do not drag the starting point of a fit.
fn robust_seed(values: &[f64], bin: f64) -> Component {
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len() % 2 == 0 {
            0.5 * (v[m - 1] + v[m])
        } else {
            v[m]
        }
    };
    let mu = median(&mut values.to_vec());
    let mad = median(&mut values.iter().map(|v| (v - mu).abs()).collect());
    Component {
        n: values.len() as f64,
        mu,
        sigma: (1.4826 * mad).max(bin / 12f64.sqrt()),
    }
}

/// Bin-integrated Gaussian mixture fit; `fixed` components are included in
/// the model but not varied.
fn fit_mixture(
    edges: &[f64],
    counts: &[f64],
    free: &[Component],
    fixed: &[Component],
) -> Result<(Vec<Component>, f64)> {
    let nb = counts.len();
    let fixed_model: Vec<f64> = (0..nb)
        .map(|i| {
            fixed
                .iter()
                .map(|c| c.n * (std_normal_cdf((edges[i + 1] - c.mu) / c.sigma) - std_normal_cdf((edges[i] - c.mu) / c.sigma)))
                .sum()
        })
        .collect();
    let init: Vec<f64> = free.iter().flat_map(|c| [c.n, c.mu, c.sigma]).collect();
    let model = |p: &[f64], jac: &mut DMatrix<f64>| -> Vec<f64> {
        let mut out = fixed_model.clone();
        for (k, chunk) in p.chunks(3).enumerate() {
            let (n, mu, s) = (chunk[0], chunk[1], chunk[2]);
            for i in 0..nb {
                let z0 = (edges[i] - mu) / s;
                let z1 = (edges[i + 1] - mu) / s;
                let mass = std_normal_cdf(z1) - std_normal_cdf(z0);
                let (f0, f1) = (std_normal_pdf(z0), std_normal_pdf(z1));
                out[i] += n * mass;
                jac[(i, 3 * k)] = mass;
                jac[(i, 3 * k + 1)] = -n * (f1 - f0) / s;
                jac[(i, 3 * k + 2)] = -n * (z1 * f1 - z0 * f0) / s;
            }
        }
        out
    };
    let weights: Vec<f64> = counts.iter().map(|c| 1.0 / c.max(1.0)).collect();
    let valid = |p: &[f64]| p.chunks(3).all(|c| c[0] > 0.0 && c[2] > 0.0);
    let fit = levenberg_marquardt(model, valid, counts, &weights, &init, &LmOptions::default())?;
    let dof = nb.saturating_sub(init.len()).max(1) as f64;
    let residual = (fit.cost / dof).sqrt();
    let comps = fit
        .params
        .chunks(3)
        .map(|c| Component {
            n: c[0],
            mu: c[1],
            sigma: c[2].abs(),
        })
        .collect();
    Ok((comps, residual))
}

/// One Gaussian per detected level, in level order.
pub fn fit_levels(
    trace: &CountTrace,
    seg: &BlinkSegmentation,
    histogram_bin: f64,
    mode: HistogramFitMode,
) -> Result<Vec<GaussianFit>> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if !(histogram_bin > 0.0) {
        return Err(Error::domain("histogram bin must be positive"));
    }
    let values = trace.level_values();
    let quantum = count_quantum(trace);
    let labels = seg.labels();
    if labels.len() != values.len() {
        return Err(Error::domain("segmentation does not match the trace length"));
    }
    if occupied(&values, histogram_bin) < 2 {
        return Err(Error::Fit("histogram has a single occupied bin".into()));
    }
    let per_level: Vec<Vec<f64>> = (0..seg.level_values.len())
        .map(|l| labels.iter().zip(&values).filter(|(a, _)| **a == l).map(|(_, v)| *v).collect())
        .collect();
    let fittable: Vec<bool> = per_level.iter().map(|v| occupied(v, histogram_bin) >= 3).collect();

    let mut fits: Vec<GaussianFit> = Vec::with_capacity(per_level.len());
    let make = |level: usize, c: Component, residual: f64, method: FitMethod, n: usize| GaussianFit {
        level,
        amplitude: c.n,
        mean: c.mu,
        sigma: c.sigma,
        mean_error: c.sigma / (n as f64).sqrt(),
        fit_residual: residual,
        method,
        samples: n,
    };
    match mode {
        HistogramFitMode::Joint => {
            let (edges, counts) = histogram(&values, histogram_bin, quantum);
            let free: Vec<Component> = per_level
                .iter()
                .zip(&fittable)
                .filter(|(_, f)| **f)
                .map(|(v, _)| robust_seed(v, histogram_bin))
                .collect();
            let fixed: Vec<Component> = per_level
                .iter()
                .zip(&fittable)
                .filter(|(_, f)| !**f)
                .map(|(v, _)| moments(v, histogram_bin))
                .collect();
            let (fitted, residual) = if free.is_empty() {
                (Vec::new(), 0.0)
            } else {
                fit_mixture(&edges, &counts, &free, &fixed)?
            };
            let mut fi = fitted.into_iter();
            for (l, v) in per_level.iter().enumerate() {
                if fittable[l] {
                    fits.push(make(l, fi.next().unwrap(), residual, FitMethod::JointHistogram, v.len()));
                } else {
                    fits.push(make(l, moments(v, histogram_bin), 0.0, FitMethod::Moments, v.len()));
                }
            }
        }
        HistogramFitMode::PerLevel => {
            for (l, v) in per_level.iter().enumerate() {
                if fittable[l] {
                    let (edges, counts) = histogram(v, histogram_bin, quantum);
                    let (c, residual) = fit_mixture(&edges, &counts, &[robust_seed(v, histogram_bin)], &[])?;
                    fits.push(make(l, c[0], residual, FitMethod::LevelHistogram, v.len()));
                } else {
                    fits.push(make(l, moments(v, histogram_bin), 0.0, FitMethod::Moments, v.len()));
                }
            }
        }
    }
    if let Some(bad) = fits.iter().find(|f| f.fit_residual > FIT_RESIDUAL_LIMIT) {
        return Err(Error::Fit(format!(
            "level {} fit residual {:.3} exceeds {FIT_RESIDUAL_LIMIT}",
            bad.level, bad.fit_residual
        )));
    }
    Ok(fits)
}

/// Level detection with default options followed by a joint histogram fit.
pub fn fit_count_histogram(trace: &CountTrace, histogram_bin: f64) -> Result<Vec<GaussianFit>> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let opts = LevelOptions {
        histogram_bin,
        ..LevelOptions::default()
    };
    let seg = detect_levels(trace, &opts)?;
    fit_levels(trace, &seg, histogram_bin, HistogramFitMode::Joint)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyResult {
    pub ratio_nr_over_ng: MeasuredValue,
    pub eta_c: MeasuredValue,
    pub n_g_obs: MeasuredValue,
    pub n_r_obs: MeasuredValue,
    pub c: MeasuredValue,
}

/// `n_r/n_g = (n_r^obs/n_g^obs)·C` and `η_c = 1/(1 + n_r/n_g)`.
pub fn channeling_from_counts(
    n_g_obs: &MeasuredValue,
    n_r_obs: &MeasuredValue,
    c: &MeasuredValue,
    mode: Propagation,
) -> Result<EfficiencyResult> {
    if !(n_g_obs.value > 0.0) {
        return Err(Error::domain(format!(
            "guided count rate must be positive, got {}",
            n_g_obs.value
        )));
    }
    if n_r_obs.value < 0.0 || c.value < 0.0 {
        return Err(Error::domain("radiation rate and C must be non-negative"));
    }
    let ratio = power_law(1.0, &[(n_r_obs, 1.0), (n_g_obs, -1.0), (c, 1.0)], mode)?.with_label("n_r/n_g");
    let eta = 1.0 / (1.0 + ratio.value);
    // dη/η = (r/(1+r))·(dr/r)
    let eta_sigma = eta * ratio.sigma / (1.0 + ratio.value);
    Ok(EfficiencyResult {
        eta_c: MeasuredValue::new(eta, eta_sigma)?.with_label("eta_c"),
        ratio_nr_over_ng: ratio,
        n_g_obs: n_g_obs.clone(),
        n_r_obs: n_r_obs.clone(),
        c: c.clone(),
    })
}

/// Which spread is attached to an observed on-state rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateUncertainty {
    /// Fitted width over `√n`.
    #[default]
    SigmaOfMean,
    /// Fitted width itself.
    Width,
}

impl std::str::FromStr for RateUncertainty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "sigma_of_mean" | "mean" => Ok(Self::SigmaOfMean),
            "width" => Ok(Self::Width),
            other => Err(Error::domain(format!("unknown rate uncertainty '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub levels: LevelOptions,
    pub fit_mode: HistogramFitMode,
    pub rate_uncertainty: RateUncertainty,
    /// Subtract the background level from the on-state rate.
    pub subtract_background: bool,
    pub propagation: Propagation,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            levels: LevelOptions::default(),
            fit_mode: HistogramFitMode::Joint,
            rate_uncertainty: RateUncertainty::SigmaOfMean,
            subtract_background: true,
            propagation: Propagation::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub segmentation: BlinkSegmentation,
    pub fits: Vec<GaussianFit>,
    /// Observed on-state rate in kcps.
    pub on_rate: MeasuredValue,
}

/// Segments and fits one channel and extracts its on-state rate.
pub fn analyze_channel(trace: &CountTrace, opts: &AnalysisOptions) -> Result<ChannelReport> {
    let seg = detect_levels(trace, &opts.levels)?;
    let fits = fit_levels(trace, &seg, opts.levels.histogram_bin, opts.fit_mode)?;
    let on_rate = on_state_rate(&seg, &fits, opts)?;
    Ok(ChannelReport {
        segmentation: seg,
        fits,
        on_rate,
    })
}

fn on_state_rate(seg: &BlinkSegmentation, fits: &[GaussianFit], opts: &AnalysisOptions) -> Result<MeasuredValue> {
    let spread = |f: &GaussianFit| match opts.rate_uncertainty {
        RateUncertainty::SigmaOfMean => f.mean_error,
        RateUncertainty::Width => f.sigma,
    };
    let top = &fits[seg.top_level()];
    let on = MeasuredValue::new(top.mean, spread(top))?;
    match seg.background_level {
        Some(b) if opts.subtract_background && b != seg.top_level() => {
            let bg = &fits[b];
            let sigma = opts.propagation.combine([on.sigma, bg.mean_error]);
            MeasuredValue::new(on.value - bg.mean, sigma)
        }
        _ => Ok(on),
    }
    .map(|m| m.with_label("on_rate_kcps"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub guided: ChannelReport,
    pub radiation: ChannelReport,
    pub efficiency: EfficiencyResult,
    pub options: AnalysisOptions,
}

/// Paired guided/radiation traces to `η_c`.
pub fn analyze_pair(
    guided: &CountTrace,
    radiation: &CountTrace,
    c: &MeasuredValue,
    opts: &AnalysisOptions,
) -> Result<AnalysisReport> {
    let g = analyze_channel(guided, opts)?;
    let r = analyze_channel(radiation, opts)?;
    let efficiency = channeling_from_counts(&g.on_rate, &r.on_rate, c, opts.propagation)?;
    Ok(AnalysisReport {
        guided: g,
        radiation: r,
        efficiency,
        options: *opts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampStream {
    pub channel: Option<u8>,
    /// Detection times in seconds, strictly increasing.
    pub times: Vec<f64>,
    /// Observation window, when known.
    pub window: Option<(f64, f64)>,
}

impl TimestampStream {
    pub fn new(times: Vec<f64>, channel: Option<u8>) -> Result<Self> {
        if let Some(t) = times.iter().find(|t| !t.is_finite()) {
            return Err(Error::Schema(format!("non-finite timestamp {t}")));
        }
        if let Some(i) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Schema(format!(
                "timestamps not strictly increasing at index {} ({} after {})",
                i + 1,
                times[i + 1],
                times[i]
            )));
        }
        Ok(Self {
            channel,
            times,
            window: None,
        })
    }

    pub fn with_window(mut self, start: f64, end: f64) -> Result<Self> {
        if !(end > start) {
            return Err(Error::domain("window end must follow its start"));
        }
        if let (Some(first), Some(last)) = (self.times.first(), self.times.last()) {
            if *first < start || *last > end {
                return Err(Error::domain("timestamps fall outside the window"));
            }
        }
        self.window = Some((start, end));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Channel encoded as a `_ch1` / `_ch2` suffix of the file stem.
    pub fn channel_from_path(path: &Path) -> Option<u8> {
        let stem = path.file_stem()?.to_str()?;
        let (_, suffix) = stem.rsplit_once("_ch")?;
        suffix.parse().ok()
    }

    pub fn parse(text: &str, channel: Option<u8>) -> Result<Self> {
        let mut times = Vec::new();
        let mut window = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(("window", rest)) = comment.split_once('=').map(|(k, v)| (k.trim(), v)) {
                    let parts: Vec<f64> = rest.split_whitespace().filter_map(|s| s.parse().ok()).collect();
                    if parts.len() == 2 {
                        window = Some((parts[0], parts[1]));
                    }
                }
                continue;
            }
            let t: f64 = line.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("'{line}' is not a timestamp"),
            })?;
            times.push(t);
        }
        let s = Self::new(times, channel)?;
        match window {
            Some((a, b)) => s.with_window(a, b).map_err(|e| Error::Schema(e.to_string())),
            None => Ok(s),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        Self::parse(&read_file(p)?, Self::channel_from_path(p))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.times.len() * 20);
        if let Some((a, b)) = self.window {
            let _ = writeln!(out, "# window = {a} {b}");
        }
        for t in &self.times {
            let _ = writeln!(out, "{t}");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_text())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum G2Normalization {
    /// Mean rates of the complete streams.
    #[default]
    FullStream,
    /// Rates conditioned on the emitter being on, given its duty cycle.
    OnState { duty_cycle: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Histogram {
    /// Bin centres; the middle bin is centred on zero delay.
    pub tau: Vec<f64>,
    pub coincidences: Vec<u64>,
    pub g2: Vec<f64>,
    pub dip: f64,
    pub pairs: u64,
    pub rate_a: f64,
    pub rate_b: f64,
    pub duration: f64,
    pub tau_bin: f64,
    pub normalization: G2Normalization,
}

impl G2Histogram {
    pub fn is_single_emitter(&self) -> bool {
        self.dip < SINGLE_EMITTER_THRESHOLD
    }
}

/// Cross-correlation of two detector streams, normalized to the
/// uncorrelated expectation `r_a r_b (T − |τ|) Δτ` per bin.
pub fn g2_histogram(
    a: &TimestampStream,
    b: &TimestampStream,
    max_tau: f64,
    tau_bin: f64,
    normalization: G2Normalization,
) -> Result<G2Histogram> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if !(tau_bin > 0.0) || !(max_tau >= tau_bin) {
        return Err(Error::domain("need 0 < tau_bin <= max_tau"));
    }
    let (start, end) = match (a.window, b.window) {
        (Some(wa), Some(wb)) => (wa.0.min(wb.0), wa.1.max(wb.1)),
        _ => (
            a.times[0].min(b.times[0]),
            a.times.last().unwrap().max(*b.times.last().unwrap()),
        ),
    };
    let duration = end - start;
    if !(duration > 0.0) {
        return Err(Error::domain("streams span zero time"));
    }
    let half = (max_tau / tau_bin).round() as i64;
    let nbins = (2 * half + 1) as usize;
    let reach = (half as f64 + 0.5) * tau_bin;
    let mut hist = vec![0u64; nbins];
    let mut lo = 0usize;
    for &ta in &a.times {
        while lo < b.times.len() && b.times[lo] < ta - reach {
            lo += 1;
        }
        let mut j = lo;
        while j < b.times.len() && b.times[j] < ta + reach {
            let k = ((b.times[j] - ta) / tau_bin).round() as i64;
            if k.abs() <= half {
                hist[(k + half) as usize] += 1;
            }
            j += 1;
        }
    }
    let rate_a = a.len() as f64 / duration;
    let rate_b = b.len() as f64 / duration;
    let duty = match normalization {
        G2Normalization::FullStream => 1.0,
        G2Normalization::OnState { duty_cycle } => {
            if !(duty_cycle > 0.0 && duty_cycle <= 1.0) {
                return Err(Error::domain("duty cycle must lie in (0, 1]"));
            }
            duty_cycle
        }
    };
    let tau: Vec<f64> = (-half..=half).map(|k| k as f64 * tau_bin).collect();
    let g2: Vec<f64> = tau
        .iter()
        .zip(&hist)
        .map(|(t, &c)| {
            let expected = rate_a * rate_b * (duration - t.abs()).max(0.0) * tau_bin / duty;
            c as f64 / expected
        })
        .collect();
    Ok(G2Histogram {
        dip: g2[half as usize],
        pairs: hist.iter().sum(),
        tau,
        coincidences: hist,
        g2,
        rate_a,
        rate_b,
        duration,
        tau_bin,
        normalization,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakOptions {
    /// Minimum topographic prominence, in count units.
    pub prominence: f64,
    /// Minimum prominence in units of the point-to-point noise.
    pub min_snr: f64,
    /// Gaussian smoothing applied before locating maxima, in samples.
    pub smoothing: f64,
    /// Half-width of the fit window in units of the estimated FWHM.
    pub window_fwhm: f64,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            prominence: 10.0,
            min_snr: 8.0,
            smoothing: 1.0,
            window_fwhm: 3.0,
        }
    }
}

/// Robust noise of a sampled profile from its first differences.
fn difference_noise(y: &[f64]) -> f64 {
    let mut d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    1.4826 * d[d.len() / 2] / std::f64::consts::SQRT_2
}

fn gaussian_smooth(y: &[f64], sigma: f64) -> Vec<f64> {
    if !(sigma > 0.0) {
        return y.to_vec();
    }
    let half = (4.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-half..=half).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let n = y.len() as i64;
    (0..n)
        .map(|i| {
            let (mut acc, mut norm) = (0.0, 0.0);
            for (j, w) in (-half..=half).zip(&kernel) {
                let k = i + j;
                if (0..n).contains(&k) {
                    acc += w * y[k as usize];
                    norm += w;
                }
            }
            acc / norm
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub position: f64,
    /// Height above the local background.
    pub height: f64,
    pub fwhm: f64,
    pub sigma: f64,
    pub background: f64,
    pub fit_residual: f64,
}

/// Peaks above a prominence threshold, each refined by a Gaussian plus
/// constant fit.
pub fn find_peaks(scan: &CountTrace, opts: &PeakOptions) -> Result<Vec<Peak>> {
    let y = &scan.counts;
    let n = y.len();
    if n < 5 {
        return Ok(Vec::new());
    }
    let dx = scan.bin_width;
    let smooth = gaussian_smooth(y, opts.smoothing);
    let threshold = opts.prominence.max(opts.min_snr * difference_noise(y));
    let mut peaks: Vec<Peak> = Vec::new();
    for (idx, prom) in prominent_maxima(&smooth) {
        if prom < threshold {
            continue;
        }
        let top = smooth[idx];
        let half_level = top - prom / 2.0;
        let mut l = idx;
        while l > 0 && smooth[l] > half_level {
            l -= 1;
        }
        let mut r = idx;
        while r + 1 < n && smooth[r] > half_level {
            r += 1;
        }
        let fwhm0 = ((r - l) as f64 * dx).max(2.0 * dx);
        let span = ((opts.window_fwhm * fwhm0 / dx).ceil() as usize).max(3);
        let lo = idx.saturating_sub(span);
        let hi = (idx + span + 1).min(n);
        if hi - lo < 5 {
            continue;
        }
        let xs: Vec<f64> = (lo..hi).map(|i| scan.coordinate(i)).collect();
        let ys = &y[lo..hi];
        let base0 = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let init = [y[idx].max(top) - base0, scan.coordinate(idx), fwhm0 / FWHM_PER_SIGMA, base0];
        let model = |p: &[f64], jac: &mut DMatrix<f64>| -> Vec<f64> {
            xs.iter()
                .enumerate()
                .map(|(i, &x)| {
                    let d = x - p[1];
                    let g = (-d * d / (2.0 * p[2] * p[2])).exp();
                    jac[(i, 0)] = g;
                    jac[(i, 1)] = p[0] * g * d / (p[2] * p[2]);
                    jac[(i, 2)] = p[0] * g * d * d / p[2].powi(3);
                    jac[(i, 3)] = 1.0;
                    p[0] * g + p[3]
                })
                .collect()
        };
        let weights = vec![1.0; ys.len()];
        let (x_lo, x_hi) = (xs[0], xs[xs.len() - 1]);
        let valid = |p: &[f64]| p[0] > 0.0 && p[2] > 0.0 && p[1] >= x_lo && p[1] <= x_hi;
        let Ok(fit) = levenberg_marquardt(model, valid, ys, &weights, &init, &LmOptions::default()) else {
            continue;
        };
        let dof = (ys.len() - 4).max(1) as f64;
        let p = &fit.params;
        peaks.push(Peak {
            position: p[1],
            height: p[0],
            fwhm: FWHM_PER_SIGMA * p[2],
            sigma: p[2],
            background: p[3],
            fit_residual: (fit.cost / dof).sqrt() / p[0],
        });
    }
    // two maxima refined onto the same feature count once
    peaks.sort_by(|a, b| b.height.total_cmp(&a.height));
    let mut kept: Vec<Peak> = Vec::new();
    for p in peaks {
        if kept.iter().all(|k| (k.position - p.position).abs() > 0.5 * (k.fwhm + p.fwhm)) {
            kept.push(p);
        }
    }
    kept.sort_by(|a, b| a.position.total_cmp(&b.position));
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_row_file_parses() {
        let t = CountTrace::parse("0.0,12\n0.1,15", &TraceFormat::default()).unwrap();
        assert_eq!(t.len(), 2);
        assert_abs_diff_eq!(t.bin_width, 0.1, epsilon = 1e-15);
        assert_eq!(t.counts, vec![12.0, 15.0]);
    }

    #[test]
    fn empty_data_section() {
        let r = CountTrace::parse("# nothing\ntime_s,counts\n", &TraceFormat::default());
        assert_eq!(r.unwrap_err(), Error::EmptyTrace);
    }

    #[test]
    fn malformed_row_reports_line() {
        let r = CountTrace::parse("time_s,counts\n0.0,1\n0.1,x\n", &TraceFormat::default());
        assert!(matches!(r, Err(Error::Parse { line: 3, .. })), "{r:?}");
        let r = CountTrace::parse("time_s,counts\n0.0,1\n0.1,2,3\n", &TraceFormat::default());
        assert!(matches!(r, Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn non_monotone_time_is_schema_error() {
        let r = CountTrace::parse("time_s,counts\n0.0,1\n0.2,2\n0.1,3\n", &TraceFormat::default());
        assert!(matches!(r, Err(Error::Schema(_))));
    }

    #[test]
    fn prominence_of_simple_profile() {
        let h = [0.0, 3.0, 1.0, 5.0, 0.0];
        let m = prominent_maxima(&h);
        assert_eq!(m, vec![(1, 2.0), (3, 5.0)]);
    }

    #[test]
    fn efficiency_arithmetic() {
        let ng = MeasuredValue::new(44.3, 5.4).unwrap();
        let nr = MeasuredValue::new(24.8, 3.7).unwrap();
        let c = MeasuredValue::new(7.13, 0.84).unwrap();
        let r = channeling_from_counts(&ng, &nr, &c, Propagation::Linear).unwrap();
        assert_abs_diff_eq!(r.ratio_nr_over_ng.value, 3.99, epsilon = 0.01);
        assert_abs_diff_eq!(r.ratio_nr_over_ng.sigma, 1.55, epsilon = 0.02);
        assert_abs_diff_eq!(r.eta_c.value, 0.200, epsilon = 0.001);
        assert_abs_diff_eq!(r.eta_c.sigma, 0.062, epsilon = 0.002);

        let zero = channeling_from_counts(&ng, &MeasuredValue::exact(0.0), &c, Propagation::Linear).unwrap();
        assert_eq!(zero.ratio_nr_over_ng.value, 0.0);
        assert_eq!(zero.eta_c.value, 1.0);

        let same = MeasuredValue::exact(10.0);
        let r = channeling_from_counts(&same, &same, &MeasuredValue::exact(2.0), Propagation::Linear).unwrap();
        assert_eq!(r.ratio_nr_over_ng.value, 2.0);
        assert_abs_diff_eq!(r.eta_c.value, 1.0 / 3.0, epsilon = 1e-15);

        assert!(channeling_from_counts(&MeasuredValue::exact(0.0), &nr, &c, Propagation::Linear).is_err());
    }

    #[test]
    fn channel_suffix() {
        assert_eq!(TimestampStream::channel_from_path(Path::new("run_ch2.txt")), Some(2));
        assert_eq!(TimestampStream::channel_from_path(Path::new("/x/a_ch1")), Some(1));
        assert_eq!(TimestampStream::channel_from_path(Path::new("plain.txt")), None);
    }

    #[test]
    fn g2_rejects_empty() {
        let a = TimestampStream::new(vec![], Some(1)).unwrap();
        let b = TimestampStream::new(vec![1.0], Some(2)).unwrap();
        assert!(g2_histogram(&a, &b, 1e-6, 1e-8, G2Normalization::FullStream).is_err());
    }

    #[test]
    fn degenerate_histogram_is_a_fit_error() {
        let t = CountTrace::new(0.1, 0.0, vec![100.0; 30]).unwrap();
        assert!(matches!(fit_count_histogram(&t, 1.0), Err(Error::Fit(_))));
    }
}
