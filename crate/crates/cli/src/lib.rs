//! Command-line front end: theory curves, calibration, trace analysis, g²,
//! peak finding and synthetic data.

pub mod config;
pub mod format;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nanofiber::calibration::{CalibrationConstants, KeyValues, MeasuredValue, Propagation};
use nanofiber::dipole_emission::{
    average_enhancement, efficiency_curve, linspace, CurveOptions, Denominator, EnhancementNormalization,
    EnhancementOptions, Orientation, RadiationQuadratureSpec,
};
use nanofiber::fiber_modes::{solve_guided_modes, FiberGeometry};
use nanofiber::photon_synth::{
    simulate_dual_channel, simulate_emitter_stream, split_stream, synthetic_scan, EmitterModel, ScanPeak,
    SimulationSeed, GENERATOR,
};
use nanofiber::trace_analysis::{
    analyze_pair, channeling_from_counts, find_peaks, g2_histogram, AnalysisOptions, CountTrace, G2Normalization,
    HistogramFitMode, PeakOptions, RateUncertainty, TimestampStream, TraceAxis, TraceFormat,
};
use serde::Serialize;

use config::Defaults;
use format::{csv_row, sig6};

const DEFAULT_N1: f64 = 1.45;
const DEFAULT_WAVELENGTH_NM: f64 = 780.0;
const DEFAULT_NA: f64 = 0.6;
const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "nanofiber", version, about = "Nanofiber channeling theory and photon-count analysis")]
pub struct Cli {
    /// Uncertainty propagation: linear (worst case) or quadrature.
    #[arg(long, global = true, value_name = "MODE")]
    pub propagation: Option<Propagation>,
    /// TOML file with default parameters; overrides $NANOFIBER_CONFIG.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Channeling efficiency against size parameter k0·a for an on-surface emitter.
    Curve(CurveArgs),
    /// Guided modes of one fiber.
    Modes(ModesArgs),
    /// Lens enhancement factor averaged over a diameter sweep.
    Enhancement(EnhancementArgs),
    /// Calibration constants from a `key = value` file.
    Calibrate(CalibrateArgs),
    /// Channeling efficiency from paired guided and radiation traces.
    Analyze(AnalyzeArgs),
    /// Normalized cross-correlation of two timestamp files.
    G2(G2Args),
    /// Gaussian peaks in a position scan.
    Peaks(PeaksArgs),
    /// Seeded synthetic traces, photon streams or scans.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    /// Write here instead of standard output.
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuadratureArgs {
    /// Highest cylindrical order kept in the radiation sum.
    #[arg(long)]
    pub m_max: Option<u32>,
    /// Relative tolerance of the radiation quadrature (at most 1e-4).
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Core refractive index; the cladding is vacuum.
    #[arg(long)]
    pub n1: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub x_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub x_max: f64,
    /// Number of intervals; the grid has steps + 1 points.
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    /// radial, azimuthal, axial or isotropic.
    #[arg(long, default_value = "isotropic")]
    pub orientation: Orientation,
    /// Guided families in the denominator: all or he11.
    #[arg(long, default_value = "all")]
    pub denominator: Denominator,
    #[command(flatten)]
    pub quad: QuadratureArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ModesArgs {
    #[arg(long)]
    pub n1: Option<f64>,
    /// Cladding index.
    #[arg(long, default_value_t = 1.0)]
    pub n2: f64,
    /// Wavelength in nm.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fiber diameter in nm.
    #[arg(long, conflicts_with = "x", required_unless_present = "x")]
    pub diameter: Option<f64>,
    /// Size parameter k0·a instead of a diameter.
    #[arg(long)]
    pub x: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EnhancementArgs {
    /// Numerical aperture of the objective.
    #[arg(long)]
    pub na: Option<f64>,
    /// Wavelength in nm.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub n1: Option<f64>,
    /// Smallest diameter in nm.
    #[arg(long, default_value_t = 300.0)]
    pub d_min: f64,
    /// Largest diameter in nm.
    #[arg(long, default_value_t = 800.0)]
    pub d_max: f64,
    /// Number of intervals; the sweep has steps + 1 diameters.
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    /// free-space (cone power over free-space cone power) or radiated-fraction.
    #[arg(long, default_value = "free-space")]
    pub normalization: EnhancementNormalization,
    /// Quadrature nodes across the cone in each angle.
    #[arg(long, default_value_t = 48)]
    pub cone_nodes: usize,
    #[command(flatten)]
    pub quad: QuadratureArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// `key = value` file with `<name>.value` / `<name>.sigma` entries.
    pub input: PathBuf,
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitModeArg {
    Joint,
    PerLevel,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Guided-channel trace CSV.
    #[arg(long, required_unless_present = "guided_rate")]
    pub guided: Option<PathBuf>,
    /// Radiation-channel trace CSV.
    #[arg(long, required_unless_present = "radiation_rate")]
    pub radiation: Option<PathBuf>,
    /// Calibration as JSON (from `calibrate`) or as a `key = value` file.
    #[arg(long)]
    pub calibration: PathBuf,
    /// Observed guided on-state rate in kcps, instead of a trace.
    #[arg(long, conflicts_with = "guided", requires = "guided_sigma")]
    pub guided_rate: Option<f64>,
    #[arg(long)]
    pub guided_sigma: Option<f64>,
    /// Observed radiation on-state rate in kcps, instead of a trace.
    #[arg(long, conflicts_with = "radiation", requires = "radiation_sigma")]
    pub radiation_rate: Option<f64>,
    #[arg(long)]
    pub radiation_sigma: Option<f64>,
    /// Histogram bin in kcps.
    #[arg(long)]
    pub histogram_bin: Option<f64>,
    #[arg(long, value_enum, default_value_t = FitModeArg::Joint)]
    pub fit_mode: FitModeArg,
    /// sigma-of-mean or width.
    #[arg(long, default_value = "sigma-of-mean")]
    pub rate_uncertainty: RateUncertainty,
    /// Report the on-state rate without subtracting the background level.
    #[arg(long)]
    pub keep_background: bool,
    /// Bin width in seconds for single-row traces without a header comment.
    #[arg(long)]
    pub bin_width: Option<f64>,
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum G2NormArg {
    FullStream,
    OnState,
}

#[derive(Debug, Args)]
pub struct G2Args {
    /// First detector's timestamps, one value in seconds per line.
    pub a: PathBuf,
    /// Second detector's timestamps.
    pub b: PathBuf,
    /// Largest delay in seconds.
    #[arg(long, default_value_t = 500e-9)]
    pub max_tau: f64,
    /// Delay bin in seconds.
    #[arg(long, default_value_t = 5e-9)]
    pub tau_bin: f64,
    #[arg(long, value_enum, default_value_t = G2NormArg::FullStream)]
    pub normalization: G2NormArg,
    /// Emitter duty cycle, required for on-state normalization.
    #[arg(long, required_if_eq("normalization", "on-state"))]
    pub duty_cycle: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PeaksArgs {
    /// Scan CSV with a `position_um,counts` header.
    pub scan: PathBuf,
    /// Minimum prominence in counts.
    #[arg(long, default_value_t = 10.0)]
    pub prominence: f64,
    /// Minimum prominence in units of the point-to-point noise.
    #[arg(long, default_value_t = 8.0)]
    pub min_snr: f64,
    /// Smoothing before peak location, in samples.
    #[arg(long, default_value_t = 1.0)]
    pub smoothing: f64,
    /// Fit window half-width in units of the estimated FWHM.
    #[arg(long, default_value_t = 3.0)]
    pub window_fwhm: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimKind {
    /// Guided and radiation count traces.
    Traces,
    /// Photon timestamps split onto two detectors.
    Stream,
    /// Position scan with Gaussian features.
    Scan,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = SimKind::Traces)]
    pub kind: SimKind,
    /// Directory for the generated files.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Duration in seconds.
    #[arg(long, default_value_t = 300.0)]
    pub duration: f64,
    /// Trace bin width in seconds.
    #[arg(long, default_value_t = 0.1)]
    pub bin_width: f64,
    /// True channeling efficiency for traces.
    #[arg(long, default_value_t = 0.2)]
    pub eta: f64,
    /// Calibration file for traces; the reference setup when absent.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Excitation rate in 1/s.
    #[arg(long)]
    pub excitation_rate: Option<f64>,
    /// Excited-state lifetime in seconds.
    #[arg(long)]
    pub lifetime: Option<f64>,
    /// Off → on switching rate in 1/s.
    #[arg(long)]
    pub on_rate: Option<f64>,
    /// On → off switching rate in 1/s.
    #[arg(long)]
    pub off_rate: Option<f64>,
    /// Detection efficiencies of the two channels.
    #[arg(long, value_delimiter = ',', value_name = "A,B")]
    pub efficiency: Option<Vec<f64>>,
    /// Background rates of the two channels in counts/s.
    #[arg(long, value_delimiter = ',', value_name = "A,B")]
    pub background: Option<Vec<f64>>,
    /// Relative per-bin intensity jitter.
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Beamsplitter ratio for streams.
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    /// Number of scan peaks.
    #[arg(long, default_value_t = 8)]
    pub peaks: usize,
    /// Peak spacing in µm.
    #[arg(long, default_value_t = 500.0)]
    pub spacing: f64,
    /// Peak FWHM in µm.
    #[arg(long, default_value_t = 1.5)]
    pub fwhm: f64,
    /// Height of the first peak in counts; later peaks grow by 40 each.
    #[arg(long, default_value_t = 600.0)]
    pub height: f64,
    /// Scan step in µm.
    #[arg(long, default_value_t = 0.25)]
    pub scan_step: f64,
    /// Flat scan background in counts.
    #[arg(long, default_value_t = 15.0)]
    pub scan_background: f64,
}

#[derive(Debug)]
pub enum CliError {
    Core(nanofiber::Error),
    Config(String),
}

impl CliError {
    /// 1 domain, 2 I/O or schema, 3 convergence or fit failure.
    pub fn exit_code(&self) -> i32 {
        use nanofiber::Error as E;
        match self {
            CliError::Core(E::Domain(_) | E::InsufficientData { .. }) => 1,
            CliError::Core(E::Parse { .. } | E::Schema(_) | E::EmptyTrace | E::Io(_)) => 2,
            CliError::Core(E::Fit(_) | E::Convergence { .. }) => 3,
            CliError::Config(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
        }
    }
}

impl From<nanofiber::Error> for CliError {
    fn from(e: nanofiber::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

struct Context {
    defaults: Defaults,
    propagation: Propagation,
}

impl Context {
    fn n1(&self, flag: Option<f64>) -> f64 {
        flag.or(self.defaults.n1).unwrap_or(DEFAULT_N1)
    }

    fn wavelength(&self, flag_nm: Option<f64>) -> f64 {
        flag_nm.or(self.defaults.wavelength_nm).unwrap_or(DEFAULT_WAVELENGTH_NM) * 1e-9
    }

    fn quad(&self, q: &QuadratureArgs) -> RadiationQuadratureSpec {
        let mut spec = RadiationQuadratureSpec::default();
        if let Some(m) = q.m_max.or(self.defaults.m_max) {
            spec.m_max = m;
        }
        if let Some(t) = q.tolerance.or(self.defaults.tolerance) {
            spec.tolerance = t;
        }
        spec
    }
}

/// Parses `argv` and runs one subcommand.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let defaults = Defaults::resolve(cli.config.as_deref()).map_err(CliError::Config)?;
    let propagation = match (cli.propagation, &defaults.propagation) {
        (Some(p), _) => p,
        (None, Some(s)) => s.parse()?,
        (None, None) => Propagation::Linear,
    };
    let ctx = Context { defaults, propagation };
    match cli.command {
        Command::Curve(a) => curve(&ctx, a),
        Command::Modes(a) => modes(&ctx, a),
        Command::Enhancement(a) => enhancement(&ctx, a),
        Command::Calibrate(a) => calibrate(&ctx, a),
        Command::Analyze(a) => analyze(&ctx, a),
        Command::G2(a) => g2(a),
        Command::Peaks(a) => peaks(a),
        Command::Simulate(a) => simulate(&ctx, a),
    }
}

fn emit(output: Option<&Path>, text: &str) -> CliResult<()> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Core(nanofiber::Error::Io(format!("{}: {e}", p.display())))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("results serialize");
    s.push('\n');
    s
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Core(nanofiber::Error::Io(format!("{}: {e}", path.display()))))
}

fn curve(ctx: &Context, a: CurveArgs) -> CliResult<()> {
    if a.steps == 0 || !(a.x_max > a.x_min) {
        return Err(nanofiber::Error::Domain("need x_min < x_max and at least one step".into()).into());
    }
    let opts = CurveOptions {
        core_index: ctx.n1(a.n1),
        orientation: a.orientation,
        denominator: a.denominator,
        quad: ctx.quad(&a.quad),
    };
    let xs = linspace(a.x_min, a.x_max, a.steps + 1);
    let points = efficiency_curve(&xs, &opts)?;
    let text = match a.out.format {
        OutputFormat::Json => json(&points),
        OutputFormat::Csv => {
            let mut s = String::from("x,eta_c,gamma_he11,gamma_guided_total,gamma_radiation\n");
            for p in &points {
                let b = &p.breakdown;
                let row = [p.size_parameter, p.eta_c, b.gamma_guided_he11, b.gamma_guided_total, b.gamma_radiation];
                writeln!(s, "{}", csv_row(&row)).unwrap();
            }
            s
        }
    };
    emit(a.out.output.as_deref(), &text)
}

#[derive(Serialize)]
struct ModeRow {
    family: String,
    n_eff: f64,
    u: f64,
    w: f64,
    v_number: f64,
    polarizations: u32,
    dispersion_residual: f64,
    boundary_mismatch: f64,
}

fn modes(ctx: &Context, a: ModesArgs) -> CliResult<()> {
    let n1 = ctx.n1(a.n1);
    let wavelength = ctx.wavelength(a.lambda);
    let radius = match (a.diameter, a.x) {
        (Some(d), _) => 0.5 * d * 1e-9,
        (None, Some(x)) => x * wavelength / (2.0 * std::f64::consts::PI),
        (None, None) => unreachable!("clap requires one of the two"),
    };
    let geom = FiberGeometry::new(radius, n1, a.n2)?;
    let rows: Vec<ModeRow> = solve_guided_modes(&geom, wavelength)?
        .iter()
        .map(|m| ModeRow {
            family: m.family.to_string(),
            n_eff: m.n_eff,
            u: m.u,
            w: m.w,
            v_number: m.v_number,
            polarizations: m.family.polarizations(),
            dispersion_residual: m.dispersion_residual(),
            boundary_mismatch: m.boundary_mismatch(),
        })
        .collect();
    let text = match a.out.format {
        OutputFormat::Json => json(&rows),
        OutputFormat::Csv => {
            let mut s = String::from("family,n_eff,u,w,v_number,polarizations,dispersion_residual,boundary_mismatch\n");
            for r in &rows {
                writeln!(
                    s,
                    "{},{},{},{}",
                    r.family,
                    csv_row(&[r.n_eff, r.u, r.w, r.v_number]),
                    r.polarizations,
                    csv_row(&[r.dispersion_residual, r.boundary_mismatch])
                )
                .unwrap();
            }
            s
        }
    };
    emit(a.out.output.as_deref(), &text)
}

fn enhancement(ctx: &Context, a: EnhancementArgs) -> CliResult<()> {
    if a.steps == 0 || !(a.d_max > a.d_min) {
        return Err(nanofiber::Error::Domain("need d_min < d_max and at least one step".into()).into());
    }
    let na = a.na.or(ctx.defaults.na).unwrap_or(DEFAULT_NA);
    let opts = EnhancementOptions {
        normalization: a.normalization,
        cone_theta_nodes: a.cone_nodes,
        cone_phi_nodes: a.cone_nodes,
        quad: ctx.quad(&a.quad),
    };
    let diameters: Vec<f64> = linspace(a.d_min, a.d_max, a.steps + 1).iter().map(|d| d * 1e-9).collect();
    let sweep = average_enhancement(&diameters, ctx.n1(a.n1), ctx.wavelength(a.lambda), na, &opts)?;
    let text = match a.out.format {
        OutputFormat::Json => json(&sweep),
        OutputFormat::Csv => {
            let mut s = format!(
                "# mean = {}\n# sigma = {}\n# max_deviation = {}\ndiameter_nm,enhancement\n",
                sig6(sweep.average.value),
                sig6(sweep.average.sigma),
                sig6(sweep.max_deviation)
            );
            for (d, f) in &sweep.points {
                writeln!(s, "{}", csv_row(&[d * 1e9, *f])).unwrap();
            }
            s
        }
    };
    emit(a.out.output.as_deref(), &text)
}

#[derive(Serialize)]
struct CalibrationReport<'a> {
    #[serde(flatten)]
    constants: &'a CalibrationConstants,
    consistency_error: f64,
}

fn calibrate(ctx: &Context, a: CalibrateArgs) -> CliResult<()> {
    let entries = KeyValues::parse(&read_text(&a.input)?)?;
    let constants = CalibrationConstants::from_key_values(&entries, ctx.propagation)?;
    let report = CalibrationReport {
        consistency_error: constants.consistency_error(),
        constants: &constants,
    };
    emit(a.output.as_deref(), &json(&report))
}

fn load_calibration(path: &Path, propagation: Propagation) -> CliResult<CalibrationConstants> {
    let text = read_text(path)?;
    if text.trim_start().starts_with('{') {
        serde_json::from_str(&text).map_err(|e| CliError::Core(nanofiber::Error::Schema(format!("{}: {e}", path.display()))))
    } else {
        Ok(CalibrationConstants::from_key_values(&KeyValues::parse(&text)?, propagation)?)
    }
}

fn analyze(ctx: &Context, a: AnalyzeArgs) -> CliResult<()> {
    let calib = load_calibration(&a.calibration, ctx.propagation)?;
    let text = match (a.guided_rate, a.radiation_rate) {
        (Some(g), Some(r)) => {
            let ng = MeasuredValue::new(g, a.guided_sigma.unwrap_or(0.0))?;
            let nr = MeasuredValue::new(r, a.radiation_sigma.unwrap_or(0.0))?;
            json(&channeling_from_counts(&ng, &nr, &calib.c, ctx.propagation)?)
        }
        (None, None) => {
            let format = TraceFormat { bin_width: a.bin_width };
            let guided = CountTrace::load(a.guided.as_ref().expect("clap requires a guided trace"), &format)?;
            let radiation = CountTrace::load(a.radiation.as_ref().expect("clap requires a radiation trace"), &format)?;
            let mut opts = AnalysisOptions {
                fit_mode: match a.fit_mode {
                    FitModeArg::Joint => HistogramFitMode::Joint,
                    FitModeArg::PerLevel => HistogramFitMode::PerLevel,
                },
                rate_uncertainty: a.rate_uncertainty,
                subtract_background: !a.keep_background,
                propagation: ctx.propagation,
                ..AnalysisOptions::default()
            };
            if let Some(bin) = a.histogram_bin.or(ctx.defaults.histogram_bin) {
                opts.levels.histogram_bin = bin;
            }
            json(&analyze_pair(&guided, &radiation, &calib.c, &opts)?)
        }
        _ => {
            return Err(nanofiber::Error::Domain("give both observed rates or both traces".into()).into());
        }
    };
    emit(a.output.as_deref(), &text)
}

fn g2(a: G2Args) -> CliResult<()> {
    let sa = TimestampStream::load(&a.a)?;
    let sb = TimestampStream::load(&a.b)?;
    let norm = match a.normalization {
        G2NormArg::FullStream => G2Normalization::FullStream,
        G2NormArg::OnState => G2Normalization::OnState {
            duty_cycle: a.duty_cycle.expect("clap requires the duty cycle"),
        },
    };
    let h = g2_histogram(&sa, &sb, a.max_tau, a.tau_bin, norm)?;
    let text = match a.out.format {
        OutputFormat::Json => json(&h),
        OutputFormat::Csv => {
            let mut s = format!(
                "# dip = {}\n# pairs = {}\n# single_emitter = {}\ntau_s,coincidences,g2\n",
                sig6(h.dip),
                h.pairs,
                h.is_single_emitter()
            );
            for ((t, c), g) in h.tau.iter().zip(&h.coincidences).zip(&h.g2) {
                writeln!(s, "{},{},{}", sig6(*t), c, sig6(*g)).unwrap();
            }
            s
        }
    };
    emit(a.out.output.as_deref(), &text)
}

fn peaks(a: PeaksArgs) -> CliResult<()> {
    let scan = CountTrace::load(&a.scan, &TraceFormat::default())?;
    let opts = PeakOptions {
        prominence: a.prominence,
        min_snr: a.min_snr,
        smoothing: a.smoothing,
        window_fwhm: a.window_fwhm,
    };
    let found = find_peaks(&scan, &opts)?;
    let text = match a.out.format {
        OutputFormat::Json => json(&found),
        OutputFormat::Csv => {
            let mut s = String::from("position_um,height,fwhm_um,background\n");
            for p in &found {
                writeln!(s, "{}", csv_row(&[p.position, p.height, p.fwhm, p.background])).unwrap();
            }
            s
        }
    };
    emit(a.out.output.as_deref(), &text)
}

#[derive(Serialize)]
struct SimulationRecord<'a> {
    kind: &'static str,
    seed: u64,
    generator: &'static str,
    model: &'a EmitterModel,
    duration: f64,
    files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<MeasuredValue>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    peaks: Vec<ScanPeak>,
}

fn pair(name: &str, v: &[f64]) -> CliResult<[f64; 2]> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(nanofiber::Error::Domain(format!("--{name} takes two comma-separated values")).into()),
    }
}

fn emitter_model(a: &SimulateArgs) -> CliResult<EmitterModel> {
    let mut m = EmitterModel::reference();
    if let Some(v) = a.excitation_rate {
        m.excitation_rate = v;
    }
    if let Some(v) = a.lifetime {
        m.decay_lifetime = v;
    }
    if let Some(v) = a.on_rate {
        m.on_rate = v;
    }
    if let Some(v) = a.off_rate {
        m.off_rate = v;
    }
    if let Some(v) = &a.efficiency {
        m.detection_efficiency = pair("efficiency", v)?;
    }
    if let Some(v) = &a.background {
        m.background_rate = pair("background", v)?;
    }
    if let Some(v) = a.jitter {
        m.intensity_jitter = v;
    }
    Ok(m)
}

fn simulate(ctx: &Context, a: SimulateArgs) -> CliResult<()> {
    let seed_value = a.seed.or(ctx.defaults.seed).unwrap_or(DEFAULT_SEED);
    let seed = SimulationSeed::new(seed_value);
    let model = emitter_model(&a)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let path = |name: &str| a.out_dir.join(name);
    let mut record = SimulationRecord {
        kind: "",
        seed: seed_value,
        generator: GENERATOR,
        model: &model,
        duration: a.duration,
        files: Vec::new(),
        eta_c: None,
        c: None,
        peaks: Vec::new(),
    };
    match a.kind {
        SimKind::Traces => {
            let calib = match &a.calibration {
                Some(p) => load_calibration(p, ctx.propagation)?,
                None => CalibrationConstants::reference_setup(),
            };
            let (g, r) = simulate_dual_channel(a.eta, &calib, &model, a.duration, a.bin_width, &seed)?;
            g.save(path("guided.csv"))?;
            r.save(path("radiation.csv"))?;
            record.kind = "traces";
            record.files = vec!["guided.csv".into(), "radiation.csv".into()];
            record.eta_c = Some(a.eta);
            record.c = Some(calib.c);
        }
        SimKind::Stream => {
            let stream = simulate_emitter_stream(&model, a.duration, &seed)?;
            // the splitter gets its own stream of random numbers
            let (s1, s2) = split_stream(&stream, a.split, &SimulationSeed::new(seed_value.wrapping_add(1)))?;
            s1.save(path("photons_ch1.txt"))?;
            s2.save(path("photons_ch2.txt"))?;
            record.kind = "stream";
            record.files = vec!["photons_ch1.txt".into(), "photons_ch2.txt".into()];
        }
        SimKind::Scan => {
            let peaks: Vec<ScanPeak> = (0..a.peaks)
                .map(|k| ScanPeak {
                    position: a.spacing * (k as f64 + 0.3),
                    height: a.height + 40.0 * k as f64,
                    fwhm: a.fwhm,
                })
                .collect();
            if !(a.scan_step > 0.0) {
                return Err(nanofiber::Error::Domain("scan step must be positive".into()).into());
            }
            let points = (a.spacing * a.peaks.max(1) as f64 / a.scan_step).round() as usize;
            let scan = synthetic_scan(0.0, a.scan_step, points, &peaks, a.scan_background, &seed)?;
            debug_assert_eq!(scan.axis, TraceAxis::Position);
            scan.save(path("scan.csv"))?;
            record.kind = "scan";
            record.files = vec!["scan.csv".into()];
            record.peaks = peaks;
        }
    }
    std::fs::write(path("truth.json"), json(&record))?;
    for f in &record.files {
        println!("{}", path(f).display());
    }
    Ok(())
}
