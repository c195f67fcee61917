//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use eprony_core::normalform::DEFAULT_DETUNING_FLOOR;
use eprony_core::{
    analytic_response, combine_resonance_contribution, error_index, fit_prony, generate_designed,
    h_coefficients, initial_z, multichannel_fit, ode, prony, resonance_degree, run_extended_prony,
    to_modal, windowed_error, DesignedSignalSpec, ExtendedOptions, ExtendedResult, Interval,
    ModeKind, ModeSet, ScalePolicy, Signal, SplitPolicy,
};

use crate::config::{AnalysisConfig, ConfigError, Method, SystemConfig};
use crate::report::{
    shape_entry, write_report, CompareReport, CompareRow, ExtendedReport, InputInfo,
    NormalFormReport, PronyReport, ShapeEntry,
};
use crate::waveform::{load_waveforms, write_columns, write_signal, IngestError};

const EXIT_CODES: &str = "\
Exit status:
  0  success
  2  usage error (bad flags, config, channel or window)
  3  ingestion or IO failure (unreadable or malformed files)
  4  numerical failure (rank deficiency, ill-conditioning, non-convergence)
  5  segmentation failure (no split found, segment too short)";

#[derive(Debug, Parser)]
#[command(name = "eprony", version, about = "Prony and resonance-aware extended Prony analysis of ringdown signals", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a designed test signal or a simulated quadratic-system ringdown as CSV.
    #[command(after_help = EXIT_CODES)]
    Generate(GenerateArgs),
    /// Fit modes to one channel of a waveform file.
    #[command(after_help = EXIT_CODES)]
    Analyze(AnalyzeArgs),
    /// Second-order normal-form analysis of a quadratic system.
    #[command(after_help = EXIT_CODES)]
    Normalform(NormalformArgs),
    /// Error indices of candidate reconstructions against a reference.
    #[command(after_help = EXIT_CODES)]
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Designed {
    /// Two steady modes, a decaying dc term and a frequency-drifting mode.
    Benchmark,
    /// The same without frequency drift.
    BenchmarkSteady,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(
        long,
        value_enum,
        conflicts_with = "system",
        required_unless_present = "system"
    )]
    pub designed: Option<Designed>,
    /// TOML file describing a quadratic system and its initial state.
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long, default_value_t = 25.0)]
    pub t_end: f64,
    /// Output sample spacing in seconds.
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Integration step for `--system`, in seconds.
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub channel: Option<String>,
    /// Analysis window `start:end` in seconds.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<Interval>,
    /// Explicit split time in seconds (extended method).
    #[arg(long, conflicts_with = "auto_split")]
    pub split: Option<f64>,
    /// Split where the envelope falls below this fraction of its start value.
    #[arg(long)]
    pub auto_split: Option<f64>,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub eps_freq: Option<f64>,
    #[arg(long)]
    pub eps_damp: Option<f64>,
    #[arg(long)]
    pub prune_ratio: Option<f64>,
    #[arg(long)]
    pub reference_channel: Option<String>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Reconstruction CSV over the analysis window.
    #[arg(long)]
    pub reconstruction: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NormalformArgs {
    pub system: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DETUNING_FLOOR)]
    pub floor: f64,
    #[arg(long, default_value_t = 5.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Analytic second-order response as CSV.
    #[arg(long)]
    pub response: Option<PathBuf>,
    /// RK4 integration of the full system on the same grid, as CSV.
    #[arg(long)]
    pub rk4: Option<PathBuf>,
    /// RK4 step in seconds.
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub reference: PathBuf,
    /// `name=path` of a candidate reconstruction; repeatable.
    #[arg(long = "candidate", value_parser = parse_candidate, required = true)]
    pub candidates: Vec<(String, PathBuf)>,
    #[arg(long)]
    pub channel: Option<String>,
    /// Consecutive sub-windows, e.g. `2:10,10:25`.
    #[arg(long, value_delimiter = ',', value_parser = parse_window, required = true)]
    pub windows: Vec<Interval>,
    /// Report path; the table always goes to stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn parse_window(s: &str) -> Result<Interval, String> {
    let (a, b) = s.split_once(':').ok_or("expected start:end")?;
    let start: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let end: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if start >= end || start.is_nan() || end.is_nan() {
        return Err("window start must be before its end".into());
    }
    Ok(Interval::new(start, end))
}

fn parse_candidate(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or("expected name=path")?;
    Ok((name.to_string(), PathBuf::from(path)))
}

/// Failure of a command, classified by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(eprony_core::Error),
    #[error("segmentation failure: {0}")]
    Segmentation(eprony_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Ingest(_) | CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Segmentation(_) => 5,
        }
    }
}

impl From<eprony_core::Error> for CliError {
    fn from(e: eprony_core::Error) -> Self {
        use eprony_core::Error as E;
        match e {
            E::SplitNotFound | E::SegmentTooShort { .. } | E::TooFewSamples { .. } => {
                CliError::Segmentation(e)
            }
            E::InvalidArgument(_)
            | E::InvalidSignal(_)
            | E::NonPositiveStep(_)
            | E::NyquistViolation { .. }
            | E::MissingFaMode
            | E::EmptyWindow { .. }
            | E::UnknownChannel(_)
            | E::ChannelMismatch
            | E::LengthMismatch { .. }
            | E::NotNearResonant { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Read { .. } => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Analyze(a) => analyze(a),
        Command::Normalform(a) => normalform(a),
        Command::Compare(a) => compare(a),
    }
}

fn grid(t_end: f64, dt: f64) -> Result<usize, CliError> {
    if !(dt > 0.0 && t_end > 0.0 && dt.is_finite() && t_end.is_finite()) {
        return Err(CliError::Usage("t-end and dt must be positive".into()));
    }
    Ok((t_end / dt + 1e-9).floor() as usize + 1)
}

fn generate(a: GenerateArgs) -> Result<(), CliError> {
    let signal = match (a.designed, &a.system) {
        (Some(which), _) => {
            let spec = match which {
                Designed::Benchmark => DesignedSignalSpec::benchmark(),
                Designed::BenchmarkSteady => DesignedSignalSpec::benchmark_steady(),
            };
            generate_designed(&spec, a.t_end, a.dt)?
        }
        (None, Some(path)) => {
            let sys = SystemConfig::load(path)?;
            let field = sys.field()?;
            let samples = grid(a.t_end, a.dt)?;
            let stride = (a.dt / a.step).round().max(1.0) as usize;
            if ((stride as f64 * a.step) - a.dt).abs() > 1e-9 * a.dt {
                return Err(CliError::Usage(
                    "dt must be a multiple of the integration step".into(),
                ));
            }
            let traj = ode::rk4_sampled(|x| field.eval(x), &sys.initial, a.step, stride, samples);
            let channels = sys
                .state_names()
                .into_iter()
                .enumerate()
                .map(|(i, name)| {
                    eprony_core::Channel::new(name, traj.iter().map(|x| x[i]).collect())
                })
                .collect();
            Signal::new(0.0, a.dt, channels)?
        }
        (None, None) => return Err(CliError::Usage("pass --designed or --system".into())),
    };
    write_signal(&a.output, &signal).map_err(io_err(&a.output))
}

struct Settings {
    method: Method,
    channel: String,
    shape_channels: Vec<String>,
    reference_channel: Option<String>,
    window: Interval,
    split: SplitPolicy,
    order: usize,
    options: ExtendedOptions,
    report: Option<PathBuf>,
    reconstruction: Option<PathBuf>,
}

fn settings(a: &AnalyzeArgs, signal: &Signal) -> Result<Settings, CliError> {
    let cfg = match &a.config {
        Some(p) => AnalysisConfig::load(p)?,
        None => AnalysisConfig::default(),
    };
    let method = a.method.or(cfg.method).unwrap_or(Method::Prony);
    let channel = a
        .channel
        .clone()
        .or(cfg.channel)
        .or_else(|| signal.channel_names().next().map(String::from))
        .ok_or_else(|| CliError::Usage("no channel".into()))?;
    let window = a
        .window
        .or(cfg.window.map(|[s, e]| Interval::new(s, e)))
        .unwrap_or_else(|| signal.support());
    let order = a
        .order
        .or(cfg.order)
        .ok_or_else(|| CliError::Usage("the model order is required (--order)".into()))?;
    if order == 0 {
        return Err(CliError::Usage("the model order must be at least 1".into()));
    }
    let split = match (a.split, a.auto_split) {
        (Some(s), _) => SplitPolicy::Explicit(s),
        (None, Some(r)) => SplitPolicy::Automatic {
            envelope_fraction: r,
        },
        (None, None) => match (cfg.split, cfg.auto_split) {
            (Some(s), _) => SplitPolicy::Explicit(s),
            (None, Some(r)) => SplitPolicy::Automatic {
                envelope_fraction: r,
            },
            (None, None) => SplitPolicy::default(),
        },
    };
    if let SplitPolicy::Explicit(s) = split {
        if !(window.start < s && s < window.end) {
            return Err(CliError::Usage(
                "the split must lie inside the window".into(),
            ));
        }
    }
    let defaults = ExtendedOptions::default();
    let options = ExtendedOptions {
        eps_freq: a.eps_freq.or(cfg.eps_freq).unwrap_or(defaults.eps_freq),
        eps_damp: a.eps_damp.or(cfg.eps_damp).unwrap_or(defaults.eps_damp),
        prune_ratio: a
            .prune_ratio
            .or(cfg.prune_ratio)
            .unwrap_or(defaults.prune_ratio),
        ..defaults
    };
    Ok(Settings {
        method,
        channel,
        shape_channels: cfg
            .shape_channels
            .unwrap_or_else(|| signal.channel_names().map(String::from).collect()),
        reference_channel: a.reference_channel.clone().or(cfg.reference_channel),
        window,
        split,
        order,
        options,
        report: a.report.clone().or(cfg.report),
        reconstruction: a.reconstruction.clone().or(cfg.reconstruction),
    })
}

fn residual_and_error(
    set: &ModeSet,
    signal: &Signal,
    channel: &str,
    window: Interval,
) -> Result<(f64, Option<f64>), CliError> {
    let (t0, y) = signal.window_samples(channel, window)?;
    let times: Vec<f64> = (0..y.len()).map(|k| t0 + k as f64 * signal.dt()).collect();
    let fit = prony::reconstruct(set, &times);
    let residual = fit
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok((residual, error_index(&fit, y, signal.dt()).ok()))
}

/// A normalized shape with the raw per-channel phasors it came from.
type ShapeWithRaw = (eprony_core::ModeShape, Vec<(String, eprony_core::Complex)>);

fn shapes(
    signal: &Signal,
    s: &Settings,
    set: &ModeSet,
    segment: Interval,
) -> Result<Vec<ShapeWithRaw>, CliError> {
    let names: Vec<&str> = s.shape_channels.iter().map(String::as_str).collect();
    let fit = multichannel_fit(signal, &names, &set.eigenvalues(), segment)?;
    for (name, row) in &fit.rows {
        if let Err(e) = row {
            log::warn!("channel {name}: {e}");
        }
    }
    let channels = fit.channels();
    let mut out = Vec::new();
    for (m, mode) in set.modes().iter().enumerate() {
        if mode.eigenvalue.im < 0.0 {
            continue;
        }
        let Some(mut column) = fit.column(m) else {
            continue;
        };
        if mode.is_oscillatory() {
            column.iter_mut().for_each(|b| *b *= 2.0);
        }
        let Ok(shape) = eprony_core::normalize_shape(
            &channels,
            &column,
            mode.eigenvalue,
            s.reference_channel.as_deref(),
        ) else {
            continue;
        };
        let raw = channels.iter().cloned().zip(column).collect();
        out.push((shape, raw));
    }
    Ok(out)
}

fn extended_shapes(
    signal: &Signal,
    s: &Settings,
    result: &ExtendedResult,
) -> Result<Vec<ShapeEntry>, CliError> {
    let transient = &result.transient_modes;
    let segment = Interval::new(s.window.start.max(signal.t0()), result.split_time);
    let all = shapes(signal, s, transient, segment)?;
    let (resonant, natural): (Vec<_>, Vec<_>) = all.into_iter().partition(|(shape, _)| {
        transient
            .modes()
            .iter()
            .any(|m| m.eigenvalue == shape.eigenvalue && m.kind == ModeKind::Resonance)
    });
    let mut entries = Vec::new();
    for (shape, _) in &natural {
        // combined contribution of resonance modes that sit near this mode
        let mut synthetic = None;
        for (res_shape, raw) in &resonant {
            if let Ok(aug) = combine_resonance_contribution(
                shape,
                raw,
                res_shape.eigenvalue,
                s.options.eps_freq,
                ScalePolicy::Preserve,
            ) {
                *synthetic.get_or_insert(eprony_core::Complex::new(0.0, 0.0)) += aug.synthetic;
            }
        }
        entries.push(shape_entry(shape, synthetic));
    }
    entries.extend(resonant.iter().map(|(shape, _)| shape_entry(shape, None)));
    Ok(entries)
}

fn analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let signal = load_waveforms(&a.input)?;
    let s = settings(&a, &signal)?;
    signal.channel(&s.channel)?;
    let file = a.input.display().to_string();
    let input = InputInfo::new(&file, &s.channel, signal.dt(), s.window);
    let range = signal.window_range(s.window)?;
    let times: Vec<f64> = range.map(|k| signal.time(k)).collect();
    let multichannel = s.shape_channels.len() >= 2;
    log::info!(
        "{file}: {} samples at dt {}, fitting `{}` over {}..{} s",
        signal.len(),
        signal.dt(),
        s.channel,
        s.window.start,
        s.window.end
    );

    let (json, fit) = match s.method {
        Method::Prony => {
            let set = fit_prony(&signal, &s.channel, s.window, s.order)?;
            log::info!("{} modes fitted", set.modes().len());
            let (residual, err) = residual_and_error(&set, &signal, &s.channel, s.window)?;
            let mut report = PronyReport::new(input, s.order, &set, residual, err);
            if multichannel {
                report.mode_shapes = shapes(&signal, &s, &set, s.window)?
                    .iter()
                    .map(|(shape, _)| shape_entry(shape, None))
                    .collect();
            }
            (
                crate::report::to_json(&report),
                prony::reconstruct(&set, &times),
            )
        }
        Method::Extended => {
            let result =
                run_extended_prony(&signal, &s.channel, s.window, s.split, s.order, &s.options)?;
            log::info!(
                "split at {} s; {} candidates, {} resonance modes retained",
                result.split_time,
                result.candidates.len(),
                result.resonance_modes().count()
            );
            let mut report = ExtendedReport::new(input, s.order, &result);
            if multichannel {
                report.mode_shapes = extended_shapes(&signal, &s, &result)?;
            }
            (crate::report::to_json(&report), result.reconstruct(&times))
        }
    };
    match &s.report {
        Some(p) => std::fs::write(p, json).map_err(io_err(p))?,
        None => print!("{json}"),
    }
    if let Some(p) = &s.reconstruction {
        let file = std::fs::File::create(p).map_err(io_err(p))?;
        write_columns(file, &[s.channel.as_str()], &times, &[fit]).map_err(io_err(p))?;
    }
    Ok(())
}

fn normalform(a: NormalformArgs) -> Result<(), CliError> {
    let sys = SystemConfig::load(&a.system)?;
    let field = sys.field()?;
    let model = field.expand_at(&sys.equilibrium())?;
    let modal = to_modal(&model)?;
    let h = h_coefficients(&modal, a.floor)?;
    let degree = resonance_degree(modal.eigenvalues());
    let z0 = initial_z(&modal, &h, &sys.initial)?;
    let report = NormalFormReport::new(&a.system.display().to_string(), &modal, &h, &degree, &z0);
    match &a.report {
        Some(p) => write_report(&report, Some(p)).map_err(io_err(p))?,
        None => write_report(&report, None).map_err(|e| CliError::Io(e.to_string()))?,
    }

    let samples = grid(a.t_end, a.dt)?;
    let times: Vec<f64> = (0..samples).map(|k| k as f64 * a.dt).collect();
    let names = sys.state_names();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let columns = |traj: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..names.len())
            .map(|i| traj.iter().map(|x| x[i]).collect())
            .collect()
    };
    if let Some(p) = &a.response {
        let traj = analytic_response(&modal, &h, &z0, &times)?;
        let file = std::fs::File::create(p).map_err(io_err(p))?;
        write_columns(file, &names, &times, &columns(&traj)).map_err(io_err(p))?;
    }
    if let Some(p) = &a.rk4 {
        let stride = (a.dt / a.step).round().max(1.0) as usize;
        if ((stride as f64 * a.step) - a.dt).abs() > 1e-9 * a.dt {
            return Err(CliError::Usage(
                "dt must be a multiple of the integration step".into(),
            ));
        }
        let traj = ode::rk4_sampled(|x| field.eval(x), &sys.initial, a.step, stride, samples);
        let file = std::fs::File::create(p).map_err(io_err(p))?;
        write_columns(file, &names, &times, &columns(&traj)).map_err(io_err(p))?;
    }
    Ok(())
}

/// Aligns a candidate channel with the reference on their common grid and
/// returns `(t0, candidate, reference)` over the overlap.
fn align(
    reference: &Signal,
    candidate: &Signal,
    channel: &str,
) -> Result<(f64, Vec<f64>, Vec<f64>), CliError> {
    let dt = reference.dt();
    if ((candidate.dt() - dt) / dt).abs() > 1e-9 {
        return Err(CliError::Usage(
            "candidate and reference sampling differ".into(),
        ));
    }
    let offset = (candidate.t0() - reference.t0()) / dt;
    let shift = offset.round();
    if (offset - shift).abs() > 1e-6 {
        return Err(CliError::Usage(
            "candidate and reference grids are not aligned".into(),
        ));
    }
    let r = reference.channel(channel)?;
    let c = candidate.channel(channel)?;
    let (r_start, c_start) = if shift >= 0.0 {
        (shift as usize, 0)
    } else {
        (0, (-shift) as usize)
    };
    let len = r
        .len()
        .saturating_sub(r_start)
        .min(c.len().saturating_sub(c_start));
    if len < 2 {
        return Err(CliError::Usage(
            "candidate and reference do not overlap".into(),
        ));
    }
    Ok((
        reference.time(r_start),
        c[c_start..c_start + len].to_vec(),
        r[r_start..r_start + len].to_vec(),
    ))
}

fn compare(a: CompareArgs) -> Result<(), CliError> {
    let reference = load_waveforms(&a.reference)?;
    let channel = a
        .channel
        .clone()
        .or_else(|| reference.channel_names().next().map(String::from))
        .ok_or_else(|| CliError::Usage("no channel".into()))?;
    let mut rows = Vec::new();
    let mut window = Interval::new(0.0, 0.0);
    for (name, path) in &a.candidates {
        let cand = load_waveforms(path)?;
        let (t0, c, r) = align(&reference, &cand, &channel)?;
        let report = windowed_error(&c, &r, t0, reference.dt(), &a.windows)?;
        window = report.window;
        rows.push(CompareRow::new(name, &report));
    }
    let report = CompareReport {
        schema_version: crate::report::SCHEMA_VERSION,
        reference: a.reference.display().to_string(),
        channel,
        window: [window.start, window.end],
        rows,
    };
    print!("{}", report.table());
    if let Some(p) = &a.report {
        write_report(&report, Some(p)).map_err(io_err(p))?;
    }
    Ok(())
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("eprony: {e}");
            e.exit_code()
        }
    }
}
