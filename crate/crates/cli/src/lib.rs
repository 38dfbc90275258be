//! Command-line driver for the two-ray multipath FLL analysis library.
//!
//! Every subcommand resolves its parameters from an optional flat config
//! file overlaid by command-line flags, runs one deterministic sweep or
//! simulation, and writes a CSV whose comment header records the tool
//! version, the resolved-config hash, and the seed, so identical inputs
//! produce byte-identical outputs.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use fll_multipath::beat::{classify_step, f_integral, period_avg_doppler};
use fll_multipath::discriminator::{composite_phase_term, TwoRayParams};
use fll_multipath::geometry::{
    combined_doppler, doppler_from_velocity, nlos_ratio, KinematicScene, GPS_L1_WAVELENGTH,
};
use fll_multipath::signal::{generate_code, synthesize_precorrelation, Ray, SynthesisConfig};
use fll_multipath::tracking::{
    perturbation_bounds, run_closed_loop, run_closed_loop_postcorr, spike_chain_response,
    LoopConfig, SpikeChainSpec,
};

const DEFAULT_TAU: f64 = 1.0 / (2.0 * PI);

#[derive(Parser)]
#[command(
    name = "fll-multipath",
    version,
    about = "Two-ray multipath corruption of FLL Doppler observables: \
             deterministic sweeps and closed-loop simulations as CSV tables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the beat-averaged step integral over amplitude ratio and half
    /// phase advance
    StepFunction(StepFunctionArgs),
    /// Normalized discriminator output over one beat period per amplitude
    /// ratio
    Waveform(WaveformArgs),
    /// Loop filter response to the balanced-ratio impulse train
    Spike(SpikeArgs),
    /// Steady-state Doppler perturbation envelope versus beat period
    Bounds(BoundsArgs),
    /// Closed-loop FLL run over a kinematic multipath scene
    ClosedLoop(ClosedLoopArgs),
    /// LOS/NLOS Doppler geometry over reflection angle
    Geometry(GeometryArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Config file of `key = value` lines (# comments); flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed recorded in the header and used wherever chips are generated
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for grid sweeps; 0 uses all cores
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct StepFunctionArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated amplitude ratios (default: 81 log-spaced in
    /// [1e-4, 1e4] with the singular ratio 1 removed)
    #[arg(long)]
    beta_grid: Option<String>,
    /// Comma-separated half phase advances in (0, pi/2)
    #[arg(long)]
    delta_gamma_grid: Option<String>,
}

#[derive(Args)]
struct WaveformArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated amplitude ratios, one curve each
    #[arg(long)]
    beta_list: Option<String>,
    /// Average received frequency, rad/s
    #[arg(long)]
    omega_av: Option<String>,
    /// Beat-to-average frequency ratio
    #[arg(long)]
    beat_ratio: Option<String>,
    /// Discriminator interval, seconds
    #[arg(long)]
    delta_t: Option<String>,
    /// Uniform samples per beat period (>= 10000); mid-period is refined on
    /// top of these
    #[arg(long)]
    samples_per_period: Option<String>,
    /// Phase of the first ray, rad
    #[arg(long)]
    phi0: Option<String>,
    /// Phase of the second ray, rad
    #[arg(long)]
    phi1: Option<String>,
    /// Append the infinite-ratio limit as a constant curve
    #[arg(long)]
    include_infinite: bool,
}

#[derive(Args)]
struct SpikeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Interval between impulses, seconds
    #[arg(long)]
    beat_period: Option<String>,
    /// Loop filter time constant, seconds
    #[arg(long)]
    tau: Option<String>,
    /// Impulse polarity, +1 or -1
    #[arg(long)]
    sign: Option<String>,
    /// Simulated span, seconds (>= 10 beat periods)
    #[arg(long)]
    duration: Option<String>,
    /// Samples per beat period; the step size must not exceed tau/100
    #[arg(long)]
    samples_per_period: Option<String>,
    /// Carrier wavelength for the speed column, meters
    #[arg(long)]
    wavelength: Option<String>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Smallest beat period, seconds
    #[arg(long)]
    t_b_min: Option<String>,
    /// Largest beat period, seconds
    #[arg(long)]
    t_b_max: Option<String>,
    /// Number of log-spaced beat periods
    #[arg(long)]
    t_b_points: Option<String>,
    /// Loop filter time constant, seconds
    #[arg(long)]
    tau: Option<String>,
    /// Carrier wavelength, meters
    #[arg(long)]
    wavelength: Option<String>,
}

#[derive(Args)]
struct ClosedLoopArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Receiver speed, m/s
    #[arg(long)]
    speed: Option<String>,
    /// Comma-separated ray arrival angles in degrees; the first is the LOS
    #[arg(long)]
    angles_deg: Option<String>,
    /// Comma-separated ray amplitudes (single value broadcasts)
    #[arg(long)]
    amplitudes: Option<String>,
    /// Comma-separated ray phases in rad (single value broadcasts)
    #[arg(long)]
    phases: Option<String>,
    /// Carrier wavelength, meters
    #[arg(long)]
    wavelength: Option<String>,
    /// Transmitter-motion Doppler common to all rays, rad/s
    #[arg(long)]
    transmitter_doppler: Option<String>,
    /// Nominal carrier frequency, rad/s
    #[arg(long)]
    carrier: Option<String>,
    /// Epoch spacing, seconds
    #[arg(long)]
    delta_t: Option<String>,
    /// Coherent integration time, seconds
    #[arg(long)]
    coherent_time: Option<String>,
    /// Loop filter bandwidth, Hz
    #[arg(long)]
    bandwidth_hz: Option<String>,
    /// Noncoherent averaging window, epochs
    #[arg(long)]
    navg: Option<String>,
    /// Initial Doppler estimate, rad/s, or `auto` for the LOS Doppler
    #[arg(long)]
    initial_doppler: Option<String>,
    /// Complex sample rate for sample-level runs, samples/s
    #[arg(long)]
    sample_rate: Option<String>,
    /// Simulated span, seconds
    #[arg(long)]
    duration: Option<String>,
    /// `sample` for full sample-level correlation, `postcorr` for the
    /// post-correlation model
    #[arg(long)]
    mode: Option<String>,
    /// Spreading code length, chips
    #[arg(long)]
    code_chips: Option<String>,
    /// Spreading code chip rate, chips/s
    #[arg(long)]
    chip_rate: Option<String>,
    /// Dump the first epoch's synthesized samples as little-endian f64
    /// interleaved I,Q pairs
    #[arg(long)]
    dump_samples: Option<PathBuf>,
}

#[derive(Args)]
struct GeometryArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Receiver speed, m/s
    #[arg(long)]
    speed: Option<String>,
    /// LOS arrival angle, degrees
    #[arg(long)]
    theta_los_deg: Option<String>,
    /// Smallest NLOS arrival angle, degrees
    #[arg(long)]
    theta_nlos_min_deg: Option<String>,
    /// Largest NLOS arrival angle, degrees
    #[arg(long)]
    theta_nlos_max_deg: Option<String>,
    /// Number of NLOS angles
    #[arg(long)]
    theta_nlos_points: Option<String>,
    /// Carrier wavelength, meters
    #[arg(long)]
    wavelength: Option<String>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Invariant(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Invariant(msg) => write!(f, "invariant violation: {msg}"),
            CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<fll_multipath::Error> for CliError {
    fn from(e: fll_multipath::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Parses CLI arguments from the process environment, runs the requested
/// command, and returns the process exit code: 0 on success, 1 on runtime
/// or invariant failures, 2 on configuration errors.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::StepFunction(args) => cmd_step_function(args),
        Command::Waveform(args) => cmd_waveform(args),
        Command::Spike(args) => cmd_spike(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::ClosedLoop(args) => cmd_closed_loop(args),
        Command::Geometry(args) => cmd_geometry(args),
    }
}

/// Key-value pairs from a config file, checked against the command's known
/// keys.
#[derive(Debug)]
struct ConfigMap(BTreeMap<String, String>);

impl ConfigMap {
    fn load(path: &Option<PathBuf>, known: &[&str]) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        let Some(path) = path else {
            return Ok(Self(map));
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "{}:{}: expected `key = value`",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if !known.contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "{}:{}: unknown key `{key}`",
                    path.display(),
                    lineno + 1
                )));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(Self(map))
    }

    /// Flag value if given, else file value, else the default.
    fn resolve(&self, key: &str, flag: &Option<String>, default: &str) -> String {
        flag.clone()
            .or_else(|| self.0.get(key).cloned())
            .unwrap_or_else(|| default.to_string())
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: `{value}` is not a number")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: `{value}` is not a nonnegative integer")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(CliError::Config(format!(
            "{key}: `{value}` is not `true` or `false`"
        ))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    let items: Vec<f64> = value
        .split(',')
        .map(|s| parse_f64(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(CliError::Config(format!("{key}: grid must be nonempty")));
    }
    Ok(items)
}

/// Canonical scientific notation with 17 significant digits, used for both
/// CSV cells and config hashing.
fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn sci_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| sci(x)).collect::<Vec<_>>().join(",")
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn config_hash(command: &str, entries: &[(&str, String)]) -> u64 {
    let mut text = format!("command={command}\n");
    for (key, value) in entries {
        text.push_str(key);
        text.push('=');
        text.push_str(value);
        text.push('\n');
    }
    fnv1a64(text.as_bytes())
}

struct Output {
    writer: Box<dyn Write>,
}

impl Output {
    fn create(path: &Option<PathBuf>) -> Result<Self, CliError> {
        let writer: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(fs::File::create(p).map_err(|e| {
                CliError::Config(format!("cannot create {}: {e}", p.display()))
            })?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        Ok(Self { writer })
    }

    fn header(
        &mut self,
        command: &str,
        hash: u64,
        seed: u64,
        columns: &str,
    ) -> Result<(), CliError> {
        writeln!(
            self.writer,
            "# tool: fll-multipath {}",
            env!("CARGO_PKG_VERSION")
        )?;
        writeln!(self.writer, "# command: {command}")?;
        writeln!(self.writer, "# config-hash: {hash:016x}")?;
        writeln!(self.writer, "# seed: {seed}")?;
        writeln!(self.writer, "{columns}")?;
        Ok(())
    }

    fn row(&mut self, cells: &[String]) -> Result<(), CliError> {
        writeln!(self.writer, "{}", cells.join(","))?;
        Ok(())
    }

    fn comment(&mut self, text: &str) -> Result<(), CliError> {
        writeln!(self.writer, "# {text}")?;
        Ok(())
    }

    fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Runs `work` on a rayon pool sized by --threads; 0 or absent keeps the
/// global pool.
fn with_threads<T: Send>(
    threads: Option<usize>,
    work: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match threads {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("threads: {e}")))?;
            Ok(pool.install(work))
        }
        _ => Ok(work()),
    }
}

fn default_beta_grid() -> Vec<f64> {
    (0..81)
        .map(|k| 10f64.powf(-4.0 + 8.0 * k as f64 / 80.0))
        .filter(|&b| b != 1.0)
        .collect()
}

fn default_gamma_grid() -> Vec<f64> {
    vec![1e-6, 1e-3, 1e-1, 1.0, FRAC_PI_2 - 1e-6]
}

const STEP_KEYS: &[&str] = &["beta_grid", "delta_gamma_grid"];

fn cmd_step_function(args: StepFunctionArgs) -> Result<(), CliError> {
    let file = ConfigMap::load(&args.common.config, STEP_KEYS)?;
    let betas = {
        let raw = file.resolve("beta_grid", &args.beta_grid, "");
        if raw.is_empty() {
            default_beta_grid()
        } else {
            parse_list("beta_grid", &raw)?
        }
    };
    let gammas = {
        let raw = file.resolve("delta_gamma_grid", &args.delta_gamma_grid, "");
        if raw.is_empty() {
            default_gamma_grid()
        } else {
            parse_list("delta_gamma_grid", &raw)?
        }
    };
    for &b in &betas {
        if b == 1.0 {
            return Err(CliError::Config(
                "beta_grid: the ratio 1 is singular and must be excluded".into(),
            ));
        }
        if !(b >= 0.0) {
            return Err(CliError::Config(format!(
                "beta_grid: ratio {b} must be >= 0"
            )));
        }
    }
    for &g in &gammas {
        if !(g > 0.0 && g < FRAC_PI_2) {
            return Err(CliError::Config(format!(
                "delta_gamma_grid: {g} outside (0, pi/2)"
            )));
        }
    }
    let seed = args.common.seed.unwrap_or(1);
    let entries = [
        ("beta_grid", sci_list(&betas)),
        ("delta_gamma_grid", sci_list(&gammas)),
    ];
    let hash = config_hash("step-function", &entries);

    let cells: Vec<(f64, f64)> = betas
        .iter()
        .flat_map(|&b| gammas.iter().map(move |&g| (b, g)))
        .collect();
    let results = with_threads(args.common.threads, || {
        cells
            .par_iter()
            .map(|&(beta, gamma)| {
                f_integral(beta, gamma).map(|q| {
                    let residual = (q.value - classify_step(beta).value()).abs();
                    (beta, gamma, q.value, residual, q.points)
                })
            })
            .collect::<Vec<_>>()
    })?;

    let mut rows = Vec::with_capacity(results.len());
    for (cell, result) in cells.iter().zip(results) {
        match result {
            Ok(row) => rows.push(row),
            Err(e) => {
                return Err(CliError::Runtime(format!(
                    "cell beta={}, delta_gamma={}: {e}",
                    cell.0, cell.1
                )))
            }
        }
    }
    let max_residual = rows.iter().map(|r| r.3).fold(0.0_f64, f64::max);

    let mut out = Output::create(&args.common.out)?;
    out.header(
        "step-function",
        hash,
        seed,
        "beta,delta_gamma,f,abs_residual,quad_points",
    )?;
    for (beta, gamma, f, residual, points) in &rows {
        out.row(&[
            sci(*beta),
            sci(*gamma),
            sci(*f),
            sci(*residual),
            points.to_string(),
        ])?;
    }
    out.comment(&format!(
        "summary: max |f - step| = {} over {} cells (threshold 1e-9)",
        sci(max_residual),
        rows.len()
    ))?;
    out.finish()?;
    if max_residual >= 1e-9 {
        return Err(CliError::Invariant(format!(
            "step-function residual {} exceeds 1e-9",
            sci(max_residual)
        )));
    }
    Ok(())
}

const WAVEFORM_KEYS: &[&str] = &[
    "beta_list",
    "omega_av",
    "beat_ratio",
    "delta_t",
    "samples_per_period",
    "phi0",
    "phi1",
    "include_infinite",
];

fn cmd_waveform(args: WaveformArgs) -> Result<(), CliError> {
    let file = ConfigMap::load(&args.common.config, WAVEFORM_KEYS)?;
    let default_betas = vec![10.0, 1.2, 1.0 + 1e-3, 1.0 / (1.0 + 1e-3), 0.8, 0.1];
    let betas = {
        let raw = file.resolve("beta_list", &args.beta_list, "");
        if raw.is_empty() {
            default_betas
        } else {
            parse_list("beta_list", &raw)?
        }
    };
    let omega_av = parse_f64(
        "omega_av",
        &file.resolve("omega_av", &args.omega_av, "6.2831853071795862e2"),
    )?;
    let beat_ratio = parse_f64(
        "beat_ratio",
        &file.resolve("beat_ratio", &args.beat_ratio, "1.6e-2"),
    )?;
    let delta_t = parse_f64("delta_t", &file.resolve("delta_t", &args.delta_t, "1e-3"))?;
    let samples = parse_usize(
        "samples_per_period",
        &file.resolve("samples_per_period", &args.samples_per_period, "10000"),
    )?;
    let phi0 = parse_f64("phi0", &file.resolve("phi0", &args.phi0, "0"))?;
    let phi1 = parse_f64("phi1", &file.resolve("phi1", &args.phi1, "0"))?;
    let include_infinite = args.include_infinite
        || parse_bool(
            "include_infinite",
            &file.resolve("include_infinite", &None, "false"),
        )?;

    if !(omega_av > 0.0) {
        return Err(CliError::Config("omega_av: must be > 0".into()));
    }
    if !(beat_ratio > 0.0) {
        return Err(CliError::Config("beat_ratio: must be > 0".into()));
    }
    if samples < 10_000 {
        return Err(CliError::Config(
            "samples_per_period: at least 10000 samples are required".into(),
        ));
    }
    let omega_beat = beat_ratio * omega_av;
    let delta_gamma = 0.5 * omega_beat * delta_t;
    if !(delta_gamma > 0.0 && delta_gamma < FRAC_PI_2) {
        return Err(CliError::Config(format!(
            "delta_t/beat_ratio: half phase advance {delta_gamma} outside (0, pi/2)"
        )));
    }
    for &b in &betas {
        if !(b >= 0.0) {
            return Err(CliError::Config(format!("beta_list: ratio {b} must be >= 0")));
        }
    }

    let seed = args.common.seed.unwrap_or(1);
    let entries = [
        ("beat_ratio", sci(beat_ratio)),
        ("beta_list", sci_list(&betas)),
        ("delta_t", sci(delta_t)),
        ("include_infinite", include_infinite.to_string()),
        ("omega_av", sci(omega_av)),
        ("phi0", sci(phi0)),
        ("phi1", sci(phi1)),
        ("samples_per_period", samples.to_string()),
    ];
    let hash = config_hash("waveform", &entries);

    // Uniform coverage plus a denser pass over the mid-period tenth, where
    // near-unity ratios concentrate their excursion.
    let mut fractions: Vec<f64> = (0..=samples).map(|k| k as f64 / samples as f64).collect();
    fractions.extend((0..=samples).map(|k| 0.45 + 0.1 * k as f64 / samples as f64));
    fractions.sort_by(|a, b| a.partial_cmp(b).unwrap());
    fractions.dedup();

    let omega0 = omega_av + 0.5 * omega_beat;
    let omega1 = omega_av - 0.5 * omega_beat;
    let t_beat = 2.0 * PI / omega_beat;
    let curves = with_threads(args.common.threads, || {
        betas
            .par_iter()
            .map(|&beta| {
                let params = TwoRayParams::new(
                    1.0, beta, omega0, omega1, phi0, phi1, omega_av, delta_t,
                )?;
                fractions
                    .iter()
                    .map(|&x| {
                        let dev = composite_phase_term(&params, x * t_beat)?;
                        Ok((x, 1.0 + dev / (delta_t * omega_av)))
                    })
                    .collect::<Result<Vec<_>, fll_multipath::Error>>()
            })
            .collect::<Vec<_>>()
    })?;

    let mut out = Output::create(&args.common.out)?;
    out.header("waveform", hash, seed, "t_over_Tbeat,beta,doppler_norm")?;
    for (beta, curve) in betas.iter().zip(curves) {
        let curve = curve.map_err(|e| CliError::Runtime(format!("beta {beta}: {e}")))?;
        for (x, norm) in curve {
            out.row(&[sci(x), sci(*beta), sci(norm)])?;
        }
    }
    if include_infinite {
        let norm = omega1 / omega_av;
        for &x in &fractions {
            out.row(&[sci(x), sci(f64::INFINITY), sci(norm)])?;
        }
    }
    out.finish()
}

const SPIKE_KEYS: &[&str] = &[
    "beat_period",
    "tau",
    "sign",
    "duration",
    "samples_per_period",
    "wavelength",
];

fn cmd_spike(args: SpikeArgs) -> Result<(), CliError> {
    let file = ConfigMap::load(&args.common.config, SPIKE_KEYS)?;
    let beat_period = parse_f64(
        "beat_period",
        &file.resolve("beat_period", &args.beat_period, "1e-1"),
    )?;
    let tau = parse_f64("tau", &file.resolve("tau", &args.tau, &DEFAULT_TAU.to_string()))?;
    let sign = parse_f64("sign", &file.resolve("sign", &args.sign, "1"))?;
    let duration = parse_f64("duration", &file.resolve("duration", &args.duration, "1"))?;
    let samples = parse_usize(
        "samples_per_period",
        &file.resolve("samples_per_period", &args.samples_per_period, "4096"),
    )?;
    let wavelength = parse_f64(
        "wavelength",
        &file.resolve("wavelength", &args.wavelength, &GPS_L1_WAVELENGTH.to_string()),
    )?;

    let spec = SpikeChainSpec::new(beat_period, sign, tau)
        .map_err(|e| CliError::Config(e.to_string()))?;
    if samples == 0 {
        return Err(CliError::Config("samples_per_period: must be >= 1".into()));
    }
    let dt = beat_period / samples as f64;
    if dt > tau / 100.0 {
        return Err(CliError::Config(format!(
            "samples_per_period: step {dt} exceeds tau/100 = {}",
            tau / 100.0
        )));
    }
    if duration < 10.0 * beat_period {
        return Err(CliError::Config(
            "duration: must cover at least 10 beat periods".into(),
        ));
    }
    if !(wavelength > 0.0) {
        return Err(CliError::Config("wavelength: must be > 0".into()));
    }

    let seed = args.common.seed.unwrap_or(1);
    let entries = [
        ("beat_period", sci(beat_period)),
        ("duration", sci(duration)),
        ("samples_per_period", samples.to_string()),
        ("sign", sci(sign)),
        ("tau", sci(tau)),
        ("wavelength", sci(wavelength)),
    ];
    let hash = config_hash("spike", &entries);

    let trace = spike_chain_response(&spec, duration, dt)?;
    let mut out = Output::create(&args.common.out)?;
    out.header("spike", hash, seed, "t_s,response_rad_s,response_mps")?;
    let to_mps = wavelength / (2.0 * PI);
    for (t, y) in trace.times.iter().zip(&trace.doppler) {
        out.row(&[sci(*t), sci(*y), sci(y * to_mps)])?;
    }
    out.finish()
}

const BOUNDS_KEYS: &[&str] = &["t_b_min", "t_b_max", "t_b_points", "tau", "wavelength"];

fn cmd_bounds(args: BoundsArgs) -> Result<(), CliError> {
    let file = ConfigMap::load(&args.common.config, BOUNDS_KEYS)?;
    let t_b_min = parse_f64("t_b_min", &file.resolve("t_b_min", &args.t_b_min, "1e-3"))?;
    let t_b_max = parse_f64("t_b_max", &file.resolve("t_b_max", &args.t_b_max, "10"))?;
    let points = parse_usize(
        "t_b_points",
        &file.resolve("t_b_points", &args.t_b_points, "41"),
    )?;
    let tau = parse_f64("tau", &file.resolve("tau", &args.tau, &DEFAULT_TAU.to_string()))?;
    let wavelength = parse_f64(
        "wavelength",
        &file.resolve("wavelength", &args.wavelength, &GPS_L1_WAVELENGTH.to_string()),
    )?;
    if !(t_b_min > 0.0 && t_b_max > t_b_min) {
        return Err(CliError::Config(
            "t_b_min/t_b_max: need 0 < t_b_min < t_b_max".into(),
        ));
    }
    if points < 2 {
        return Err(CliError::Config("t_b_points: need at least 2".into()));
    }
    if !(tau > 0.0) || !(wavelength > 0.0) {
        return Err(CliError::Config("tau/wavelength: must be > 0".into()));
    }

    let seed = args.common.seed.unwrap_or(1);
    let entries = [
        ("t_b_max", sci(t_b_max)),
        ("t_b_min", sci(t_b_min)),
        ("t_b_points", points.to_string()),
        ("tau", sci(tau)),
        ("wavelength", sci(wavelength)),
    ];
    let hash = config_hash("bounds", &entries);

    let grid: Vec<f64> = (0..points)
        .map(|i| {
            let frac = i as f64 / (points - 1) as f64;
            t_b_min * (t_b_max / t_b_min).powf(frac)
        })
        .collect();
    let rows = with_threads(args.common.threads, || {
        grid.par_iter()
            .map(|&t_b| perturbation_bounds(t_b, tau, wavelength).map(|b| (t_b, b)))
            .collect::<Vec<_>>()
    })?;

    let mut out = Output::create(&args.common.out)?;
    out.header("bounds", hash, seed, "t_b_s,min_mps,max_mps,min_norm,max_norm")?;
    let mut widths = Vec::with_capacity(rows.len());
    for row in rows {
        let (t_b, b) = row?;
        widths.push(b.max_mps - b.min_mps);
        out.row(&[
            sci(t_b),
            sci(b.min_mps),
            sci(b.max_mps),
            sci(b.min_normalized),
            sci(b.max_normalized),
        ])?;
    }
    let expected_width = wavelength / (2.0 * tau);
    let max_width = widths.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_width = widths.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = (max_width - min_width) / expected_width;
    out.comment(&format!(
        "summary: width_mps = {} constant to {} relative (expected {})",
        sci(widths[0]),
        sci(spread),
        sci(expected_width)
    ))?;
    out.finish()?;
    if spread > 1e-6 || ((widths[0] - expected_width) / expected_width).abs() > 1e-9 {
        return Err(CliError::Invariant(format!(
            "perturbation width varies by {} relative across the grid",
            sci(spread)
        )));
    }
    Ok(())
}

const CLOSED_LOOP_KEYS: &[&str] = &[
    "speed",
    "angles_deg",
    "amplitudes",
    "phases",
    "wavelength",
    "transmitter_doppler",
    "carrier",
    "delta_t",
    "coherent_time",
    "bandwidth_hz",
    "navg",
    "initial_doppler",
    "sample_rate",
    "duration",
    "mode",
    "code_chips",
    "chip_rate",
];

fn broadcast(key: &str, values: Vec<f64>, len: usize) -> Result<Vec<f64>, CliError> {
    if values.len() == len {
        Ok(values)
    } else if values.len() == 1 {
        Ok(vec![values[0]; len])
    } else {
        Err(CliError::Config(format!(
            "{key}: expected 1 or {len} values, got {}",
            values.len()
        )))
    }
}

fn cmd_closed_loop(args: ClosedLoopArgs) -> Result<(), CliError> {
    let file = ConfigMap::load(&args.common.config, CLOSED_LOOP_KEYS)?;
    let speed = parse_f64("speed", &file.resolve("speed", &args.speed, "10"))?;
    let angles_deg = parse_list(
        "angles_deg",
        &file.resolve("angles_deg", &args.angles_deg, "30"),
    )?;
    let amplitudes = broadcast(
        "amplitudes",
        parse_list("amplitudes", &file.resolve("amplitudes", &args.amplitudes, "1"))?,
        angles_deg.len(),
    )?;
    let phases = broadcast(
        "phases",
        parse_list("phases", &file.resolve("phases", &args.phases, "0"))?,
        angles_deg.len(),
    )?;
    let wavelength = parse_f64(
        "wavelength",
        &file.resolve("wavelength", &args.wavelength, &GPS_L1_WAVELENGTH.to_string()),
    )?;
    let transmitter_doppler = parse_f64(
        "transmitter_doppler",
        &file.resolve("transmitter_doppler", &args.transmitter_doppler, "0"),
    )?;
    let carrier = parse_f64("carrier", &file.resolve("carrier", &args.carrier, "0"))?;
    let delta_t = parse_f64("delta_t", &file.resolve("delta_t", &args.delta_t, "1e-3"))?;
    let coherent_time = parse_f64(
        "coherent_time",
        &file.resolve("coherent_time", &args.coherent_time, "1e-3"),
    )?;
    let bandwidth_hz = parse_f64(
        "bandwidth_hz",
        &file.resolve("bandwidth_hz", &args.bandwidth_hz, "1"),
    )?;
    let navg = parse_usize("navg", &file.resolve("navg", &args.navg, "1"))?;
    let initial_raw = file.resolve("initial_doppler", &args.initial_doppler, "auto");
    let sample_rate = parse_f64(
        "sample_rate",
        &file.resolve("sample_rate", &args.sample_rate, "4.092e6"),
    )?;
    let duration = parse_f64("duration", &file.resolve("duration", &args.duration, "2"))?;
    let mode = file.resolve("mode", &args.mode, "sample");
    if mode != "sample" && mode != "postcorr" {
        return Err(CliError::Config(format!(
            "mode: `{mode}` is neither `sample` nor `postcorr`"
        )));
    }
    let code_chips = parse_usize(
        "code_chips",
        &file.resolve("code_chips", &args.code_chips, "1023"),
    )?;
    let chip_rate = parse_f64(
        "chip_rate",
        &file.resolve("chip_rate", &args.chip_rate, "1.023e6"),
    )?;
    if !(chip_rate > 0.0) {
        return Err(CliError::Config("chip_rate: must be > 0".into()));
    }

    let angles_rad: Vec<f64> = angles_deg.iter().map(|a| a.to_radians()).collect();
    let scene = KinematicScene::from_angles(speed, &angles_rad, wavelength, transmitter_doppler)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let dopplers: Vec<f64> = (0..angles_rad.len())
        .map(|l| combined_doppler(&scene, l))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let initial_doppler = if initial_raw.trim() == "auto" {
        dopplers[0]
    } else {
        parse_f64("initial_doppler", &initial_raw)?
    };
    let rays: Vec<Ray> = dopplers
        .iter()
        .zip(amplitudes.iter().zip(&phases))
        .map(|(&d, (&a, &p))| Ray::new(a, d, p, 0.0))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let cfg = LoopConfig::new(
        delta_t,
        coherent_time,
        bandwidth_hz,
        navg,
        initial_doppler,
        carrier,
        sample_rate,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;

    let seed = args.common.seed.unwrap_or(1);
    let entries = [
        ("amplitudes", sci_list(&amplitudes)),
        ("angles_deg", sci_list(&angles_deg)),
        ("bandwidth_hz", sci(bandwidth_hz)),
        ("carrier", sci(carrier)),
        ("chip_rate", sci(chip_rate)),
        ("code_chips", code_chips.to_string()),
        ("coherent_time", sci(coherent_time)),
        ("delta_t", sci(delta_t)),
        ("duration", sci(duration)),
        ("initial_doppler", sci(initial_doppler)),
        ("mode", mode.clone()),
        ("navg", navg.to_string()),
        ("phases", sci_list(&phases)),
        ("sample_rate", sci(sample_rate)),
        ("speed", sci(speed)),
        ("transmitter_doppler", sci(transmitter_doppler)),
        ("wavelength", sci(wavelength)),
    ];
    let hash = config_hash("closed-loop", &entries);

    if let Some(dump) = &args.dump_samples {
        let synth = SynthesisConfig {
            carrier_center: carrier,
            replica_frequency: carrier + initial_doppler,
            replica_code_delay: 0.0,
            integration_time: coherent_time,
            sample_rate,
        };
        let code = generate_code(seed, code_chips, 1.0 / chip_rate)?;
        let samples = synthesize_precorrelation(&rays, &code, &synth, 0.0)?;
        let mut bytes = Vec::with_capacity(samples.len() * 16);
        for s in &samples {
            bytes.extend_from_slice(&s.re.to_le_bytes());
            bytes.extend_from_slice(&s.im.to_le_bytes());
        }
        fs::write(dump, bytes)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", dump.display())))?;
    }

    let trace = if mode == "sample" {
        let code = generate_code(seed, code_chips, 1.0 / chip_rate)?;
        run_closed_loop(&rays, &code, &cfg, duration)?
    } else {
        run_closed_loop_postcorr(&rays, &cfg, duration)?
    };

    let mut out = Output::create(&args.common.out)?;
    out.header("closed-loop", hash, seed, "t_s,doppler_rad_s,doppler_mps")?;
    let to_mps = wavelength / (2.0 * PI);
    for (t, d) in trace.times.iter().zip(&trace.doppler) {
        out.row(&[sci(*t), sci(*d), sci(d * to_mps)])?;
    }
    let last = trace.doppler.last().copied().unwrap_or(f64::NAN);
    out.comment(&format!("summary: final_doppler_rad_s = {}", sci(last)))?;
    out.comment(&format!("summary: final_doppler_mps = {}", sci(last * to_mps)))?;
    let average = trace
        .time_average(0.5 * duration, duration)
        .unwrap_or(f64::NAN);
    out.comment(&format!(
        "summary: time_average_rad_s = {} over the second half",
        sci(average)
    ))?;
    if rays.len() == 2 {
        let beta = rays[1].amplitude / rays[0].amplitude;
        let prediction = period_avg_doppler(dopplers[0], dopplers[1], beta);
        out.comment(&format!(
            "summary: period_avg_prediction_rad_s = {}",
            sci(prediction)
        ))?;
        out.comment(&format!(
            "summary: average_minus_prediction_rad_s = {}",
            sci(average - prediction)
        ))?;
    }
    out.finish()
}

const GEOMETRY_KEYS: &[&str] = &[
    "speed",
    "theta_los_deg",
    "theta_nlos_min_deg",
    "theta_nlos_max_deg",
    "theta_nlos_points",
    "wavelength",
];

fn cmd_geometry(args: GeometryArgs) -> Result<(), CliError> {
    let file = ConfigMap::load(&args.common.config, GEOMETRY_KEYS)?;
    let speed = parse_f64("speed", &file.resolve("speed", &args.speed, "10"))?;
    let theta_los = parse_f64(
        "theta_los_deg",
        &file.resolve("theta_los_deg", &args.theta_los_deg, "0"),
    )?;
    let nlos_min = parse_f64(
        "theta_nlos_min_deg",
        &file.resolve("theta_nlos_min_deg", &args.theta_nlos_min_deg, "0"),
    )?;
    let nlos_max = parse_f64(
        "theta_nlos_max_deg",
        &file.resolve("theta_nlos_max_deg", &args.theta_nlos_max_deg, "180"),
    )?;
    let points = parse_usize(
        "theta_nlos_points",
        &file.resolve("theta_nlos_points", &args.theta_nlos_points, "37"),
    )?;
    let wavelength = parse_f64(
        "wavelength",
        &file.resolve("wavelength", &args.wavelength, &GPS_L1_WAVELENGTH.to_string()),
    )?;
    if points < 2 {
        return Err(CliError::Config("theta_nlos_points: need at least 2".into()));
    }
    if !(nlos_max > nlos_min) {
        return Err(CliError::Config(
            "theta_nlos_min_deg/theta_nlos_max_deg: need min < max".into(),
        ));
    }
    if theta_los.to_radians().cos().abs() < 1e-9 {
        return Err(CliError::Config(
            "theta_los_deg: LOS perpendicular to motion leaves the ratio undefined".into(),
        ));
    }

    let seed = args.common.seed.unwrap_or(1);
    let entries = [
        ("speed", sci(speed)),
        ("theta_los_deg", sci(theta_los)),
        ("theta_nlos_max_deg", sci(nlos_max)),
        ("theta_nlos_min_deg", sci(nlos_min)),
        ("theta_nlos_points", points.to_string()),
        ("wavelength", sci(wavelength)),
    ];
    let hash = config_hash("geometry", &entries);

    let grid: Vec<f64> = (0..points)
        .map(|i| nlos_min + (nlos_max - nlos_min) * i as f64 / (points - 1) as f64)
        .collect();
    let rows = with_threads(args.common.threads, || {
        grid.par_iter()
            .map(|&theta_deg| {
                let scene = KinematicScene::from_angles(
                    speed,
                    &[theta_los.to_radians(), theta_deg.to_radians()],
                    wavelength,
                    0.0,
                )?;
                let los = doppler_from_velocity(&scene, 0)?;
                let nlos = doppler_from_velocity(&scene, 1)?;
                let ratio = nlos_ratio(&scene, 1)?;
                let beat = (los - nlos).abs();
                Ok::<_, fll_multipath::Error>((theta_deg, los, nlos, ratio, beat))
            })
            .collect::<Vec<_>>()
    })?;

    let mut out = Output::create(&args.common.out)?;
    out.header(
        "geometry",
        hash,
        seed,
        "theta_nlos_deg,doppler_los_rad_s,doppler_nlos_rad_s,doppler_ratio,omega_beat_rad_s,speed_los_mps,speed_nlos_mps",
    )?;
    let to_mps = wavelength / (2.0 * PI);
    for row in rows {
        let (theta_deg, los, nlos, ratio, beat) = row?;
        out.row(&[
            sci(theta_deg),
            sci(los),
            sci(nlos),
            sci(ratio),
            sci(beat),
            sci(los * to_mps),
            sci(nlos * to_mps),
        ])?;
    }
    out.finish()
}
