//! Command-line front end: WAV in/out, experiment orchestration, and CSV
//! emission for every figure-style dataset.
//!
//! Exit codes: 0 success, 1 I/O or file-format failure, 2 usage error,
//! 3 numeric/internal-consistency failure. All output files are written
//! atomically (temp file + rename), and every command is deterministic
//! given its seed. `EMPHLAB_THREADS` caps worker parallelism.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use emphlab::{
    analyze_frames, build_table, decode_wav, default_alpha_grid, encode_wav, lsd_db, make_window,
    run_monte_carlo, run_pipeline, synthesize_ar1, ArModel, CodecMode, Error, FrameConfig, Result,
    WavAudio, WindowKind, DEFAULT_FIXED_BETA,
};

#[derive(Parser)]
#[command(
    name = "emphlab",
    version,
    about = "Self-adaptive pre-/de-emphasis codec experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a stationary AR(1) test signal as a 16-bit mono WAV.
    Synth(SynthArgs),
    /// Per-frame coefficient estimates of a WAV, plus a histogram sidecar.
    Analyze(AnalyzeArgs),
    /// Encode/decode a WAV through the emphasis codec and report metrics.
    Codec(CodecArgs),
    /// Monte Carlo spread of the encoder and decoder estimators.
    Montecarlo(MonteCarloArgs),
    /// Tabulate the inverse map from coded-signal ratio to coefficient.
    Table(TableArgs),
    /// Mean LSD over a grid of modes, gammas, and bit rates.
    LsdSweep(LsdSweepArgs),
}

/// Frame geometry in milliseconds, converted against the input's rate.
#[derive(Args, Clone, Copy)]
struct FrameMsArgs {
    /// Codec frame duration in milliseconds.
    #[arg(long, default_value_t = 10.0)]
    frame_ms: f64,
    /// Autocorrelation analysis window duration in milliseconds.
    #[arg(long, default_value_t = 30.0)]
    window_ms: f64,
    /// Look-ahead past the frame end in milliseconds.
    #[arg(long, default_value_t = 10.0)]
    lookahead_ms: f64,
}

impl FrameMsArgs {
    fn to_config(self, sample_rate_hz: u32) -> Result<FrameConfig> {
        let to_samples = |ms: f64, what: &str| -> Result<usize> {
            let samples = ms * f64::from(sample_rate_hz) / 1000.0;
            if !(samples.is_finite() && (0.0..=1e9).contains(&samples)) {
                return Err(Error::InvalidArgument(format!(
                    "{what} of {ms} ms is out of range"
                )));
            }
            Ok(samples.round() as usize)
        };
        FrameConfig::new(
            sample_rate_hz,
            to_samples(self.frame_ms, "frame duration")?,
            to_samples(self.window_ms, "window duration")?,
            to_samples(self.lookahead_ms, "look-ahead")?,
        )
    }
}

#[derive(Args)]
struct SynthArgs {
    /// AR(1) coefficient in (-1, 1).
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    /// Innovation variance.
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Signal duration in seconds.
    #[arg(long, default_value_t = 1.0)]
    duration_s: f64,
    #[arg(long, default_value_t = 16_000)]
    sample_rate: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output WAV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input mono 16-bit WAV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Filter weight applied to the estimated coefficient.
    #[arg(long, default_value_t = 0.7)]
    gamma: f64,
    #[command(flatten)]
    frame: FrameMsArgs,
    /// Per-frame CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Histogram CSV path; defaults to "<out stem>-hist.csv".
    #[arg(long)]
    hist_out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum ModeArg {
    None,
    Fixed,
    Forward,
    Backward,
    #[value(name = "self")]
    SelfAdaptive,
}

impl fmt::Display for ModeArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeArg::None => "none",
            ModeArg::Fixed => "fixed",
            ModeArg::Forward => "forward",
            ModeArg::Backward => "backward",
            ModeArg::SelfAdaptive => "self",
        })
    }
}

impl ModeArg {
    /// Realize the mode with `gamma` (adaptive modes) or `beta` (fixed).
    fn to_mode(self, gamma: f64, beta: f64) -> CodecMode {
        match self {
            ModeArg::None => CodecMode::None,
            ModeArg::Fixed => CodecMode::Fixed { beta },
            ModeArg::Forward => CodecMode::Forward { gamma },
            ModeArg::Backward => CodecMode::Backward { gamma },
            ModeArg::SelfAdaptive => CodecMode::SelfAdaptive { gamma },
        }
    }
}

#[derive(Args)]
struct CodecArgs {
    /// Input mono 16-bit WAV.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Filter weight for the adaptive modes.
    #[arg(long, default_value_t = 0.7)]
    gamma: f64,
    /// Constant tap for --mode fixed.
    #[arg(long, default_value_t = DEFAULT_FIXED_BETA)]
    beta: f64,
    /// Quantizer resolution in bits per sample.
    #[arg(long, default_value_t = 4)]
    bits: u32,
    #[command(flatten)]
    frame: FrameMsArgs,
    /// Decoded WAV output path.
    #[arg(long)]
    out: PathBuf,
    /// Metrics CSV output path.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[arg(long, default_value_t = 0.7)]
    gamma: f64,
    /// Trials (independent frames) per grid coefficient.
    #[arg(long, default_value_t = 30_000)]
    frames: usize,
    /// Samples per trial frame.
    #[arg(long, default_value_t = 1440)]
    frame_len: usize,
    /// Grid of true coefficients; defaults to -0.98, -0.9..0.9, 0.98.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alphas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, default_value_t = 0.7)]
    gamma: f64,
    #[arg(long, default_value_t = 1024)]
    entries: usize,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LsdSweepArgs {
    /// Input mono 16-bit WAV.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ModeArg::SelfAdaptive, ModeArg::Forward])]
    modes: Vec<ModeArg>,
    /// Gammas to sweep (used as the constant tap for --modes fixed).
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.5, 0.7, 0.9])]
    gammas: Vec<f64>,
    /// Bit rates to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [3, 4, 5, 6, 7, 8])]
    bits: Vec<u32>,
    #[command(flatten)]
    frame: FrameMsArgs,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    if let Ok(raw) = std::env::var("EMPHLAB_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // Ignore failure: the pool can only be initialized once.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("emphlab: EMPHLAB_THREADS must be a positive integer, got {raw:?}");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Codec(args) => cmd_codec(args),
        Command::Montecarlo(args) => cmd_montecarlo(args),
        Command::Table(args) => cmd_table(args),
        Command::LsdSweep(args) => cmd_lsd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("emphlab: {err}");
            ExitCode::from(match err {
                Error::Io(_) | Error::MalformedWav(_) | Error::MalformedTable(_) => 1,
                Error::InvalidArgument(_) => 2,
                Error::NoBracket { .. } | Error::UnstableTap(_) => 3,
            })
        }
    }
}

/// Write via a temp file in the target directory plus rename, so readers
/// never observe a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| io_with_path(e, path, "create temp file for"))?;
    tmp.write_all(bytes)
        .map_err(|e| io_with_path(e, path, "write"))?;
    tmp.persist(path)
        .map_err(|e| io_with_path(e.error, path, "replace"))?;
    Ok(())
}

fn io_with_path(err: std::io::Error, path: &Path, action: &str) -> Error {
    Error::Io(std::io::Error::new(
        err.kind(),
        format!("cannot {action} {}: {err}", path.display()),
    ))
}

fn read_wav(path: &Path) -> Result<WavAudio> {
    let bytes = fs::read(path).map_err(|e| io_with_path(e, path, "read"))?;
    decode_wav(&bytes)
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let model = ArModel::new(args.alpha, args.sigma2)?;
    let n_samples = args.duration_s * f64::from(args.sample_rate);
    if !(n_samples.is_finite() && (1.0..=1e9).contains(&n_samples)) {
        return Err(Error::InvalidArgument(format!(
            "duration of {} s at {} Hz is out of range",
            args.duration_s, args.sample_rate
        )));
    }
    let mut samples = synthesize_ar1(model, n_samples.round() as usize, args.seed)?;
    let peak = samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if peak > 0.0 {
        for v in &mut samples {
            *v *= 0.5 / peak;
        }
    }
    let wav = encode_wav(&WavAudio {
        sample_rate_hz: args.sample_rate,
        samples,
    })?;
    write_atomic(&args.out, &wav)
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let audio = read_wav(&args.input)?;
    let config = args.frame.to_config(audio.sample_rate_hz)?;
    let frames = analyze_frames(&audio.samples, args.gamma, config)?;

    let mut csv = String::from("frame_index,alpha_tilde,rho_d,alpha_hat,silent\n");
    for f in &frames {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            f.frame_index,
            f.alpha_tilde,
            f.rho_d,
            f.alpha_hat,
            u8::from(f.silent)
        ));
    }
    write_atomic(&args.out, csv.as_bytes())?;

    // Histogram of the encoder-side estimates, bin width 0.02 over [-1, 1).
    let mut counts = [0u64; 100];
    for f in &frames {
        let bin = (((f.alpha_tilde + 1.0) / 0.02) as usize).min(99);
        counts[bin] += 1;
    }
    let mut hist = String::from("bin_lo,bin_hi,count\n");
    for (i, count) in counts.iter().enumerate() {
        let lo = -1.0 + 0.02 * i as f64;
        let hi = -1.0 + 0.02 * (i + 1) as f64;
        hist.push_str(&format!("{lo},{hi},{count}\n"));
    }
    let hist_path = args.hist_out.unwrap_or_else(|| default_hist_path(&args.out));
    write_atomic(&hist_path, hist.as_bytes())
}

fn default_hist_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}-hist.csv"))
}

fn cmd_codec(args: CodecArgs) -> Result<()> {
    let audio = read_wav(&args.input)?;
    let config = args.frame.to_config(audio.sample_rate_hz)?;
    let mode = args.mode.to_mode(args.gamma, args.beta);
    let result = run_pipeline(&audio.samples, mode, config, args.bits)?;
    let lsd = lsd_db(&audio.samples, &result.decoded, config)?;

    let wav = encode_wav(&WavAudio {
        sample_rate_hz: audio.sample_rate_hz,
        samples: result.decoded,
    })?;
    write_atomic(&args.out, &wav)?;

    // Whole-file metrics are repeated on every row to keep the report a
    // single flat table.
    let mut csv = String::from("frame_index,enc_tap,dec_tap,snr_db,mean_lsd_db\n");
    for (i, (enc, dec)) in result
        .per_frame_coeffs_enc
        .iter()
        .zip(&result.per_frame_coeffs_dec)
        .enumerate()
    {
        csv.push_str(&format!(
            "{i},{enc},{dec},{},{}\n",
            result.snr_db, lsd.mean_lsd_db
        ));
    }
    write_atomic(&args.report, csv.as_bytes())?;
    println!(
        "mode={} bits={} snr_db={:.3} mean_lsd_db={:.4}",
        args.mode, args.bits, result.snr_db, lsd.mean_lsd_db
    );
    Ok(())
}

fn cmd_montecarlo(args: MonteCarloArgs) -> Result<()> {
    let grid = match args.alphas {
        Some(list) if list.is_empty() => {
            return Err(Error::InvalidArgument("empty alpha grid".into()))
        }
        Some(list) => list,
        None => default_alpha_grid(),
    };
    let window = make_window(WindowKind::Hanning, args.frame_len)?;
    let reports = run_monte_carlo(
        &grid,
        args.gamma,
        args.frames,
        args.frame_len,
        &window,
        args.seed,
    )?;
    let mut csv = String::from("true_alpha,enc_lo,enc_hi,dec_lo,dec_hi\n");
    for r in &reports {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.true_alpha, r.ci95_encoder.0, r.ci95_encoder.1, r.ci95_decoder.0, r.ci95_decoder.1
        ));
    }
    write_atomic(&args.out, csv.as_bytes())
}

fn cmd_table(args: TableArgs) -> Result<()> {
    let table = build_table(args.gamma, args.entries)?;
    let mut csv = String::from("rho,alpha,gamma_alpha\n");
    for (rho, alpha) in table.rho_grid().iter().zip(table.alpha_values()) {
        csv.push_str(&format!("{rho},{alpha},{}\n", table.gamma() * alpha));
    }
    write_atomic(&args.out, csv.as_bytes())
}

fn cmd_lsd_sweep(args: LsdSweepArgs) -> Result<()> {
    if args.modes.is_empty() || args.gammas.is_empty() || args.bits.is_empty() {
        return Err(Error::InvalidArgument(
            "modes, gammas, and bits must all be non-empty".into(),
        ));
    }
    let audio = read_wav(&args.input)?;
    let config = args.frame.to_config(audio.sample_rate_hz)?;

    let mut combos = Vec::new();
    for &mode in &args.modes {
        for &gamma in &args.gammas {
            for &bits in &args.bits {
                combos.push((mode, gamma, bits));
            }
        }
    }
    // Rows are independent pipeline runs; a failed row is marked and the
    // sweep continues.
    let rows: Vec<(String, Option<String>)> = combos
        .par_iter()
        .map(|&(mode, gamma, bits)| {
            let outcome = run_pipeline(&audio.samples, mode.to_mode(gamma, gamma), config, bits)
                .and_then(|r| lsd_db(&audio.samples, &r.decoded, config));
            match outcome {
                Ok(lsd) => (
                    format!("{mode},{gamma},{bits},{},ok\n", lsd.mean_lsd_db),
                    None,
                ),
                Err(err) => (
                    format!("{mode},{gamma},{bits},,error\n"),
                    Some(format!("row ({mode}, {gamma}, {bits}): {err}")),
                ),
            }
        })
        .collect();

    let mut csv = String::from("mode,gamma,bits,mean_lsd_db,status\n");
    for (row, warning) in rows {
        if let Some(w) = warning {
            eprintln!("emphlab: {w}");
        }
        csv.push_str(&row);
    }
    write_atomic(&args.out, csv.as_bytes())
}
