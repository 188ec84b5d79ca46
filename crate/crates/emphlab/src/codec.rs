//! The codec experiment pipeline: frame-adaptive pre-emphasis, a mid-tread
//! uniform PCM quantizer, and de-emphasis whose coefficient is either
//! shared, transmitted, or re-estimated from the coded signal, depending
//! on the adaptation mode.

use crate::dsp::{
    autocorr_01, de_emphasize, make_window, pre_emphasize, EmphasisCoeff, FilterState,
    FrameConfig, WindowKind,
};
use crate::error::{Error, Result};
use crate::estimator::{estimate_alpha_encoder, solve_alpha};
use crate::metrics::snr_db;

/// Widely used fixed pre-emphasis coefficient; default for
/// [`CodecMode::Fixed`].
pub const DEFAULT_FIXED_BETA: f64 = 0.7;

/// How the pre-/de-emphasis tap is chosen per frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CodecMode {
    /// No emphasis filtering; the quantizer runs on the raw signal.
    None,
    /// Constant tap `beta` on both sides.
    Fixed { beta: f64 },
    /// Encoder estimates `gamma * alpha` from the clean input; the decoder
    /// receives the same (unquantized) coefficient out of band.
    Forward { gamma: f64 },
    /// Both sides derive the tap from already-decoded output, so nothing
    /// is transmitted but the coefficient lags the signal.
    Backward { gamma: f64 },
    /// Encoder estimates from the clean input; the decoder re-estimates
    /// from the coded pre-emphasized signal alone (zero side information).
    SelfAdaptive { gamma: f64 },
}

impl CodecMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CodecMode::None => Ok(()),
            CodecMode::Fixed { beta } => {
                if beta.is_finite() && (0.0..1.0).contains(&beta) {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("fixed beta {beta} outside [0, 1)")))
                }
            }
            CodecMode::Forward { gamma }
            | CodecMode::Backward { gamma }
            | CodecMode::SelfAdaptive { gamma } => {
                if gamma.is_finite() && gamma > 0.0 && gamma < 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("gamma {gamma} outside (0, 1)")))
                }
            }
        }
    }
}

/// Mid-tread uniform quantizer with symmetric saturation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    pub step: f64,
    pub clip_range: f64,
}

impl QuantizerSpec {
    pub fn new(step: f64, clip_range: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::invalid(format!("step {step} must be positive")));
        }
        if !(clip_range.is_finite() && clip_range > 0.0) {
            return Err(Error::invalid(format!(
                "clip_range {clip_range} must be positive"
            )));
        }
        Ok(Self { step, clip_range })
    }

    /// Spec for a `bits`-per-sample budget: 2^bits levels of the given
    /// step, saturating at half the total range.
    pub fn for_bits(step: f64, bits: u32) -> Result<Self> {
        if !(2..=32).contains(&bits) {
            return Err(Error::invalid(format!(
                "bits {bits} outside the supported range 2..=32"
            )));
        }
        let half_levels = (1u64 << (bits - 1)) as f64;
        Self::new(step, half_levels * step)
    }
}

/// out(n) = step * round(in(n)/step), rounded half away from zero, then
/// clipped to +-clip_range.
pub fn quantize(samples: &[f64], spec: &QuantizerSpec) -> Vec<f64> {
    samples
        .iter()
        .map(|&x| {
            let level = spec.step * (x / spec.step).round();
            level.clamp(-spec.clip_range, spec.clip_range)
        })
        .collect()
}

/// Pick the step maximizing whole-file SNR of `quantize(signal)` against
/// `signal` at the given bit budget.
///
/// The search is a deterministic two-stage log grid anchored at the step
/// that loads the quantizer exactly at the signal peak, spanning factors
/// of 2^-8 to 2^2 around it.
pub fn tune_step(signal: &[f64], bits_per_sample: u32) -> Result<QuantizerSpec> {
    if !(2..=32).contains(&bits_per_sample) {
        return Err(Error::invalid(format!(
            "bits {bits_per_sample} outside the supported range 2..=32"
        )));
    }
    let peak = signal.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::invalid("cannot tune a quantizer on a silent signal"));
    }
    let levels = (1u64 << bits_per_sample) as f64;
    let anchor = 2.0 * peak / levels;

    let noise_energy = |step: f64| -> f64 {
        let spec = QuantizerSpec::for_bits(step, bits_per_sample).expect("validated above");
        signal
            .iter()
            .map(|&x| {
                let q = (spec.step * (x / spec.step).round())
                    .clamp(-spec.clip_range, spec.clip_range);
                (x - q) * (x - q)
            })
            .sum()
    };

    let best_in = |steps: &mut dyn Iterator<Item = f64>| -> f64 {
        let mut best = (f64::INFINITY, anchor);
        for step in steps {
            let e = noise_energy(step);
            if e < best.0 {
                best = (e, step);
            }
        }
        best.1
    };

    let coarse = best_in(&mut (-64..=16).map(|k| anchor * (f64::from(k) / 8.0).exp2()));
    let refined = best_in(&mut (-8..=8).map(|j| coarse * (f64::from(j) / 64.0).exp2()));
    QuantizerSpec::for_bits(refined, bits_per_sample)
}

/// Decoder-side record of one re-estimated frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderFrameLog {
    pub frame_index: usize,
    /// Autocorrelation ratio of the windowed coded signal (0 when silent).
    pub rho: f64,
    /// Re-estimated AR coefficient (0 when silent).
    pub alpha_hat: f64,
    pub tap: f64,
    pub silent: bool,
}

/// Streaming de-emphasis for [`CodecMode::SelfAdaptive`].
///
/// Consumes only the coded pre-emphasized samples plus the constants both
/// ends already share (gamma and the frame geometry), which is what makes
/// the scheme zero-bit. A frame is decoded once its full analysis span,
/// including the look-ahead, has arrived, so output lags input by
/// `lookahead_len` samples until [`SelfAdaptiveDecoder::finish`] drains
/// the tail.
#[derive(Debug, Clone)]
pub struct SelfAdaptiveDecoder {
    gamma: f64,
    config: FrameConfig,
    window: Vec<f64>,
    received: Vec<f64>,
    frames_decoded: usize,
    state: FilterState,
    logs: Vec<DecoderFrameLog>,
}

impl SelfAdaptiveDecoder {
    pub fn new(gamma: f64, config: FrameConfig) -> Result<Self> {
        CodecMode::SelfAdaptive { gamma }.validate()?;
        Ok(Self {
            gamma,
            config,
            window: make_window(WindowKind::Hanning, config.window_len)?,
            received: Vec::new(),
            frames_decoded: 0,
            state: FilterState::default(),
            logs: Vec::new(),
        })
    }

    /// Feed coded samples; returns whatever whole frames became decodable.
    pub fn push(&mut self, coded: &[f64]) -> Result<Vec<f64>> {
        self.received.extend_from_slice(coded);
        let mut out = Vec::new();
        loop {
            let frame = self.frames_decoded;
            let needed = (frame + 1) * self.config.frame_len + self.config.lookahead_len;
            if self.received.len() < needed {
                return Ok(out);
            }
            out.extend(self.decode_frame(frame)?);
            self.frames_decoded = frame + 1;
        }
    }

    /// Decode the remaining buffered frames (their missing look-ahead
    /// reads as zeros) and pass any trailing partial frame through the
    /// last frame's tap. Returns the tail output and the per-frame logs.
    pub fn finish(mut self) -> Result<(Vec<f64>, Vec<DecoderFrameLog>)> {
        let frame_len = self.config.frame_len;
        let mut out = Vec::new();
        while (self.frames_decoded + 1) * frame_len <= self.received.len() {
            let frame = self.frames_decoded;
            out.extend(self.decode_frame(frame)?);
            self.frames_decoded = frame + 1;
        }
        let tail_start = self.frames_decoded * frame_len;
        if tail_start < self.received.len() {
            let last_tap = self.logs.last().map_or(0.0, |log| log.tap);
            let tail = self.received[tail_start..].to_vec();
            out.extend(de_emphasize(&tail, last_tap, &mut self.state)?);
        }
        Ok((out, self.logs))
    }

    pub fn frame_logs(&self) -> &[DecoderFrameLog] {
        &self.logs
    }

    fn decode_frame(&mut self, frame: usize) -> Result<Vec<f64>> {
        let cfg = &self.config;
        let mut buf = vec![0.0; cfg.window_len];
        let span_end = ((frame + 1) * cfg.frame_len + cfg.lookahead_len) as isize;
        fill_span(&self.received, span_end - cfg.window_len as isize, &mut buf);
        let pair = autocorr_01(&buf, &self.window)?;
        let (rho, alpha_hat, silent) = match pair.ratio {
            Some(rho) => (rho, solve_alpha(self.gamma, rho)?, false),
            None => (0.0, 0.0, true),
        };
        let tap = EmphasisCoeff::new(self.gamma, alpha_hat)?.tap;
        self.logs.push(DecoderFrameLog {
            frame_index: frame,
            rho,
            alpha_hat,
            tap,
            silent,
        });
        let start = frame * cfg.frame_len;
        de_emphasize(&self.received[start..start + cfg.frame_len], tap, &mut self.state)
    }
}

/// Output of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    /// De-emphasized decoder output, time aligned with the input and of
    /// equal length.
    pub decoded: Vec<f64>,
    pub per_frame_coeffs_enc: Vec<f64>,
    pub per_frame_coeffs_dec: Vec<f64>,
    /// Whole-file SNR of `decoded` against the input.
    pub snr_db: f64,
    /// None when the run was transparent (quantizer disabled).
    pub bits_per_sample: Option<u32>,
}

/// Per-frame estimates from a transparent encoder pass: the input-side
/// estimate and the re-estimate from the unquantized pre-emphasized
/// signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameAnalysis {
    pub frame_index: usize,
    pub alpha_tilde: f64,
    pub rho_d: f64,
    pub alpha_hat: f64,
    pub silent: bool,
}

/// Run the full encode/decode chain at `bits_per_sample`.
///
/// The quantizer step is tuned for highest SNR on the pre-emphasized
/// stream of a transparent run, then the coded pass runs with it.
pub fn run_pipeline(
    signal: &[f64],
    mode: CodecMode,
    config: FrameConfig,
    bits_per_sample: u32,
) -> Result<PipelineResult> {
    mode.validate()?;
    check_signal(signal, &config)?;
    let clean = run_engine(signal, mode, &config, None)?;
    let spec = tune_step(&clean.d_stream, bits_per_sample)?;
    let coded = run_engine(signal, mode, &config, Some(&spec))?;
    finish_result(signal, coded, Some(bits_per_sample))
}

/// Run the chain with the quantizer disabled (infinite precision);
/// residual error then comes only from coefficient mismatch.
pub fn run_pipeline_transparent(
    signal: &[f64],
    mode: CodecMode,
    config: FrameConfig,
) -> Result<PipelineResult> {
    mode.validate()?;
    check_signal(signal, &config)?;
    let out = run_engine(signal, mode, &config, None)?;
    finish_result(signal, out, None)
}

/// Per-frame encoder- and decoder-side estimates on a transparent run
/// with self-adaptive emphasis at the given gamma.
pub fn analyze_frames(
    signal: &[f64],
    gamma: f64,
    config: FrameConfig,
) -> Result<Vec<FrameAnalysis>> {
    CodecMode::SelfAdaptive { gamma }.validate()?;
    check_signal(signal, &config)?;
    let window = make_window(WindowKind::Hanning, config.window_len)?;
    let n_frames = signal.len() / config.frame_len;

    let mut estimates = Vec::with_capacity(n_frames);
    let mut enc_taps = Vec::with_capacity(n_frames);
    let mut buf = vec![0.0; config.window_len];
    for f in 0..n_frames {
        let estimate = {
            fill_analysis_span(signal, &config, f, &mut buf);
            estimate_alpha_encoder(autocorr_01(&buf, &window)?)
        };
        enc_taps.push(EmphasisCoeff::new(gamma, estimate.alpha)?.tap);
        estimates.push(estimate);
    }
    let d = pre_emphasize_stream(signal, &config, &enc_taps)?;

    let mut decoder = SelfAdaptiveDecoder::new(gamma, config)?;
    decoder.push(&d)?;
    let (_, logs) = decoder.finish()?;

    Ok(estimates
        .iter()
        .zip(&logs)
        .map(|(enc, dec)| FrameAnalysis {
            frame_index: dec.frame_index,
            alpha_tilde: enc.alpha,
            rho_d: dec.rho,
            alpha_hat: dec.alpha_hat,
            silent: enc.silent || dec.silent,
        })
        .collect())
}

struct EngineOutput {
    d_stream: Vec<f64>,
    decoded: Vec<f64>,
    enc_taps: Vec<f64>,
    dec_taps: Vec<f64>,
}

fn check_signal(signal: &[f64], config: &FrameConfig) -> Result<()> {
    if signal.len() < config.window_len {
        return Err(Error::invalid(format!(
            "signal ({} samples) shorter than one analysis window ({})",
            signal.len(),
            config.window_len
        )));
    }
    for &x in signal {
        if !x.is_finite() {
            return Err(Error::invalid("signal contains non-finite samples"));
        }
    }
    Ok(())
}

/// Copy `buf.len()` samples of `signal` starting at (possibly negative)
/// `start` into `buf`, reading zeros outside the signal.
fn fill_span(signal: &[f64], start: isize, buf: &mut [f64]) {
    for (i, slot) in buf.iter_mut().enumerate() {
        let idx = start + i as isize;
        *slot = if idx >= 0 && (idx as usize) < signal.len() {
            signal[idx as usize]
        } else {
            0.0
        };
    }
}

/// Analysis span for frame `f`: the window_len samples ending
/// lookahead_len past the frame's end (previous context, the frame, and
/// the look-ahead).
fn fill_analysis_span(signal: &[f64], config: &FrameConfig, frame: usize, buf: &mut [f64]) {
    let end = ((frame + 1) * config.frame_len + config.lookahead_len) as isize;
    fill_span(signal, end - config.window_len as isize, buf);
}

/// Pre-emphasize frame by frame with carried state; the trailing partial
/// frame reuses the last tap.
fn pre_emphasize_stream(signal: &[f64], config: &FrameConfig, taps: &[f64]) -> Result<Vec<f64>> {
    let frame_len = config.frame_len;
    let mut out = Vec::with_capacity(signal.len());
    let mut state = FilterState::default();
    for (f, &tap) in taps.iter().enumerate() {
        out.extend(pre_emphasize(
            &signal[f * frame_len..(f + 1) * frame_len],
            tap,
            &mut state,
        )?);
    }
    let tail_start = taps.len() * frame_len;
    if tail_start < signal.len() {
        let last_tap = taps.last().copied().unwrap_or(0.0);
        out.extend(pre_emphasize(&signal[tail_start..], last_tap, &mut state)?);
    }
    Ok(out)
}

/// De-emphasize a coded stream frame by frame with the given taps, the
/// trailing partial frame reusing the last tap.
fn de_emphasize_stream(coded: &[f64], config: &FrameConfig, taps: &[f64]) -> Result<Vec<f64>> {
    let frame_len = config.frame_len;
    let mut out = Vec::with_capacity(coded.len());
    let mut state = FilterState::default();
    for (f, &tap) in taps.iter().enumerate() {
        out.extend(de_emphasize(
            &coded[f * frame_len..(f + 1) * frame_len],
            tap,
            &mut state,
        )?);
    }
    let tail_start = taps.len() * frame_len;
    if tail_start < coded.len() {
        let last_tap = taps.last().copied().unwrap_or(0.0);
        out.extend(de_emphasize(&coded[tail_start..], last_tap, &mut state)?);
    }
    Ok(out)
}

fn run_engine(
    signal: &[f64],
    mode: CodecMode,
    config: &FrameConfig,
    quant: Option<&QuantizerSpec>,
) -> Result<EngineOutput> {
    match mode {
        CodecMode::Backward { gamma } => run_backward(signal, gamma, config, quant),
        _ => run_feedforward(signal, mode, config, quant),
    }
}

/// Modes whose encoder taps do not depend on decoded output: compute all
/// taps, code the whole stream, then decode.
fn run_feedforward(
    signal: &[f64],
    mode: CodecMode,
    config: &FrameConfig,
    quant: Option<&QuantizerSpec>,
) -> Result<EngineOutput> {
    let n_frames = signal.len() / config.frame_len;
    let window = make_window(WindowKind::Hanning, config.window_len)?;
    let mut buf = vec![0.0; config.window_len];

    let mut enc_taps = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let tap = match mode {
            CodecMode::None => 0.0,
            CodecMode::Fixed { beta } => beta,
            CodecMode::Forward { gamma } | CodecMode::SelfAdaptive { gamma } => {
                fill_analysis_span(signal, config, f, &mut buf);
                let estimate = estimate_alpha_encoder(autocorr_01(&buf, &window)?);
                EmphasisCoeff::new(gamma, estimate.alpha)?.tap
            }
            CodecMode::Backward { .. } => unreachable!("backward runs sequentially"),
        };
        enc_taps.push(tap);
    }

    let d = pre_emphasize_stream(signal, config, &enc_taps)?;
    let d_stream = match quant {
        Some(spec) => quantize(&d, spec),
        None => d,
    };

    let (decoded, dec_taps) = match mode {
        CodecMode::SelfAdaptive { gamma } => {
            let mut decoder = SelfAdaptiveDecoder::new(gamma, *config)?;
            let mut decoded = decoder.push(&d_stream)?;
            let (tail, logs) = decoder.finish()?;
            decoded.extend(tail);
            (decoded, logs.iter().map(|log| log.tap).collect())
        }
        _ => (
            de_emphasize_stream(&d_stream, config, &enc_taps)?,
            enc_taps.clone(),
        ),
    };

    Ok(EngineOutput {
        d_stream,
        decoded,
        enc_taps,
        dec_taps,
    })
}

/// Backward adaptation: both sides derive the tap from the window_len of
/// decoded output ending at the frame start, so the loop is strictly
/// sequential through the local decoder. The first frame sees an empty
/// history and gets tap 0.
fn run_backward(
    signal: &[f64],
    gamma: f64,
    config: &FrameConfig,
    quant: Option<&QuantizerSpec>,
) -> Result<EngineOutput> {
    let frame_len = config.frame_len;
    let n_frames = signal.len() / frame_len;
    let window = make_window(WindowKind::Hanning, config.window_len)?;
    let mut buf = vec![0.0; config.window_len];

    let mut taps = Vec::with_capacity(n_frames);
    let mut d_stream = Vec::with_capacity(signal.len());
    let mut decoded = Vec::with_capacity(signal.len());
    let mut pre_state = FilterState::default();
    let mut de_state = FilterState::default();
    for f in 0..n_frames {
        let tap = {
            let end = (f * frame_len) as isize;
            fill_span(&decoded, end - config.window_len as isize, &mut buf);
            let estimate = estimate_alpha_encoder(autocorr_01(&buf, &window)?);
            EmphasisCoeff::new(gamma, estimate.alpha)?.tap
        };
        let d = pre_emphasize(&signal[f * frame_len..(f + 1) * frame_len], tap, &mut pre_state)?;
        let dh = match quant {
            Some(spec) => quantize(&d, spec),
            None => d,
        };
        decoded.extend(de_emphasize(&dh, tap, &mut de_state)?);
        d_stream.extend(dh);
        taps.push(tap);
    }
    let tail_start = n_frames * frame_len;
    if tail_start < signal.len() {
        let last_tap = taps.last().copied().unwrap_or(0.0);
        let d = pre_emphasize(&signal[tail_start..], last_tap, &mut pre_state)?;
        let dh = match quant {
            Some(spec) => quantize(&d, spec),
            None => d,
        };
        decoded.extend(de_emphasize(&dh, last_tap, &mut de_state)?);
        d_stream.extend(dh);
    }

    Ok(EngineOutput {
        d_stream,
        decoded,
        enc_taps: taps.clone(),
        dec_taps: taps,
    })
}

fn finish_result(
    signal: &[f64],
    out: EngineOutput,
    bits_per_sample: Option<u32>,
) -> Result<PipelineResult> {
    debug_assert_eq!(out.decoded.len(), signal.len());
    let snr = if out.decoded == signal {
        f64::INFINITY
    } else {
        snr_db(signal, &out.decoded)?
    };
    Ok(PipelineResult {
        decoded: out.decoded,
        per_frame_coeffs_enc: out.enc_taps,
        per_frame_coeffs_dec: out.dec_taps,
        snr_db: snr,
        bits_per_sample,
    })
}
