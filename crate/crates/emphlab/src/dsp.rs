//! Frame geometry, windowing, autocorrelation and the stateful first-order
//! pre-/de-emphasis filters.
//!
//! Everything here is per-channel: window/autocorrelation helpers are pure,
//! while the two filters carry a one-sample [`FilterState`] across frames so
//! a stream can be processed frame by frame with per-frame coefficient
//! switching and no discontinuities.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Below this lag-0 energy a frame is treated as silent and the
/// autocorrelation ratio is undefined.
pub const SILENCE_R0_FLOOR: f64 = 1e-30;

/// Sampling rate and frame/window/look-ahead geometry shared by every
/// frame-based stage.
///
/// The analysis window for a frame ends `lookahead_len` samples after the
/// frame does, so with the default profile (10 ms frames, 30 ms window,
/// 10 ms look-ahead at 16 kHz) it covers the previous frame, the current
/// frame and the look-ahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    pub sample_rate_hz: u32,
    pub frame_len: usize,
    pub window_len: usize,
    pub lookahead_len: usize,
}

impl FrameConfig {
    pub fn new(
        sample_rate_hz: u32,
        frame_len: usize,
        window_len: usize,
        lookahead_len: usize,
    ) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::invalid("sample_rate_hz must be positive"));
        }
        if frame_len == 0 {
            return Err(Error::invalid("frame_len must be positive"));
        }
        if window_len < frame_len {
            return Err(Error::invalid(format!(
                "window_len ({window_len}) must be >= frame_len ({frame_len})"
            )));
        }
        if lookahead_len > window_len - frame_len {
            return Err(Error::invalid(format!(
                "lookahead_len ({lookahead_len}) must be <= window_len - frame_len ({})",
                window_len - frame_len
            )));
        }
        Ok(Self {
            sample_rate_hz,
            frame_len,
            window_len,
            lookahead_len,
        })
    }
}

impl Default for FrameConfig {
    /// 16 kHz, 160-sample (10 ms) frames, 480-sample (30 ms) analysis
    /// window, 160-sample (10 ms) look-ahead.
    fn default() -> Self {
        Self {
            sample_rate_hz: 16_000,
            frame_len: 160,
            window_len: 480,
            lookahead_len: 160,
        }
    }
}

/// Lag-0/lag-1 autocorrelation of a windowed frame.
///
/// `ratio` is `r1 / r0`, the sole statistic consumed downstream; it is
/// `None` for silent frames (`r0` at or below [`SILENCE_R0_FLOOR`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutocorrPair {
    pub r0: f64,
    pub r1: f64,
    pub ratio: Option<f64>,
}

/// A filter weight `gamma`, an AR(1) coefficient `alpha` and their product,
/// the effective first-order filter tap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmphasisCoeff {
    pub gamma: f64,
    pub alpha: f64,
    pub tap: f64,
}

impl EmphasisCoeff {
    /// `gamma` must lie in (0, 1] and `alpha` in (-1, 1) so that
    /// `tap = gamma * alpha` keeps the de-emphasis IIR strictly stable.
    pub fn new(gamma: f64, alpha: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::invalid(format!("gamma {gamma} outside (0, 1]")));
        }
        if !(alpha.is_finite() && alpha.abs() < 1.0) {
            return Err(Error::invalid(format!("alpha {alpha} outside (-1, 1)")));
        }
        Ok(Self {
            gamma,
            alpha,
            tap: gamma * alpha,
        })
    }
}

/// One-sample memory carried across frames by the emphasis filters.
///
/// Starts at (0, 0); after a frame is processed, `prev_input` holds the
/// frame's last input sample and `prev_output` its last output sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FilterState {
    pub prev_input: f64,
    pub prev_output: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hanning,
    Rectangular,
}

/// Analysis window weights of the given length; all weights lie in [0, 1].
///
/// The Hanning window is the symmetric variant
/// `w(n) = 0.5 * (1 - cos(2*pi*n / (len-1)))`.
pub fn make_window(kind: WindowKind, len: usize) -> Result<Vec<f64>> {
    if len < 2 {
        return Err(Error::invalid(format!("window length {len} < 2")));
    }
    let weights = match kind {
        WindowKind::Rectangular => vec![1.0; len],
        WindowKind::Hanning => {
            let denom = (len - 1) as f64;
            (0..len)
                .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / denom).cos()))
                .collect()
        }
    };
    Ok(weights)
}

/// Lag-0 and lag-1 autocorrelation of `samples` weighted by `window`.
///
/// With `y(n) = samples(n) * window(n)`:
/// `r0 = sum y(n)^2` and `r1 = sum y(n) * y(n-1)`. The sums are left
/// unnormalized; only the ratio is used by the estimators, so any common
/// normalization would cancel.
pub fn autocorr_01(samples: &[f64], window: &[f64]) -> Result<AutocorrPair> {
    if samples.len() != window.len() {
        return Err(Error::invalid(format!(
            "samples ({}) and window ({}) lengths differ",
            samples.len(),
            window.len()
        )));
    }
    if samples.len() < 2 {
        return Err(Error::invalid("need at least 2 samples"));
    }
    let mut r0 = 0.0;
    let mut r1 = 0.0;
    let mut prev = samples[0] * window[0];
    r0 += prev * prev;
    for n in 1..samples.len() {
        let y = samples[n] * window[n];
        r0 += y * y;
        r1 += y * prev;
        prev = y;
    }
    let ratio = if r0 > SILENCE_R0_FLOOR {
        Some(r1 / r0)
    } else {
        None
    };
    Ok(AutocorrPair { r0, r1, ratio })
}

/// First-order FIR pre-emphasis `out(n) = in(n) - tap * in(n-1)` with the
/// previous frame's last input carried in `state`.
pub fn pre_emphasize(frame: &[f64], tap: f64, state: &mut FilterState) -> Result<Vec<f64>> {
    if !tap.is_finite() || tap.abs() > 1.0 {
        return Err(Error::invalid(format!(
            "pre-emphasis tap {tap} outside [-1, 1]"
        )));
    }
    let mut out = Vec::with_capacity(frame.len());
    let mut prev = state.prev_input;
    for &x in frame {
        out.push(x - tap * prev);
        prev = x;
    }
    if let (Some(&last_in), Some(&last_out)) = (frame.last(), out.last()) {
        state.prev_input = last_in;
        state.prev_output = last_out;
    }
    Ok(out)
}

/// First-order IIR de-emphasis `out(n) = in(n) + tap * out(n-1)`, the exact
/// inverse of [`pre_emphasize`] at the same tap, with the previous frame's
/// last output carried in `state`.
pub fn de_emphasize(frame: &[f64], tap: f64, state: &mut FilterState) -> Result<Vec<f64>> {
    if !tap.is_finite() || tap.abs() >= 1.0 {
        return Err(Error::UnstableTap(tap));
    }
    let mut out = Vec::with_capacity(frame.len());
    let mut prev = state.prev_output;
    for &d in frame {
        let x = d + tap * prev;
        out.push(x);
        prev = x;
    }
    if let (Some(&last_in), Some(&last_out)) = (frame.last(), out.last()) {
        state.prev_input = last_in;
        state.prev_output = last_out;
    }
    Ok(out)
}
