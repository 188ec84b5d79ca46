//! Self-adaptive first-order pre-/de-emphasis filtering around a simulated
//! PCM codec.
//!
//! A first-order pre-emphasis filter `d(n) = x(n) - tap * x(n-1)` whitens
//! speech-like signals before quantization; the matching de-emphasis IIR
//! restores the spectrum afterwards. When the tap is chosen per frame as
//! `gamma * alpha`, with `alpha` the signal's AR(1) coefficient and
//! `gamma` a fixed weight shared by both ends, the decoder can re-derive
//! `alpha` from the coded pre-emphasized signal alone: its lag-1
//! autocorrelation ratio determines `alpha` through a cubic equation. That
//! makes the adaptation zero-bit, with no coefficient transmitted.
//!
//! The crate provides:
//!
//! - [`dsp`]: frame geometry, windows, autocorrelation, and the stateful
//!   emphasis filters;
//! - [`ar`]: AR(1) synthesis, the closed-form map from (alpha, gamma) to
//!   the pre-emphasized ratio, and a Monte Carlo harness for estimator
//!   spread;
//! - [`estimator`]: the cubic inversion (solver and interpolated table);
//! - [`codec`]: the experiment pipeline with fixed, forward, backward,
//!   and self-adaptive modes around a mid-tread PCM quantizer, including
//!   a streaming self-adaptive decoder;
//! - [`metrics`]: SNR and log spectral distortion;
//! - [`wav`]: strict 16-bit mono WAV decode/encode.

pub mod ar;
pub mod codec;
pub mod dsp;
pub mod error;
pub mod estimator;
pub mod metrics;
pub mod wav;

pub use ar::{
    default_alpha_grid, rho_of_alpha, run_monte_carlo, synthesize_ar1, ArModel, MonteCarloReport,
};
pub use codec::{
    analyze_frames, quantize, run_pipeline, run_pipeline_transparent, tune_step, CodecMode,
    DecoderFrameLog, FrameAnalysis, PipelineResult, QuantizerSpec, SelfAdaptiveDecoder,
    DEFAULT_FIXED_BETA,
};
pub use dsp::{
    autocorr_01, de_emphasize, make_window, pre_emphasize, AutocorrPair, EmphasisCoeff,
    FilterState, FrameConfig, WindowKind,
};
pub use error::{Error, Result};
pub use estimator::{
    build_cubic, build_table, estimate_alpha_encoder, lookup_alpha, rho_max, solve_alpha,
    AlphaEstimate, CubicCoeffs, DeemphasisTable, ALPHA_LIMIT,
};
pub use metrics::{lsd_db, snr_db, LsdReport};
pub use wav::{decode_wav, encode_wav, WavAudio};
