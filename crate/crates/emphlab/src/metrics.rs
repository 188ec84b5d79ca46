//! Objective quality measures: signal-to-noise ratio and log spectral
//! distortion between a reference signal and a processed copy.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::dsp::{make_window, FrameConfig, WindowKind};
use crate::error::{Error, Result};

/// Relative floor applied to each power spectrum before taking ratios;
/// keeps near-empty bins from dominating the distortion.
const SPECTRAL_FLOOR_REL: f64 = 1e-10;

/// Per-frame and mean log spectral distortion in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct LsdReport {
    pub mean_lsd_db: f64,
    pub per_frame_lsd_db: Vec<f64>,
    pub n_frames: usize,
}

/// 10*log10(sum(ref^2) / sum((ref-test)^2)); positive infinity when the
/// error energy is exactly zero.
pub fn snr_db(reference: &[f64], test: &[f64]) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::invalid(format!(
            "reference ({}) and test ({}) lengths differ",
            reference.len(),
            test.len()
        )));
    }
    let signal: f64 = reference.iter().map(|x| x * x).sum();
    if signal == 0.0 {
        return Err(Error::invalid("reference signal is silent"));
    }
    let noise: f64 = reference
        .iter()
        .zip(test)
        .map(|(r, t)| (r - t) * (r - t))
        .sum();
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / noise).log10())
}

/// Log spectral distortion between two equal-length signals.
///
/// Both are cut into Hanning-windowed frames of `config.window_len`
/// samples with 50% overlap; each frame's power spectrum is taken with an
/// FFT of the smallest power of two covering the window, and the frame's
/// LSD is the RMS over the non-negative-frequency bins of the dB power
/// ratio, with each spectrum floored at [`SPECTRAL_FLOOR_REL`] of its own
/// peak. The report averages frames arithmetically.
pub fn lsd_db(reference: &[f64], test: &[f64], config: FrameConfig) -> Result<LsdReport> {
    if reference.len() != test.len() {
        return Err(Error::invalid(format!(
            "reference ({}) and test ({}) lengths differ",
            reference.len(),
            test.len()
        )));
    }
    let win_len = config.window_len;
    if win_len < 2 {
        return Err(Error::invalid("window_len must be at least 2"));
    }
    if reference.len() < win_len {
        return Err(Error::invalid(format!(
            "signals ({}) shorter than one analysis window ({win_len})",
            reference.len()
        )));
    }
    let hop = win_len / 2;
    let nfft = win_len.next_power_of_two();
    let n_bins = nfft / 2 + 1;
    let window = make_window(WindowKind::Hanning, win_len)?;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);

    let spectrum = |signal: &[f64], start: usize, buf: &mut Vec<Complex<f64>>| {
        buf.clear();
        buf.extend(
            signal[start..start + win_len]
                .iter()
                .zip(&window)
                .map(|(x, w)| Complex::new(x * w, 0.0)),
        );
        buf.resize(nfft, Complex::new(0.0, 0.0));
        fft.process(buf);
        let mut powers: Vec<f64> = buf[..n_bins].iter().map(|c| c.norm_sqr()).collect();
        let peak = powers.iter().cloned().fold(0.0, f64::max);
        let floor = (peak * SPECTRAL_FLOOR_REL).max(f64::MIN_POSITIVE);
        for p in &mut powers {
            *p = p.max(floor);
        }
        powers
    };

    let n_frames = (reference.len() - win_len) / hop + 1;
    let mut per_frame = Vec::with_capacity(n_frames);
    let mut buf = Vec::with_capacity(nfft);
    for f in 0..n_frames {
        let start = f * hop;
        let p_ref = spectrum(reference, start, &mut buf);
        let p_test = spectrum(test, start, &mut buf);
        let sq_sum: f64 = p_ref
            .iter()
            .zip(&p_test)
            .map(|(r, t)| {
                let db = 10.0 * (r / t).log10();
                db * db
            })
            .sum();
        per_frame.push((sq_sum / n_bins as f64).sqrt());
    }
    let mean = per_frame.iter().sum::<f64>() / n_frames as f64;
    Ok(LsdReport {
        mean_lsd_db: mean,
        per_frame_lsd_db: per_frame,
        n_frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn snr_examples() {
        assert_eq!(snr_db(&[1.0, 0.5], &[1.0, 0.5]).unwrap(), f64::INFINITY);
        assert_eq!(snr_db(&[1.0, 0.5], &[0.0, 0.0]).unwrap(), 0.0);
        let snr = snr_db(&[1.0, 0.0], &[0.9, 0.0]).unwrap();
        assert!((snr - 20.0).abs() < 1e-9);
    }

    #[test]
    fn snr_rejects_mismatch_and_silence() {
        assert!(snr_db(&[1.0], &[1.0, 2.0]).is_err());
        assert!(snr_db(&[0.0, 0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn lsd_zero_for_identical_signals() {
        let x = noise(2000, 3);
        let r = lsd_db(&x, &x, FrameConfig::default()).unwrap();
        assert_eq!(r.mean_lsd_db, 0.0);
        assert_eq!(r.n_frames, r.per_frame_lsd_db.len());
        assert!(r.per_frame_lsd_db.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lsd_constant_scale_gives_constant_distortion() {
        // test = 2*ref scales every power bin by 4, so each bin
        // contributes exactly |10*log10(1/4)| = 6.0206 dB.
        let x = noise(2000, 4);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let r = lsd_db(&x, &y, FrameConfig::default()).unwrap();
        let expected = 20.0 * 2.0f64.log10();
        assert!((r.mean_lsd_db - expected).abs() < 1e-9, "{}", r.mean_lsd_db);
        for v in &r.per_frame_lsd_db {
            assert!((v - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn lsd_is_symmetric() {
        let a = noise(3000, 5);
        let b = noise(3000, 6);
        let ab = lsd_db(&a, &b, FrameConfig::default()).unwrap();
        let ba = lsd_db(&b, &a, FrameConfig::default()).unwrap();
        assert!((ab.mean_lsd_db - ba.mean_lsd_db).abs() < 1e-9);
        assert!(ab.mean_lsd_db > 0.0);
    }

    #[test]
    fn lsd_mean_matches_per_frame_values() {
        let a = noise(4000, 7);
        let b: Vec<f64> = a.iter().map(|v| v + 0.01).collect();
        let r = lsd_db(&a, &b, FrameConfig::default()).unwrap();
        let mean = r.per_frame_lsd_db.iter().sum::<f64>() / r.n_frames as f64;
        assert!((r.mean_lsd_db - mean).abs() < 1e-12);
        assert!(r.per_frame_lsd_db.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn lsd_frame_count_follows_overlap() {
        // 480-sample window, 240-sample hop: (1200 - 480)/240 + 1 frames.
        let a = noise(1200, 8);
        let r = lsd_db(&a, &a, FrameConfig::default()).unwrap();
        assert_eq!(r.n_frames, 4);
    }

    #[test]
    fn lsd_handles_silent_stretches() {
        let mut a = noise(2000, 9);
        let mut b = a.clone();
        for i in 500..1500 {
            a[i] = 0.0;
            b[i] = 0.0;
        }
        let r = lsd_db(&a, &b, FrameConfig::default()).unwrap();
        assert!(r.mean_lsd_db.is_finite());
        assert_eq!(r.mean_lsd_db, 0.0);
    }

    #[test]
    fn lsd_rejects_bad_inputs() {
        let cfg = FrameConfig::default();
        assert!(lsd_db(&[0.0; 100], &[0.0; 101], cfg).is_err());
        assert!(lsd_db(&[0.0; 100], &[0.0; 100], cfg).is_err());
    }
}
