//! AR(1) synthesis, the closed-form map from (alpha, gamma) to the
//! pre-emphasized signal's lag-1 autocorrelation ratio, and a Monte Carlo
//! harness measuring how well the encoder- and decoder-side estimators
//! recover the true AR coefficient.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dsp::{autocorr_01, pre_emphasize, FilterState};
use crate::error::{Error, Result};
use crate::estimator::{estimate_alpha_encoder, solve_alpha};

/// Closed-form rho_of_alpha is rejected this close to the unit circle; the
/// 1/(1-alpha^2) factor loses all precision beyond it.
const ALPHA_DOMAIN_MARGIN: f64 = 1e-9;

/// First-order autoregressive source model x(n) = alpha*x(n-1) + w(n) with
/// Gaussian innovations of variance sigma2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArModel {
    pub alpha: f64,
    pub sigma2: f64,
}

impl ArModel {
    pub fn new(alpha: f64, sigma2: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha.abs() < 1.0) {
            return Err(Error::invalid(format!(
                "AR coefficient {alpha} outside (-1, 1)"
            )));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::invalid(format!(
                "innovation variance {sigma2} must be positive"
            )));
        }
        Ok(Self { alpha, sigma2 })
    }
}

/// Estimator samples and 95% central intervals for one true alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub true_alpha: f64,
    /// Encoder-side estimates (windowed input autocorrelation ratio).
    pub estimates_encoder: Vec<f64>,
    /// Decoder-side re-estimates (cubic solve on the pre-emphasized frame).
    pub estimates_decoder: Vec<f64>,
    /// 2.5 / 97.5 percentile pair of the encoder estimates.
    pub ci95_encoder: (f64, f64),
    /// 2.5 / 97.5 percentile pair of the decoder estimates.
    pub ci95_decoder: (f64, f64),
}

/// Draw a stationary AR(1) sequence of `n_samples` samples.
///
/// x(-1) is drawn from the stationary distribution (variance
/// sigma2/(1-alpha^2)) so the output has no startup transient. The output
/// is a pure function of (model, n_samples, seed).
pub fn synthesize_ar1(model: ArModel, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    if !(model.alpha.is_finite() && model.alpha.abs() < 1.0) {
        return Err(Error::invalid(format!(
            "AR coefficient {} outside (-1, 1)",
            model.alpha
        )));
    }
    if !(model.sigma2.is_finite() && model.sigma2 > 0.0) {
        return Err(Error::invalid(format!(
            "innovation variance {} must be positive",
            model.sigma2
        )));
    }
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innovation_sd = model.sigma2.sqrt();
    let stationary_sd = (model.sigma2 / (1.0 - model.alpha * model.alpha)).sqrt();
    let mut prev: f64 = {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * stationary_sd
    };
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let w: f64 = StandardNormal.sample(&mut rng);
        let x = model.alpha * prev + w * innovation_sd;
        out.push(x);
        prev = x;
    }
    Ok(out)
}

/// Lag-1 autocorrelation ratio of the pre-emphasized signal
/// d(n) = x(n) - alpha*gamma*x(n-1) when x is stationary AR(1) with
/// coefficient alpha.
///
/// d is ARMA(1,1): d(n) = alpha*d(n-1) + w(n) - alpha*gamma*w(n-1). With
/// unit innovation variance (the ratio is scale-invariant):
///
/// ```text
/// R_d(1) = alpha*(1-gamma)*(1-alpha^2*gamma) / (1-alpha^2)
/// R_d(0) = alpha*R_d(1) + 1 - alpha^2*gamma + alpha^2*gamma^2
/// rho    = R_d(1) / R_d(0)
/// ```
pub fn rho_of_alpha(alpha: f64, gamma: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha.abs() < 1.0 - ALPHA_DOMAIN_MARGIN) {
        return Err(Error::invalid(format!(
            "alpha {alpha} outside (-1+1e-9, 1-1e-9)"
        )));
    }
    if !(gamma.is_finite() && gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma {gamma} outside (0, 1)")));
    }
    let a2 = alpha * alpha;
    let r1 = alpha * (1.0 - gamma) * (1.0 - a2 * gamma) / (1.0 - a2);
    let r0 = alpha * r1 + 1.0 - a2 * gamma + a2 * gamma * gamma;
    Ok(r1 / r0)
}

/// The alpha grid used in the estimation experiments: -0.98 and 0.98 at the
/// edges, -0.9 to 0.9 in steps of 0.1 between them.
pub fn default_alpha_grid() -> Vec<f64> {
    let mut grid = Vec::with_capacity(21);
    grid.push(-0.98);
    grid.extend((-9..=9).map(|k| f64::from(k) / 10.0));
    grid.push(0.98);
    grid
}

/// For each grid alpha, run `n_trials` independent single-frame estimation
/// trials and report the spread of the encoder estimate (from the clean
/// input) and the decoder re-estimate (from the pre-emphasized signal).
///
/// Each trial synthesizes a fresh stationary AR(1) frame, estimates
/// alpha from its windowed autocorrelation ratio, pre-emphasizes it with
/// the true-alpha tap `gamma*alpha`, and re-estimates alpha from the
/// windowed ratio of that signal via the cubic solver. A silent frame
/// contributes 0 to both estimate lists. Trials derive independent
/// sub-seeds from (seed, grid index, trial index), so results are
/// deterministic and independent of scheduling.
pub fn run_monte_carlo(
    alpha_grid: &[f64],
    gamma: f64,
    n_trials: usize,
    frame_len: usize,
    window: &[f64],
    seed: u64,
) -> Result<Vec<MonteCarloReport>> {
    if alpha_grid.is_empty() {
        return Err(Error::invalid("alpha_grid must be non-empty"));
    }
    for &a in alpha_grid {
        if !(a.is_finite() && a.abs() < 1.0) {
            return Err(Error::invalid(format!("grid alpha {a} outside (-1, 1)")));
        }
    }
    if !(gamma.is_finite() && gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma {gamma} outside (0, 1)")));
    }
    if n_trials == 0 {
        return Err(Error::invalid("n_trials must be positive"));
    }
    if frame_len < 2 {
        return Err(Error::invalid("frame_len must be at least 2"));
    }
    if window.len() != frame_len {
        return Err(Error::invalid(format!(
            "window length {} does not match frame_len {}",
            window.len(),
            frame_len
        )));
    }

    alpha_grid
        .par_iter()
        .enumerate()
        .map(|(grid_index, &alpha)| {
            let model = ArModel::new(alpha, 1.0)?;
            let tap = gamma * alpha;
            let mut enc = Vec::with_capacity(n_trials);
            let mut dec = Vec::with_capacity(n_trials);
            for trial in 0..n_trials {
                let sub_seed = splitmix64(seed ^ ((grid_index as u64) << 40) ^ trial as u64);
                let x = synthesize_ar1(model, frame_len, sub_seed)?;

                let pair_x = autocorr_01(&x, window)?;
                enc.push(estimate_alpha_encoder(pair_x).alpha);

                let mut state = FilterState::default();
                let d = pre_emphasize(&x, tap, &mut state)?;
                let pair_d = autocorr_01(&d, window)?;
                dec.push(match pair_d.ratio {
                    Some(rho) => solve_alpha(gamma, rho)?,
                    None => 0.0,
                });
            }
            Ok(MonteCarloReport {
                true_alpha: alpha,
                ci95_encoder: central_interval_95(&enc),
                ci95_decoder: central_interval_95(&dec),
                estimates_encoder: enc,
                estimates_decoder: dec,
            })
        })
        .collect()
}

/// 2.5 / 97.5 percentile pair via sorting and linear interpolation between
/// order statistics (h = (n-1)p).
fn central_interval_95(values: &[f64]) -> (f64, f64) {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    (
        percentile_sorted(&sorted, 0.025),
        percentile_sorted(&sorted, 0.975),
    )
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// SplitMix64 finalizer, used to decorrelate per-trial sub-seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{make_window, WindowKind};

    fn sample_ratio(x: &[f64]) -> f64 {
        let pair = autocorr_01(x, &vec![1.0; x.len()]).unwrap();
        pair.ratio.unwrap()
    }

    #[test]
    fn synthesis_is_deterministic() {
        let model = ArModel::new(0.6, 1.0).unwrap();
        let a = synthesize_ar1(model, 1000, 42).unwrap();
        let b = synthesize_ar1(model, 1000, 42).unwrap();
        assert_eq!(a, b);
        let c = synthesize_ar1(model, 1000, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn white_noise_has_near_zero_ratio() {
        let model = ArModel::new(0.0, 1.0).unwrap();
        let x = synthesize_ar1(model, 1_000_000, 7).unwrap();
        assert!(sample_ratio(&x).abs() < 5e-3);
    }

    #[test]
    fn ar_09_sample_ratio_near_09() {
        let model = ArModel::new(0.9, 1.0).unwrap();
        let x = synthesize_ar1(model, 1_000_000, 11).unwrap();
        assert!((sample_ratio(&x) - 0.9).abs() < 0.01);
    }

    #[test]
    fn model_preconditions() {
        assert!(ArModel::new(1.0, 1.0).is_err());
        assert!(ArModel::new(0.5, 0.0).is_err());
        assert!(ArModel::new(f64::NAN, 1.0).is_err());
        let m = ArModel::new(0.5, 1.0).unwrap();
        assert!(synthesize_ar1(m, 0, 1).is_err());
    }

    #[test]
    fn rho_of_alpha_zero_input() {
        for gamma in [0.1, 0.5, 0.9] {
            assert_eq!(rho_of_alpha(0.0, gamma).unwrap(), 0.0);
        }
    }

    #[test]
    fn rho_of_alpha_exact_rational_cases() {
        // alpha=0.9, gamma=0.7: hand reduction of the closed form gives
        // 11691/26290; alpha=0.5, gamma=0.5 gives 7/26.
        let r = rho_of_alpha(0.9, 0.7).unwrap();
        assert!((r - 11691.0 / 26290.0).abs() < 1e-12, "rho = {r}");
        assert!((r - 0.44469).abs() < 1e-4);
        let r = rho_of_alpha(0.5, 0.5).unwrap();
        assert!((r - 7.0 / 26.0).abs() < 1e-12, "rho = {r}");
        assert!((r - 0.269231).abs() < 1e-6);
    }

    #[test]
    fn rho_of_alpha_matches_arma_formula() {
        // Independent route: d(n) is ARMA(1,1) with phi = alpha and
        // theta = -alpha*gamma, whose lag-1 ratio is
        // (phi+theta)(1+phi*theta) / (1 + theta^2 + 2*phi*theta).
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let alpha: f64 = {
                let z: f64 = StandardNormal.sample(&mut rng);
                (z * 0.4).clamp(-0.97, 0.97)
            };
            let gamma: f64 = {
                let z: f64 = StandardNormal.sample(&mut rng);
                (0.5 + z * 0.2).clamp(0.05, 0.95)
            };
            let phi = alpha;
            let theta = -alpha * gamma;
            let arma = (phi + theta) * (1.0 + phi * theta)
                / (1.0 + theta * theta + 2.0 * phi * theta);
            let closed = rho_of_alpha(alpha, gamma).unwrap();
            assert!(
                (closed - arma).abs() < 1e-12,
                "alpha={alpha} gamma={gamma}: closed {closed} vs arma {arma}"
            );
        }
    }

    #[test]
    fn rho_of_alpha_matches_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for trial in 0..20u64 {
            let alpha: f64 = {
                let z: f64 = StandardNormal.sample(&mut rng);
                (z * 0.4).clamp(-0.95, 0.95)
            };
            let gamma: f64 = {
                let z: f64 = StandardNormal.sample(&mut rng);
                (0.5 + z * 0.2).clamp(0.05, 0.95)
            };
            let model = ArModel::new(alpha, 1.0).unwrap();
            let x = synthesize_ar1(model, 1_000_000, 5000 + trial).unwrap();
            let mut state = FilterState::default();
            let d = pre_emphasize(&x, gamma * alpha, &mut state).unwrap();
            let simulated = sample_ratio(&d);
            let closed = rho_of_alpha(alpha, gamma).unwrap();
            assert!(
                (closed - simulated).abs() < 0.01,
                "alpha={alpha} gamma={gamma}: closed {closed} vs simulated {simulated}"
            );
        }
    }

    #[test]
    fn rho_of_alpha_odd_symmetry_exact() {
        for k in 1..99 {
            let alpha = f64::from(k) / 100.0;
            for gamma in [0.1, 0.3, 0.5, 0.7, 0.9] {
                let pos = rho_of_alpha(alpha, gamma).unwrap();
                let neg = rho_of_alpha(-alpha, gamma).unwrap();
                assert_eq!(neg, -pos, "alpha={alpha} gamma={gamma}");
            }
        }
    }

    #[test]
    fn rho_of_alpha_monotone_and_shrinking() {
        for gamma in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let mut prev = f64::NEG_INFINITY;
            for k in -98..=98 {
                let alpha = f64::from(k) / 100.0;
                let rho = rho_of_alpha(alpha, gamma).unwrap();
                assert!(rho > prev, "not increasing at alpha={alpha} gamma={gamma}");
                if alpha != 0.0 {
                    assert!(
                        rho.abs() < alpha.abs(),
                        "|rho| >= |alpha| at alpha={alpha} gamma={gamma}"
                    );
                }
                prev = rho;
            }
        }
    }

    #[test]
    fn rho_of_alpha_domain() {
        assert!(rho_of_alpha(1.0, 0.7).is_err());
        assert!(rho_of_alpha(1.0 - 1e-10, 0.7).is_err());
        assert!(rho_of_alpha(0.5, 0.0).is_err());
        assert!(rho_of_alpha(0.5, 1.0).is_err());
    }

    #[test]
    fn default_grid_shape() {
        let g = default_alpha_grid();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], -0.98);
        assert_eq!(g[20], 0.98);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.contains(&0.1));
        assert!(g.contains(&0.9));
    }

    #[test]
    fn monte_carlo_single_trial_degenerates() {
        let window = make_window(WindowKind::Hanning, 256).unwrap();
        let reports = run_monte_carlo(&[0.5], 0.7, 1, 256, &window, 1).unwrap();
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert_eq!(r.estimates_encoder.len(), 1);
        assert_eq!(r.estimates_decoder.len(), 1);
        assert_eq!(r.ci95_encoder.0, r.ci95_encoder.1);
        assert_eq!(r.ci95_decoder.0, r.ci95_decoder.1);
        assert_eq!(r.ci95_encoder.0, r.estimates_encoder[0]);
    }

    #[test]
    fn monte_carlo_intervals_cover_truth() {
        let window = make_window(WindowKind::Hanning, 1440).unwrap();
        let reports = run_monte_carlo(&[0.9], 0.7, 200, 1440, &window, 2024).unwrap();
        let r = &reports[0];
        assert!(r.ci95_encoder.0 <= 0.9 && 0.9 <= r.ci95_encoder.1);
        assert!(r.ci95_decoder.0 <= 0.9 && 0.9 <= r.ci95_decoder.1);
        let median = {
            let mut s = r.estimates_decoder.clone();
            s.sort_by(|a, b| a.total_cmp(b));
            percentile_sorted(&s, 0.5)
        };
        assert!(r.ci95_decoder.0 <= median && median <= r.ci95_decoder.1);
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let window = make_window(WindowKind::Hanning, 128).unwrap();
        let a = run_monte_carlo(&[0.3, 0.8], 0.7, 16, 128, &window, 5).unwrap();
        let b = run_monte_carlo(&[0.3, 0.8], 0.7, 16, 128, &window, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monte_carlo_rejects_bad_arguments() {
        let window = make_window(WindowKind::Hanning, 128).unwrap();
        assert!(run_monte_carlo(&[], 0.7, 4, 128, &window, 0).is_err());
        assert!(run_monte_carlo(&[1.0], 0.7, 4, 128, &window, 0).is_err());
        assert!(run_monte_carlo(&[0.5], 1.0, 4, 128, &window, 0).is_err());
        assert!(run_monte_carlo(&[0.5], 0.7, 0, 128, &window, 0).is_err());
        assert!(run_monte_carlo(&[0.5], 0.7, 4, 64, &window, 0).is_err());
    }

    #[test]
    fn percentile_interpolates_linearly() {
        let sorted = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(percentile_sorted(&sorted, 0.0), 0.0);
        assert_eq!(percentile_sorted(&sorted, 1.0), 3.0);
        assert_eq!(percentile_sorted(&sorted, 0.5), 1.5);
    }
}
