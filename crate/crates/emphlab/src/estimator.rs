//! Decoder-side recovery of the AR coefficient from the pre-emphasized
//! signal's autocorrelation ratio: the defining cubic, a bracketed solver,
//! and a tabulated inverse with linear interpolation for constant-time
//! lookup.

use crate::ar::rho_of_alpha;
use crate::dsp::AutocorrPair;
use crate::error::{Error, Result};

/// Stability clamp applied to every alpha estimate; keeps the de-emphasis
/// IIR tap strictly inside the unit circle for any gamma in (0, 1].
pub const ALPHA_LIMIT: f64 = 0.999;

const SOLVE_F_TOL: f64 = 1e-12;
const SOLVE_WIDTH_TOL: f64 = 1e-10;
const SOLVE_MAX_ITERS: usize = 200;

/// Encoder-side alpha estimate plus a flag marking frames whose
/// autocorrelation ratio was undefined (silent input).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaEstimate {
    pub alpha: f64,
    pub silent: bool,
}

/// Coefficients of c3*a^3 + c2*a^2 + c1*a + c0 = 0, the polynomial whose
/// root in (-1, 1) inverts the forward map rho_of_alpha at fixed gamma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicCoeffs {
    pub c3: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl CubicCoeffs {
    pub fn eval(&self, alpha: f64) -> f64 {
        ((self.c3 * alpha + self.c2) * alpha + self.c1) * alpha + self.c0
    }
}

/// Encoder-side estimate: the windowed input's autocorrelation ratio,
/// clamped to the stability range. A silent frame yields 0, flagged.
pub fn estimate_alpha_encoder(pair: AutocorrPair) -> AlphaEstimate {
    match pair.ratio {
        Some(ratio) => AlphaEstimate {
            alpha: ratio.clamp(-ALPHA_LIMIT, ALPHA_LIMIT),
            silent: false,
        },
        None => AlphaEstimate {
            alpha: 0.0,
            silent: true,
        },
    }
}

/// Cubic in alpha satisfied by rho = rho_of_alpha(alpha, gamma):
///
/// ```text
/// gamma*(1-gamma)*a^3 + gamma*rho*(gamma-2)*a^2 + (gamma-1)*a + rho = 0
/// ```
///
/// The linear coefficient is (gamma-1): in the gamma -> 0 limit the
/// equation must degenerate to -a + rho = 0 (no pre-emphasis leaves the
/// ratio equal to alpha), which the alternative gamma*(gamma-1) fails, and
/// only (gamma-1) is consistent with the forward map (see tests).
pub fn build_cubic(gamma: f64, rho: f64) -> Result<CubicCoeffs> {
    if !(gamma.is_finite() && gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma {gamma} outside (0, 1)")));
    }
    if !(rho.is_finite() && rho.abs() < 1.0) {
        return Err(Error::invalid(format!("rho {rho} outside (-1, 1)")));
    }
    Ok(CubicCoeffs {
        c3: gamma * (1.0 - gamma),
        c2: gamma * rho * (gamma - 2.0),
        c1: gamma - 1.0,
        c0: rho,
    })
}

/// Largest ratio the forward map can produce at this gamma (attained at
/// alpha = ALPHA_LIMIT); the achievable range is symmetric about 0.
pub fn rho_max(gamma: f64) -> Result<f64> {
    rho_of_alpha(ALPHA_LIMIT, gamma)
}

/// Invert the forward map: the unique alpha in [-ALPHA_LIMIT, ALPHA_LIMIT]
/// with rho_of_alpha(alpha, gamma) = rho.
///
/// Out-of-range rho (possible under quantization noise) is clamped to the
/// achievable range first. The cubic equals a positive factor times
/// (rho - rho_of_alpha(a, gamma)) and the forward map is strictly
/// increasing, so after clamping there is exactly one sign change on the
/// bracket and bisection converges unconditionally.
pub fn solve_alpha(gamma: f64, rho: f64) -> Result<f64> {
    if !rho.is_finite() {
        return Err(Error::invalid(format!("rho {rho} is not finite")));
    }
    if rho == 0.0 {
        // The map is odd, so 0 inverts to 0; skip bisection to keep this
        // case exact.
        return Ok(0.0);
    }
    let bound = rho_max(gamma)?;
    let rho = rho.clamp(-bound, bound);
    let cubic = build_cubic(gamma, rho)?;

    let mut lo = -ALPHA_LIMIT;
    let mut hi = ALPHA_LIMIT;
    let f_lo = cubic.eval(lo);
    let f_hi = cubic.eval(hi);
    if f_lo.abs() <= SOLVE_F_TOL {
        return Ok(lo);
    }
    if f_hi.abs() <= SOLVE_F_TOL {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoBracket { gamma, rho });
    }
    let lo_sign = f_lo.signum();
    for _ in 0..SOLVE_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let f_mid = cubic.eval(mid);
        if f_mid.abs() <= SOLVE_F_TOL {
            return Ok(mid);
        }
        if f_mid.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= SOLVE_WIDTH_TOL {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Precomputed inverse of the forward map at fixed gamma: uniform alpha
/// grid with the matching rho values, looked up by binary search and
/// linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct DeemphasisTable {
    gamma: f64,
    rho_grid: Vec<f64>,
    alpha_values: Vec<f64>,
}

// A table always holds at least 2 entries, so there is no is_empty.
#[allow(clippy::len_without_is_empty)]
impl DeemphasisTable {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.alpha_values.len()
    }

    /// Achievable (rho_min, rho_max) range for this gamma.
    pub fn domain(&self) -> (f64, f64) {
        (self.rho_grid[0], *self.rho_grid.last().unwrap())
    }

    pub fn rho_grid(&self) -> &[f64] {
        &self.rho_grid
    }

    pub fn alpha_values(&self) -> &[f64] {
        &self.alpha_values
    }

    /// Serialize as CSV with a "rho,alpha" header; floats are printed in
    /// shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rho,alpha\n");
        for (rho, alpha) in self.rho_grid.iter().zip(&self.alpha_values) {
            out.push_str(&format!("{rho},{alpha}\n"));
        }
        out
    }

    /// Parse a table from CSV bytes, enforcing every structural invariant
    /// lookup relies on. The gamma is supplied by the caller (the CSV
    /// stores only the curve); whether the pairs actually lie on that
    /// gamma's curve is the producer's responsibility.
    ///
    /// Never panics on malformed input.
    pub fn from_csv(gamma: f64, bytes: &[u8]) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0 && gamma < 1.0) {
            return Err(Error::invalid(format!("gamma {gamma} outside (0, 1)")));
        }
        let text = std::str::from_utf8(bytes)
            .map_err(|e| Error::MalformedTable(format!("not valid UTF-8: {e}")))?;
        let mut lines = text.lines();
        match lines.next() {
            Some(header) if header.trim_end() == "rho,alpha" => {}
            Some(header) => {
                return Err(Error::MalformedTable(format!(
                    "expected header \"rho,alpha\", found {header:?}"
                )))
            }
            None => return Err(Error::MalformedTable("empty input".into())),
        }
        let mut rho_grid = Vec::new();
        let mut alpha_values = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let (Some(rho_s), Some(alpha_s), None) =
                (fields.next(), fields.next(), fields.next())
            else {
                return Err(Error::MalformedTable(format!(
                    "row {}: expected 2 comma-separated fields",
                    i + 1
                )));
            };
            let rho: f64 = rho_s.trim().parse().map_err(|e| {
                Error::MalformedTable(format!("row {}: bad rho {rho_s:?}: {e}", i + 1))
            })?;
            let alpha: f64 = alpha_s.trim().parse().map_err(|e| {
                Error::MalformedTable(format!("row {}: bad alpha {alpha_s:?}: {e}", i + 1))
            })?;
            if !rho.is_finite() || !alpha.is_finite() {
                return Err(Error::MalformedTable(format!(
                    "row {}: non-finite value",
                    i + 1
                )));
            }
            if alpha.abs() > ALPHA_LIMIT {
                return Err(Error::MalformedTable(format!(
                    "row {}: alpha {alpha} outside [-{ALPHA_LIMIT}, {ALPHA_LIMIT}]",
                    i + 1
                )));
            }
            if rho.abs() >= 1.0 {
                return Err(Error::MalformedTable(format!(
                    "row {}: rho {rho} outside (-1, 1)",
                    i + 1
                )));
            }
            if let (Some(&prev_rho), Some(&prev_alpha)) =
                (rho_grid.last(), alpha_values.last())
            {
                if rho <= prev_rho || alpha <= prev_alpha {
                    return Err(Error::MalformedTable(format!(
                        "row {}: columns must be strictly increasing",
                        i + 1
                    )));
                }
            }
            rho_grid.push(rho);
            alpha_values.push(alpha);
        }
        if rho_grid.len() < 2 {
            return Err(Error::MalformedTable(format!(
                "need at least 2 rows, found {}",
                rho_grid.len()
            )));
        }
        Ok(Self {
            gamma,
            rho_grid,
            alpha_values,
        })
    }
}

/// Tabulate the inverse map on a uniform alpha grid over
/// [-ALPHA_LIMIT, ALPHA_LIMIT].
///
/// The endpoints hit the limits exactly and odd grids contain alpha = 0
/// exactly, so the table is symmetric about the origin. Strict
/// monotonicity of the rho column is verified at build time.
pub fn build_table(gamma: f64, n_entries: usize) -> Result<DeemphasisTable> {
    if !(gamma.is_finite() && gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma {gamma} outside (0, 1)")));
    }
    if n_entries < 2 {
        return Err(Error::invalid(format!(
            "n_entries {n_entries} must be at least 2"
        )));
    }
    let step = 2.0 * ALPHA_LIMIT / (n_entries - 1) as f64;
    let mut alpha_values = Vec::with_capacity(n_entries);
    let mut rho_grid = Vec::with_capacity(n_entries);
    for i in 0..n_entries {
        let alpha = if i == n_entries - 1 {
            ALPHA_LIMIT
        } else if 2 * i == n_entries - 1 {
            0.0
        } else {
            -ALPHA_LIMIT + i as f64 * step
        };
        let rho = rho_of_alpha(alpha, gamma)?;
        if let Some(&prev) = rho_grid.last() {
            if rho <= prev {
                return Err(Error::invalid(format!(
                    "rho grid not strictly increasing at entry {i} (gamma {gamma})"
                )));
            }
        }
        alpha_values.push(alpha);
        rho_grid.push(rho);
    }
    Ok(DeemphasisTable {
        gamma,
        rho_grid,
        alpha_values,
    })
}

/// Table-based inverse: clamp rho to the achievable range, then linearly
/// interpolate between the bracketing grid entries. Grid-point inputs
/// return the stored alpha exactly.
pub fn lookup_alpha(table: &DeemphasisTable, rho: f64) -> f64 {
    let rho_grid = &table.rho_grid;
    let alphas = &table.alpha_values;
    let n = rho_grid.len();
    let rho = rho.clamp(rho_grid[0], rho_grid[n - 1]);
    // Index of the last grid value <= rho.
    let idx = rho_grid.partition_point(|&r| r <= rho).saturating_sub(1);
    if idx + 1 == n {
        return alphas[n - 1];
    }
    let frac = (rho - rho_grid[idx]) / (rho_grid[idx + 1] - rho_grid[idx]);
    alphas[idx] + frac * (alphas[idx + 1] - alphas[idx])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoder_estimate_examples() {
        let e = estimate_alpha_encoder(AutocorrPair {
            r0: 2.0,
            r1: 1.0,
            ratio: Some(0.5),
        });
        assert_eq!((e.alpha, e.silent), (0.5, false));

        let e = estimate_alpha_encoder(AutocorrPair {
            r0: 1.0,
            r1: 1.0,
            ratio: Some(1.0),
        });
        assert_eq!((e.alpha, e.silent), (ALPHA_LIMIT, false));

        let e = estimate_alpha_encoder(AutocorrPair {
            r0: 0.0,
            r1: 0.0,
            ratio: None,
        });
        assert_eq!((e.alpha, e.silent), (0.0, true));
    }

    #[test]
    fn cubic_coefficients_at_zero_rho() {
        let c = build_cubic(0.7, 0.0).unwrap();
        assert!((c.c3 - 0.21).abs() < 1e-15);
        assert_eq!(c.c2, 0.0);
        assert!((c.c1 + 0.3).abs() < 1e-15);
        assert_eq!(c.c0, 0.0);
    }

    #[test]
    fn cubic_vanishes_on_forward_map() {
        let rho = rho_of_alpha(0.9, 0.7).unwrap();
        let c = build_cubic(0.7, rho).unwrap();
        assert!(c.eval(0.9).abs() < 1e-5);
    }

    #[test]
    fn cubic_linear_coefficient_validation() {
        // Two independent checks pinning the linear coefficient to
        // (gamma-1) rather than the superficially plausible
        // gamma*(gamma-1).
        //
        // (a) The known solution alpha=0.9 for gamma=0.7: the variant
        // leaves a residual near 0.08 instead of ~0.
        let gamma = 0.7;
        let rho = rho_of_alpha(0.9, gamma).unwrap();
        let c = build_cubic(gamma, rho).unwrap();
        assert!(c.eval(0.9).abs() < 1e-9);
        let variant = CubicCoeffs {
            c1: gamma * (gamma - 1.0),
            ..c
        };
        assert!(variant.eval(0.9).abs() > 0.01);

        // (b) The gamma -> 0 limit must degenerate to -alpha + rho = 0
        // (no pre-emphasis leaves the ratio equal to alpha). The variant
        // degenerates to rho = 0 instead, contradicting any nonzero rho.
        let gamma = 1e-9;
        let rho = 0.3;
        let c = build_cubic(gamma, rho).unwrap();
        assert!(c.eval(rho).abs() < 1e-8);
        let variant = CubicCoeffs {
            c1: gamma * (gamma - 1.0),
            ..c
        };
        assert!((variant.eval(rho) - rho).abs() < 1e-8);
    }

    #[test]
    fn cubic_rejects_bad_arguments() {
        assert!(build_cubic(0.0, 0.5).is_err());
        assert!(build_cubic(1.0, 0.5).is_err());
        assert!(build_cubic(0.7, 1.0).is_err());
        assert!(build_cubic(0.7, f64::NAN).is_err());
    }

    #[test]
    fn solve_alpha_examples() {
        assert_eq!(solve_alpha(0.7, 0.0).unwrap(), 0.0);
        assert!((solve_alpha(0.7, 0.44469).unwrap() - 0.9).abs() < 1e-4);
        assert!((solve_alpha(0.7, -0.44469).unwrap() + 0.9).abs() < 1e-4);
        assert!((solve_alpha(0.5, 0.269231).unwrap() - 0.5).abs() < 1e-4);
    }

    #[test]
    fn solve_alpha_tiny_gamma_returns_nearly_rho() {
        assert!((solve_alpha(1e-6, 0.3).unwrap() - 0.3).abs() < 1e-4);
    }

    #[test]
    fn solve_alpha_clamps_out_of_range_rho() {
        assert_eq!(solve_alpha(0.7, 0.9999).unwrap(), ALPHA_LIMIT);
        assert_eq!(solve_alpha(0.7, -5.0).unwrap(), -ALPHA_LIMIT);
        let bound = rho_max(0.7).unwrap();
        assert_eq!(solve_alpha(0.7, bound).unwrap(), ALPHA_LIMIT);
    }

    #[test]
    fn solve_alpha_rejects_bad_arguments() {
        assert!(solve_alpha(0.0, 0.3).is_err());
        assert!(solve_alpha(1.0, 0.3).is_err());
        assert!(solve_alpha(0.7, f64::NAN).is_err());
    }

    #[test]
    fn solve_alpha_round_trip() {
        for gamma in [0.3, 0.5, 0.7, 0.9] {
            for k in -49..=49 {
                let alpha = f64::from(k) * 0.02;
                let rho = rho_of_alpha(alpha, gamma).unwrap();
                let back = solve_alpha(gamma, rho).unwrap();
                assert!(
                    (back - alpha).abs() <= 1e-8,
                    "gamma={gamma} alpha={alpha}: got {back}"
                );
            }
        }
    }

    #[test]
    fn solve_alpha_odd_symmetry() {
        for gamma in [0.3, 0.5, 0.7, 0.9] {
            for k in 1..20 {
                let rho = f64::from(k) * 0.03;
                let pos = solve_alpha(gamma, rho).unwrap();
                let neg = solve_alpha(gamma, -rho).unwrap();
                assert!((neg + pos).abs() < 1e-10, "gamma={gamma} rho={rho}");
            }
        }
    }

    #[test]
    fn cubic_has_one_root_inside_unit_interval() {
        for gamma in [0.3, 0.5, 0.7, 0.9] {
            for k in -49..=49 {
                let alpha = f64::from(k) * 0.02;
                let rho = rho_of_alpha(alpha, gamma).unwrap();
                let c = build_cubic(gamma, rho).unwrap();
                let mut sign_changes = 0;
                let mut prev = c.eval(-0.9995);
                for j in 1..=2000 {
                    let a = -0.9995 + f64::from(j) * (2.0 * 0.9995 / 2000.0);
                    let v = c.eval(a);
                    if prev.signum() != v.signum() {
                        sign_changes += 1;
                    }
                    prev = v;
                }
                assert_eq!(
                    sign_changes, 1,
                    "gamma={gamma} alpha={alpha}: {sign_changes} sign changes"
                );
            }
        }
    }

    #[test]
    fn inverse_is_most_sensitive_near_zero() {
        let gamma = 0.7;
        let h = 1e-4;
        let slope_at = |rho: f64| {
            (solve_alpha(gamma, rho + h).unwrap() - solve_alpha(gamma, rho - h).unwrap())
                / (2.0 * h)
        };
        let near_zero = slope_at(0.0).abs();
        let near_edge = slope_at(rho_max(gamma).unwrap() - 10.0 * h).abs();
        assert!(
            near_zero > near_edge,
            "slope near 0 ({near_zero}) should exceed slope near the edge ({near_edge})"
        );
    }

    #[test]
    fn scaled_inverse_curves_are_monotone_through_origin() {
        for gamma in [0.5, 0.7, 0.9] {
            let bound = rho_max(gamma).unwrap() * 0.999;
            let mut prev = f64::NEG_INFINITY;
            for k in -40..=40 {
                let rho = f64::from(k) / 40.0 * bound;
                let tap = gamma * solve_alpha(gamma, rho).unwrap();
                if k == 0 {
                    assert_eq!(tap, 0.0);
                }
                assert!(tap > prev, "gamma={gamma} rho={rho}");
                prev = tap;
            }
        }
    }

    #[test]
    fn table_three_entries_is_symmetric() {
        let t = build_table(0.7, 3).unwrap();
        let bound = rho_max(0.7).unwrap();
        assert_eq!(t.alpha_values(), &[-ALPHA_LIMIT, 0.0, ALPHA_LIMIT]);
        assert_eq!(t.rho_grid(), &[-bound, 0.0, bound]);
        assert_eq!(t.domain(), (-bound, bound));
    }

    #[test]
    fn table_grid_lookup_is_exact() {
        let t = build_table(0.7, 1024).unwrap();
        assert_eq!(t.len(), 1024);
        for (rho, alpha) in t.rho_grid().iter().zip(t.alpha_values()) {
            assert_eq!(lookup_alpha(&t, *rho), *alpha);
        }
    }

    #[test]
    fn table_lookup_clamps_and_interpolates() {
        let t = build_table(0.7, 65).unwrap();
        assert_eq!(lookup_alpha(&t, 0.0), 0.0);
        assert_eq!(lookup_alpha(&t, 5.0), ALPHA_LIMIT);
        assert_eq!(lookup_alpha(&t, -5.0), -ALPHA_LIMIT);
    }

    #[test]
    fn table_matches_solver_within_interpolation_error() {
        let t = build_table(0.7, 1024).unwrap();
        let (rho_min, rho_max) = t.domain();
        for k in 0..100 {
            // Low-discrepancy sweep of the domain.
            let u = (f64::from(k) * 0.618_033_988_749_895).fract();
            let rho = rho_min + u * (rho_max - rho_min);
            let fast = lookup_alpha(&t, rho);
            let exact = solve_alpha(0.7, rho).unwrap();
            assert!(
                (fast - exact).abs() <= 5e-4,
                "rho={rho}: table {fast} vs solver {exact}"
            );
        }
    }

    #[test]
    fn table_rejects_bad_sizes() {
        assert!(build_table(0.7, 0).is_err());
        assert!(build_table(0.7, 1).is_err());
        assert!(build_table(0.0, 16).is_err());
    }

    #[test]
    fn table_csv_round_trip() {
        let t = build_table(0.7, 17).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("rho,alpha\n"));
        let back = DeemphasisTable::from_csv(0.7, csv.as_bytes()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn table_csv_rejects_malformed_input() {
        let bad: [&[u8]; 9] = [
            b"",
            b"rho;alpha\n0,0\n0.1,0.2\n",
            b"rho,alpha\n0,0\n",
            b"rho,alpha\n0,0\n0.1\n",
            b"rho,alpha\n0,0\n0.1,0.2,0.3\n",
            b"rho,alpha\nx,0\n0.1,0.2\n",
            b"rho,alpha\n0,0\n0.1,inf\n",
            b"rho,alpha\n0.2,0.3\n0.1,0.4\n",
            b"rho,alpha\n0,0\n0.5,0.9999\n",
        ];
        for bytes in bad {
            assert!(
                DeemphasisTable::from_csv(0.7, bytes).is_err(),
                "accepted {:?}",
                String::from_utf8_lossy(bytes)
            );
        }
        assert!(DeemphasisTable::from_csv(0.7, &[0xff, 0xfe, 0x00]).is_err());
        assert!(DeemphasisTable::from_csv(1.5, b"rho,alpha\n0,0\n0.1,0.2\n").is_err());
    }

    #[test]
    fn table_csv_tolerates_crlf_and_blank_lines() {
        let t = DeemphasisTable::from_csv(0.7, b"rho,alpha\r\n-0.1,-0.2\r\n\r\n0.1,0.2\r\n")
            .unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.domain(), (-0.1, 0.1));
    }
}
