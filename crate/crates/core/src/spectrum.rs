//! Model-side spectral predictions for the On/Off rate process.
//!
//! The continuous part of the power spectral density of a unit-rate
//! alternating renewal process is
//!
//! ```text
//! S(ω) = 2 / (ω² (μ_0 + μ_1)) · Re{ G_0 G_1 / (G_0 + G_1 - G_0 G_1) },   G_i = 1 - F_i(-jω)
//! ```
//!
//! with `F_i` the characteristic functions of the duration laws. `S` is the
//! two-sided Fourier transform of the autocovariance. The complements `G_i`
//! are computed directly so that nothing cancels as `ω → 0`:
//!
//! ```text
//! G(ω) = (1 - e^{-iωk}) + iω ∫_k^∞ (k/x)^α e^{-iωx} dx
//!      = (1 - e^{-iωk}) + i k^α ω^α ∫_{ωk}^∞ u^{-α} e^{-iu} du
//! ```
//!
//! The last integral runs on geometric panels near the origin, unit panels in
//! the oscillatory range, and an asymptotic integration-by-parts series for
//! the tail.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use serde::Serialize;

use crate::distributions::ParetoLaw;
use crate::error::{invalid, Error, Result};
use crate::numeric::{fit_line, AdaptiveQuadrature};
use crate::source::{RateMode, SourceConfig};

/// Absolute tolerance on characteristic-function values.
pub const CHAR_FN_TOLERANCE: f64 = 1e-8;

const TAIL_START: f64 = 64.0;

/// `∫_a^∞ u^{-α} e^{-iu} du` for `a > 0`, `α > 1`, with its error estimate.
fn oscillatory_tail_integral(alpha: f64, a: f64, tol: f64) -> (Complex64, f64) {
    let quad = AdaptiveQuadrature::default();
    let f = |u: f64| Complex64::new(u.cos(), -u.sin()) * u.powf(-alpha);
    let norm = |z: Complex64| z.norm();

    let mut edges = vec![a];
    let mut x = a;
    while x < 1.0 {
        x = (2.0 * x).min(1.0);
        edges.push(x);
    }
    let end = x.max(TAIL_START);
    while x < end {
        x = (x + FRAC_PI_2).min(end);
        edges.push(x);
    }
    let panels = (edges.len() - 1).max(1) as f64;
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    for w in edges.windows(2) {
        let (v, e) = quad.integrate(w[0], w[1], tol / panels, &f, norm);
        total += v;
        err += e;
    }

    // ∫_A^∞ u^{-α} e^{-iu} du = e^{-iA} Σ c_n,  c_0 = -i A^{-α},  c_n = c_{n-1} · i(α+n-1)/A
    let big_a = end;
    let mut term = Complex64::new(0.0, -big_a.powf(-alpha));
    let mut series = term;
    for n in 1..40 {
        let next = term * Complex64::new(0.0, (alpha + n as f64 - 1.0) / big_a);
        if next.norm() >= term.norm() {
            err += term.norm();
            break;
        }
        term = next;
        series += term;
        if term.norm() < 1e-18 * series.norm() {
            break;
        }
    }
    total += Complex64::new(big_a.cos(), -big_a.sin()) * series;
    (total, err)
}

/// `1 - F(-jω)` for a Pareto duration law.
pub fn char_fn_complement(law: &ParetoLaw, omega: f64) -> Result<Complex64> {
    if omega == 0.0 || !omega.is_finite() {
        return Err(invalid(format!("characteristic function evaluated at ω = {omega}; need finite ω ≠ 0")));
    }
    if law.shape() <= 1.0 {
        return Err(invalid("characteristic-function quadrature needs a tail index above 1"));
    }
    if omega < 0.0 {
        return char_fn_complement(law, -omega).map(|z| z.conj());
    }
    let (alpha, k) = (law.shape(), law.scale());
    let a = omega * k;
    let scale = k.powf(alpha) * omega.powf(alpha);
    // i k^α ω^α I(ωk) contributes with weight `scale`; split the tolerance accordingly.
    let tol_inner = (CHAR_FN_TOLERANCE * 1e-3 / scale.max(1e-300)).min(1e-3);
    let (integral, err) = oscillatory_tail_integral(alpha, a, tol_inner);
    let achieved = err * scale;
    if !(achieved <= CHAR_FN_TOLERANCE) || !integral.re.is_finite() || !integral.im.is_finite() {
        return Err(Error::Quadrature { achieved, requested: CHAR_FN_TOLERANCE });
    }
    // 1 - e^{-ia} = 2 sin²(a/2) + i sin a
    let half = 0.5 * a;
    let edge = Complex64::new(2.0 * half.sin() * half.sin(), a.sin());
    Ok(edge + Complex64::new(0.0, 1.0) * integral * scale)
}

/// Characteristic function `F(-jω) = ∫ f(x) e^{-iωx} dx`.
pub fn char_fn(law: &ParetoLaw, omega: f64) -> Result<Complex64> {
    Ok(Complex64::new(1.0, 0.0) - char_fn_complement(law, omega)?)
}

/// Mass of the spectral line at ω = 0, reported separately from the density.
pub fn dc_atom_mass(on_law: &ParetoLaw, off_law: &ParetoLaw) -> Result<f64> {
    let (mu1, mu0) = (on_law.mean()?, off_law.mean()?);
    Ok(mu1 / (mu0 + mu1))
}

/// Continuous part of the PSD of the unit-rate On/Off process at ω ≠ 0.
pub fn psd_model(omega: f64, on_law: &ParetoLaw, off_law: &ParetoLaw) -> Result<f64> {
    if !(omega.is_finite() && omega != 0.0) {
        return Err(invalid(format!("PSD density evaluated at ω = {omega}; the DC line is reported separately")));
    }
    let (mu1, mu0) = (on_law.mean()?, off_law.mean()?);
    let g1 = char_fn_complement(on_law, omega)?;
    let g0 = char_fn_complement(off_law, omega)?;
    let ratio = g0 * g1 / (g0 + g1 - g0 * g1);
    let value = 2.0 / (omega * omega * (mu0 + mu1)) * ratio.re;
    if !value.is_finite() {
        return Err(Error::NonFinite(format!("PSD at ω = {omega}")));
    }
    Ok(value.max(0.0))
}

/// PSD of `Σ A_j 1[S_j, S_j+X_j)` for either rate mode.
///
/// With i.i.d. per-period rates the autocovariance gains a
/// `Var(A) · P(t and t+τ share an On period)` term whose transform is
/// `2 Re{G_1} / (ω² (μ_0+μ_1))`.
pub fn rate_process_psd(omega: f64, config: &SourceConfig) -> Result<f64> {
    let base = psd_model(omega, &config.on_law, &config.off_law)?;
    match config.rate_mode {
        RateMode::Constant { rate } => Ok(rate * rate * base),
        RateMode::BoundedPareto { law } => {
            let (mu1, mu0) = config.mean_durations();
            let g1 = char_fn_complement(&config.on_law, omega)?;
            let same_period = 2.0 * g1.re / (omega * omega * (mu0 + mu1));
            Ok(law.mean().powi(2) * base + law.variance() * same_period)
        }
    }
}

/// Expected periodogram ordinate of the Δ-binned trace at `λ` rad/bin.
///
/// Bin averaging filters by `sinc²(ωΔ/2)` and sampling folds the spectrum:
/// `f(λ) = (1/Δ) Σ_m S((λ + 2πm)/Δ) sinc²((λ + 2πm)/2)`.
pub fn binned_psd(lambda: f64, bin_width: f64, config: &SourceConfig, alias_terms: usize) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= std::f64::consts::PI) {
        return Err(invalid(format!("λ must lie in (0, π], got {lambda}")));
    }
    let mut total = 0.0;
    for m in -(alias_terms as i64)..=(alias_terms as i64) {
        let shifted = lambda + TAU * m as f64;
        let half = 0.5 * shifted;
        let sinc = half.sin() / half;
        total += rate_process_psd(shifted / bin_width, config)? * sinc * sinc;
    }
    Ok(total / bin_width)
}

/// Low-frequency power law `S(ω) ≈ W ω^(α-2)` fitted to model or data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralAsymptote {
    /// `min{α_0, α_1}`.
    pub alpha: f64,
    pub slope: f64,
    pub w: f64,
    /// Least-squares `(W_0, W_1)` of the two-term form, when the indices differ.
    pub two_term: Option<(f64, f64)>,
    pub band: (f64, f64),
    /// RMS residual of the log-log fit.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoteOptions {
    /// Band width in decades above the lowest grid frequency.
    pub band_decades: f64,
    /// Largest accepted RMS log residual.
    pub max_residual: f64,
    /// Largest accepted `|slope - (α - 2)|`.
    pub slope_tolerance: f64,
}

impl Default for AsymptoteOptions {
    fn default() -> Self {
        Self { band_decades: 2.0, max_residual: 0.05, slope_tolerance: 0.05 }
    }
}

pub fn fit_asymptote(
    omegas: &[f64],
    psd: &[f64],
    alpha_off: f64,
    alpha_on: f64,
    opts: AsymptoteOptions,
) -> Result<SpectralAsymptote> {
    if omegas.len() != psd.len() {
        return Err(invalid("frequency and PSD grids differ in length"));
    }
    if omegas.windows(2).any(|w| !(w[1] > w[0])) || omegas.first().is_none_or(|&w| w <= 0.0) {
        return Err(invalid("frequencies must be positive and strictly increasing"));
    }
    let lo = omegas[0];
    let hi = lo * 10f64.powf(opts.band_decades);
    if *omegas.last().unwrap() < hi * (1.0 - 1e-9) {
        return Err(invalid(format!("grid spans less than {} decades", opts.band_decades)));
    }
    let band: Vec<(f64, f64)> = omegas
        .iter()
        .zip(psd)
        .filter(|(w, _)| **w <= hi * (1.0 + 1e-9))
        .map(|(w, p)| (*w, *p))
        .collect();
    if band.len() < 10 {
        return Err(Error::TooShort { needed: 10, got: band.len() });
    }
    if band.iter().any(|(_, p)| !(*p > 0.0)) {
        return Err(invalid("PSD values in the band must be positive"));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = band.iter().map(|(w, p)| (w.ln(), p.ln())).unzip();
    let fit = fit_line(&xs, &ys)?;
    let alpha = alpha_off.min(alpha_on);
    if fit.residual > opts.max_residual {
        return Err(Error::FitRejected(format!("log-log residual {:.3e} exceeds {:.3e}", fit.residual, opts.max_residual)));
    }
    if (fit.slope - (alpha - 2.0)).abs() > opts.slope_tolerance {
        return Err(Error::FitRejected(format!(
            "slope {:.4} differs from α - 2 = {:.4} by more than {}",
            fit.slope,
            alpha - 2.0,
            opts.slope_tolerance
        )));
    }
    let two_term = if (alpha_off - alpha_on).abs() > 1e-9 { two_term_fit(&band, alpha_off, alpha_on) } else { None };
    Ok(SpectralAsymptote {
        alpha,
        slope: fit.slope,
        w: fit.intercept.exp(),
        two_term,
        band: (band[0].0, band.last().unwrap().0),
        residual: fit.residual,
    })
}

/// Relative least squares for `S ≈ W_0 ω^(α_0-2) + W_1 ω^(α_1-2)`; `None` unless both weights are positive.
fn two_term_fit(band: &[(f64, f64)], alpha_off: f64, alpha_on: f64) -> Option<(f64, f64)> {
    let (mut a00, mut a01, mut a11, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (w, p) in band {
        let u = w.powf(alpha_off - 2.0) / p;
        let v = w.powf(alpha_on - 2.0) / p;
        a00 += u * u;
        a01 += u * v;
        a11 += v * v;
        b0 += u;
        b1 += v;
    }
    let det = a00 * a11 - a01 * a01;
    if det.abs() < 1e-300 {
        return None;
    }
    let w0 = (b0 * a11 - b1 * a01) / det;
    let w1 = (a00 * b1 - a01 * b0) / det;
    (w0 > 0.0 && w1 > 0.0).then_some((w0, w1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrdVerdict {
    pub lrd: bool,
    /// `H = (1 - slope) / 2`, i.e. `(3 - α)/2` for slope `α - 2`.
    pub hurst: f64,
    /// Exponent of the spectral pole, `-slope = 2H - 1`.
    pub spectral_exponent: f64,
    /// Autocorrelation decay exponent, `2 - 2H`.
    pub acf_beta: f64,
}

/// Long-range dependent iff the low-frequency slope lies in (-1, 0).
pub fn lrd_spectral_test(asymptote: &SpectralAsymptote) -> LrdVerdict {
    let slope = asymptote.slope;
    let hurst = (1.0 - slope) / 2.0;
    LrdVerdict { lrd: slope > -1.0 && slope < 0.0, hurst, spectral_exponent: -slope, acf_beta: 2.0 - 2.0 * hurst }
}

/// Log-spaced grid of `n` points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}
