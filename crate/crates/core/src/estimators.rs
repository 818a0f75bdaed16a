//! Data-side statistics on binned traces: sample autocorrelation, periodogram,
//! Hurst estimators (rescaled range, aggregated variance, spectral slope),
//! the Hill tail-index estimator and moment-based Gaussianity statistics.
//!
//! All reductions run in a fixed order, so results do not depend on thread
//! scheduling.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numeric::{self, fit_line, LineFit};
use crate::source::BinnedTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HurstMethod {
    RescaledRange,
    AggregatedVariance,
    AggregatedVarianceCorrected,
    SpectralSlope,
}

impl HurstMethod {
    pub fn name(&self) -> &'static str {
        match self {
            HurstMethod::RescaledRange => "rescaled-range",
            HurstMethod::AggregatedVariance => "aggregated-variance",
            HurstMethod::AggregatedVarianceCorrected => "aggregated-variance-corrected",
            HurstMethod::SpectralSlope => "spectral-slope",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HurstEstimate {
    pub method: HurstMethod,
    pub value: f64,
    /// Standard error of the regression slope, mapped to the H scale.
    pub stderr: f64,
    pub n_points: usize,
    /// True when the raw estimate fell outside (0, 1) and was clamped.
    pub clamped: bool,
    /// `(log scale, log statistic)` points entering the fit, for plotting.
    pub points: Vec<(f64, f64)>,
}

/// Dyadic scale grid shared by the time-domain Hurst estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockGrid {
    /// Smallest block length in bins.
    pub min_block: usize,
    /// Number of largest scales dropped from the regression.
    pub discard_largest: usize,
}

impl Default for BlockGrid {
    fn default() -> Self {
        Self { min_block: 16, discard_largest: 2 }
    }
}

impl BlockGrid {
    fn sizes(&self, n: usize) -> Vec<usize> {
        let mut sizes = Vec::new();
        let mut m = self.min_block.max(2);
        while 2 * m <= n {
            sizes.push(m);
            m *= 2;
        }
        let keep = sizes.len().saturating_sub(self.discard_largest);
        sizes.truncate(keep);
        sizes
    }
}

pub const MIN_HURST_LEN: usize = 1 << 12;

fn clamp_h(method: HurstMethod, raw: f64, stderr: f64, fit: &LineFit, points: Vec<(f64, f64)>) -> HurstEstimate {
    let eps = 1e-6;
    let clamped = !(raw > 0.0 && raw < 1.0);
    HurstEstimate {
        method,
        value: raw.clamp(eps, 1.0 - eps),
        stderr,
        n_points: fit.n_points,
        clamped,
        points,
    }
}

fn check_hurst_input(values: &[f64]) -> Result<()> {
    if values.len() < MIN_HURST_LEN {
        return Err(Error::TooShort { needed: MIN_HURST_LEN, got: values.len() });
    }
    if numeric::variance(values) <= 0.0 {
        return Err(Error::Degenerate("trace is constant".into()));
    }
    Ok(())
}

/// Rescaled-range (R/S) estimate: slope of `log E[R/S](m)` against `log m`.
pub fn hurst_rescaled_range(trace: &BinnedTrace, grid: BlockGrid) -> Result<HurstEstimate> {
    let x = &trace.values;
    check_hurst_input(x)?;
    let mut points = Vec::new();
    for m in grid.sizes(x.len()) {
        let mut total = 0.0;
        let mut used = 0usize;
        for block in x.chunks_exact(m) {
            let mean = block.iter().sum::<f64>() / m as f64;
            let (mut cum, mut lo, mut hi, mut ss) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for v in block {
                let d = v - mean;
                cum += d;
                lo = lo.min(cum);
                hi = hi.max(cum);
                ss += d * d;
            }
            let s = (ss / m as f64).sqrt();
            if s > 0.0 {
                total += (hi - lo) / s;
                used += 1;
            }
        }
        if used > 0 {
            points.push(((m as f64).ln(), (total / used as f64).ln()));
        }
    }
    if points.len() < 3 {
        return Err(Error::TooShort { needed: 3, got: points.len() });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().cloned().unzip();
    let fit = fit_line(&xs, &ys)?;
    Ok(clamp_h(HurstMethod::RescaledRange, fit.slope, fit.slope_stderr, &fit, points))
}

/// `(ln m, ln s²(m), number of blocks)` on the dyadic grid.
fn variance_time_points(x: &[f64], grid: BlockGrid) -> Vec<(f64, f64, usize)> {
    let mut points = Vec::new();
    for m in grid.sizes(x.len()) {
        let means: Vec<f64> = x.chunks_exact(m).map(|b| b.iter().sum::<f64>() / m as f64).collect();
        if means.len() < 2 {
            continue;
        }
        let v = numeric::variance(&means);
        if v > 0.0 {
            points.push(((m as f64).ln(), v.ln(), means.len()));
        }
    }
    points
}

/// Aggregated-variance estimate: `Var(X^(m)) ∝ m^(2H-2)`.
pub fn hurst_aggregated_variance(trace: &BinnedTrace, grid: BlockGrid) -> Result<HurstEstimate> {
    let x = &trace.values;
    check_hurst_input(x)?;
    let points: Vec<(f64, f64)> = variance_time_points(x, grid).into_iter().map(|(a, b, _)| (a, b)).collect();
    if points.len() < 3 {
        return Err(Error::TooShort { needed: 3, got: points.len() });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().cloned().unzip();
    let fit = fit_line(&xs, &ys)?;
    Ok(clamp_h(HurstMethod::AggregatedVariance, 1.0 + fit.slope / 2.0, fit.slope_stderr / 2.0, &fit, points))
}

/// Aggregated variance fitted to the finite-sample expectation of the plot.
///
/// Block means are centred on the sample mean, so for a self-similar series
/// `E[s²(m)] = σ² (m^(2H-2) - (k m)^(2H-2))` with `k` blocks. The plain
/// regression ignores the second term and reads H low when H is near 1.
/// Here `ln σ²` is profiled out and H minimizes the squared log residuals.
pub fn hurst_aggregated_variance_corrected(trace: &BinnedTrace, grid: BlockGrid) -> Result<HurstEstimate> {
    let x = &trace.values;
    check_hurst_input(x)?;
    let pts = variance_time_points(x, grid);
    if pts.len() < 3 {
        return Err(Error::TooShort { needed: 3, got: pts.len() });
    }
    let sse = |h: f64| {
        let e = 2.0 * h - 2.0;
        let r: Vec<f64> = pts
            .iter()
            .map(|&(lm, lv, k)| {
                let m = lm.exp();
                lv - (m.powf(e) - (k as f64 * m).powf(e)).ln()
            })
            .collect();
        let c = numeric::mean(&r);
        r.iter().map(|v| (v - c) * (v - c)).sum::<f64>()
    };
    let (mut lo, mut hi) = (0.01f64, 0.995f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fa, mut fb) = (sse(a), sse(b));
    while hi - lo > 1e-7 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = sse(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = sse(b);
        }
    }
    let h = 0.5 * (lo + hi);
    let points: Vec<(f64, f64)> = pts.iter().map(|&(a, b, _)| (a, b)).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().cloned().unzip();
    let fit = fit_line(&xs, &ys)?;
    Ok(clamp_h(HurstMethod::AggregatedVarianceCorrected, h, fit.slope_stderr / 2.0, &fit, points))
}

/// Spectral-slope estimate: low-band periodogram slope `1 - 2H`.
pub fn hurst_spectral_slope(trace: &BinnedTrace, band_decades: f64) -> Result<HurstEstimate> {
    let spec = periodogram_with_band(trace, band_decades)?;
    let fit = spec.slope_fit;
    let points = spec
        .frequencies
        .iter()
        .zip(&spec.power)
        .take(fit.n_points)
        .map(|(w, p)| (w.ln(), p.max(f64::MIN_POSITIVE).ln()))
        .collect();
    Ok(clamp_h(HurstMethod::SpectralSlope, (1.0 - fit.slope) / 2.0, fit.slope_stderr / 2.0, &fit, points))
}

/// Biased sample autocorrelation `R(k) = c(k)/c(0)`, `c(k) = (1/n) Σ (x_t - x̄)(x_{t+k} - x̄)`.
pub fn autocorrelation(trace: &BinnedTrace, max_lag: usize) -> Result<Vec<f64>> {
    let x = &trace.values;
    let n = x.len();
    if n < 4 * max_lag.max(1) {
        return Err(Error::TooShort { needed: 4 * max_lag.max(1), got: n });
    }
    if numeric::variance(x) <= 0.0 {
        return Err(Error::Degenerate("trace is constant; autocorrelation undefined".into()));
    }
    let mean = numeric::mean(x);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    buf.resize(size, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    Ok((0..=max_lag).map(|k| (buf[k].re / c0).clamp(-1.0, 1.0)).collect())
}

/// Power-law decay fit `R(k) ~ k^(-β)` over `lags`, skipping non-positive values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcfDecay {
    pub beta: f64,
    /// `H = 1 - β/2`.
    pub hurst: f64,
    pub fit: LineFit,
}

pub fn fit_acf_decay(acf: &[f64], lag_lo: usize, lag_hi: usize) -> Result<AcfDecay> {
    if lag_lo == 0 || lag_hi >= acf.len() || lag_lo >= lag_hi {
        return Err(invalid(format!("lag range [{lag_lo}, {lag_hi}] incompatible with {} lags", acf.len())));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = (lag_lo..=lag_hi)
        .filter(|&k| acf[k] > 0.0)
        .map(|k| ((k as f64).ln(), acf[k].ln()))
        .unzip();
    let fit = fit_line(&xs, &ys)?;
    Ok(AcfDecay { beta: -fit.slope, hurst: 1.0 + fit.slope / 2.0, fit })
}

/// Periodogram on the positive Fourier frequencies with a low-band log-log fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralEstimate {
    /// Angular frequencies `2πj/(nΔ)` in rad/s, `j = 1..=n/2`.
    pub frequencies: Vec<f64>,
    /// `|Σ (x_t - x̄) e^{-iλ_j t}|² / n`, the per-bin spectral density at `λ_j = 2πj/n`.
    pub power: Vec<f64>,
    /// Fit of `ln power` against `ln ω` over the declared low band.
    pub slope_fit: LineFit,
    pub band: (f64, f64),
    pub n: usize,
}

impl SpectralEstimate {
    /// `(1/n) Σ_{j=0}^{n-1} I_j` using the symmetry of the real-input spectrum.
    /// Equals the (population) variance of the trace by Parseval.
    pub fn mean_power_two_sided(&self) -> f64 {
        let n = self.n;
        let mut total = 2.0 * self.power.iter().sum::<f64>();
        if n.is_multiple_of(2) {
            // the Nyquist ordinate appears once
            total -= self.power[n / 2 - 1];
        }
        total / n as f64
    }
}

pub const MIN_PERIODOGRAM_LEN: usize = 1024;

/// Periodogram with the slope fitted over the lowest two decades.
pub fn periodogram(trace: &BinnedTrace) -> Result<SpectralEstimate> {
    periodogram_with_band(trace, 2.0)
}

pub fn periodogram_with_band(trace: &BinnedTrace, band_decades: f64) -> Result<SpectralEstimate> {
    let x = &trace.values;
    let n = x.len();
    if n < MIN_PERIODOGRAM_LEN {
        return Err(Error::TooShort { needed: MIN_PERIODOGRAM_LEN, got: n });
    }
    if !(band_decades > 0.0) {
        return Err(invalid(format!("band must span a positive number of decades, got {band_decades}")));
    }
    let mean = numeric::mean(x);
    let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let nf = n as f64;
    let power: Vec<f64> = buf[1..=half].iter().map(|z| z.norm_sqr() / nf).collect();
    let frequencies: Vec<f64> = (1..=half).map(|j| TAU * j as f64 / (nf * trace.bin_width)).collect();
    if power.iter().all(|&p| p == 0.0) {
        return Err(Error::Degenerate("trace is constant; periodogram is identically zero".into()));
    }
    let top = frequencies[0] * 10f64.powf(band_decades);
    let (xs, ys): (Vec<f64>, Vec<f64>) = frequencies
        .iter()
        .zip(&power)
        .take_while(|(w, _)| **w <= top * (1.0 + 1e-12))
        .filter(|(_, p)| **p > 0.0)
        .map(|(w, p)| (w.ln(), p.ln()))
        .unzip();
    let slope_fit = fit_line(&xs, &ys)?;
    let band = (frequencies[0], xs.last().map(|v| v.exp()).unwrap_or(frequencies[0]));
    Ok(SpectralEstimate { frequencies, power, slope_fit, band, n })
}

/// Hill estimator on the `k` largest order statistics:
/// `α̂ = k / Σ_{i<k} ln(x_(i) / x_(k))` with `x_(0)` the maximum.
pub fn hill_tail_index(samples: &[f64], k: usize) -> Result<f64> {
    let n = samples.len();
    if k < 10 {
        return Err(invalid(format!("Hill estimator needs k >= 10, got {k}")));
    }
    if 2 * k >= n {
        return Err(invalid(format!("Hill estimator needs k < n/2, got k = {k}, n = {n}")));
    }
    if samples.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(invalid("Hill estimator needs positive finite samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k];
    let sum: f64 = sorted[..k].iter().map(|x| (x / threshold).ln()).sum();
    if sum <= 0.0 {
        return Err(Error::Degenerate("top order statistics are tied".into()));
    }
    Ok(k as f64 / sum)
}

/// Sample skewness and excess kurtosis with the Jarque-Bera statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianityStats {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// `n/6 (S² + K²/4)`, asymptotically χ²(2) under normality.
    pub jarque_bera: f64,
    /// Null standard deviations `sqrt(6/n)` and `sqrt(24/n)`.
    pub skewness_se: f64,
    pub kurtosis_se: f64,
    pub n: usize,
}

pub fn gaussianity_stats(samples: &[f64]) -> Result<GaussianityStats> {
    let n = samples.len();
    if n < 100 {
        return Err(Error::TooShort { needed: 100, got: n });
    }
    let nf = n as f64;
    let mean = numeric::mean(samples);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    Ok(GaussianityStats {
        skewness,
        excess_kurtosis,
        jarque_bera: nf / 6.0 * (skewness * skewness + excess_kurtosis * excess_kurtosis / 4.0),
        skewness_se: (6.0 / nf).sqrt(),
        kurtosis_se: (24.0 / nf).sqrt(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, UniformStream};

    fn white(n: usize, seed: u64) -> BinnedTrace {
        let mut s = UniformStream::new(seed, 0, Purpose::Noise);
        BinnedTrace::new(1.0, 0.0, (0..n).map(|_| s.next_gaussian()).collect()).unwrap()
    }

    #[test]
    fn acf_normalization_and_white_noise_band() {
        let t = white(1 << 14, 1);
        let r = autocorrelation(&t, 200).unwrap();
        assert_eq!(r[0], 1.0);
        let bound = 3.0 / (t.len() as f64).sqrt();
        let inside = r[1..].iter().filter(|v| v.abs() < bound).count();
        assert!(inside as f64 >= 0.95 * 200.0);
        assert!(r.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn acf_matches_direct_sum() {
        let t = white(4096, 2);
        let r = autocorrelation(&t, 50).unwrap();
        let x = &t.values;
        let m = numeric::mean(x);
        let c = |k: usize| (0..x.len() - k).map(|i| (x[i] - m) * (x[i + k] - m)).sum::<f64>();
        for k in [1, 7, 50] {
            assert!((r[k] - c(k) / c(0)).abs() < 1e-12);
        }
    }

    #[test]
    fn acf_errors() {
        let flat = BinnedTrace::new(1.0, 0.0, vec![2.0; 1000]).unwrap();
        assert!(matches!(autocorrelation(&flat, 10), Err(Error::Degenerate(_))));
        assert!(matches!(autocorrelation(&white(100, 3), 30), Err(Error::TooShort { .. })));
    }

    #[test]
    fn periodogram_parseval_and_sinusoid() {
        let t = white(3000, 4);
        let p = periodogram(&t).unwrap();
        let var = numeric::variance(&t.values);
        assert!((p.mean_power_two_sided() - var).abs() / var < 1e-6);
        let t2 = white(4096, 5);
        let p2 = periodogram(&t2).unwrap();
        assert!((p2.mean_power_two_sided() - numeric::variance(&t2.values)).abs() / numeric::variance(&t2.values) < 1e-6);

        let n = 4096;
        let sine: Vec<f64> = (0..n).map(|i| (TAU * 64.0 * i as f64 / n as f64).sin()).collect();
        let sp = periodogram(&BinnedTrace::new(1.0, 0.0, sine).unwrap()).unwrap();
        let (arg, _) = sp.power.iter().enumerate().fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert_eq!(arg + 1, 64);
        let rest: f64 = sp.power.iter().enumerate().filter(|(i, _)| *i != arg).map(|(_, v)| v).sum();
        assert!(rest < 1e-12 * sp.power[arg]);
    }

    #[test]
    fn periodogram_rejects_short() {
        assert!(matches!(periodogram(&white(1000, 6)), Err(Error::TooShort { .. })));
    }

    #[test]
    fn hurst_null_on_white_noise() {
        let t = white(1 << 18, 7);
        let rs = hurst_rescaled_range(&t, BlockGrid::default()).unwrap();
        let av = hurst_aggregated_variance(&t, BlockGrid::default()).unwrap();
        assert!((rs.value - 0.5).abs() < 0.05, "R/S {}", rs.value);
        assert!((av.value - 0.5).abs() < 0.05, "AV {}", av.value);
        assert!(!rs.clamped && rs.stderr >= 0.0);
    }

    /// Exact fractional Gaussian noise by circulant embedding.
    fn fgn(n: usize, h: f64, seed: u64) -> BinnedTrace {
        let gamma = |k: f64| 0.5 * ((k + 1.0).powf(2.0 * h) - 2.0 * k.powf(2.0 * h) + (k - 1.0).abs().powf(2.0 * h));
        let size = 2 * n;
        let mut c: Vec<Complex64> = (0..size)
            .map(|j| Complex64::new(gamma(j.min(size - j) as f64), 0.0))
            .collect();
        let mut planner = FftPlanner::<f64>::new();
        planner.plan_fft_forward(size).process(&mut c);
        let mut s = crate::rng::UniformStream::new(seed, 0, crate::rng::Purpose::Noise);
        let mut w: Vec<Complex64> = c
            .iter()
            .map(|l| Complex64::new(s.next_gaussian(), s.next_gaussian()) * (l.re.max(0.0) / size as f64).sqrt())
            .collect();
        planner.plan_fft_forward(size).process(&mut w);
        BinnedTrace::new(1.0, 0.0, w[..n].iter().map(|z| z.re).collect()).unwrap()
    }

    #[test]
    fn corrected_variance_time_recovers_strong_dependence() {
        let (mut plain, mut corrected) = (0.0, 0.0);
        for seed in 0..5 {
            let t = fgn(1 << 16, 0.9, seed);
            plain += hurst_aggregated_variance(&t, BlockGrid::default()).unwrap().value / 5.0;
            corrected += hurst_aggregated_variance_corrected(&t, BlockGrid::default()).unwrap().value / 5.0;
        }
        assert!((corrected - 0.9).abs() < 0.03, "corrected {corrected}");
        assert!(plain < corrected - 0.02, "plain {plain} corrected {corrected}");
        let w = white(1 << 16, 3);
        let h = hurst_aggregated_variance_corrected(&w, BlockGrid::default()).unwrap().value;
        assert!((h - 0.5).abs() < 0.05, "white {h}");
    }

    #[test]
    fn hurst_errors() {
        assert!(matches!(hurst_rescaled_range(&white(1000, 8), BlockGrid::default()), Err(Error::TooShort { .. })));
        let flat = BinnedTrace::new(1.0, 0.0, vec![1.0; 1 << 12]).unwrap();
        assert!(matches!(hurst_aggregated_variance(&flat, BlockGrid::default()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn hill_errors_and_light_tail() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert!(hill_tail_index(&xs, 5).is_err());
        assert!(hill_tail_index(&xs, 500).is_err());
        assert!(hill_tail_index(&[1.0, -1.0], 10).is_err());
        // exponential samples: no stable index; α̂ ≈ ln(n/k) keeps falling as k grows
        let mut s = UniformStream::new(9, 0, Purpose::Noise);
        let exp: Vec<f64> = (0..100_000).map(|_| -s.next_open01().ln()).collect();
        let a_small = hill_tail_index(&exp, 100).unwrap();
        let a_large = hill_tail_index(&exp, 10_000).unwrap();
        assert!(a_small > 2.0 * a_large);
    }

    #[test]
    fn gaussianity_null() {
        let t = white(50_000, 10);
        let g = gaussianity_stats(&t.values).unwrap();
        assert!(g.skewness.abs() < 3.0 * g.skewness_se);
        assert!(g.excess_kurtosis.abs() < 3.0 * g.kurtosis_se);
        assert!(gaussianity_stats(&[1.0; 200]).is_err());
        assert!(gaussianity_stats(&[1.0; 50]).is_err());
    }
}
