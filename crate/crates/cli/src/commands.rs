use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use amp_core::aggregate::{self, CapacityReport, MarginalOptions};
use amp_core::estimators::{self, BlockGrid, GaussianityStats, HurstEstimate};
use amp_core::source::{self, RenewalTimeline};
use amp_core::spectrum::{self, AsymptoteOptions};
use amp_core::trace_io::{self, TraceFile};
use amp_core::validation::{self, ValidationReport};
use amp_core::BinnedTrace;
use anyhow::{ensure, Context};
use serde::Serialize;

use crate::config::RunConfig;

/// Every check ran, and at least one failed.
#[derive(Debug)]
pub struct ValidationFailed;

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("validation failed")
    }
}

impl std::error::Error for ValidationFailed {}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> anyhow::Result<()> {
    let mut w = create(dir, name)?;
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct GenerateSummary {
    seed: u64,
    horizon: f64,
    bin_width: f64,
    epochs: usize,
    bins: usize,
    on_time: f64,
    load: f64,
    expected_load: f64,
    load_relative_error: f64,
    theoretical_hurst: f64,
}

pub fn generate(cfg: &RunConfig, seed: u64, out: &Path) -> anyhow::Result<()> {
    let src = cfg.source(seed)?;
    let (horizon, bin_width) = cfg.grid()?;
    let timeline = source::generate_timeline(&src, horizon)?;
    let mut trace = source::bin_trace(&timeline, bin_width)?;
    trace.seed = Some(seed);
    if cfg.write_events {
        trace_io::write_events(&timeline, create(out, "events.csv")?)?;
    }
    trace_io::write_binned(&trace, create(out, "trace.csv")?)?;
    let load = timeline.volume(0.0, horizon) / horizon;
    let expected = source::expected_load(&src);
    let summary = GenerateSummary {
        seed,
        horizon,
        bin_width,
        epochs: timeline.len(),
        bins: trace.len(),
        on_time: timeline.on_time(),
        load,
        expected_load: expected,
        load_relative_error: (load - expected) / expected,
        theoretical_hurst: source::theoretical_hurst(src.off_law.shape(), src.on_law.shape())?,
    };
    write_json(out, "summary.json", &summary)?;
    println!("epochs {}  bins {}", summary.epochs, summary.bins);
    println!("load {:.6}  expected {:.6}  relative error {:+.4}", load, expected, summary.load_relative_error);
    Ok(())
}

#[derive(Serialize)]
struct AggregateSummary {
    seed: u64,
    horizon: f64,
    bin_width: f64,
    bins: usize,
    capacity: CapacityReport,
    mean_rate: f64,
    expected_mean_rate: f64,
    max_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    marginal: Option<aggregate::AggregateMarginal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    marginal_error: Option<String>,
}

pub fn aggregate(cfg: &RunConfig, seed: u64, out: &Path) -> anyhow::Result<()> {
    let agg = cfg.aggregate_config(seed)?;
    let (horizon, bin_width) = cfg.grid()?;
    let trace = aggregate::generate_aggregate(&agg, horizon, bin_width)?;
    trace_io::write_binned(&trace, create(out, "aggregate.csv")?)?;
    let samples = cfg.aggregate.as_ref().map_or(0, |a| a.marginal_samples);
    let (marginal, marginal_error) = if samples == 0 {
        (None, None)
    } else {
        let opts = MarginalOptions { samples, ..MarginalOptions::default() };
        match aggregate::aggregate_marginal_with(&agg, opts) {
            Ok(m) => (Some(m), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    let summary = AggregateSummary {
        seed,
        horizon,
        bin_width,
        bins: trace.len(),
        capacity: aggregate::check_capacity(&agg),
        mean_rate: trace.mean(),
        expected_mean_rate: (0..agg.n_sources).map(|i| source::expected_load(&agg.source(i))).sum(),
        max_rate: trace.max(),
        marginal,
        marginal_error,
    };
    write_json(out, "aggregate_summary.json", &summary)?;
    println!(
        "sources {}  bins {}  mean rate {:.6}  expected {:.6}  peak {:.6} <= {:.6}",
        agg.n_sources, summary.bins, summary.mean_rate, summary.expected_mean_rate, summary.max_rate, summary.capacity.peak_rate
    );
    if let Some(m) = &summary.marginal {
        println!("zero atom {:.6}  k_B(N) {:.6} ({:?})  body L1 {:.4}", m.atom_at_zero, m.k_bn, m.method, m.body_l1);
    }
    Ok(())
}

#[derive(Serialize)]
struct TailIndices {
    on_durations: f64,
    off_durations: f64,
    on_count: usize,
    off_count: usize,
}

#[derive(Serialize)]
struct SpectralSummary {
    slope: f64,
    intercept: f64,
    residual: f64,
    band: (f64, f64),
    alpha: f64,
}

#[derive(Serialize)]
struct AcfSummary {
    fit_lags: (usize, usize),
    beta: f64,
    hurst: f64,
}

#[derive(Serialize)]
struct Analysis {
    bins: usize,
    bin_width: f64,
    mean: f64,
    variance: f64,
    hurst: Vec<HurstSummary>,
    spectral: SpectralSummary,
    autocorrelation: AcfSummary,
    gaussianity: GaussianityStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    tail_indices: Option<TailIndices>,
}

#[derive(Serialize)]
struct HurstSummary {
    method: &'static str,
    value: f64,
    stderr: f64,
    /// `3 - 2H`.
    alpha: f64,
}

impl From<&HurstEstimate> for HurstSummary {
    fn from(h: &HurstEstimate) -> Self {
        Self { method: h.method.name(), value: h.value, stderr: h.stderr, alpha: 3.0 - 2.0 * h.value }
    }
}

fn hill(samples: &[f64], fraction: f64) -> anyhow::Result<f64> {
    let k = ((samples.len() as f64 * fraction) as usize).max(10).min(samples.len().saturating_sub(1));
    Ok(estimators::hill_tail_index(samples, k)?)
}

/// Completed On and Off durations of a timeline built from events.
fn tail_indices(timeline: &RenewalTimeline, fraction: f64) -> anyhow::Result<TailIndices> {
    let epochs = &timeline.epochs;
    // an On period at t = 0 may be a residual life; the leading gap and the
    // last Off period are censored
    let on: Vec<f64> = epochs.iter().filter(|e| e.on > 0.0 && e.start > 0.0).map(|e| e.on).collect();
    let body = if epochs.first().is_some_and(|e| e.on == 0.0) { &epochs[1..] } else { &epochs[..] };
    let off: Vec<f64> = body[..body.len().saturating_sub(1)].iter().map(|e| e.off).filter(|&y| y > 0.0).collect();
    Ok(TailIndices { on_durations: hill(&on, fraction)?, off_durations: hill(&off, fraction)?, on_count: on.len(), off_count: off.len() })
}

pub fn analyze(cfg: &RunConfig, input: &Path, out: &Path) -> anyhow::Result<()> {
    let file = File::open(input).with_context(|| format!("opening trace {}", input.display()))?;
    let parsed = trace_io::read_trace(BufReader::new(file)).with_context(|| format!("reading trace {}", input.display()))?;
    let opts = &cfg.analysis;
    let (trace, tails): (BinnedTrace, _) = match parsed {
        TraceFile::Binned(t) => (t, None),
        TraceFile::Events(events) => {
            ensure!(!events.is_empty(), "event file {} holds no events", input.display());
            let end = events.iter().map(|e| e.t_start + e.duration).fold(0.0, f64::max);
            let horizon = cfg.horizon.unwrap_or(end);
            let timeline = trace_io::events_to_timeline(&events, horizon)?;
            let tails = tail_indices(&timeline, opts.hill_fraction)?;
            (source::bin_trace(&timeline, cfg.bin_width.unwrap_or(1.0))?, Some(tails))
        }
    };
    let grid = BlockGrid { min_block: opts.min_block, discard_largest: opts.discard_largest };
    let spec = estimators::periodogram_with_band(&trace, opts.band_decades)?;
    let rs = estimators::hurst_rescaled_range(&trace, grid)?;
    let av = estimators::hurst_aggregated_variance(&trace, grid)?;
    let avc = estimators::hurst_aggregated_variance_corrected(&trace, grid)?;
    let sp = estimators::hurst_spectral_slope(&trace, opts.band_decades)?;
    let max_lag = opts.acf_max_lag.min(trace.len() / 4);
    let acf = estimators::autocorrelation(&trace, max_lag)?;
    let fit_lags = (opts.acf_fit_lags.0.max(1), opts.acf_fit_lags.1.min(max_lag.saturating_sub(1)));
    let decay = estimators::fit_acf_decay(&acf, fit_lags.0, fit_lags.1)?;
    let analysis = Analysis {
        bins: trace.len(),
        bin_width: trace.bin_width,
        mean: trace.mean(),
        variance: amp_core::numeric::variance(&trace.values),
        hurst: [&rs, &av, &avc, &sp].into_iter().map(HurstSummary::from).collect(),
        spectral: SpectralSummary {
            slope: spec.slope_fit.slope,
            intercept: spec.slope_fit.intercept,
            residual: spec.slope_fit.residual,
            band: spec.band,
            alpha: spec.slope_fit.slope + 2.0,
        },
        autocorrelation: AcfSummary { fit_lags, beta: decay.beta, hurst: decay.hurst },
        gaussianity: estimators::gaussianity_stats(&trace.values)?,
        tail_indices: tails,
    };
    write_json(out, "analysis.json", &analysis)?;
    write_csv(out, "periodogram.csv", "omega,power", spec.frequencies.iter().zip(&spec.power).map(|(w, p)| format!("{w},{p}")))?;
    write_csv(out, "variance_time.csv", "ln_m,ln_variance", av.points.iter().map(|(x, y)| format!("{x},{y}")))?;
    write_csv(out, "rs.csv", "ln_n,ln_rs", rs.points.iter().map(|(x, y)| format!("{x},{y}")))?;
    write_csv(out, "acf.csv", "lag,acf", acf.iter().enumerate().map(|(k, r)| format!("{k},{r}")))?;
    println!("bins {}  mean {:.6}", analysis.bins, analysis.mean);
    for h in &analysis.hurst {
        println!("H {:<30} {:.4}", h.method, h.value);
    }
    println!("periodogram slope {:.4} (alpha {:.4})  acf beta {:.4}", analysis.spectral.slope, analysis.spectral.alpha, decay.beta);
    if let Some(t) = &analysis.tail_indices {
        println!("Hill index: on {:.4}  off {:.4}", t.on_durations, t.off_durations);
    }
    Ok(())
}

pub fn validate(cfg: &RunConfig, seed: Option<u64>, tolerance_scale: Option<f64>, out: &Path) -> anyhow::Result<ValidationReport> {
    let mut vcfg = cfg.validation.clone();
    if let Some(s) = seed {
        vcfg.master_seed = s;
    }
    if let Some(t) = tolerance_scale {
        vcfg.tolerance_scale = t;
    }
    let report = validation::run_all(&vcfg)?;
    write_json(out, "validation.json", &report)?;
    for c in &report.checks {
        println!(
            "[{}] C{} {}: observed {:.6} expected {:.6} tolerance {:.6}",
            if c.pass { "PASS" } else { "FAIL" },
            c.criterion,
            c.name,
            c.observed,
            c.expected,
            c.tolerance
        );
    }
    for (id, pass) in report.criteria() {
        println!("criterion {id}: {}", if pass { "PASS" } else { "FAIL" });
    }
    Ok(report)
}

#[derive(Serialize)]
struct ModelReport {
    hurst: f64,
    alpha: f64,
    spectral_slope: f64,
    acf_beta: f64,
    mean_on: f64,
    mean_off: f64,
    atom_at_zero: f64,
    on_fraction: f64,
    expected_load: f64,
    cutoff_atom: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    asymptote: Option<spectrum::SpectralAsymptote>,
    #[serde(skip_serializing_if = "Option::is_none")]
    asymptote_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    aggregate: Option<AggregateModel>,
}

#[derive(Serialize)]
struct AggregateModel {
    capacity: CapacityReport,
    /// `A_0^N`.
    atom_at_zero: f64,
    /// `k_B(1), ..., k_B(N)` from the recursion.
    kb_sequence: Vec<f64>,
}

pub fn report(cfg: &RunConfig, seed: u64, out: &Path) -> anyhow::Result<()> {
    let src = cfg.source(seed)?;
    let (on, off) = (src.on_law, src.off_law);
    let hurst = source::theoretical_hurst(off.shape(), on.shape())?;
    let alpha = off.shape().min(on.shape());
    let (mu1, mu0) = src.mean_durations();
    let marginal = source::single_source_marginal(&src);
    let k_min = on.scale().min(off.scale());
    let k_max = on.scale().max(off.scale());
    let omegas = spectrum::log_grid(1e-5 / k_max, 10.0 / k_min, 241);
    let psd: Vec<f64> = omegas.iter().map(|&w| spectrum::rate_process_psd(w, &src)).collect::<Result<_, _>>()?;
    write_csv(out, "psd_model.csv", "omega,psd", omegas.iter().zip(&psd).map(|(w, p)| format!("{w},{p}")))?;
    let (asymptote, asymptote_error) = match spectrum::fit_asymptote(&omegas, &psd, off.shape(), on.shape(), AsymptoteOptions::default()) {
        Ok(a) => (Some(a), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let aggregate = match &cfg.aggregate {
        Some(_) => {
            let agg = cfg.aggregate_config(seed)?;
            let law = src.rate_mode.as_bounded_pareto();
            let a1 = src.on_fraction();
            Some(AggregateModel {
                capacity: aggregate::check_capacity(&agg),
                atom_at_zero: (1.0 - a1).powi(agg.n_sources as i32),
                kb_sequence: aggregate::kb_sequence(agg.n_sources, 1.0 - a1, a1, law.shape(), law.scale())?,
            })
        }
        None => None,
    };
    let report = ModelReport {
        hurst,
        alpha,
        spectral_slope: alpha - 2.0,
        acf_beta: 2.0 - 2.0 * hurst,
        mean_on: mu1,
        mean_off: mu0,
        atom_at_zero: marginal.atom_at_zero,
        on_fraction: marginal.on_fraction,
        expected_load: source::expected_load(&src),
        cutoff_atom: marginal.rate_law.atom_mass(),
        asymptote,
        asymptote_error,
        aggregate,
    };
    write_json(out, "report.json", &report)?;
    println!("H {:.4}  alpha {:.4}  PSD slope {:.4}  ACF beta {:.4}", hurst, alpha, report.spectral_slope, report.acf_beta);
    println!("A0 {:.6}  expected load {:.6}", report.atom_at_zero, report.expected_load);
    match (&report.asymptote, &report.asymptote_error) {
        (Some(a), _) => println!("model asymptote slope {:.4} over [{:.3e}, {:.3e}] rad/s", a.slope, a.band.0, a.band.1),
        (_, Some(e)) => println!("model asymptote not fitted: {e}"),
        _ => {}
    }
    Ok(())
}
