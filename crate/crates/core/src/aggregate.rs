//! Superposition of N independent On/Off sources.
//!
//! Pathwise, the aggregate rate is the sum of the source rates. In
//! distribution, the stationary snapshot of the sum is the N-fold convolution
//! of the single-source mixed law: an atom `A_0^N` at zero, a body that is
//! approximated by a displaced Pareto density
//!
//! ```text
//! (1 - A_0^N) · (α_B / k_N) · (k_N / x)^(α_B + 1)   on [k_N, B)
//! ```
//!
//! and a tail region `(B, N·B]` whose mass is estimated by Monte Carlo.
//!
//! `k_N` follows the recursion
//!
//! ```text
//! (1 - A_0^N) k_N^(α+1) = A_0 (1 - A_0^(N-1)) k_(N-1)^(α+1)
//!                       + A_0^(N-1) A_1 k_B^(α+1)
//!                       + A_1 (1 - A_0^(N-1)) (k_B + k_(N-1))^(α+1)
//! ```
//!
//! which weighs the three ways an N-source sum can exceed zero: one of the
//! first N-1 sources is active and the last one is not, only the last one is
//! active, or both. The last term places the lower edge of the joint body at
//! the sum of the two lower edges.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::BoundedParetoLaw;
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, Purpose, UniformStream};
use crate::source::{bin_trace, generate_timeline, BinnedTrace, RateMode, SourceConfig};

/// Sources generated concurrently before their traces are folded into the sum.
const SOURCE_CHUNK: usize = 16;
/// Snapshot samples per independent substream.
const SNAPSHOT_BLOCK: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateConfig {
    pub n_sources: usize,
    /// Template for every source; its seed is ignored in favour of `master_seed`.
    pub per_source: SourceConfig,
    /// Link capacity `M_l`, in rate units.
    pub link_capacity: f64,
    pub master_seed: u64,
    /// Optional per-source rate cutoffs `B_i` replacing the template's `B`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_source_cutoff: Option<Vec<f64>>,
    /// Simulated time discarded before the first bin.
    #[serde(default)]
    pub warmup: f64,
}

impl AggregateConfig {
    pub fn new(n_sources: usize, per_source: SourceConfig, link_capacity: f64, master_seed: u64) -> Result<Self> {
        let cfg = Self { n_sources, per_source, link_capacity, master_seed, per_source_cutoff: None, warmup: 0.0 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every invariant, including strict admissibility `Σ B_i < M_l`.
    pub fn validate(&self) -> Result<()> {
        if self.n_sources == 0 {
            return Err(invalid("an aggregate needs at least one source"));
        }
        self.per_source.validate()?;
        if !(self.warmup.is_finite() && self.warmup >= 0.0) {
            return Err(invalid(format!("warmup must be finite and non-negative, got {}", self.warmup)));
        }
        if let Some(cutoffs) = &self.per_source_cutoff {
            let RateMode::BoundedPareto { law } = self.per_source.rate_mode else {
                return Err(invalid("per-source cutoffs require Bounded-Pareto rates"));
            };
            if cutoffs.len() != self.n_sources {
                return Err(invalid(format!("{} cutoffs given for {} sources", cutoffs.len(), self.n_sources)));
            }
            for &b in cutoffs {
                BoundedParetoLaw::new(law.shape(), law.scale(), b)?;
            }
        }
        let report = check_capacity(self);
        if !report.admissible {
            return Err(invalid(format!(
                "peak aggregate rate {} is not below link capacity {}",
                report.peak_rate, report.link_capacity
            )));
        }
        Ok(())
    }

    /// The configuration of source `i`, with its derived seed and cutoff.
    pub fn source(&self, i: usize) -> SourceConfig {
        let mut cfg = self.per_source.with_seed(derive_seed(self.master_seed, i as u64, Purpose::SourceSeed));
        if let (Some(cutoffs), RateMode::BoundedPareto { law }) = (&self.per_source_cutoff, self.per_source.rate_mode) {
            let law = BoundedParetoLaw::new(law.shape(), law.scale(), cutoffs[i]).expect("validated cutoff");
            cfg.rate_mode = RateMode::BoundedPareto { law };
        }
        cfg
    }

    pub fn is_homogeneous(&self) -> bool {
        self.per_source_cutoff.is_none()
    }

    fn peak_rate(&self) -> f64 {
        match &self.per_source_cutoff {
            Some(cutoffs) => cutoffs.iter().sum(),
            None => self.n_sources as f64 * self.per_source.rate_mode.max_rate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityReport {
    pub n_sources: usize,
    /// `Σ B_i`, i.e. `N·B` for identical sources.
    pub peak_rate: f64,
    pub link_capacity: f64,
    /// `M_l - Σ B_i`.
    pub headroom: f64,
    /// `max B_i / M_l`; the model assumes this is small.
    pub cutoff_ratio: f64,
    pub admissible: bool,
}

/// Strict test of `N·B < M_l`.
pub fn check_capacity(config: &AggregateConfig) -> CapacityReport {
    let peak_rate = config.peak_rate();
    let max_cutoff = match &config.per_source_cutoff {
        Some(c) => c.iter().cloned().fold(0.0, f64::max),
        None => config.per_source.rate_mode.max_rate(),
    };
    CapacityReport {
        n_sources: config.n_sources,
        peak_rate,
        link_capacity: config.link_capacity,
        headroom: config.link_capacity - peak_rate,
        cutoff_ratio: max_cutoff / config.link_capacity,
        admissible: peak_rate < config.link_capacity,
    }
}

/// Elementwise sum of traces on a common grid.
pub fn superpose(traces: &[BinnedTrace]) -> Result<BinnedTrace> {
    let first = traces.first().ok_or_else(|| invalid("nothing to superpose"))?;
    let mut acc = BinnedTrace::new(first.bin_width, first.origin, vec![0.0; first.len()])?;
    for t in traces {
        add_into(&mut acc, t)?;
    }
    Ok(acc)
}

fn add_into(acc: &mut BinnedTrace, t: &BinnedTrace) -> Result<()> {
    if t.bin_width != acc.bin_width || t.origin != acc.origin || t.len() != acc.len() {
        return Err(Error::GridMismatch(format!(
            "(Δ={}, origin={}, n={}) vs (Δ={}, origin={}, n={})",
            acc.bin_width,
            acc.origin,
            acc.len(),
            t.bin_width,
            t.origin,
            t.len()
        )));
    }
    for (a, v) in acc.values.iter_mut().zip(&t.values) {
        *a += v;
    }
    Ok(())
}

/// Binned trace of one source after discarding the warmup.
pub fn source_trace(config: &AggregateConfig, i: usize, horizon: f64, bin_width: f64) -> Result<BinnedTrace> {
    let skip = (config.warmup / bin_width).round() as usize;
    let start = skip as f64 * bin_width;
    let timeline = generate_timeline(&config.source(i), start + horizon)?;
    let mut full = bin_trace(&timeline, bin_width)?;
    let n = (horizon / bin_width).ceil() as usize;
    full.values.drain(..skip);
    full.values.truncate(n);
    full.origin = start;
    Ok(full)
}

/// Sum of all sources over `[warmup, warmup + horizon)`.
///
/// Sources are generated in parallel and added in index order, so the result
/// does not depend on the thread count.
pub fn generate_aggregate(config: &AggregateConfig, horizon: f64, bin_width: f64) -> Result<BinnedTrace> {
    config.validate()?;
    if !(bin_width.is_finite() && bin_width > 0.0 && bin_width <= horizon) {
        return Err(invalid(format!("bin width must lie in (0, horizon = {horizon}], got {bin_width}")));
    }
    let mut acc: Option<BinnedTrace> = None;
    for chunk_start in (0..config.n_sources).step_by(SOURCE_CHUNK) {
        let end = (chunk_start + SOURCE_CHUNK).min(config.n_sources);
        let traces: Vec<BinnedTrace> = (chunk_start..end)
            .into_par_iter()
            .map(|i| source_trace(config, i, horizon, bin_width))
            .collect::<Result<_>>()?;
        for t in &traces {
            match acc.as_mut() {
                None => acc = Some(t.clone()),
                Some(a) => add_into(a, t)?,
            }
        }
    }
    let mut out = acc.expect("at least one source");
    out.seed = Some(config.master_seed);
    Ok(out)
}

/// Stationary snapshots of the aggregate rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSample {
    pub values: Vec<f64>,
}

impl SnapshotSample {
    pub fn zero_frequency(&self) -> f64 {
        self.values.iter().filter(|&&v| v == 0.0).count() as f64 / self.values.len() as f64
    }

    /// Fraction of samples in each `[edges[i], edges[i+1])`.
    pub fn histogram(&self, edges: &[f64]) -> Vec<f64> {
        let mut sorted = self.values.clone();
        sorted.sort_by(f64::total_cmp);
        bin_masses(&sorted, edges)
    }
}

fn bin_masses(sorted: &[f64], edges: &[f64]) -> Vec<f64> {
    let n = sorted.len() as f64;
    let pos: Vec<usize> = edges.iter().map(|&e| sorted.partition_point(|&v| v < e)).collect();
    pos.windows(2).map(|w| (w[1] - w[0]) as f64 / n).collect()
}

/// Draws `samples` snapshots `Σ_i 1[U_i < A_1] · R_i` from the stationary mixture.
///
/// Samples are produced in fixed blocks, each on its own substream of
/// `master_seed`, so the output is independent of the thread count.
pub fn mc_marginal_oracle(config: &AggregateConfig, samples: usize) -> Result<SnapshotSample> {
    config.validate()?;
    if samples < 10_000 {
        return Err(Error::TooShort { needed: 10_000, got: samples });
    }
    let a1 = config.per_source.on_fraction();
    let laws: Vec<BoundedParetoLaw> =
        (0..config.n_sources).map(|i| config.source(i).rate_mode.as_bounded_pareto()).collect();
    let blocks = samples.div_ceil(SNAPSHOT_BLOCK);
    let parts: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = SNAPSHOT_BLOCK.min(samples - b * SNAPSHOT_BLOCK);
            let mut stream = UniformStream::new(config.master_seed, b as u64, Purpose::Snapshot);
            (0..len)
                .map(|_| {
                    let mut total = 0.0;
                    for law in &laws {
                        if stream.next_open01() < a1 {
                            total += law.draw(&mut stream);
                        }
                    }
                    total
                })
                .collect()
        })
        .collect();
    Ok(SnapshotSample { values: parts.concat() })
}

fn check_probabilities(a0: f64, a1: f64) -> Result<()> {
    if !(a0 > 0.0 && a0 < 1.0 && a1 > 0.0 && a1 < 1.0) {
        return Err(invalid(format!("A_0 = {a0} and A_1 = {a1} must lie in (0, 1)")));
    }
    Ok(())
}

/// `k_B(N)` from the recursion in the module docs.
pub fn kb_recursion(n: usize, a0: f64, a1: f64, alpha_b: f64, k_b: f64) -> Result<f64> {
    kb_sequence(n, a0, a1, alpha_b, k_b).map(|s| *s.last().unwrap())
}

/// `[k_B(1), …, k_B(n)]`.
pub fn kb_sequence(n: usize, a0: f64, a1: f64, alpha_b: f64, k_b: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("k_B(N) needs N >= 1"));
    }
    check_probabilities(a0, a1)?;
    let p = alpha_b + 1.0;
    let mut seq = vec![k_b];
    for m in 2..=n {
        let prev = seq[m - 2];
        let head = a0.powi(m as i32 - 1);
        let rhs = a0 * (1.0 - head) * prev.powf(p) + head * a1 * k_b.powf(p) + a1 * (1.0 - head) * (k_b + prev).powf(p);
        let k = (rhs / (1.0 - a0.powi(m as i32))).powf(1.0 / p);
        if !k.is_finite() {
            return Err(Error::NonFinite(format!("k_B({m}) from k_B({}) = {prev}", m - 1)));
        }
        seq.push(k);
    }
    Ok(seq)
}

/// The k_B(N) bracket read with the grouping exactly as typeset, solved as a
/// fixed point `k^(α+1) = c_1 + c_2 k` from `k_B(N-1)`.
///
/// Kept for comparison: its coefficients vanish at N = 1 and it falls below
/// `k_B` for typical parameters, so it is never used to build the marginal.
pub fn kb_typeset_reading(n: usize, a0: f64, a1: f64, alpha_b: f64, k_b: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("k_B(N) needs N >= 1"));
    }
    check_probabilities(a0, a1)?;
    let p = alpha_b + 1.0;
    let mut prev = k_b;
    let mut k = 0.0;
    for m in 1..=n {
        let norm = 1.0 - a0.powi(m as i32);
        let head = a0.powi(m as i32 - 1);
        let c1 = (a0 - a0.powi(m as i32)) * prev.powf(p) * head * a1 * k_b.powf(p) / norm;
        let c2 = (a1 - a1 * head) * k_b.powf(p) * prev / norm;
        k = prev;
        for _ in 0..500 {
            let next = (c1 + c2 * k).max(0.0).powf(1.0 / p);
            let done = (next - k).abs() <= 1e-14 * next.max(1e-300);
            k = next;
            if done {
                break;
            }
        }
        if !k.is_finite() {
            return Err(Error::NonFinite(format!("typeset k_B({m})")));
        }
        prev = k;
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KbMethod {
    Recursion,
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalOptions {
    pub samples: usize,
    /// Log-spaced bins over `[k_B(N), B)` for the L1 comparison.
    pub bins: usize,
    pub l1_tolerance: f64,
}

impl Default for MarginalOptions {
    fn default() -> Self {
        Self { samples: 1_000_000, bins: 40, l1_tolerance: 0.05 }
    }
}

/// Closed-form N-source snapshot law with Monte-Carlo tail mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateMarginal {
    pub n_sources: usize,
    /// `A_0^N`.
    pub atom_at_zero: f64,
    pub k_bn: f64,
    pub method: KbMethod,
    /// k_B(N) from the recursion, whether or not it was accepted.
    pub recursion_k: f64,
    pub recursion_l1: f64,
    /// L1 distance of the adopted body to the Monte-Carlo histogram.
    pub body_l1: f64,
    pub alpha_b: f64,
    pub cutoff: f64,
    /// Monte-Carlo mass strictly above `B`.
    pub tail_mass: f64,
    /// Exact atoms `(j·B, C(N,j) (A_1 p_B)^j A_0^(N-j))`, j = 1..N, with `p_B` the cutoff atom.
    pub residual_atoms: Vec<(f64, f64)>,
}

impl AggregateMarginal {
    /// Body density on `[k_B(N), B)`, zero elsewhere.
    pub fn body_density(&self, x: f64) -> f64 {
        if x < self.k_bn || x >= self.cutoff {
            return 0.0;
        }
        let a = self.alpha_b;
        (1.0 - self.atom_at_zero) * a / self.k_bn * (self.k_bn / x).powf(a + 1.0)
    }

    /// Closed-form body mass on `[lo, hi) ∩ [k_B(N), B)`.
    pub fn body_mass(&self, lo: f64, hi: f64) -> f64 {
        body_mass(1.0 - self.atom_at_zero, self.k_bn, self.alpha_b, lo.max(self.k_bn), hi.min(self.cutoff))
    }

    /// `1 - (atom + body + tail + atom at B)`; zero when the body form is exact.
    pub fn mass_defect(&self) -> f64 {
        let atom_b = self.residual_atoms.first().map_or(0.0, |a| a.1);
        1.0 - self.atom_at_zero - self.body_mass(self.k_bn, self.cutoff) - self.tail_mass - atom_b
    }
}

fn body_mass(weight: f64, k: f64, alpha: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    weight * k.powf(alpha) * (lo.powf(-alpha) - hi.powf(-alpha))
}

fn log_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let mut e: Vec<f64> = (0..=bins).map(|i| (a + (b - a) * i as f64 / bins as f64).exp()).collect();
    e[0] = lo;
    e[bins] = hi;
    e
}

/// L1 distance between bin masses of the body form and of `sorted` samples on `[k, B)`.
pub fn body_l1_distance(sorted: &[f64], weight: f64, k: f64, alpha: f64, cutoff: f64, bins: usize) -> f64 {
    if k >= cutoff {
        return 0.0;
    }
    let edges = log_edges(k, cutoff, bins);
    bin_masses(sorted, &edges)
        .iter()
        .zip(edges.windows(2))
        .map(|(m, w)| (m - body_mass(weight, k, alpha, w[0], w[1])).abs())
        .sum()
}

/// Sum of squared log residuals between Monte-Carlo and body bin masses on `[k, B)`.
fn log_body_sse(sorted: &[f64], weight: f64, k: f64, alpha: f64, cutoff: f64, bins: usize) -> (f64, usize) {
    let edges = log_edges(k, cutoff, bins);
    let min_mass = 10.0 / sorted.len() as f64;
    let mut sse = 0.0;
    let mut used = 0;
    for (m, w) in bin_masses(sorted, &edges).iter().zip(edges.windows(2)) {
        if *m >= min_mass {
            let r = (m / body_mass(weight, k, alpha, w[0], w[1])).ln();
            sse += r * r;
            used += 1;
        }
    }
    // too few populated bins cannot discriminate; keep the search away
    let sse = if used < 3 { f64::INFINITY } else { sse / used as f64 };
    (sse, used)
}

/// Least-squares `k_B(N)`: the body slope is fixed at `-(α+1)` and `k` is
/// chosen on `[k_B, min(N k_B, B))` to minimize the mean squared log residual
/// of bin masses over `[k, B)`.
pub fn kb_least_squares(sorted: &[f64], weight: f64, alpha: f64, k_b: f64, n: usize, cutoff: f64, bins: usize) -> Result<f64> {
    let (mut lo, mut hi) = (k_b, (n as f64 * k_b).min(cutoff * (1.0 - 1e-6)));
    if hi <= lo {
        return Ok(lo);
    }
    let f = |k: f64| log_body_sse(sorted, weight, k, alpha, cutoff, bins);
    if f(lo).1 < 3 {
        return Err(Error::TooShort { needed: 3, got: f(lo).1 });
    }
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fa, mut fb) = (f(a).0, f(b).0);
    while hi - lo > 1e-9 * hi {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a).0;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b).0;
        }
    }
    let k = 0.5 * (lo + hi);
    if !k.is_finite() {
        return Err(Error::NonFinite("least-squares k_B(N)".into()));
    }
    Ok(k)
}

fn binomial(n: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn aggregate_marginal(config: &AggregateConfig) -> Result<AggregateMarginal> {
    aggregate_marginal_with(config, MarginalOptions::default())
}

/// Builds the N-source marginal, keeping the recursion's `k_B(N)` when its body
/// is within `l1_tolerance` of the Monte-Carlo histogram and otherwise fitting it.
pub fn aggregate_marginal_with(config: &AggregateConfig, opts: MarginalOptions) -> Result<AggregateMarginal> {
    config.validate()?;
    if !config.is_homogeneous() {
        return Err(invalid("the closed-form marginal assumes identical sources"));
    }
    let n = config.n_sources;
    let a1 = config.per_source.on_fraction();
    let a0 = 1.0 - a1;
    let law = config.per_source.rate_mode.as_bounded_pareto();
    let (alpha, k_b, cutoff) = (law.shape(), law.scale(), law.cutoff());
    let atom_at_zero = a0.powi(n as i32);
    let weight = 1.0 - atom_at_zero;

    let mut sorted = mc_marginal_oracle(config, opts.samples)?.values;
    sorted.sort_by(f64::total_cmp);
    let tail_mass = (sorted.len() - sorted.partition_point(|&v| v <= cutoff)) as f64 / sorted.len() as f64;

    let p_b = law.atom_mass();
    let residual_atoms = (1..=n)
        .map(|j| (j as f64 * cutoff, binomial(n, j) * (a1 * p_b).powi(j as i32) * a0.powi((n - j) as i32)))
        .collect();

    let recursion_k = kb_recursion(n, a0, a1, alpha, k_b)?;
    let recursion_l1 = body_l1_distance(&sorted, weight, recursion_k, alpha, cutoff, opts.bins);
    let (k_bn, method, body_l1) = if recursion_l1 < opts.l1_tolerance || n == 1 {
        (recursion_k, KbMethod::Recursion, recursion_l1)
    } else {
        let k = kb_least_squares(&sorted, weight, alpha, k_b, n, cutoff, opts.bins)?;
        (k, KbMethod::LeastSquares, body_l1_distance(&sorted, weight, k, alpha, cutoff, opts.bins))
    };
    Ok(AggregateMarginal {
        n_sources: n,
        atom_at_zero,
        k_bn,
        method,
        recursion_k,
        recursion_l1,
        body_l1,
        alpha_b: alpha,
        cutoff,
        tail_mass,
        residual_atoms,
    })
}
