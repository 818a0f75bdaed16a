//! A single heavy-tailed On/Off source.
//!
//! The source alternates On periods `X_j` and Off periods `Y_j`, both Pareto,
//! starting by default with an On period at `S_0 = 0`. During the j-th On
//! period it emits at rate `A_j`, either a constant or a fresh Bounded-Pareto
//! draw per period.
//! Its rate process is `Σ_j A_j 1[S_j, S_j + X_j)(t)`.

use serde::{Deserialize, Serialize};

use crate::distributions::{BoundedParetoLaw, ParetoLaw};
use crate::error::{invalid, Error, Result};
use crate::numeric;
use crate::rng::{Purpose, UniformStream};

/// Rate emitted during On periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateMode {
    /// `A_j = c` for every period.
    Constant { rate: f64 },
    /// `A_j` i.i.d. Bounded-Pareto, redrawn at every On period.
    BoundedPareto { law: BoundedParetoLaw },
}

impl RateMode {
    pub fn mean(&self) -> f64 {
        match self {
            RateMode::Constant { rate } => *rate,
            RateMode::BoundedPareto { law } => law.mean(),
        }
    }

    /// Largest rate the mode can produce.
    pub fn max_rate(&self) -> f64 {
        match self {
            RateMode::Constant { rate } => *rate,
            RateMode::BoundedPareto { law } => law.cutoff(),
        }
    }

    /// The rate law as a Bounded-Pareto law; a constant rate is the
    /// degenerate law with `k_B = B = c`.
    pub fn as_bounded_pareto(&self) -> BoundedParetoLaw {
        match self {
            RateMode::Constant { rate } => {
                BoundedParetoLaw::new(1.0, *rate, *rate).expect("validated constant rate")
            }
            RateMode::BoundedPareto { law } => *law,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            RateMode::Constant { rate } if !(rate.is_finite() && *rate > 0.0) => {
                Err(invalid(format!("constant rate must be positive, got {rate}")))
            }
            _ => Ok(()),
        }
    }
}

/// How the first epoch is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    /// `S_0 = 0` is a regeneration point: a full On period begins at time 0.
    #[default]
    Regeneration,
    /// Time 0 is a stationary instant: On with probability `A_1`, and the
    /// current period's remaining length follows the residual-life law. An
    /// Off start is encoded as a first epoch with `on = 0`.
    Stationary,
}

/// Parameters of one On/Off source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub on_law: ParetoLaw,
    pub off_law: ParetoLaw,
    pub rate_mode: RateMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub start: StartMode,
}

impl SourceConfig {
    pub fn new(on_law: ParetoLaw, off_law: ParetoLaw, rate_mode: RateMode, seed: u64) -> Result<Self> {
        let cfg = Self { on_law, off_law, rate_mode, seed, start: StartMode::Regeneration };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-checks every invariant; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        self.on_law.check_duration().map_err(|e| invalid(format!("on law: {e}")))?;
        self.off_law.check_duration().map_err(|e| invalid(format!("off law: {e}")))?;
        self.rate_mode.validate()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_start(mut self, start: StartMode) -> Self {
        self.start = start;
        self
    }

    /// `(μ_1, μ_0)`: mean On and mean Off durations.
    pub fn mean_durations(&self) -> (f64, f64) {
        (
            self.on_law.mean().expect("validated duration law"),
            self.off_law.mean().expect("validated duration law"),
        )
    }

    /// `A_1 = μ_1 / (μ_0 + μ_1)`, the long-run fraction of time spent On.
    pub fn on_fraction(&self) -> f64 {
        let (mu1, mu0) = self.mean_durations();
        mu1 / (mu0 + mu1)
    }
}

/// One renewal cycle: On period starting at `start`, followed by an Off period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub start: f64,
    pub on: f64,
    pub off: f64,
    pub rate: f64,
}

impl Epoch {
    pub fn on_end(&self) -> f64 {
        self.start + self.on
    }

    pub fn end(&self) -> f64 {
        self.start + self.on + self.off
    }
}

/// The realized alternating renewal process on `[0, horizon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalTimeline {
    pub epochs: Vec<Epoch>,
    pub horizon: f64,
}

/// Draws epochs until a regeneration point reaches `horizon`.
///
/// On durations, Off durations and rates come from three independent
/// substreams of `config.seed`, so the output is a pure function of
/// `(config, horizon)`.
pub fn generate_timeline(config: &SourceConfig, horizon: f64) -> Result<RenewalTimeline> {
    config.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid(format!("horizon must be positive and finite, got {horizon}")));
    }
    let mut on_stream = UniformStream::new(config.seed, 0, Purpose::OnDurations);
    let mut off_stream = UniformStream::new(config.seed, 0, Purpose::OffDurations);
    let mut rate_stream = UniformStream::new(config.seed, 0, Purpose::Rates);

    let cycle = {
        let (mu1, mu0) = config.mean_durations();
        mu1 + mu0
    };
    let mut epochs = Vec::with_capacity((horizon / cycle * 1.05) as usize + 16);
    let mut start = 0.0;
    let mut first = config.start == StartMode::Stationary;
    while start < horizon {
        let (on, off) = if first {
            first = false;
            let mut state = UniformStream::new(config.seed, 0, Purpose::StartState);
            if state.next_open01() < config.on_fraction() {
                (config.on_law.draw_residual(&mut on_stream)?, config.off_law.draw(&mut off_stream))
            } else {
                (0.0, config.off_law.draw_residual(&mut off_stream)?)
            }
        } else {
            (config.on_law.draw(&mut on_stream), config.off_law.draw(&mut off_stream))
        };
        let rate = match config.rate_mode {
            RateMode::Constant { rate } => rate,
            RateMode::BoundedPareto { law } => law.draw(&mut rate_stream),
        };
        epochs.push(Epoch { start, on, off, rate });
        // same association as `Epoch::end`, so S_{j+1} = S_j + X_j + Y_j holds bitwise
        start = start + on + off;
    }
    Ok(RenewalTimeline { epochs, horizon })
}

impl RenewalTimeline {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Instantaneous rate: `A_j` on `[S_j, S_j + X_j)`, zero otherwise.
    pub fn rate_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t < self.horizon) {
            return Err(Error::OutOfHorizon { t, horizon: self.horizon });
        }
        let idx = self.epochs.partition_point(|e| e.start <= t);
        if idx == 0 {
            return Ok(0.0);
        }
        let e = &self.epochs[idx - 1];
        Ok(if t < e.on_end() { e.rate } else { 0.0 })
    }

    /// Exact integral of the rate process over `[a, b)`.
    pub fn volume(&self, a: f64, b: f64) -> f64 {
        let first = self.epochs.partition_point(|e| e.on_end() <= a);
        self.epochs[first..]
            .iter()
            .take_while(|e| e.start < b)
            .map(|e| e.rate * (e.on_end().min(b) - e.start.max(a)).max(0.0))
            .sum()
    }

    /// Total On time inside `[0, horizon)`.
    pub fn on_time(&self) -> f64 {
        self.epochs
            .iter()
            .map(|e| (e.on_end().min(self.horizon) - e.start).max(0.0))
            .sum()
    }

    /// Bins the rate process into `ceil(horizon / Δ)` mean-rate bins.
    pub fn bin(&self, bin_width: f64) -> Result<BinnedTrace> {
        bin_trace(self, bin_width)
    }
}

/// Mean rate per bin on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedTrace {
    pub bin_width: f64,
    pub origin: f64,
    pub values: Vec<f64>,
    /// Seed of the generating configuration, when known.
    pub seed: Option<u64>,
}

impl BinnedTrace {
    pub fn new(bin_width: f64, origin: f64, values: Vec<f64>) -> Result<Self> {
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(invalid(format!("bin width must be positive, got {bin_width}")));
        }
        Ok(Self { bin_width, origin, values, seed: None })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Σ value · Δ`.
    pub fn volume(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.bin_width
    }

    pub fn mean(&self) -> f64 {
        numeric::mean(&self.values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Exact interval-overlap binning: bin `m` holds `(1/Δ) ∫ rate` over `[mΔ, (m+1)Δ)`.
pub fn bin_trace(timeline: &RenewalTimeline, bin_width: f64) -> Result<BinnedTrace> {
    if !(bin_width.is_finite() && bin_width > 0.0 && bin_width <= timeline.horizon) {
        return Err(invalid(format!(
            "bin width must lie in (0, horizon = {}], got {bin_width}",
            timeline.horizon
        )));
    }
    let ratio = timeline.horizon / bin_width;
    // a horizon that is a multiple of Δ up to rounding gets exactly that many bins
    let n = if (ratio - ratio.round()).abs() <= 1e-9 * ratio { ratio.round() } else { ratio.ceil() } as usize;
    let mut acc = vec![0.0f64; n];
    let grid_end = n as f64 * bin_width;
    for e in &timeline.epochs {
        if e.start >= grid_end {
            break;
        }
        let a = e.start;
        let b = e.on_end().min(grid_end);
        let first = ((a / bin_width) as usize).min(n - 1);
        let last = ((b / bin_width) as usize).min(n - 1);
        if first == last {
            acc[first] += e.rate * (b - a);
            continue;
        }
        acc[first] += e.rate * ((first + 1) as f64 * bin_width - a);
        for slot in &mut acc[first + 1..last] {
            *slot += e.rate * bin_width;
        }
        acc[last] += e.rate * (b - last as f64 * bin_width).max(0.0);
    }
    let values = acc.into_iter().map(|v| v / bin_width).collect();
    Ok(BinnedTrace { bin_width, origin: 0.0, values, seed: None })
}

/// Generates and bins in one step, tagging the trace with the config seed.
pub fn generate_trace(config: &SourceConfig, horizon: f64, bin_width: f64) -> Result<BinnedTrace> {
    let timeline = generate_timeline(config, horizon)?;
    let mut trace = bin_trace(&timeline, bin_width)?;
    trace.seed = Some(config.seed);
    Ok(trace)
}

/// `H = (3 - min{α_0, α_1}) / 2`.
///
/// Indices must lie in (1, 2]; pass 2 for a finite-variance duration law.
pub fn theoretical_hurst(alpha_off: f64, alpha_on: f64) -> Result<f64> {
    for a in [alpha_off, alpha_on] {
        if !(a > 1.0 && a <= 2.0) {
            return Err(invalid(format!("tail index must lie in (1, 2], got {a}")));
        }
    }
    Ok((3.0 - alpha_off.min(alpha_on)) / 2.0)
}

/// Stationary marginal of a single source's rate: an atom at zero of mass
/// `μ_0/(μ_0+μ_1)` plus the rate law scaled by `μ_1/(μ_0+μ_1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedMarginal {
    pub atom_at_zero: f64,
    pub on_fraction: f64,
    pub rate_law: BoundedParetoLaw,
}

pub fn single_source_marginal(config: &SourceConfig) -> MixedMarginal {
    let on_fraction = config.on_fraction();
    MixedMarginal {
        atom_at_zero: 1.0 - on_fraction,
        on_fraction,
        rate_law: config.rate_mode.as_bounded_pareto(),
    }
}

impl MixedMarginal {
    pub fn support(&self) -> (f64, f64) {
        (0.0, self.rate_law.cutoff())
    }

    /// Continuous density away from the atoms.
    pub fn density(&self, x: f64) -> f64 {
        self.on_fraction * self.rate_law.continuous_pdf(x)
    }

    /// `(location, mass)` of every atom.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        vec![(0.0, self.atom_at_zero), (self.rate_law.cutoff(), self.on_fraction * self.rate_law.atom_mass())]
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.atom_at_zero + self.on_fraction * self.rate_law.cdf(x)
        }
    }

    pub fn cdf_left(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.atom_at_zero + self.on_fraction * self.rate_law.cdf_left(x)
        }
    }

    pub fn mean(&self) -> f64 {
        self.on_fraction * self.rate_law.mean()
    }

    /// Atoms plus the quadrature of the continuous part.
    pub fn total_mass(&self) -> Result<f64> {
        let law = self.rate_law;
        let body = if law.cutoff() > law.scale() {
            // log-spaced panels keep the x^(-α-1) peak at k_B well resolved
            let mut edges = vec![law.scale()];
            while *edges.last().unwrap() * 2.0 < law.cutoff() {
                edges.push(edges.last().unwrap() * 2.0);
            }
            edges.push(law.cutoff());
            let mut total = 0.0;
            for w in edges.windows(2) {
                total += numeric::integrate(w[0], w[1], 1e-12, |x| self.density(x))?;
            }
            total
        } else {
            0.0
        };
        Ok(body + self.atoms().iter().map(|(_, m)| m).sum::<f64>())
    }
}

/// Long-run mean emitted rate, `μ_1/(μ_0+μ_1) · E[A]`.
pub fn expected_load(config: &SourceConfig) -> f64 {
    config.on_fraction() * config.rate_mode.mean()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(a1: f64, k1: f64, a0: f64, k0: f64, rate: RateMode, seed: u64) -> SourceConfig {
        SourceConfig::new(ParetoLaw::new(a1, k1).unwrap(), ParetoLaw::new(a0, k0).unwrap(), rate, seed).unwrap()
    }

    fn constant(c: f64) -> RateMode {
        RateMode::Constant { rate: c }
    }

    #[test]
    fn regeneration_points_follow_cycle_lengths() {
        let c = cfg(1.5, 1.0, 1.4, 2.0, constant(1.0), 11);
        let tl = generate_timeline(&c, 5_000.0).unwrap();
        assert_eq!(tl.epochs[0].start, 0.0);
        for w in tl.epochs.windows(2) {
            assert_eq!(w[1].start, w[0].start + w[0].on + w[0].off);
        }
        assert!(tl.epochs.last().unwrap().start < tl.horizon);
        assert!(tl.epochs.last().unwrap().end() >= tl.horizon);
        for e in &tl.epochs {
            assert!(e.on >= 1.0 && e.off >= 2.0);
        }
    }

    #[test]
    fn timeline_is_deterministic() {
        let c = cfg(1.5, 1.0, 1.5, 1.0, constant(2.0), 99);
        assert_eq!(generate_timeline(&c, 1e4).unwrap(), generate_timeline(&c, 1e4).unwrap());
        let other = generate_timeline(&c.with_seed(100), 1e4).unwrap();
        assert_ne!(generate_timeline(&c, 1e4).unwrap(), other);
    }

    #[test]
    fn rate_at_respects_half_open_intervals() {
        let c = cfg(1.5, 1.0, 1.5, 1.0, constant(3.0), 5);
        let tl = generate_timeline(&c, 1_000.0).unwrap();
        for e in tl.epochs.iter().filter(|e| e.end() < tl.horizon) {
            assert_eq!(tl.rate_at(e.start).unwrap(), 3.0);
            assert_eq!(tl.rate_at(e.on_end()).unwrap(), 0.0);
        }
        assert!(matches!(tl.rate_at(-1e-9), Err(Error::OutOfHorizon { .. })));
        assert!(tl.rate_at(1_000.0).is_err());
    }

    #[test]
    fn bin_examples() {
        let off = RenewalTimeline {
            epochs: vec![Epoch { start: 0.0, on: 2.0, off: 100.0, rate: 0.0 }],
            horizon: 10.0,
        };
        assert!(bin_trace(&off, 1.0).unwrap().values.iter().all(|&v| v == 0.0));

        let half = RenewalTimeline {
            epochs: vec![Epoch { start: 0.0, on: 0.5, off: 100.0, rate: 4.0 }],
            horizon: 10.0,
        };
        let t = bin_trace(&half, 1.0).unwrap();
        assert_eq!(t.values[0], 2.0);
        assert_eq!(t.len(), 10);
        assert!(bin_trace(&half, 11.0).is_err());
        assert!(bin_trace(&half, 0.0).is_err());
        assert_eq!(bin_trace(&half, 3.0).unwrap().len(), 4);
    }

    #[test]
    fn hurst_examples() {
        assert!((theoretical_hurst(1.2, 1.5).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(theoretical_hurst(2.0, 2.0).unwrap(), 0.5);
        assert!((theoretical_hurst(1.5, 1.9).unwrap() - 0.75).abs() < 1e-15);
        assert!(theoretical_hurst(1.0, 1.5).is_err());
        assert!(theoretical_hurst(1.5, 2.1).is_err());
    }

    #[test]
    fn marginal_examples() {
        let sym = cfg(1.5, 1.0, 1.5, 1.0, RateMode::BoundedPareto { law: BoundedParetoLaw::new(1.2, 1.0, 10.0).unwrap() }, 0);
        assert!((single_source_marginal(&sym).atom_at_zero - 0.5).abs() < 1e-15);
        // μ_1 = 3, μ_0 = 1
        let skew = cfg(1.5, 1.0, 1.5, 1.0 / 3.0, constant(1.0), 0);
        let m = single_source_marginal(&skew);
        assert!((m.on_fraction - 0.75).abs() < 1e-12);
        assert!((m.mean() - 0.75).abs() < 1e-12);
        assert!((m.total_mass().unwrap() - 1.0).abs() < 1e-6);
        assert!((single_source_marginal(&sym).total_mass().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn expected_load_examples() {
        let c = cfg(1.5, 1.0, 1.5, 1.0, constant(4.0), 0);
        assert!((expected_load(&c) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let on = ParetoLaw::new(1.5, 1.0).unwrap();
        assert!(SourceConfig::new(on, ParetoLaw::new(1.0, 1.0).unwrap(), constant(1.0), 0).is_err());
        assert!(SourceConfig::new(on, ParetoLaw::new(2.5, 1.0).unwrap(), constant(1.0), 0).is_err());
        assert!(SourceConfig::new(on, on, constant(0.0), 0).is_err());
        let c = SourceConfig::new(on, on, constant(1.0), 0).unwrap();
        assert!(generate_timeline(&c, 0.0).is_err());
        assert!(generate_timeline(&c, f64::INFINITY).is_err());
    }
}
