//! Pareto and Bounded-Pareto laws.
//!
//! Both laws are parameterized by their reliability (survival) function. The
//! Bounded-Pareto law keeps the truncated tail mass as an explicit atom at the
//! cutoff `B`; densities returned here are always the continuous part only and
//! the atom is reported through [`BoundedParetoLaw::atom_mass`].
//!
//! Sampling is inverse-transform from a caller-supplied uniform variate, so the
//! laws own no randomness.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::UniformStream;

/// `expm1(z) / z`, equal to 1 at `z = 0`.
fn exprel(z: f64) -> f64 {
    if z.abs() < 1e-12 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

fn check_uniform(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::UniformOutOfRange(u))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParetoParams {
    shape: f64,
    scale: f64,
}

impl TryFrom<ParetoParams> for ParetoLaw {
    type Error = Error;
    fn try_from(p: ParetoParams) -> Result<Self> {
        Self::new(p.shape, p.scale)
    }
}

impl From<ParetoLaw> for ParetoParams {
    fn from(p: ParetoLaw) -> Self {
        Self { shape: p.shape, scale: p.scale }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundedParetoParams {
    shape: f64,
    scale: f64,
    cutoff: f64,
}

impl TryFrom<BoundedParetoParams> for BoundedParetoLaw {
    type Error = Error;
    fn try_from(p: BoundedParetoParams) -> Result<Self> {
        Self::new(p.shape, p.scale, p.cutoff)
    }
}

impl From<BoundedParetoLaw> for BoundedParetoParams {
    fn from(p: BoundedParetoLaw) -> Self {
        Self { shape: p.shape, scale: p.scale, cutoff: p.cutoff }
    }
}

/// Two-parameter Pareto law with survival `(k/x)^α` for `x > k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParetoParams", into = "ParetoParams")]
pub struct ParetoLaw {
    shape: f64,
    scale: f64,
}

impl ParetoLaw {
    /// Any positive tail index and scale.
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(invalid(format!("Pareto shape must be positive and finite, got {shape}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid(format!("Pareto scale must be positive and finite, got {scale}")));
        }
        Ok(Self { shape, scale })
    }

    /// A duration law for an On/Off source: finite mean, infinite variance.
    ///
    /// Both the On and the Off index are restricted to the open interval
    /// (1, 2). The Off-state condition is printed upstream as `1 < α_0 < 1`;
    /// it is read here as `1 < α_0 < 2`, the same range as the On state.
    pub fn duration(shape: f64, scale: f64) -> Result<Self> {
        let law = Self::new(shape, scale)?;
        law.check_duration()?;
        Ok(law)
    }

    pub fn check_duration(&self) -> Result<()> {
        if self.shape > 1.0 && self.shape < 2.0 {
            Ok(())
        } else {
            Err(invalid(format!("duration tail index must lie in (1, 2), got {}", self.shape)))
        }
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn survival(&self, x: f64) -> f64 {
        if x <= self.scale {
            1.0
        } else {
            (self.scale / x).powf(self.shape)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.scale {
            0.0
        } else {
            self.shape / self.scale * (self.scale / x).powf(self.shape + 1.0)
        }
    }

    /// Inverse of the survival function: `k · u^(-1/α)`.
    pub fn sample(&self, u: f64) -> Result<f64> {
        check_uniform(u)?;
        Ok(self.quantile_of_survival(u))
    }

    #[inline]
    pub(crate) fn quantile_of_survival(&self, u: f64) -> f64 {
        self.scale * u.powf(-1.0 / self.shape)
    }

    pub fn draw(&self, stream: &mut UniformStream) -> f64 {
        self.quantile_of_survival(stream.next_open01())
    }

    pub fn mean(&self) -> Result<f64> {
        if self.shape <= 1.0 {
            return Err(invalid(format!("Pareto mean is infinite for shape {} <= 1", self.shape)));
        }
        Ok(self.shape * self.scale / (self.shape - 1.0))
    }

    /// Variance; infinite for `α <= 2`.
    pub fn variance(&self) -> f64 {
        if self.shape <= 2.0 {
            return f64::INFINITY;
        }
        let a = self.shape;
        self.scale * self.scale * a / ((a - 1.0) * (a - 1.0) * (a - 2.0))
    }

    /// Draw from the stationary residual life (inverse of [`Self::residual_survival`]).
    pub fn draw_residual(&self, stream: &mut UniformStream) -> Result<f64> {
        let mu = self.mean()?;
        let (a, k) = (self.shape, self.scale);
        let u = stream.next_open01();
        Ok(if u >= 1.0 / a { mu * (1.0 - u) } else { k * (a * u).powf(-1.0 / (a - 1.0)) })
    }

    /// Survival of the stationary residual life, `P(R > x) = (1/μ) ∫_x^∞ S(u) du`.
    pub fn residual_survival(&self, x: f64) -> Result<f64> {
        let mu = self.mean()?;
        let (a, k) = (self.shape, self.scale);
        Ok(if x <= 0.0 {
            1.0
        } else if x < k {
            (mu - x) / mu
        } else {
            k.powf(a) * x.powf(1.0 - a) / ((a - 1.0) * mu)
        })
    }
}

/// Pareto law truncated at `B` with the truncated tail mass placed on `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoundedParetoParams", into = "BoundedParetoParams")]
pub struct BoundedParetoLaw {
    shape: f64,
    scale: f64,
    cutoff: f64,
}

impl BoundedParetoLaw {
    /// `scale == cutoff` is accepted and gives a point mass at the cutoff.
    pub fn new(shape: f64, scale: f64, cutoff: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(invalid(format!("Bounded-Pareto shape must be positive, got {shape}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid(format!("Bounded-Pareto scale must be positive, got {scale}")));
        }
        if !(cutoff.is_finite() && cutoff >= scale) {
            return Err(invalid(format!("Bounded-Pareto cutoff {cutoff} must be finite and >= scale {scale}")));
        }
        Ok(Self { shape, scale, cutoff })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Reliability function: 1 below `k_B`, `(k_B/x)^α` on `[k_B, B]`, 0 above `B`.
    pub fn survival(&self, x: f64) -> f64 {
        if x < self.scale {
            1.0
        } else if x <= self.cutoff {
            (self.scale / x).powf(self.shape)
        } else {
            0.0
        }
    }

    /// Mass of the atom at the cutoff, `(k_B/B)^α`.
    pub fn atom_mass(&self) -> f64 {
        (self.scale / self.cutoff).powf(self.shape)
    }

    /// Continuous part of the density, supported on `[k_B, B)`.
    pub fn continuous_pdf(&self, x: f64) -> f64 {
        if x < self.scale || x >= self.cutoff {
            0.0
        } else {
            self.shape / self.scale * (self.scale / x).powf(self.shape + 1.0)
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < self.scale {
            0.0
        } else if x < self.cutoff {
            1.0 - (self.scale / x).powf(self.shape)
        } else {
            1.0
        }
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        if x <= self.scale {
            0.0
        } else if x <= self.cutoff {
            1.0 - (self.scale / x).powf(self.shape)
        } else {
            1.0
        }
    }

    pub fn sample(&self, u: f64) -> Result<f64> {
        check_uniform(u)?;
        Ok(self.quantile_of_survival(u))
    }

    #[inline]
    pub(crate) fn quantile_of_survival(&self, u: f64) -> f64 {
        if u <= self.atom_mass() {
            self.cutoff
        } else {
            (self.scale * u.powf(-1.0 / self.shape)).min(self.cutoff)
        }
    }

    pub fn draw(&self, stream: &mut UniformStream) -> f64 {
        self.quantile_of_survival(stream.next_open01())
    }

    /// `E[X^r]`, continuous part plus the atom.
    pub fn raw_moment(&self, r: f64) -> f64 {
        let (a, k, b) = (self.shape, self.scale, self.cutoff);
        let log_span = (b / k).ln();
        // ∫_k^B α k^α x^(r-α-1) dx = α k^r ln(B/k) exprel((r-α) ln(B/k))
        let continuous = a * k.powf(r) * log_span * exprel((r - a) * log_span);
        continuous + b.powf(r) * self.atom_mass()
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1.0)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (self.raw_moment(2.0) - m * m).max(0.0)
    }
}
