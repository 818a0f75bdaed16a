//! Small numerical kernels shared by the model and estimator layers:
//! Gauss-Legendre quadrature, ordinary least squares and the
//! Kolmogorov-Smirnov distance against a (possibly atomic) CDF.

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 2);
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=order {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Fixed-order rule on [a, b].
    pub fn integrate<T, F>(&self, a: f64, b: f64, mut f: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: FnMut(f64) -> T,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = T::default();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(mid + half * x) * (w * half);
        }
        acc
    }
}

/// Adaptive bisection driven by the difference between a 16- and a 24-point
/// Gauss-Legendre rule. Returns the integral and the accumulated error estimate.
pub struct AdaptiveQuadrature {
    low: GaussLegendre,
    high: GaussLegendre,
    pub max_depth: usize,
}

impl Default for AdaptiveQuadrature {
    fn default() -> Self {
        Self { low: GaussLegendre::new(16), high: GaussLegendre::new(24), max_depth: 40 }
    }
}

impl AdaptiveQuadrature {
    /// Integrates a complex-or-real valued `f` over [a, b] to absolute tolerance `tol`.
    pub fn integrate<T, F, N>(&self, a: f64, b: f64, tol: f64, f: &F, norm: N) -> (T, f64)
    where
        T: std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + Default + Copy,
        F: Fn(f64) -> T,
        N: Fn(T) -> f64 + Copy,
    {
        self.recurse(a, b, tol, f, norm, 0)
    }

    fn recurse<T, F, N>(&self, a: f64, b: f64, tol: f64, f: &F, norm: N, depth: usize) -> (T, f64)
    where
        T: std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + Default + Copy,
        F: Fn(f64) -> T,
        N: Fn(T) -> f64 + Copy,
    {
        let coarse: T = self.low.integrate(a, b, f);
        let fine: T = self.high.integrate(a, b, f);
        let err = norm(fine - coarse);
        if err <= tol || depth >= self.max_depth {
            return (fine, err);
        }
        let mid = 0.5 * (a + b);
        let (l, el) = self.recurse(a, mid, 0.5 * tol, f, norm, depth + 1);
        let (r, er) = self.recurse(mid, b, 0.5 * tol, f, norm, depth + 1);
        (l + r, el + er)
    }
}

/// Real-valued adaptive integral over a finite interval.
pub fn integrate(a: f64, b: f64, tol: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let q = AdaptiveQuadrature::default();
    let (v, err) = q.integrate(a, b, tol, &f, |x: f64| x.abs());
    if err > tol * 10.0 || !v.is_finite() {
        return Err(Error::Quadrature { achieved: err, requested: tol });
    }
    Ok(v)
}

/// Result of an ordinary least-squares line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    /// Standard error of the slope.
    pub slope_stderr: f64,
    pub n_points: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidParameter("x and y lengths differ".into()));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("all abscissae are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_stderr = if n > 2 { (ss_res / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LineFit { slope, intercept, residual: (ss_res / nf).sqrt(), slope_stderr, n_points: n })
}

/// Kolmogorov-Smirnov distance between a sample and a CDF that may carry atoms.
///
/// `cdf(x)` must be right-continuous; `cdf_left(x)` is its left limit. Sorts
/// `samples` in place.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64, cdf_left: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < samples.len() {
        let x = samples[i];
        let mut j = i;
        while j < samples.len() && samples[j] == x {
            j += 1;
        }
        // Empirical CDF jumps from i/n to j/n at x.
        d = d.max((j as f64 / n - cdf(x)).abs());
        d = d.max((cdf_left(x) - i as f64 / n).abs());
        i = j;
    }
    d
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divides by n).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let gl = GaussLegendre::new(16);
        let v: f64 = gl.integrate(0.0, 2.0, |x| x.powi(31));
        assert!((v - 2f64.powi(32) / 32.0).abs() / v < 1e-13);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let v = integrate(1.0, 1e6, 1e-10, |x| x.powf(-1.5)).unwrap();
        let exact = 2.0 * (1.0 - 1e-3);
        assert!((v - exact).abs() < 1e-8);
    }

    #[test]
    fn exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 3.0).abs() < 1e-13);
        assert!(f.residual < 1e-13);
    }

    #[test]
    fn ks_counts_atoms() {
        // Half the mass at 0, half uniform on (0,1).
        let cdf = |x: f64| if x < 0.0 { 0.0 } else { 0.5 + 0.5 * x.min(1.0) };
        let left = |x: f64| if x <= 0.0 { 0.0 } else { 0.5 + 0.5 * x.min(1.0) };
        let mut s: Vec<f64> = vec![0.0; 500];
        s.extend((0..500).map(|i| (i as f64 + 0.5) / 500.0));
        assert!(ks_distance(&mut s, cdf, left) < 2e-3);
        let mut all_zero = vec![0.0; 1000];
        assert!((ks_distance(&mut all_zero, cdf, left) - 0.5).abs() < 1e-12);
    }
}
