//! Numerical ground truth for the closed forms.
//!
//! The quadrature path works from unnormalised log-kernels and computes the
//! truncation normalisers itself, so it shares no CDF code with the accountant.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::accountant::RenyiOrder;
use crate::dist::Interval;
use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions, QuadratureResult};

pub mod properties;
pub mod suites;

/// Unnormalised log density of a parent law.
pub trait LogDensity: Sync {
    fn ln_kernel(&self, x: f64) -> f64;

    /// Points where the kernel is not smooth.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// `-(x - mean)² / (2 stddev²)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernel {
    pub mean: f64,
    pub stddev: f64,
}

impl LogDensity for GaussianKernel {
    fn ln_kernel(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.stddev;
        -0.5 * z * z
    }
}

/// `-|x - mean| / scale`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceKernel {
    pub mean: f64,
    pub scale: f64,
}

impl LogDensity for LaplaceKernel {
    fn ln_kernel(&self, x: f64) -> f64 {
        -(x - self.mean).abs() / self.scale
    }

    fn kinks(&self) -> Vec<f64> {
        vec![self.mean]
    }
}

const MIN_QUAD_REL_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct OracleOptions {
    /// Bound on the propagated error of the returned divergence.
    pub tol: f64,
    /// Added to `tol` in proportion to |divergence|; zero for a pure absolute bound.
    pub rel_tol: f64,
    pub quad: QuadOptions,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            tol: 1e-10,
            rel_tol: 0.0,
            // Kernels far from the origin carry rounding noise of order ε·|ln f|
            // in the integrand, which puts a floor near 1e-12 on reachable
            // accuracy; 1e-11 keeps the divergence error below 1e-10.
            quad: QuadOptions { abs_tol: 0.0, rel_tol: 1e-11, ..QuadOptions::default() },
        }
    }
}

// Integrand values more than e^-CUT below the peak are dropped.
const CUT: f64 = 70.0;

fn golden_argmax<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..300 {
        if hi - lo <= 1e-15 * (lo.abs().max(hi.abs()).max(1e-300)) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

// Boundary of {f ≥ level} between `inside` (where f ≥ level) and `outside`.
fn level_crossing<F: Fn(f64) -> f64>(f: &F, mut inside: f64, mut outside: f64, level: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if f(mid) >= level {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    outside
}

/// `ln ∫ exp(ln_f)` over the interval for a log-unimodal `ln_f`.
///
/// The returned `abs_error_estimate` is the error of the logarithm, i.e. the
/// relative error of the integral.
pub fn log_integral<F: Fn(f64) -> f64>(
    ln_f: F,
    interval: Interval,
    breakpoints: &[f64],
    opts: &QuadOptions,
) -> Result<QuadratureResult> {
    let (lo, hi) = (interval.lower(), interval.upper());
    let peak = golden_argmax(&ln_f, lo, hi);
    let (f_lo, f_peak, f_hi) = (ln_f(lo), ln_f(peak), ln_f(hi));
    let (mode, top) = [(lo, f_lo), (peak, f_peak), (hi, f_hi)]
        .into_iter()
        .fold((peak, f64::NEG_INFINITY), |acc, (x, v)| if v > acc.1 { (x, v) } else { acc });
    if !top.is_finite() {
        return Err(Error::params("log integrand is not finite on the interval"));
    }
    let level = top - CUT;
    let left = if f_lo >= level { lo } else { level_crossing(&ln_f, mode, lo, level) };
    let right = if f_hi >= level { hi } else { level_crossing(&ln_f, mode, hi, level) };
    let mut cuts: Vec<f64> = breakpoints.to_vec();
    cuts.push(mode);
    let r = if left < right {
        integrate(|x| (ln_f(x) - top).exp(), left, right, &cuts, opts)?
    } else {
        // Support narrower than one ulp around the mode.
        QuadratureResult { value: (right - left).max(f64::MIN_POSITIVE), abs_error_estimate: 0.0, evaluations: 0 }
    };
    Ok(QuadratureResult {
        value: top + r.value.ln(),
        abs_error_estimate: r.abs_error_estimate / r.value,
        evaluations: r.evaluations,
    })
}

/// D_α(P ‖ Q) between `p` and `q` truncated to `interval`, by quadrature.
pub fn renyi_divergence_quadrature<P: LogDensity, Q: LogDensity>(
    p: &P,
    q: &Q,
    alpha: RenyiOrder,
    interval: Interval,
    opts: &OracleOptions,
) -> Result<QuadratureResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::params("oracle tolerance must be positive"));
    }
    let a = alpha.value();
    let mut kinks = p.kinks();
    kinks.extend(q.kinks());
    let mut quad = opts.quad.clone();
    let mut evaluations = 0;
    loop {
        let zp = log_integral(|x| p.ln_kernel(x), interval, &kinks, &quad)?;
        let zq = log_integral(|x| q.ln_kernel(x), interval, &kinks, &quad)?;
        let joint = log_integral(|x| a * p.ln_kernel(x) + (1.0 - a) * q.ln_kernel(x), interval, &kinks, &quad)?;
        let value = (joint.value - a * zp.value - (1.0 - a) * zq.value) / (a - 1.0);
        let rounding = 4.0 * f64::EPSILON * (joint.value.abs() + a * zp.value.abs() + (a - 1.0) * zq.value.abs());
        let error = (joint.abs_error_estimate + a * zp.abs_error_estimate + (a - 1.0) * zq.abs_error_estimate + rounding)
            / (a - 1.0);
        evaluations += joint.evaluations + zp.evaluations + zq.evaluations;
        let target = opts.tol + opts.rel_tol * value.abs();
        if value.is_finite() && error <= target {
            return Ok(QuadratureResult { value, abs_error_estimate: error, evaluations });
        }
        // Near α = 1 the 1/(α−1) factor amplifies integral errors; tighten once.
        let tighter = (quad.rel_tol * 0.5 * target / error).max(MIN_QUAD_REL_TOL);
        if !value.is_finite() || !(tighter < quad.rel_tol) || quad.rel_tol < opts.quad.rel_tol {
            return Err(Error::NoConvergence { evaluations, error_estimate: error });
        }
        quad.rel_tol = tighter;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

pub const MIN_MONTE_CARLO_SAMPLES: usize = 10_000;

/// Importance estimate of D_α(P ‖ Q) from `n` draws of Q.
///
/// The jackknife standard error is reliable only while `(p/q)^α` has a light
/// enough tail under Q; for large α a handful of draws dominate the sum and
/// both the estimate and its error are biased low.
pub fn renyi_divergence_monte_carlo<R, S, LP, LQ>(
    rng: &mut R,
    mut sample_q: S,
    ln_p: LP,
    ln_q: LQ,
    alpha: RenyiOrder,
    n: usize,
) -> Result<MonteCarloEstimate>
where
    R: Rng + ?Sized,
    S: FnMut(&mut R) -> f64,
    LP: Fn(f64) -> f64,
    LQ: Fn(f64) -> f64,
{
    if n < MIN_MONTE_CARLO_SAMPLES {
        return Err(Error::params(format!("Monte Carlo needs at least {MIN_MONTE_CARLO_SAMPLES} samples, got {n}")));
    }
    let a = alpha.value();
    let logs: Vec<f64> = (0..n)
        .map(|_| {
            let x = sample_q(rng);
            a * (ln_p(x) - ln_q(x))
        })
        .collect();
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - shift).exp()).collect();
    let total: f64 = weights.iter().sum();
    let nf = n as f64;
    let estimate = (shift + (total / nf).ln()) / (a - 1.0);
    let loo: Vec<f64> = weights
        .iter()
        .map(|w| (shift + ((total - w).max(f64::MIN_POSITIVE) / (nf - 1.0)).ln()) / (a - 1.0))
        .collect();
    let mean = loo.iter().sum::<f64>() / nf;
    let var = (nf - 1.0) / nf * loo.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    Ok(MonteCarloEstimate { estimate, stderr: var.sqrt() })
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> f64 {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample statistic at significance `level`.
pub fn ks_critical_value(n: usize, m: usize, level: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    (-(level / 2.0).ln() / 2.0).sqrt() * ((n + m) / (n * m)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{TruncGaussian, TruncatedDistribution};
    use crate::mechanism::seeded_rng;

    fn order(a: f64) -> RenyiOrder {
        RenyiOrder::new(a).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let g = GaussianKernel { mean: 0.3, stddev: 0.7 };
        let iv = Interval::new(-1.0, 2.0).unwrap();
        for a in [1.5, 2.0, 16.0, 64.0] {
            let r = renyi_divergence_quadrature(&g, &g, order(a), iv, &OracleOptions::default()).unwrap();
            assert!(r.value.abs() <= 1e-10, "{a}: {}", r.value);
        }
    }

    #[test]
    fn untruncated_gaussian_limit() {
        let p = GaussianKernel { mean: 0.0, stddev: 1.0 };
        let q = GaussianKernel { mean: 1.0, stddev: 1.0 };
        let iv = Interval::new(-40.0, 41.0).unwrap();
        let r = renyi_divergence_quadrature(&p, &q, order(2.0), iv, &OracleOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8, "{}", r.value);
        assert!(r.abs_error_estimate <= 1e-10);
    }

    #[test]
    fn laplace_case_one_is_zero() {
        let p = LaplaceKernel { mean: 0.0, scale: 1.0 };
        let q = LaplaceKernel { mean: 1.0, scale: 1.0 };
        let iv = Interval::new(-5.0, -1.0).unwrap();
        for a in [1.1, 3.0, 64.0] {
            let r = renyi_divergence_quadrature(&p, &q, order(a), iv, &OracleOptions::default()).unwrap();
            assert!(r.value.abs() <= 1e-10);
        }
    }

    #[test]
    fn initial_subdivision_invariance() {
        let p = LaplaceKernel { mean: 0.0, scale: 0.4 };
        let q = LaplaceKernel { mean: 1.0, scale: 0.4 };
        let iv = Interval::new(-0.5, 1.7).unwrap();
        let base = OracleOptions::default();
        let mut doubled = OracleOptions::default();
        doubled.quad.initial_panels *= 2;
        for a in [1.2, 4.0, 32.0] {
            let x = renyi_divergence_quadrature(&p, &q, order(a), iv, &base).unwrap().value;
            let y = renyi_divergence_quadrature(&p, &q, order(a), iv, &doubled).unwrap().value;
            assert!((x - y).abs() <= 2e-10);
            let rev = renyi_divergence_quadrature(&q, &p, order(a), iv, &base).unwrap().value;
            assert!(x >= -1e-10 && rev >= -1e-10);
        }
    }

    #[test]
    fn tiny_budget_fails() {
        let p = GaussianKernel { mean: 0.0, stddev: 1.0 };
        let q = GaussianKernel { mean: 1.0, stddev: 1.0 };
        let mut opts = OracleOptions::default();
        opts.quad.max_evaluations = 100;
        opts.quad.initial_panels = 1;
        let iv = Interval::new(-40.0, 41.0).unwrap();
        assert!(matches!(
            renyi_divergence_quadrature(&p, &q, order(2.0), iv, &opts),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn log_integral_of_exponential() {
        // ∫_0^3 e^{-2x} dx = (1 - e^{-6})/2
        let iv = Interval::new(0.0, 3.0).unwrap();
        let r = log_integral(|x| -2.0 * x, iv, &[], &QuadOptions::default()).unwrap();
        let exact = ((1.0 - (-6f64).exp()) / 2.0).ln();
        assert!((r.value - exact).abs() < 1e-14);
    }

    fn truncated_pair(mean_p: f64, mean_q: f64, s: f64, iv: Interval) -> (TruncGaussian, TruncGaussian) {
        (TruncGaussian::new(mean_p, s, iv).unwrap(), TruncGaussian::new(mean_q, s, iv).unwrap())
    }

    #[test]
    fn monte_carlo_identical_is_zero() {
        let iv = Interval::new(-1.0, 2.0).unwrap();
        let (p, _) = truncated_pair(0.0, 0.0, 1.0, iv);
        let mut rng = seeded_rng(5);
        let r = renyi_divergence_monte_carlo(&mut rng, |r| p.sample(r), |x| p.ln_pdf(x), |x| p.ln_pdf(x), order(2.0), 10_000)
            .unwrap();
        assert!(r.estimate.abs() <= 3.0 * r.stderr + 1e-12);
        assert!(renyi_divergence_monte_carlo(&mut rng, |r| p.sample(r), |x| p.ln_pdf(x), |x| p.ln_pdf(x), order(2.0), 10)
            .is_err());
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature() {
        let mut grid = seeded_rng(2024);
        let mut rng = seeded_rng(99);
        let mut outside = 0;
        for _ in 0..20 {
            let alpha = order(grid.random_range(1.1..4.0));
            let sigma = grid.random_range(0.8..3.0);
            let mu = grid.random_range(0.5..2.0);
            let a = grid.random_range(-3.0..1.0) * mu * sigma;
            let b = a + grid.random_range(0.5..4.0) * mu * sigma;
            let iv = Interval::new(a, b).unwrap();
            let s = mu * sigma;
            let (p, q) = truncated_pair(0.0, mu, s, iv);
            let mc = renyi_divergence_monte_carlo(&mut rng, |r| q.sample(r), |x| p.ln_pdf(x), |x| q.ln_pdf(x), alpha, 20_000)
                .unwrap();
            let exact = renyi_divergence_quadrature(
                &GaussianKernel { mean: 0.0, stddev: s },
                &GaussianKernel { mean: mu, stddev: s },
                alpha,
                iv,
                &OracleOptions::default(),
            )
            .unwrap()
            .value;
            if (mc.estimate - exact).abs() > 3.0 * mc.stderr {
                outside += 1;
            }
        }
        // 3-SE intervals miss with probability ≈ 0.3% each.
        assert!(outside <= 1, "{outside} of 20 outside 3 SE");
    }

    #[test]
    fn monte_carlo_stderr_scaling() {
        let iv = Interval::new(-1.0, 2.0).unwrap();
        let (p, q) = truncated_pair(0.0, 1.0, 1.0, iv);
        let mut rng = seeded_rng(17);
        let small = renyi_divergence_monte_carlo(&mut rng, |r| q.sample(r), |x| p.ln_pdf(x), |x| q.ln_pdf(x), order(2.0), 25_000)
            .unwrap();
        let large = renyi_divergence_monte_carlo(&mut rng, |r| q.sample(r), |x| p.ln_pdf(x), |x| q.ln_pdf(x), order(2.0), 100_000)
            .unwrap();
        let ratio = small.stderr / large.stderr;
        assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn ks_basics() {
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(ks_two_sample(&x, &x), 0.0);
        let y: Vec<f64> = (0..100).map(|i| i as f64 + 1000.0).collect();
        assert_eq!(ks_two_sample(&x, &y), 1.0);
        let c = ks_critical_value(100_000, 100_000, 0.001);
        assert!((c - 0.008_717).abs() < 1e-5, "{c}");
    }
}
