//! Truncated normal and truncated Laplace distributions, evaluated in log space.
//!
//! Interval masses are carried as logarithms everywhere. The accountant's
//! closed forms raise masses to powers up to 64 and divide tail masses that
//! are far below the binary64 range, so nothing here returns a raw mass
//! unless the caller asks for it.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::gauss_kronrod_15;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// ln(√(2π))
pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
/// Smallest interval mass a truncated distribution may carry.
pub const MIN_MASS: f64 = 1e-300;
// Above this the log tail comes from the Mills-ratio continued fraction.
const TAIL_SWITCH: f64 = 20.0;

/// Closed truncation interval `[a, b]` with finite `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval", into = "RawInterval")]
pub struct Interval {
    a: f64,
    b: f64,
}

#[derive(Serialize, Deserialize)]
struct RawInterval {
    a: f64,
    b: f64,
}

impl TryFrom<RawInterval> for Interval {
    type Error = Error;
    fn try_from(raw: RawInterval) -> Result<Self> {
        Interval::new(raw.a, raw.b)
    }
}

impl From<Interval> for RawInterval {
    fn from(i: Interval) -> Self {
        RawInterval { a: i.a, b: i.b }
    }
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidInterval { a, b, reason: "bounds must be finite" });
        }
        if !(a < b) {
            return Err(Error::InvalidInterval { a, b, reason: "lower bound must be strictly below upper bound" });
        }
        Ok(Interval { a, b })
    }

    pub fn lower(&self) -> f64 {
        self.a
    }

    pub fn upper(&self) -> f64 {
        self.b
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }
}

/// Standard normal CDF Φ(x).
///
/// Evaluated as `erfc(-x/√2)/2`, which keeps full relative precision in the
/// lower tail. Φ(x) underflows to 0 below x ≈ -38.5; use [`ln_std_normal_cdf`]
/// there.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// ln Q(x) = ln(1 - Φ(x)), finite for every finite `x`.
pub fn ln_std_normal_sf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if x < -TAIL_SWITCH {
        // Q(x) = 1 - Q(-x), with Q(-x) < 3e-89.
        return (-(ln_std_normal_sf(-x).exp())).ln_1p();
    }
    if x <= TAIL_SWITCH {
        return (0.5 * libm::erfc(x * FRAC_1_SQRT_2)).ln();
    }
    -0.5 * x * x - LN_SQRT_2PI + mills_ratio(x).ln()
}

/// ln Φ(x), finite for every finite `x`.
pub fn ln_std_normal_cdf(x: f64) -> f64 {
    ln_std_normal_sf(-x)
}

/// Mills ratio Q(x)/φ(x) for large positive x by backward evaluation of its
/// continued fraction `1/(x + 1/(x + 2/(x + 3/(x + ...))))`.
fn mills_ratio(x: f64) -> f64 {
    let mut t = x;
    for k in (1..=60).rev() {
        t = x + k as f64 / t;
    }
    1.0 / t
}

/// ln(Φ(hi) - Φ(lo)) without forming either CDF value when that would lose
/// digits. Accepts infinite endpoints.
pub fn log_phi_diff(lo: f64, hi: f64) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() || !(lo < hi) {
        return Err(Error::params(format!("log_phi_diff needs lo < hi, got ({lo}, {hi})")));
    }
    let width = hi - lo;
    if width.is_finite() && width * lo.abs().max(hi.abs()).max(1.0) <= 1.0 {
        return Ok(log_phi_diff_narrow(lo, hi));
    }
    if lo >= 0.0 {
        Ok(log_upper_tail_diff(lo, hi))
    } else if hi <= 0.0 {
        Ok(log_upper_tail_diff(-hi, -lo))
    } else {
        let outside = ln_std_normal_sf(hi).exp() + ln_std_normal_sf(-lo).exp();
        Ok((-outside).ln_1p())
    }
}

/// ln P(lo ≤ X ≤ hi) for X ~ N(mean, stddev²).
///
/// Unlike `log_phi_diff` on standardised endpoints, the narrow branch works
/// from `hi - lo` directly, so short intervals far from the mean keep their
/// width to full precision.
pub fn ln_normal_mass(mean: f64, stddev: f64, lo: f64, hi: f64) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() || !(lo < hi) {
        return Err(Error::params(format!("ln_normal_mass needs lo < hi, got ({lo}, {hi})")));
    }
    let (zl, zh) = ((lo - mean) / stddev, (hi - mean) / stddev);
    let width = (hi - lo) / stddev;
    if !(width.is_finite() && width * zl.abs().max(zh.abs()).max(1.0) <= 1.0) {
        return log_phi_diff(zl, zh);
    }
    let peak = mean.clamp(lo, hi);
    let zp = (peak - mean) / stddev;
    let two_var = 2.0 * stddev * stddev;
    // exp(-((x - m)² - (p - m)²) / 2s²), factored to avoid cancellation.
    let kernel = |x: f64| (-((x - peak) * ((x - mean) + (peak - mean))) / two_var).exp();
    let (integral, _) = gauss_kronrod_15(&kernel, lo, hi);
    Ok(-0.5 * zp * zp - LN_SQRT_2PI + (integral / stddev).ln())
}

/// ln(Q(lo) - Q(hi)) for 0 ≤ lo < hi.
fn log_upper_tail_diff(lo: f64, hi: f64) -> f64 {
    let lq_lo = ln_std_normal_sf(lo);
    let lq_hi = ln_std_normal_sf(hi);
    lq_lo + (-(lq_hi - lq_lo).exp_m1()).ln()
}

/// Narrow intervals: integrate φ directly. With the kernel shifted to its
/// largest value on the interval the exponent varies by at most ~1.5, so a
/// single 15-point Kronrod panel is exact to rounding.
fn log_phi_diff_narrow(lo: f64, hi: f64) -> f64 {
    let peak = if lo <= 0.0 && hi >= 0.0 {
        0.0
    } else if lo > 0.0 {
        lo
    } else {
        hi
    };
    let kernel = |t: f64| (-0.5 * (t - peak) * (t + peak)).exp();
    let (integral, _) = gauss_kronrod_15(&kernel, lo, hi);
    -0.5 * peak * peak - LN_SQRT_2PI + integral.ln()
}

/// ln of the Laplace(0, 1) mass on `[lo, hi]`.
fn ln_std_laplace_mass(lo: f64, hi: f64) -> f64 {
    const LN_HALF: f64 = -std::f64::consts::LN_2;
    if hi <= 0.0 {
        LN_HALF + hi + (-(lo - hi).exp_m1()).ln()
    } else if lo >= 0.0 {
        LN_HALF - lo + (-(lo - hi).exp_m1()).ln()
    } else {
        LN_HALF + (-lo.exp_m1() - (-hi).exp_m1()).ln()
    }
}

/// A parent distribution restricted to an interval and renormalised.
pub trait TruncatedDistribution {
    fn interval(&self) -> Interval;

    /// Log density; `-inf` outside the interval.
    fn ln_pdf(&self, x: f64) -> f64;

    /// ln P(X ≤ x).
    fn ln_cdf(&self, x: f64) -> f64;

    /// ln P(X ≥ x).
    fn ln_sf(&self, x: f64) -> f64;

    fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    fn cdf(&self, x: f64) -> f64 {
        self.ln_cdf(x).exp()
    }

    /// Quantile of the truncated law. Always returns a point of the interval.
    ///
    /// Safeguarded Newton on the log CDF (or log survival function for
    /// `u > 1/2`), bisecting whenever a step leaves the current bracket.
    fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::InvalidProbability { name: "u", value: u });
        }
        let interval = self.interval();
        let lower_branch = u <= 0.5;
        let target = if lower_branch { u.ln() } else { (1.0 - u).ln() };
        // g is increasing in x and vanishes at the quantile.
        let g = |x: f64| {
            if lower_branch {
                self.ln_cdf(x) - target
            } else {
                target - self.ln_sf(x)
            }
        };
        let slope = |x: f64| {
            let tail = if lower_branch { self.ln_cdf(x) } else { self.ln_sf(x) };
            (self.ln_pdf(x) - tail).exp()
        };

        let (mut lo, mut hi) = (interval.lower(), interval.upper());
        let mut x = 0.5 * (lo + hi);
        for _ in 0..400 {
            let gx = g(x);
            if gx == 0.0 {
                return Ok(x);
            }
            if gx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let step = gx / slope(x);
            let mut next = x - step;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let scale = x.abs().max(1e-300);
            if (next - x).abs() <= 2.0 * f64::EPSILON * scale || hi - lo <= 2.0 * f64::EPSILON * scale {
                return Ok(next.clamp(interval.lower(), interval.upper()));
            }
            x = next;
        }
        Ok(x.clamp(interval.lower(), interval.upper()))
    }

    /// One exact draw by inversion.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64
    where
        Self: Sized,
    {
        let u: f64 = rng.sample(Open01);
        self.inverse_cdf(u).expect("Open01 draws lie in (0, 1)")
    }
}

/// Normal law N(mean, stddev²) truncated to an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncGaussian {
    mean: f64,
    stddev: f64,
    interval: Interval,
    ln_mass: f64,
}

impl TruncGaussian {
    pub fn new(mean: f64, stddev: f64, interval: Interval) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::params(format!("mean must be finite, got {mean}")));
        }
        if !(stddev > 0.0 && stddev.is_finite()) {
            return Err(Error::params(format!("stddev must be positive and finite, got {stddev}")));
        }
        let ln_mass = ln_normal_mass(mean, stddev, interval.lower(), interval.upper())?;
        if !(ln_mass >= MIN_MASS.ln()) {
            return Err(Error::DegenerateMass(format!(
                "normal({mean}, {stddev}) puts ln-mass {ln_mass} on [{}, {}], below ln({MIN_MASS:e})",
                interval.lower(),
                interval.upper()
            )));
        }
        Ok(TruncGaussian { mean, stddev, interval, ln_mass })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn stddev(&self) -> f64 {
        self.stddev
    }

    /// ln of the parent mass on the interval.
    pub fn ln_mass(&self) -> f64 {
        self.ln_mass
    }

    pub fn mass(&self) -> f64 {
        self.ln_mass.exp()
    }

    fn z(&self, x: f64) -> f64 {
        (x - self.mean) / self.stddev
    }
}

impl TruncatedDistribution for TruncGaussian {
    fn interval(&self) -> Interval {
        self.interval
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        if !self.interval.contains(x) {
            return f64::NEG_INFINITY;
        }
        let z = self.z(x);
        -0.5 * z * z - self.stddev.ln() - LN_SQRT_2PI - self.ln_mass
    }

    fn ln_cdf(&self, x: f64) -> f64 {
        let a = self.interval.lower();
        if x >= self.interval.upper() {
            0.0
        } else if x <= a {
            f64::NEG_INFINITY
        } else {
            ln_normal_mass(self.mean, self.stddev, a, x).map_or(f64::NEG_INFINITY, |l| (l - self.ln_mass).min(0.0))
        }
    }

    fn ln_sf(&self, x: f64) -> f64 {
        let b = self.interval.upper();
        if x <= self.interval.lower() {
            0.0
        } else if x >= b {
            f64::NEG_INFINITY
        } else {
            ln_normal_mass(self.mean, self.stddev, x, b).map_or(f64::NEG_INFINITY, |l| (l - self.ln_mass).min(0.0))
        }
    }
}

/// Laplace law Lap(mean, scale) truncated to an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncLaplace {
    mean: f64,
    scale: f64,
    interval: Interval,
    ln_mass: f64,
}

impl TruncLaplace {
    pub fn new(mean: f64, scale: f64, interval: Interval) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::params(format!("mean must be finite, got {mean}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::params(format!("scale must be positive and finite, got {scale}")));
        }
        let lo = (interval.lower() - mean) / scale;
        let hi = (interval.upper() - mean) / scale;
        let ln_mass = if lo < hi { ln_std_laplace_mass(lo, hi) } else { f64::NEG_INFINITY };
        if !(ln_mass >= MIN_MASS.ln()) {
            return Err(Error::DegenerateMass(format!(
                "laplace({mean}, {scale}) puts ln-mass {ln_mass} on [{}, {}], below ln({MIN_MASS:e})",
                interval.lower(),
                interval.upper()
            )));
        }
        Ok(TruncLaplace { mean, scale, interval, ln_mass })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn ln_mass(&self) -> f64 {
        self.ln_mass
    }

    pub fn mass(&self) -> f64 {
        self.ln_mass.exp()
    }

    fn t(&self, x: f64) -> f64 {
        (x - self.mean) / self.scale
    }
}

impl TruncatedDistribution for TruncLaplace {
    fn interval(&self) -> Interval {
        self.interval
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        if !self.interval.contains(x) {
            return f64::NEG_INFINITY;
        }
        -self.t(x).abs() - (2.0 * self.scale).ln() - self.ln_mass
    }

    fn ln_cdf(&self, x: f64) -> f64 {
        let (ta, tx) = (self.t(self.interval.lower()), self.t(x));
        if x >= self.interval.upper() {
            0.0
        } else if tx <= ta {
            f64::NEG_INFINITY
        } else {
            (ln_std_laplace_mass(ta, tx) - self.ln_mass).min(0.0)
        }
    }

    fn ln_sf(&self, x: f64) -> f64 {
        let (tx, tb) = (self.t(x), self.t(self.interval.upper()));
        if x <= self.interval.lower() {
            0.0
        } else if tx >= tb {
            f64::NEG_INFINITY
        } else {
            (ln_std_laplace_mass(tx, tb) - self.ln_mass).min(0.0)
        }
    }
}

/// Density of the truncated normal at `x`.
pub fn trunc_gaussian_pdf(d: &TruncGaussian, x: f64) -> f64 {
    d.pdf(x)
}

/// Density of the truncated Laplace law at `x`.
pub fn trunc_laplace_pdf(d: &TruncLaplace, x: f64) -> f64 {
    d.pdf(x)
}

/// Quantile `F⁻¹(F(a) + u (F(b) - F(a)))` of any truncated law.
pub fn trunc_inverse_cdf<D: TruncatedDistribution>(d: &D, u: f64) -> Result<f64> {
    d.inverse_cdf(u)
}
