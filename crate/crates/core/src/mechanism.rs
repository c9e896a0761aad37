//! Selective-release Gaussian and Laplace mechanisms.
//!
//! The query answer is clipped to `[0, μ]`, noise is added, and the noisy
//! value is only published once it lands in `[a, b]`. Two samplers produce the
//! same output law: the literal resampling loop and a one-shot inverse-CDF
//! draw from the truncated distribution.
//!
//! Any `rand::Rng` can drive a release. Use [`seeded_rng`] when a run must be
//! reproducible; nothing here assumes a cryptographic generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dist::{Interval, TruncGaussian, TruncLaplace, TruncatedDistribution};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000;

/// Deterministic generator used by the CLI and the test suites.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    Gaussian,
    Laplace,
}

impl std::fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MechanismKind::Gaussian => "gaussian",
            MechanismKind::Laplace => "laplace",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// Resample until the value lands in the interval.
    RejectionLoop,
    /// Invert the truncated CDF at one uniform draw.
    #[default]
    InverseCdf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub sensitivity: f64,
    pub noise_multiplier: f64,
    pub interval: Interval,
}

impl GaussianParams {
    pub fn new(sensitivity: f64, noise_multiplier: f64, interval: Interval) -> Result<Self> {
        let p = GaussianParams { sensitivity, noise_multiplier, interval };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("sensitivity", self.sensitivity)?;
        positive("noise_multiplier", self.noise_multiplier)?;
        Ok(())
    }

    /// Standard deviation of the added noise, μσ.
    pub fn stddev(&self) -> f64 {
        self.sensitivity * self.noise_multiplier
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceParams {
    pub sensitivity: f64,
    pub scale: f64,
    pub interval: Interval,
}

impl LaplaceParams {
    pub fn new(sensitivity: f64, scale: f64, interval: Interval) -> Result<Self> {
        let p = LaplaceParams { sensitivity, scale, interval };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("sensitivity", self.sensitivity)?;
        positive("scale", self.scale)?;
        Ok(())
    }
}

/// Either mechanism's parameters, tagged for serialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "lowercase")]
pub enum MechanismParams {
    Gaussian(GaussianParams),
    Laplace(LaplaceParams),
}

impl MechanismParams {
    pub fn kind(&self) -> MechanismKind {
        match self {
            MechanismParams::Gaussian(_) => MechanismKind::Gaussian,
            MechanismParams::Laplace(_) => MechanismKind::Laplace,
        }
    }

    pub fn interval(&self) -> Interval {
        match self {
            MechanismParams::Gaussian(p) => p.interval,
            MechanismParams::Laplace(p) => p.interval,
        }
    }

    pub fn sensitivity(&self) -> f64 {
        match self {
            MechanismParams::Gaussian(p) => p.sensitivity,
            MechanismParams::Laplace(p) => p.sensitivity,
        }
    }

    /// σ for Gaussian, λ for Laplace.
    pub fn noise_parameter(&self) -> f64 {
        match self {
            MechanismParams::Gaussian(p) => p.noise_multiplier,
            MechanismParams::Laplace(p) => p.scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReleaseRecord {
    pub released_value: f64,
    /// Noise draws consumed; 1 for the inverse-CDF sampler.
    pub attempts: u64,
    pub mechanism: MechanismKind,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::params(format!("{name} must be positive and finite, got {v}")))
    }
}

/// min(max(y, 0), sensitivity)
pub fn clip_output(y: f64, sensitivity: f64) -> Result<f64> {
    positive("sensitivity", sensitivity)?;
    if y.is_nan() {
        return Err(Error::params("query output is NaN"));
    }
    Ok(y.max(0.0).min(sensitivity))
}

fn rejection_loop<R, F>(
    rng: &mut R,
    interval: Interval,
    max_attempts: u64,
    mechanism: MechanismKind,
    mut draw: F,
) -> Result<ReleaseRecord>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> f64,
{
    for attempt in 1..=max_attempts {
        let candidate = draw(rng);
        if interval.contains(candidate) {
            return Ok(ReleaseRecord { released_value: candidate, attempts: attempt, mechanism });
        }
    }
    Err(Error::AttemptsExceeded { max_attempts })
}

fn check_attempts(max_attempts: u64) -> Result<()> {
    if max_attempts == 0 {
        return Err(Error::params("max_attempts must be at least 1"));
    }
    Ok(())
}

/// Gaussian mechanism with selective release.
pub fn gaussian_release<R: Rng + ?Sized>(
    y: f64,
    params: &GaussianParams,
    rng: &mut R,
    max_attempts: u64,
    sampler: Sampler,
) -> Result<ReleaseRecord> {
    params.validate()?;
    check_attempts(max_attempts)?;
    let centre = clip_output(y, params.sensitivity)?;
    let stddev = params.stddev();
    match sampler {
        Sampler::RejectionLoop => rejection_loop(rng, params.interval, max_attempts, MechanismKind::Gaussian, |rng| {
            let z: f64 = rng.sample(StandardNormal);
            centre + stddev * z
        }),
        Sampler::InverseCdf => {
            let d = TruncGaussian::new(centre, stddev, params.interval)?;
            Ok(ReleaseRecord { released_value: d.sample(rng), attempts: 1, mechanism: MechanismKind::Gaussian })
        }
    }
}

/// One Lap(0, scale) draw by inversion of a centred uniform.
fn laplace_noise<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        if u != -0.5 {
            return -scale * u.signum() * (-2.0 * u.abs()).ln_1p();
        }
    }
}

/// Laplace mechanism with selective release.
pub fn laplace_release<R: Rng + ?Sized>(
    y: f64,
    params: &LaplaceParams,
    rng: &mut R,
    max_attempts: u64,
    sampler: Sampler,
) -> Result<ReleaseRecord> {
    params.validate()?;
    check_attempts(max_attempts)?;
    let centre = clip_output(y, params.sensitivity)?;
    match sampler {
        Sampler::RejectionLoop => rejection_loop(rng, params.interval, max_attempts, MechanismKind::Laplace, |rng| {
            centre + laplace_noise(rng, params.scale)
        }),
        Sampler::InverseCdf => {
            let d = TruncLaplace::new(centre, params.scale, params.interval)?;
            Ok(ReleaseRecord { released_value: d.sample(rng), attempts: 1, mechanism: MechanismKind::Laplace })
        }
    }
}

/// Dispatches on the parameter kind.
pub fn release<R: Rng + ?Sized>(
    y: f64,
    params: &MechanismParams,
    rng: &mut R,
    max_attempts: u64,
    sampler: Sampler,
) -> Result<ReleaseRecord> {
    match params {
        MechanismParams::Gaussian(p) => gaussian_release(y, p, rng, max_attempts, sampler),
        MechanismParams::Laplace(p) => laplace_release(y, p, rng, max_attempts, sampler),
    }
}
