//! Rényi-DP accounting for the selective-release mechanisms.
//!
//! The neighbouring-dataset extremes after clipping are the outputs `0` and
//! `μ`, so every divergence here compares the noise law centred at 0 with the
//! one centred at μ, both truncated to the release interval.
//!
//! Truncated Gaussian, with `s = μσ` and `m(c) = Φ((b - cμ)/s) - Φ((a - cμ)/s)`:
//!
//! ```text
//! D(f₀ ‖ f_μ) = α/2σ² + ln[ m(1)^{α-1} m(1-α) / m(0)^α ] / (α-1)
//! D(f_μ ‖ f₀) = α/2σ² + ln[ m(0)^{α-1} m(α)   / m(1)^α ] / (α-1)
//! ```
//!
//! Both bracketed ratios are at most 1 because `ln m` is concave, so the
//! truncated mechanism never costs more than the untruncated α/2σ².
//!
//! Truncated Laplace: the divergence vanishes when `[a, b]` lies left of 0 or
//! right of μ (the two densities are proportional there). Inside `(0, μ)` both
//! directions equal
//!
//! ```text
//! ln[ (t^{1-α} - t^α) / ((2α-1)(1-t)) ] / (α-1),   t = exp(-(b-a)/λ),
//! ```
//!
//! which holds for every real α > 1. Any other interval is integrated
//! numerically and tagged as such.

use serde::{Deserialize, Serialize};

use crate::dist::{ln_normal_mass, Interval};
use crate::error::{Error, Result};
use crate::mechanism::{GaussianParams, LaplaceParams, MechanismKind, MechanismParams};
use crate::oracle::{renyi_divergence_quadrature, LaplaceKernel, OracleOptions};

/// Rényi order α > 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RenyiOrder(f64);

impl RenyiOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 1.0 && alpha.is_finite() {
            Ok(RenyiOrder(alpha))
        } else {
            Err(Error::InvalidOrder(alpha))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for RenyiOrder {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        RenyiOrder::new(v)
    }
}

impl From<RenyiOrder> for f64 {
    fn from(a: RenyiOrder) -> f64 {
        a.0
    }
}

/// `{1 + 2^k/10 : k = 0..6} ∪ {2, 3, ..., 64}`, ascending.
pub fn default_alpha_grid() -> Vec<RenyiOrder> {
    let mut alphas: Vec<f64> = (0..=6).map(|k| 1.0 + f64::from(1u32 << k) / 10.0).collect();
    alphas.extend((2..=64).map(f64::from));
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    alphas.into_iter().map(RenyiOrder).collect()
}

pub fn alpha_grid(values: &[f64]) -> Result<Vec<RenyiOrder>> {
    let mut v = values.iter().map(|&a| RenyiOrder::new(a)).collect::<Result<Vec<_>>>()?;
    v.sort_by(|x, y| x.0.total_cmp(&y.0));
    v.dedup();
    if v.is_empty() {
        return Err(Error::EmptyCurve);
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdpPoint {
    pub alpha: RenyiOrder,
    pub rdp: f64,
}

/// RDP bound as a function of the order, sampled on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawCurve", into = "RawCurve")]
pub struct RdpCurve {
    points: Vec<RdpPoint>,
}

#[derive(Serialize, Deserialize)]
struct RawCurve {
    points: Vec<RdpPoint>,
}

impl TryFrom<RawCurve> for RdpCurve {
    type Error = Error;
    fn try_from(raw: RawCurve) -> Result<Self> {
        RdpCurve::from_points(raw.points.into_iter().map(|p| (p.alpha.0, p.rdp)))
    }
}

impl From<RdpCurve> for RawCurve {
    fn from(c: RdpCurve) -> Self {
        RawCurve { points: c.points }
    }
}

// Closed forms can land a few ulps below zero.
const NEGATIVE_SLACK: f64 = 1e-12;

impl RdpCurve {
    /// Builds a curve from unordered `(alpha, rdp)` pairs. Repeated orders keep
    /// the smallest bound; values within 1e-12 below zero are clamped to 0.
    pub fn from_points<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> Result<Self> {
        let mut points = Vec::new();
        for (alpha, rdp) in pairs {
            let alpha = RenyiOrder::new(alpha)?;
            if rdp.is_nan() || rdp < -NEGATIVE_SLACK {
                return Err(Error::params(format!("RDP value {rdp} at alpha {} is negative", alpha.0)));
            }
            points.push(RdpPoint { alpha, rdp: rdp.max(0.0) });
        }
        points.sort_by(|x, y| x.alpha.0.total_cmp(&y.alpha.0).then(x.rdp.total_cmp(&y.rdp)));
        points.dedup_by(|later, kept| later.alpha == kept.alpha);
        Ok(RdpCurve { points })
    }

    pub fn points(&self) -> &[RdpPoint] {
        &self.points
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.alpha.0).collect()
    }

    pub fn rdp_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rdp).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The curve of `k` sequential releases of this mechanism.
    pub fn scaled(&self, k: u64) -> RdpCurve {
        RdpCurve {
            points: self.points.iter().map(|p| RdpPoint { alpha: p.alpha, rdp: p.rdp * k as f64 }).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// D(f₀ ‖ f_μ)
    Forward,
    /// D(f_μ ‖ f₀)
    Reverse,
    #[default]
    SymmetricMax,
}

/// Provenance of a single RDP value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    #[serde(rename = "closed-form")]
    ClosedForm,
    #[serde(rename = "untruncated")]
    Untruncated,
    I,
    II,
    III,
    #[serde(rename = "numeric")]
    Numeric,
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CaseTag::ClosedForm => "closed-form",
            CaseTag::Untruncated => "untruncated",
            CaseTag::I => "I",
            CaseTag::II => "II",
            CaseTag::III => "III",
            CaseTag::Numeric => "numeric",
        })
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::params(format!("{name} must be positive and finite, got {v}")))
    }
}

/// α / (2σ²)
pub fn gaussian_rdp_untruncated(alpha: RenyiOrder, sigma: f64) -> Result<f64> {
    positive("sigma", sigma)?;
    Ok(alpha.0 / (2.0 * sigma * sigma))
}

/// Untruncated Laplace RDP, evaluated as a log-sum-exp so large μα/λ does not
/// overflow.
pub fn laplace_rdp_untruncated(alpha: RenyiOrder, mu: f64, lambda: f64) -> Result<f64> {
    positive("mu", mu)?;
    positive("lambda", lambda)?;
    let a = alpha.0;
    let k = 2.0 * a - 1.0;
    let up = (a / k).ln() + (a - 1.0) * mu / lambda;
    let down = ((a - 1.0) / k).ln() - a * mu / lambda;
    Ok(log_add_exp(up, down) / (a - 1.0))
}

pub(crate) fn log_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// ln A and ln B for the truncated Gaussian pair; both are ≤ 0.
///
/// `A = m(1)^{α-1} m(1-α) / m(0)^α` and `B = m(0)^{α-1} m(α) / m(1)^α`.
pub fn gaussian_log_ab(alpha: RenyiOrder, p: &GaussianParams) -> Result<(f64, f64)> {
    p.validate()?;
    let a = alpha.0;
    let mu = p.sensitivity;
    let s = p.stddev();
    let (lo, hi) = (p.interval.lower(), p.interval.upper());
    let ln_mass = |centre_mult: f64| -> Result<f64> {
        let centre = centre_mult * mu;
        let v = ln_normal_mass(centre, s, lo, hi)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::DegenerateMass(format!(
                "normal mass of [{lo}, {hi}] around {centre} with stddev {s} underflows"
            )))
        }
    };
    let m0 = ln_mass(0.0)?;
    let m1 = ln_mass(1.0)?;
    let m_fwd = ln_mass(1.0 - a)?;
    let m_rev = ln_mass(a)?;
    let ln_a = (a - 1.0) * m1 + m_fwd - a * m0;
    let ln_b = (a - 1.0) * m0 + m_rev - a * m1;
    Ok((ln_a, ln_b))
}

/// Closed-form RDP of the truncated Gaussian mechanism.
pub fn gaussian_rdp_truncated(alpha: RenyiOrder, p: &GaussianParams, direction: Direction) -> Result<f64> {
    let base = gaussian_rdp_untruncated(alpha, p.noise_multiplier)?;
    let (ln_a, ln_b) = gaussian_log_ab(alpha, p)?;
    let k = alpha.0 - 1.0;
    let fwd = base + ln_a / k;
    let rev = base + ln_b / k;
    Ok(match direction {
        Direction::Forward => fwd,
        Direction::Reverse => rev,
        Direction::SymmetricMax => fwd.max(rev),
    })
}

/// Which geometry an interval falls into relative to the outputs `0` and `μ`.
pub fn laplace_case(sensitivity: f64, interval: Interval) -> CaseTag {
    let (a, b) = (interval.lower(), interval.upper());
    if b < 0.0 {
        CaseTag::I
    } else if a > sensitivity {
        CaseTag::II
    } else if 0.0 < a && b < sensitivity {
        CaseTag::III
    } else {
        CaseTag::Numeric
    }
}

/// Closed form for intervals strictly inside `(0, μ)`; independent of μ.
pub fn laplace_case3_closed_form(alpha: RenyiOrder, lambda: f64, interval: Interval) -> Result<f64> {
    positive("lambda", lambda)?;
    let a = alpha.0;
    let k = 2.0 * a - 1.0;
    let u = interval.width() / lambda;
    // ln[(e^{(α-1)u} - e^{-αu}) / (k (1 - e^{-u}))]
    let ln_ratio = (a - 1.0) * u + (-(-k * u).exp_m1()).ln() - k.ln() - (-(-u).exp_m1()).ln();
    Ok(ln_ratio / (a - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceRdp {
    pub value: f64,
    pub case: CaseTag,
}

/// Truncated Laplace RDP, symmetric over both orderings of the neighbours.
pub fn laplace_rdp_truncated(alpha: RenyiOrder, p: &LaplaceParams) -> Result<LaplaceRdp> {
    p.validate()?;
    let case = laplace_case(p.sensitivity, p.interval);
    let value = match case {
        CaseTag::I | CaseTag::II => 0.0,
        CaseTag::III => laplace_case3_closed_form(alpha, p.scale, p.interval)?,
        _ => laplace_rdp_numeric(alpha, p, Direction::SymmetricMax)?,
    };
    Ok(LaplaceRdp { value, case })
}

/// Quadrature value of the truncated Laplace divergence for any interval.
pub fn laplace_rdp_numeric(alpha: RenyiOrder, p: &LaplaceParams, direction: Direction) -> Result<f64> {
    p.validate()?;
    let zero = LaplaceKernel { mean: 0.0, scale: p.scale };
    let shifted = LaplaceKernel { mean: p.sensitivity, scale: p.scale };
    // Large divergences (small λ) cannot reach an absolute 1e-10.
    let opts = OracleOptions { rel_tol: 1e-11, ..OracleOptions::default() };
    let fwd = || renyi_divergence_quadrature(&zero, &shifted, alpha, p.interval, &opts).map(|r| r.value);
    let rev = || renyi_divergence_quadrature(&shifted, &zero, alpha, p.interval, &opts).map(|r| r.value);
    Ok(match direction {
        Direction::Forward => fwd()?,
        Direction::Reverse => rev()?,
        Direction::SymmetricMax => fwd()?.max(rev()?),
    })
}

/// (R + ln((α-1)/α) - (ln δ + ln α)/(α-1))
pub fn rdp_to_dp(rdp: f64, alpha: RenyiOrder, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if rdp.is_nan() || rdp < 0.0 {
        return Err(Error::params(format!("RDP value must be nonnegative, got {rdp}")));
    }
    let a = alpha.0;
    Ok(rdp + (-1.0 / a).ln_1p() - (delta.ln() + a.ln()) / (a - 1.0))
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability { name: "delta", value: delta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpGuarantee {
    pub epsilon: f64,
    pub delta: f64,
    pub realized_alpha: RenyiOrder,
}

/// Converts at every order of the curve and keeps the smallest ε.
pub fn best_epsilon(curve: &RdpCurve, delta: f64) -> Result<DpGuarantee> {
    check_delta(delta)?;
    let mut best: Option<DpGuarantee> = None;
    for p in curve.points() {
        let epsilon = rdp_to_dp(p.rdp, p.alpha, delta)?;
        if best.is_none_or(|b| epsilon < b.epsilon) {
            best = Some(DpGuarantee { epsilon, delta, realized_alpha: p.alpha });
        }
    }
    best.ok_or(Error::EmptyCurve)
}

/// Pointwise sum of curves sharing one α grid.
pub fn compose(curves: &[RdpCurve]) -> Result<RdpCurve> {
    let (first, rest) = curves.split_first().ok_or(Error::EmptyCurve)?;
    let mut points = first.points.clone();
    for c in rest {
        if c.points.len() != points.len() || c.points.iter().zip(&points).any(|(x, y)| x.alpha != y.alpha) {
            return Err(Error::MismatchedGrids);
        }
        for (acc, p) in points.iter_mut().zip(&c.points) {
            acc.rdp += p.rdp;
        }
    }
    Ok(RdpCurve { points })
}

/// Truncated RDP curve of a mechanism plus the provenance tag of each point.
pub fn mechanism_curve(params: &MechanismParams, grid: &[RenyiOrder]) -> Result<(RdpCurve, Vec<CaseTag>)> {
    mechanism_curve_directed(params, grid, Direction::SymmetricMax)
}

pub fn mechanism_curve_directed(
    params: &MechanismParams,
    grid: &[RenyiOrder],
    direction: Direction,
) -> Result<(RdpCurve, Vec<CaseTag>)> {
    let mut pairs = Vec::with_capacity(grid.len());
    let mut tags = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let (v, tag) = match params {
            MechanismParams::Gaussian(p) => (gaussian_rdp_truncated(alpha, p, direction)?, CaseTag::ClosedForm),
            MechanismParams::Laplace(p) => match (laplace_case(p.sensitivity, p.interval), direction) {
                (CaseTag::Numeric, Direction::Forward | Direction::Reverse) => {
                    (laplace_rdp_numeric(alpha, p, direction)?, CaseTag::Numeric)
                }
                _ => {
                    let r = laplace_rdp_truncated(alpha, p)?;
                    (r.value, r.case)
                }
            },
        };
        pairs.push((alpha.0, v));
        tags.push(tag);
    }
    Ok((RdpCurve::from_points(pairs)?, tags))
}

/// Curve of the same mechanism without truncation.
pub fn untruncated_curve(params: &MechanismParams, grid: &[RenyiOrder]) -> Result<RdpCurve> {
    let pairs = grid
        .iter()
        .map(|&alpha| {
            let v = match params {
                MechanismParams::Gaussian(p) => gaussian_rdp_untruncated(alpha, p.noise_multiplier)?,
                MechanismParams::Laplace(p) => laplace_rdp_untruncated(alpha, p.sensitivity, p.scale)?,
            };
            Ok((alpha.0, v))
        })
        .collect::<Result<Vec<_>>>()?;
    RdpCurve::from_points(pairs)
}

/// Accountant output in its serialized shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountantReport {
    pub mechanism: MechanismKind,
    pub params: MechanismParams,
    pub direction: Direction,
    pub alpha_grid: Vec<f64>,
    pub rdp: Vec<f64>,
    pub rdp_untruncated: Vec<f64>,
    pub case_tags: Vec<CaseTag>,
    pub epsilon: f64,
    pub delta: f64,
    pub realized_alpha: f64,
}

pub fn account(params: &MechanismParams, grid: &[RenyiOrder], delta: f64, direction: Direction) -> Result<AccountantReport> {
    let (curve, case_tags) = mechanism_curve_directed(params, grid, direction)?;
    let bound = untruncated_curve(params, grid)?;
    let dp = best_epsilon(&curve, delta)?;
    Ok(AccountantReport {
        mechanism: params.kind(),
        params: *params,
        direction,
        alpha_grid: curve.alphas(),
        rdp: curve.rdp_values(),
        rdp_untruncated: bound.rdp_values(),
        case_tags,
        epsilon: dp.epsilon,
        delta,
        realized_alpha: dp.realized_alpha.value(),
    })
}
