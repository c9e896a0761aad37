//! Executable checks of the inequalities behind the accountant.
//!
//! Every check maps a grid point to `(lhs, rhs)` and flags the point when
//! `lhs - rhs > tolerance`. Grid points are evaluated in parallel; reports keep
//! grid order.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accountant::{
    gaussian_log_ab, gaussian_rdp_untruncated, laplace_case3_closed_form, laplace_rdp_numeric, laplace_rdp_truncated,
    laplace_rdp_untruncated, log_add_exp, Direction, RenyiOrder,
};
use crate::dist::Interval;
use crate::error::{Error, Result};
use crate::mechanism::{GaussianParams, LaplaceParams};
use crate::oracle::{renyi_divergence_quadrature, GaussianKernel, LaplaceKernel, OracleOptions};

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub params: Params,
    pub lhs: f64,
    pub rhs: f64,
}

/// A grid point whose evaluation returned an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationFailure {
    pub params: Params,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub theorem: String,
    pub grid_size: usize,
    pub violations: Vec<Violation>,
    pub failures: Vec<EvaluationFailure>,
    /// Largest `lhs - rhs` seen on the grid.
    pub max_slack: f64,
    pub tolerance: f64,
    /// Recorded-only reports never fail a suite.
    pub asserted: bool,
}

impl PropertyReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty() && self.failures.is_empty()
    }

    pub fn passed(&self) -> bool {
        !self.asserted || self.holds()
    }

    /// Violations ordered from the largest slack down.
    pub fn worst(&self, k: usize) -> Vec<&Violation> {
        let mut v: Vec<&Violation> = self.violations.iter().collect();
        v.sort_by(|x, y| (y.lhs - y.rhs).total_cmp(&(x.lhs - x.rhs)));
        v.truncate(k);
        v
    }
}

fn build_report(
    theorem: &str,
    tolerance: f64,
    asserted: bool,
    outcomes: Vec<(Params, Result<(f64, f64)>)>,
) -> Result<PropertyReport> {
    if outcomes.is_empty() {
        return Err(Error::params(format!("grid for {theorem} is empty")));
    }
    let grid_size = outcomes.len();
    let mut violations = Vec::new();
    let mut failures = Vec::new();
    let mut max_slack = f64::NEG_INFINITY;
    for (params, outcome) in outcomes {
        match outcome {
            Ok((lhs, rhs)) => {
                let slack = lhs - rhs;
                if slack.is_nan() {
                    failures.push(EvaluationFailure { params, message: "NaN comparison".into() });
                    continue;
                }
                max_slack = max_slack.max(slack);
                if slack > tolerance {
                    violations.push(Violation { params, lhs, rhs });
                }
            }
            Err(e) => failures.push(EvaluationFailure { params, message: e.to_string() }),
        }
    }
    if !max_slack.is_finite() {
        // Only reachable when every point failed; keep the JSON numeric.
        max_slack = f64::MAX;
    }
    Ok(PropertyReport { theorem: theorem.to_string(), grid_size, violations, failures, max_slack, tolerance, asserted })
}

fn params<const N: usize>(pairs: [(&str, f64); N]) -> Params {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Closed forms under test, swappable so the detectors can be checked
/// against a deliberately wrong implementation.
#[derive(Clone, Copy)]
pub struct ClosedForms {
    pub gaussian_log_ab: fn(RenyiOrder, &GaussianParams) -> Result<(f64, f64)>,
    pub laplace_case3: fn(RenyiOrder, f64, Interval) -> Result<f64>,
}

impl ClosedForms {
    pub const SHIPPED: ClosedForms = ClosedForms { gaussian_log_ab, laplace_case3: laplace_case3_closed_form };

    /// Sign-flipped Gaussian log ratios and an inflated Case III value.
    pub const CORRUPTED: ClosedForms = ClosedForms { gaussian_log_ab: corrupted_log_ab, laplace_case3: corrupted_case3 };

    /// Directed truncated Gaussian RDP built from `gaussian_log_ab`.
    pub fn gaussian_rdp(&self, alpha: RenyiOrder, p: &GaussianParams, direction: Direction) -> Result<f64> {
        let base = gaussian_rdp_untruncated(alpha, p.noise_multiplier)?;
        let (ln_a, ln_b) = (self.gaussian_log_ab)(alpha, p)?;
        let k = alpha.value() - 1.0;
        Ok(match direction {
            Direction::Forward => base + ln_a / k,
            Direction::Reverse => base + ln_b / k,
            Direction::SymmetricMax => base + ln_a.max(ln_b) / k,
        })
    }
}

impl Default for ClosedForms {
    fn default() -> Self {
        ClosedForms::SHIPPED
    }
}

fn corrupted_log_ab(alpha: RenyiOrder, p: &GaussianParams) -> Result<(f64, f64)> {
    let (a, b) = gaussian_log_ab(alpha, p)?;
    Ok((1e-3 - 0.5 * a, 1e-3 - 0.5 * b))
}

fn corrupted_case3(alpha: RenyiOrder, lambda: f64, interval: Interval) -> Result<f64> {
    Ok(laplace_case3_closed_form(alpha, lambda, interval)? * 1.01 + 1e-6)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPoint {
    pub alpha: RenyiOrder,
    pub params: GaussianParams,
}

impl GaussianPoint {
    fn describe(&self) -> Params {
        params([
            ("alpha", self.alpha.value()),
            ("sigma", self.params.noise_multiplier),
            ("mu", self.params.sensitivity),
            ("a", self.params.interval.lower()),
            ("b", self.params.interval.upper()),
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacePoint {
    pub alpha: RenyiOrder,
    pub params: LaplaceParams,
}

impl LaplacePoint {
    fn describe(&self) -> Params {
        params([
            ("alpha", self.alpha.value()),
            ("lambda", self.params.scale),
            ("mu", self.params.sensitivity),
            ("a", self.params.interval.lower()),
            ("b", self.params.interval.upper()),
        ])
    }
}

/// ln A ≤ 0 and ln B ≤ 0 at every grid point.
pub fn check_theorem_ab(grid: &[GaussianPoint], forms: &ClosedForms) -> Result<PropertyReport> {
    let outcomes = grid
        .par_iter()
        .map(|pt| (pt.describe(), (forms.gaussian_log_ab)(pt.alpha, &pt.params).map(|(a, b)| (a.max(b), 0.0))))
        .collect();
    build_report("gaussian-ab", 1e-12, true, outcomes)
}

/// Symmetric-max truncated Gaussian RDP ≤ α/(2σ²).
pub fn check_gaussian_bound(grid: &[GaussianPoint], forms: &ClosedForms) -> Result<PropertyReport> {
    let outcomes = grid
        .par_iter()
        .map(|pt| {
            let r = forms.gaussian_rdp(pt.alpha, &pt.params, Direction::SymmetricMax).and_then(|v| {
                Ok((v, gaussian_rdp_untruncated(pt.alpha, pt.params.noise_multiplier)?))
            });
            (pt.describe(), r)
        })
        .collect();
    build_report("gaussian-untruncated-bound", 1e-12, true, outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JensenPoint {
    pub mu: f64,
    pub lambda: f64,
    pub alpha: RenyiOrder,
}

/// `1 ≤ α/(2α-1)·e^{(α-1)μ/λ} + (α-1)/(2α-1)·e^{-αμ/λ}`, compared in log space.
pub fn check_jensen_bound(grid: &[JensenPoint]) -> Result<PropertyReport> {
    let outcomes = grid
        .par_iter()
        .map(|pt| {
            let a = pt.alpha.value();
            let k = 2.0 * a - 1.0;
            let r = pt.mu / pt.lambda;
            let rhs = log_add_exp((a / k).ln() + (a - 1.0) * r, ((a - 1.0) / k).ln() - a * r);
            (params([("mu", pt.mu), ("lambda", pt.lambda), ("alpha", a)]), Ok((0.0, rhs)))
        })
        .collect();
    build_report("jensen", 1e-12, true, outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlopeFunction {
    /// `t^x` with `0 < t < 1`.
    Exp { base: f64 },
    Affine { slope: f64, intercept: f64 },
}

impl SlopeFunction {
    fn eval(&self, x: f64) -> f64 {
        match *self {
            SlopeFunction::Exp { base } => base.powf(x),
            SlopeFunction::Affine { slope, intercept } => slope * x + intercept,
        }
    }

    /// ln |secant slope| on `[lo, hi]`, or ln |f′(lo)| when `lo == hi`.
    fn ln_abs_slope(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            SlopeFunction::Exp { base } => {
                let ln_t = base.ln();
                let d = hi - lo;
                if d == 0.0 {
                    lo * ln_t + ln_t.abs().ln()
                } else {
                    lo * ln_t + (d * ln_t).exp_m1().abs().ln() - d.ln()
                }
            }
            SlopeFunction::Affine { slope, .. } => {
                let d = hi - lo;
                if d == 0.0 {
                    slope.abs().ln()
                } else {
                    ((self.eval(hi) - self.eval(lo)) / d).abs().ln()
                }
            }
        }
    }
}

/// Points `x₃ < x₁ ≤ x₂ < x₄` with a common midpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopePoint {
    pub function: SlopeFunction,
    pub centre: f64,
    pub inner_half_width: f64,
    pub outer_half_width: f64,
}

impl SlopePoint {
    fn describe(&self) -> Params {
        let mut p = params([
            ("x1", self.centre - self.inner_half_width),
            ("x2", self.centre + self.inner_half_width),
            ("x3", self.centre - self.outer_half_width),
            ("x4", self.centre + self.outer_half_width),
        ]);
        match self.function {
            SlopeFunction::Exp { base } => {
                p.insert("t0".into(), base);
            }
            SlopeFunction::Affine { slope, intercept } => {
                p.insert("slope".into(), slope);
                p.insert("intercept".into(), intercept);
            }
        }
        p
    }

    fn log_slopes(&self) -> Result<(f64, f64)> {
        let (c, h1, h2) = (self.centre, self.inner_half_width, self.outer_half_width);
        if !(0.0 <= h1 && h1 < h2) {
            return Err(Error::params("slope tuple needs 0 ≤ inner half-width < outer half-width"));
        }
        Ok((self.function.ln_abs_slope(c - h1, c + h1), self.function.ln_abs_slope(c - h2, c + h2)))
    }
}

/// |inner secant slope| ≤ |outer secant slope| for `t^x`, compared in log space.
/// Affine points are reported separately by [`check_slope_equality`].
pub fn check_slope_lemma(grid: &[SlopePoint]) -> Result<PropertyReport> {
    let outcomes = grid.par_iter().map(|pt| (pt.describe(), pt.log_slopes())).collect();
    build_report("slope-lemma", 1e-12, true, outcomes)
}

/// Two-sided: `|ln|inner| - ln|outer||` must vanish, which is what affine functions give.
pub fn check_slope_equality(grid: &[SlopePoint]) -> Result<PropertyReport> {
    let outcomes = grid
        .par_iter()
        .map(|pt| (pt.describe(), pt.log_slopes().map(|(i, o)| ((i - o).abs(), 0.0))))
        .collect();
    build_report("slope-lemma-affine-equality", 1e-12, true, outcomes)
}

/// Case III closed form and oracle value both ≤ the untruncated Laplace RDP.
pub fn check_case3_bound(grid: &[LaplacePoint], forms: &ClosedForms) -> Result<PropertyReport> {
    let outcomes = grid
        .par_iter()
        .map(|pt| {
            let r = (|| {
                let p = &pt.params;
                let closed = (forms.laplace_case3)(pt.alpha, p.scale, p.interval)?;
                let oracle = laplace_rdp_numeric(pt.alpha, p, Direction::SymmetricMax)?;
                let bound = laplace_rdp_untruncated(pt.alpha, p.sensitivity, p.scale)?;
                Ok((closed.max(oracle), bound))
            })();
            (pt.describe(), r)
        })
        .collect();
    build_report("laplace-case3-bound", 1e-12, true, outcomes)
}

/// `(t₀^{1-α} - t₀^α)/(1 - t₀) ≤ (α-1)t₁^α + α t₁^{1-α}`, with
/// `t₀ = e^{-(b-a)/λ}` and `t₁ = e^{-μ/λ}`, in log space.
///
/// `asserted = false` records the outcome without failing the suite; use it
/// on domains where the inequality is not expected to hold.
pub fn check_t0_inequality(grid: &[LaplacePoint], theorem: &str, asserted: bool) -> Result<PropertyReport> {
    let outcomes = grid
        .par_iter()
        .map(|pt| {
            let a = pt.alpha.value();
            let u = pt.params.interval.width() / pt.params.scale;
            let v = pt.params.sensitivity / pt.params.scale;
            let lhs = (a - 1.0) * u + (-(-(2.0 * a - 1.0) * u).exp_m1()).ln() - (-(-u).exp_m1()).ln();
            let rhs = log_add_exp((a - 1.0).ln() - a * v, a.ln() + (a - 1.0) * v);
            (pt.describe(), Ok((lhs, rhs)))
        })
        .collect();
    build_report(theorem, 1e-12, asserted, outcomes)
}

fn agreement(closed: f64, oracle: f64) -> (f64, f64) {
    ((closed - oracle).abs(), (1e-8 * oracle.abs()).max(1e-10))
}

/// Both directed Gaussian closed forms against quadrature.
pub fn check_gaussian_closed_form(
    grid: &[GaussianPoint],
    forms: &ClosedForms,
    opts: &OracleOptions,
) -> Result<PropertyReport> {
    let jobs: Vec<(GaussianPoint, Direction)> = grid
        .iter()
        .flat_map(|pt| [(*pt, Direction::Forward), (*pt, Direction::Reverse)])
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|(pt, dir)| {
            let mut desc = pt.describe();
            desc.insert("reverse".into(), if *dir == Direction::Reverse { 1.0 } else { 0.0 });
            let r = (|| {
                let closed = forms.gaussian_rdp(pt.alpha, &pt.params, *dir)?;
                let s = pt.params.stddev();
                let zero = GaussianKernel { mean: 0.0, stddev: s };
                let shifted = GaussianKernel { mean: pt.params.sensitivity, stddev: s };
                let oracle = match dir {
                    Direction::Reverse => renyi_divergence_quadrature(&shifted, &zero, pt.alpha, pt.params.interval, opts)?,
                    _ => renyi_divergence_quadrature(&zero, &shifted, pt.alpha, pt.params.interval, opts)?,
                };
                Ok(agreement(closed, oracle.value))
            })();
            (desc, r)
        })
        .collect();
    build_report("gaussian-closed-form-vs-oracle", 0.0, true, outcomes)
}

/// Case III closed form against quadrature of both orderings.
pub fn check_laplace_case3_closed_form(grid: &[LaplacePoint], forms: &ClosedForms) -> Result<PropertyReport> {
    let outcomes = grid
        .par_iter()
        .map(|pt| {
            let r = (|| {
                let p = &pt.params;
                let closed = (forms.laplace_case3)(pt.alpha, p.scale, p.interval)?;
                let zero = LaplaceKernel { mean: 0.0, scale: p.scale };
                let shifted = LaplaceKernel { mean: p.sensitivity, scale: p.scale };
                let opts = OracleOptions::default();
                let fwd = renyi_divergence_quadrature(&zero, &shifted, pt.alpha, p.interval, &opts)?.value;
                let rev = renyi_divergence_quadrature(&shifted, &zero, pt.alpha, p.interval, &opts)?.value;
                let (d1, tol1) = agreement(closed, fwd);
                let (d2, tol2) = agreement(closed, rev);
                // Report the direction with the least headroom.
                Ok(if d1 - tol1 >= d2 - tol2 { (d1, tol1) } else { (d2, tol2) })
            })();
            (pt.describe(), r)
        })
        .collect();
    build_report("laplace-case3-closed-form-vs-oracle", 0.0, true, outcomes)
}

/// Cases I and II: the accountant returns exactly 0 and quadrature 0 ± 1e-10.
pub fn check_laplace_zero_cases(grid: &[LaplacePoint]) -> Result<(PropertyReport, PropertyReport)> {
    let pairs: Vec<(Params, Result<(f64, f64)>)> = grid
        .par_iter()
        .map(|pt| {
            let r = (|| {
                let closed = laplace_rdp_truncated(pt.alpha, &pt.params)?.value;
                let oracle = laplace_rdp_numeric(pt.alpha, &pt.params, Direction::SymmetricMax)?;
                Ok((closed, oracle))
            })();
            (pt.describe(), r)
        })
        .collect();
    let split = |pick: fn(f64, f64) -> (f64, f64)| -> Vec<(Params, Result<(f64, f64)>)> {
        pairs
            .iter()
            .map(|(p, r)| {
                let r = match r {
                    Ok((c, o)) => Ok(pick(*c, *o)),
                    Err(e) => Err(Error::params(e.to_string())),
                };
                (p.clone(), r)
            })
            .collect()
    };
    let closed = build_report("laplace-zero-cases-closed-form", 0.0, true, split(|c, _| (c.abs(), 0.0)))?;
    let oracle = build_report("laplace-zero-cases-oracle", 0.0, true, split(|_, o| (o.abs(), 1e-10)))?;
    Ok((closed, oracle))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(a: f64) -> RenyiOrder {
        RenyiOrder::new(a).unwrap()
    }

    fn gpoint(alpha: f64, sigma: f64, mu: f64, a: f64, b: f64) -> GaussianPoint {
        GaussianPoint { alpha: order(alpha), params: GaussianParams::new(mu, sigma, Interval::new(a, b).unwrap()).unwrap() }
    }

    #[test]
    fn ab_near_order_one_is_zero() {
        let pt = gpoint(1.0 + 1e-6, 1.0, 1.0, -0.5, 1.5);
        let (a, b) = gaussian_log_ab(pt.alpha, &pt.params).unwrap();
        assert!(a <= 1e-12 && b <= 1e-12);
        assert!(a.abs() < 1e-6 && b.abs() < 1e-6);
        let r = check_theorem_ab(&[pt], &ClosedForms::SHIPPED).unwrap();
        assert!(r.holds());
        assert!(r.max_slack <= r.tolerance);
    }

    #[test]
    fn ab_on_tiny_mass_interval() {
        // Mass of [μ + 7s, μ + 7.05s] under N(μ, s²) is about 1e-13.
        let pt = gpoint(8.0, 1.0, 1.0, 8.0, 8.05);
        let (a, b) = gaussian_log_ab(pt.alpha, &pt.params).unwrap();
        assert!(a.is_finite() && b.is_finite());
        assert!(a <= 1e-12 && b <= 1e-12, "{a} {b}");
    }

    #[test]
    fn corrupted_forms_are_detected() {
        let pt = gpoint(2.0, 1.0, 1.0, 0.0, 1.0);
        assert!(!check_theorem_ab(&[pt], &ClosedForms::CORRUPTED).unwrap().holds());
        let r = check_gaussian_closed_form(&[pt], &ClosedForms::CORRUPTED, &OracleOptions::default()).unwrap();
        assert!(!r.holds());
        let r = check_gaussian_closed_form(&[pt], &ClosedForms::SHIPPED, &OracleOptions::default()).unwrap();
        assert!(r.holds(), "{r:?}");
    }

    #[test]
    fn jensen_limits() {
        let tiny = JensenPoint { mu: 1e-12, lambda: 1.0, alpha: order(2.0) };
        let r = check_jensen_bound(&[tiny]).unwrap();
        assert!(r.holds() && r.max_slack.abs() < 1e-11);
        let a = 2.0f64;
        let rhs = a / (2.0 * a - 1.0) * 1f64.exp() + (a - 1.0) / (2.0 * a - 1.0) * (-2f64).exp();
        assert!((rhs - 1.857_3).abs() < 1e-4);
    }

    #[test]
    fn slope_degenerate_and_affine() {
        let exp = SlopePoint { function: SlopeFunction::Exp { base: 0.4 }, centre: 1.0, inner_half_width: 0.0, outer_half_width: 0.5 };
        let r = check_slope_lemma(&[exp]).unwrap();
        assert!(r.holds());
        let (inner, _) = exp.log_slopes().unwrap();
        assert!((inner - (0.4f64.ln().abs() * 0.4f64).ln()).abs() < 1e-14);

        let affine = SlopePoint {
            function: SlopeFunction::Affine { slope: -2.0, intercept: 3.0 },
            centre: 0.5,
            inner_half_width: 0.25,
            outer_half_width: 2.0,
        };
        assert!(check_slope_equality(&[affine]).unwrap().holds());
        // The same tuple fails the equality check for a strictly convex base.
        let curved = SlopePoint { function: SlopeFunction::Exp { base: 0.5 }, ..affine };
        assert!(!check_slope_equality(&[curved]).unwrap().holds());
    }

    #[test]
    fn case3_limits() {
        let wide = LaplacePoint {
            alpha: order(4.0),
            params: LaplaceParams::new(1.0, 0.5, Interval::new(1e-9, 1.0 - 1e-9).unwrap()).unwrap(),
        };
        let r = check_case3_bound(&[wide], &ClosedForms::SHIPPED).unwrap();
        assert!(r.holds() && r.max_slack < -1e-3, "{r:?}");
        let narrow = LaplacePoint {
            alpha: order(4.0),
            params: LaplaceParams::new(1.0, 0.5, Interval::new(0.5, 0.5 + 1e-9).unwrap()).unwrap(),
        };
        let v = laplace_case3_closed_form(narrow.alpha, 0.5, narrow.params.interval).unwrap();
        assert!(v.abs() < 1e-12);
        assert!(check_case3_bound(&[narrow], &ClosedForms::SHIPPED).unwrap().holds());
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(check_jensen_bound(&[]).is_err());
    }
}
