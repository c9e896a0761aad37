//! Smallest noise parameter that meets an (ε, δ) target after `steps`
//! composed releases.
//!
//! The search runs on ln(parameter). A coarse scan first checks that the
//! composed ε decreases along the bracket; if it does, the crossing is refined
//! by bisection, otherwise a fine scan picks the smallest passing grid point
//! and bisection refines only the last step.

use serde::{Deserialize, Serialize};

use crate::accountant::{best_epsilon, check_delta, default_alpha_grid, laplace_case, mechanism_curve, CaseTag, RenyiOrder};
use crate::dist::Interval;
use crate::error::{Error, Result};
use crate::mechanism::{GaussianParams, LaplaceParams, MechanismKind, MechanismParams};

pub const SIGMA_BRACKET: (f64, f64) = (1e-3, 1e3);
/// In units of the sensitivity.
pub const LAMBDA_BRACKET: (f64, f64) = (1e-3, 1e3);
pub const RELATIVE_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 60;

const COARSE_POINTS: usize = 25;
const FINE_POINTS: usize = 4001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub epsilon: f64,
    pub delta: f64,
    pub steps: u64,
    pub mechanism: MechanismKind,
    pub sensitivity: f64,
    pub interval: Interval,
}

impl CalibrationTarget {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::params(format!("target epsilon must be positive, got {}", self.epsilon)));
        }
        check_delta(self.delta)?;
        if self.steps == 0 {
            return Err(Error::params("steps must be at least 1"));
        }
        if !(self.sensitivity > 0.0 && self.sensitivity.is_finite()) {
            return Err(Error::params(format!("sensitivity must be positive, got {}", self.sensitivity)));
        }
        Ok(())
    }

    pub fn params_with(&self, parameter: f64) -> Result<MechanismParams> {
        Ok(match self.mechanism {
            MechanismKind::Gaussian => MechanismParams::Gaussian(GaussianParams::new(self.sensitivity, parameter, self.interval)?),
            MechanismKind::Laplace => MechanismParams::Laplace(LaplaceParams::new(self.sensitivity, parameter, self.interval)?),
        })
    }

    fn bracket(&self) -> (f64, f64) {
        match self.mechanism {
            MechanismKind::Gaussian => SIGMA_BRACKET,
            MechanismKind::Laplace => (LAMBDA_BRACKET.0 * self.sensitivity, LAMBDA_BRACKET.1 * self.sensitivity),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMethod {
    Bisection,
    GridScan,
    /// The truncated RDP is zero for every parameter.
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// σ for the Gaussian mechanism, λ for Laplace.
    pub parameter: f64,
    pub epsilon: f64,
    pub realized_alpha: f64,
    pub free: bool,
    pub method: SearchMethod,
    pub iterations: usize,
}

/// Composed ε of the target's mechanism at a given noise parameter.
pub fn composed_epsilon(target: &CalibrationTarget, parameter: f64, grid: &[RenyiOrder]) -> Result<(f64, f64)> {
    let (curve, _) = mechanism_curve(&target.params_with(parameter)?, grid)?;
    let g = best_epsilon(&curve.scaled(target.steps), target.delta)?;
    Ok((g.epsilon, g.realized_alpha.value()))
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i + 1 == n => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// Calibrates σ or λ according to the target's mechanism on the default α grid.
pub fn calibrate(target: &CalibrationTarget) -> Result<Calibration> {
    calibrate_on_grid(target, &default_alpha_grid())
}

pub fn calibrate_sigma(target: &CalibrationTarget) -> Result<Calibration> {
    if target.mechanism != MechanismKind::Gaussian {
        return Err(Error::params("calibrate_sigma needs a gaussian target"));
    }
    calibrate(target)
}

pub fn calibrate_lambda(target: &CalibrationTarget) -> Result<Calibration> {
    if target.mechanism != MechanismKind::Laplace {
        return Err(Error::params("calibrate_lambda needs a laplace target"));
    }
    calibrate(target)
}

pub fn calibrate_on_grid(target: &CalibrationTarget, grid: &[RenyiOrder]) -> Result<Calibration> {
    target.validate()?;
    let (lo, hi) = target.bracket();
    let eval = |p: f64| composed_epsilon(target, p, grid);
    let meets = |e: f64| e <= target.epsilon;

    let (eps_hi, alpha_hi) = eval(hi)?;
    if !meets(eps_hi) {
        return Err(Error::Unachievable { target: target.epsilon, parameter: hi, achieved: eps_hi });
    }
    let free = target.mechanism == MechanismKind::Laplace
        && matches!(laplace_case(target.sensitivity, target.interval), CaseTag::I | CaseTag::II);
    if free {
        let (epsilon, realized_alpha) = eval(lo)?;
        return Ok(Calibration { parameter: lo, epsilon, realized_alpha, free, method: SearchMethod::Free, iterations: 0 });
    }
    let (eps_lo, alpha_lo) = eval(lo)?;
    if meets(eps_lo) {
        return Ok(Calibration {
            parameter: lo,
            epsilon: eps_lo,
            realized_alpha: alpha_lo,
            free,
            method: SearchMethod::Bisection,
            iterations: 0,
        });
    }

    let coarse = log_space(lo, hi, COARSE_POINTS);
    let mut values = Vec::with_capacity(coarse.len());
    for &p in &coarse {
        values.push(eval(p)?.0);
    }
    let monotone = values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
    let (mut fail, mut pass, method) = if monotone {
        let k = values.iter().position(|&e| meets(e)).expect("upper end meets the target");
        (coarse[k - 1], coarse[k], SearchMethod::Bisection)
    } else {
        let fine = log_space(lo, hi, FINE_POINTS);
        let mut k = fine.len() - 1;
        for (i, &p) in fine.iter().enumerate() {
            if meets(eval(p)?.0) {
                k = i;
                break;
            }
        }
        if k == 0 {
            k = 1;
        }
        (fine[k - 1], fine[k], SearchMethod::GridScan)
    };

    let mut iterations = 0;
    let (mut eps, mut alpha) = if pass == hi { (eps_hi, alpha_hi) } else { eval(pass)? };
    while pass / fail - 1.0 > RELATIVE_TOLERANCE && iterations < MAX_ITERATIONS {
        let mid = (fail * pass).sqrt();
        let (e, a) = eval(mid)?;
        if meets(e) {
            pass = mid;
            eps = e;
            alpha = a;
        } else {
            fail = mid;
        }
        iterations += 1;
    }
    Ok(Calibration { parameter: pass, epsilon: eps, realized_alpha: alpha, free, method, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accountant::{laplace_rdp_untruncated, rdp_to_dp};

    fn target(mechanism: MechanismKind, epsilon: f64, steps: u64, a: f64, b: f64) -> CalibrationTarget {
        CalibrationTarget { epsilon, delta: 1e-5, steps, mechanism, sensitivity: 1.0, interval: Interval::new(a, b).unwrap() }
    }

    #[test]
    fn gaussian_round_trip() {
        let t = target(MechanismKind::Gaussian, 1.0, 1, -1e6, 1e6);
        let c = calibrate_sigma(&t).unwrap();
        assert!(!c.free);
        assert!(c.iterations <= MAX_ITERATIONS);
        let grid = default_alpha_grid();
        let (eps, _) = composed_epsilon(&t, c.parameter, &grid).unwrap();
        assert!(eps <= t.epsilon && eps >= t.epsilon * (1.0 - 1e-3), "{eps}");
        assert!(composed_epsilon(&t, c.parameter * (1.0 - 1e-3), &grid).unwrap().0 > t.epsilon);
    }

    #[test]
    fn gaussian_monotone_in_steps_and_epsilon() {
        let base = calibrate(&target(MechanismKind::Gaussian, 2.0, 1, -1.0, 3.0)).unwrap().parameter;
        let doubled = calibrate(&target(MechanismKind::Gaussian, 2.0, 2, -1.0, 3.0)).unwrap().parameter;
        let tighter = calibrate(&target(MechanismKind::Gaussian, 1.0, 1, -1.0, 3.0)).unwrap().parameter;
        assert!(doubled >= base && tighter >= base);
    }

    #[test]
    fn laplace_case_one_is_free() {
        let t = target(MechanismKind::Laplace, 1.0, 1, -3.0, -1.0);
        let c = calibrate_lambda(&t).unwrap();
        assert!(c.free);
        assert_eq!(c.parameter, LAMBDA_BRACKET.0);
    }

    #[test]
    fn laplace_case_three_round_trip() {
        let t = target(MechanismKind::Laplace, 1.5, 1, 0.2, 0.9);
        let c = calibrate_lambda(&t).unwrap();
        let (eps, _) = composed_epsilon(&t, c.parameter, &default_alpha_grid()).unwrap();
        assert!(eps <= t.epsilon && eps >= t.epsilon * (1.0 - 1e-3));
    }

    #[test]
    fn laplace_untruncated_matches_direct_inversion() {
        let t = target(MechanismKind::Laplace, 2.0, 1, -1e6, 1e6);
        let c = calibrate_lambda(&t).unwrap();
        let grid = default_alpha_grid();
        let eps_at = |lambda: f64| {
            grid.iter()
                .map(|&a| rdp_to_dp(laplace_rdp_untruncated(a, 1.0, lambda).unwrap(), a, 1e-5).unwrap())
                .fold(f64::INFINITY, f64::min)
        };
        let (mut lo, mut hi) = (1e-3f64, 1e3f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if eps_at(mid) <= 2.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((c.parameter / hi - 1.0).abs() < 1e-3, "{} vs {hi}", c.parameter);
    }

    #[test]
    fn unachievable_and_invalid() {
        let t = target(MechanismKind::Gaussian, 1e-4, 1, -1e6, 1e6);
        assert!(matches!(calibrate(&t), Err(Error::Unachievable { .. })));
        let mut bad = target(MechanismKind::Gaussian, 1.0, 0, -1.0, 1.0);
        assert!(calibrate(&bad).is_err());
        bad.steps = 1;
        bad.delta = 1.5;
        assert!(calibrate(&bad).is_err());
        assert!(calibrate_sigma(&target(MechanismKind::Laplace, 1.0, 1, -1.0, 1.0)).is_err());
    }
}
