//! Seeded grids and the named validation suites run by `truncdp validate`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::accountant::RenyiOrder;
use crate::dist::Interval;
use crate::error::{Error, Result};
use crate::mechanism::{seeded_rng, GaussianParams, LaplaceParams};
use crate::oracle::properties::{
    check_case3_bound, check_gaussian_bound, check_gaussian_closed_form, check_jensen_bound,
    check_laplace_case3_closed_form, check_laplace_zero_cases, check_slope_equality, check_slope_lemma,
    check_t0_inequality, check_theorem_ab, ClosedForms, GaussianPoint, JensenPoint, LaplacePoint, PropertyReport,
    SlopeFunction, SlopePoint,
};
use crate::oracle::OracleOptions;

pub const DEFAULT_GRID_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    GaussianAb,
    Jensen,
    Slope,
    Case3,
    ClosedFormVsOracle,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["gaussian-ab", "jensen", "slope", "case3", "closed-form-vs-oracle", "all"];

    pub fn name(self) -> &'static str {
        match self {
            Suite::GaussianAb => "gaussian-ab",
            Suite::Jensen => "jensen",
            Suite::Slope => "slope",
            Suite::Case3 => "case3",
            Suite::ClosedFormVsOracle => "closed-form-vs-oracle",
            Suite::All => "all",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gaussian-ab" => Suite::GaussianAb,
            "jensen" => Suite::Jensen,
            "slope" => Suite::Slope,
            "case3" => Suite::Case3,
            "closed-form-vs-oracle" => Suite::ClosedFormVsOracle,
            "all" => Suite::All,
            other => return Err(Error::params(format!("unknown suite {other:?}; expected one of {}", Suite::NAMES.join(", ")))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub grid_seed: u64,
    pub passed: bool,
    pub reports: Vec<PropertyReport>,
}

fn order(a: f64) -> RenyiOrder {
    RenyiOrder::new(a).expect("grid orders exceed 1")
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn gpoint(alpha: f64, sigma: f64, mu: f64, a: f64, b: f64) -> GaussianPoint {
    GaussianPoint {
        alpha: order(alpha),
        params: GaussianParams::new(mu, sigma, Interval::new(a, b).expect("grid interval is ordered"))
            .expect("grid parameters are positive"),
    }
}

fn lpoint(alpha: f64, lambda: f64, mu: f64, a: f64, b: f64) -> LaplacePoint {
    LaplacePoint {
        alpha: order(alpha),
        params: LaplaceParams::new(mu, lambda, Interval::new(a, b).expect("grid interval is ordered"))
            .expect("grid parameters are positive"),
    }
}

pub const ORACLE_ALPHAS: [f64; 7] = [1.5, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
pub const ORACLE_SIGMAS: [f64; 4] = [0.5, 1.0, 2.0, 5.0];
pub const ORACLE_MUS: [f64; 3] = [0.5, 1.0, 2.0];

/// Interval families in units of `s = μσ`, as `(a, b)` given `(μ, s)`.
fn interval_families(mu: f64, s: f64) -> Vec<(f64, f64)> {
    let mid = 0.5 * mu;
    vec![
        // left of 0
        (-3.0 * s, -0.5 * s),
        (-9.0 * s, -8.0 * s),
        (-2.0 * s, -1e-3 * s),
        (-1e6, -0.1 * s),
        // straddling 0, μ or both
        (-s, 0.5 * mu),
        (0.5 * mu, mu + s),
        (-s, mu + s),
        (-0.1 * s, mu + 0.1 * s),
        (-1e6, 1e6),
        (-4.0 * s, mu + 4.0 * s),
        // inside [0, μ]
        (0.0, mu),
        (0.25 * mu, 0.75 * mu),
        (1e-3 * mu, mu * (1.0 - 1e-3)),
        // right of μ
        (mu + 0.5 * s, mu + 3.0 * s),
        (mu + 8.0 * s, mu + 9.0 * s),
        (mu + 1e-3 * s, mu + 2.0 * s),
        (mu + 0.1 * s, 1e6),
        // near-degenerate
        (mid - 5e-7 * s, mid + 5e-7 * s),
        (mid - 5e-4 * s, mid + 5e-4 * s),
        (-1e-6 * s, 0.0),
        (mu, mu + 1e-6 * s),
        (mu + 5.0 * s, mu + 5.0 * s + 1e-3 * s),
        (-6.0 * s - 1e-3 * s, -6.0 * s),
        (mu + 7.0 * s, mu + 7.05 * s),
    ]
}

/// Deterministic product grid for comparing the Gaussian closed forms with
/// quadrature: 7 orders × 4 noise multipliers × 3 sensitivities × 24 intervals.
pub fn gaussian_oracle_grid() -> Vec<GaussianPoint> {
    let mut grid = Vec::new();
    for &alpha in &ORACLE_ALPHAS {
        for &sigma in &ORACLE_SIGMAS {
            for &mu in &ORACLE_MUS {
                for (a, b) in interval_families(mu, mu * sigma) {
                    grid.push(gpoint(alpha, sigma, mu, a, b));
                }
            }
        }
    }
    grid
}

/// Random Gaussian grid for the log-ratio check, plus fixed edge points.
pub fn gaussian_ab_grid(seed: u64, n: usize) -> Vec<GaussianPoint> {
    const ALPHAS: [f64; 10] = [1.0 + 1e-6, 1.1, 1.5, 2.0, 3.0, 4.5, 8.0, 16.0, 32.0, 64.0];
    const SIGMAS: [f64; 6] = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
    const MUS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 10.0];
    let mut rng = seeded_rng(seed);
    let mut grid = Vec::with_capacity(n + 16);
    for &alpha in &ALPHAS {
        // Symmetric around μ/2 and a tiny-mass tail interval.
        grid.push(gpoint(alpha, 1.0, 1.0, -1.5, 2.5));
        grid.push(gpoint(alpha, 1.0, 1.0, 8.0, 8.05));
    }
    while grid.len() < n {
        let alpha = ALPHAS[rng.random_range(0..ALPHAS.len())];
        let sigma = SIGMAS[rng.random_range(0..SIGMAS.len())];
        let mu = MUS[rng.random_range(0..MUS.len())];
        let s = mu * sigma;
        // Keep every shifted mass representable: the reverse centre αμ and the
        // forward centre (1 - α)μ lie at most ~240 stddevs from the interval.
        let centre = rng.random_range(-6.0..6.0) * s + rng.random_range(0.0..mu);
        let width = log_uniform(&mut rng, 1e-6, 20.0) * s;
        let (a, b) = (centre - 0.5 * width, centre + 0.5 * width);
        let reach = ((alpha * mu - a).abs().max(((1.0 - alpha) * mu - b).abs())) / s;
        if reach > 240.0 || !(a < b) {
            continue;
        }
        grid.push(gpoint(alpha, sigma, mu, a, b));
    }
    grid
}

pub fn jensen_grid(seed: u64, n: usize) -> Vec<JensenPoint> {
    let mut rng = seeded_rng(seed ^ 0x4a45_4e53);
    let mut grid = vec![
        JensenPoint { mu: 1e-12, lambda: 1.0, alpha: order(2.0) },
        JensenPoint { mu: 1e-9, lambda: 0.1, alpha: order(64.0) },
        JensenPoint { mu: 1.0, lambda: 1.0, alpha: order(2.0) },
    ];
    while grid.len() < n {
        let alpha = 1.0 + log_uniform(&mut rng, 1e-6, 63.0);
        grid.push(JensenPoint {
            mu: log_uniform(&mut rng, 1e-8, 10.0),
            lambda: log_uniform(&mut rng, 1e-2, 1e2),
            alpha: order(alpha),
        });
    }
    grid
}

/// `t^x` tuples for the slope lemma.
pub fn slope_grid(seed: u64, n: usize) -> Vec<SlopePoint> {
    let mut rng = seeded_rng(seed ^ 0x534c_4f50);
    let mut grid = Vec::with_capacity(n);
    while grid.len() < n {
        let base = f64::from(rng.random_range(1..=9u32)) / 10.0;
        let outer = rng.random_range(1e-3..10.0);
        let inner = if grid.len() % 10 == 0 { 0.0 } else { rng.random_range(0.0..outer) };
        grid.push(SlopePoint {
            function: SlopeFunction::Exp { base },
            centre: rng.random_range(-10.0..10.0),
            inner_half_width: inner,
            outer_half_width: outer,
        });
    }
    grid
}

/// The same tuple shape with affine functions, for which the inequality is tight.
pub fn affine_slope_grid(seed: u64, n: usize) -> Vec<SlopePoint> {
    let mut rng = seeded_rng(seed ^ 0x4146_4649);
    (0..n)
        .map(|i| {
            let outer: f64 = rng.random_range(0.5..10.0);
            let inner = if i % 10 == 0 { 0.0 } else { rng.random_range(0.1..outer.min(5.0)).min(outer * 0.9) };
            SlopePoint {
                function: SlopeFunction::Affine { slope: rng.random_range(-5.0..5.0), intercept: rng.random_range(-1.0..1.0) },
                centre: rng.random_range(-2.0..2.0),
                inner_half_width: inner,
                outer_half_width: outer,
            }
        })
        .filter(|pt| matches!(pt.function, SlopeFunction::Affine { slope, .. } if slope.abs() > 1e-3))
        .collect()
}

const LAPLACE_ALPHAS: [f64; 12] = [1.1, 1.25, 1.5, 2.0, 2.5, 3.0, 4.2, 7.4, 8.0, 16.0, 32.5, 64.0];

/// Intervals strictly inside `(0, μ)`, including both width limits.
pub fn case3_grid(seed: u64, n: usize) -> Vec<LaplacePoint> {
    let mut rng = seeded_rng(seed ^ 0x4333);
    let mut grid = Vec::with_capacity(n);
    for &alpha in &LAPLACE_ALPHAS {
        grid.push(lpoint(alpha, 0.5, 1.0, 1e-9, 1.0 - 1e-9));
        grid.push(lpoint(alpha, 0.5, 1.0, 0.5, 0.5 + 1e-9));
    }
    while grid.len() < n {
        let alpha = LAPLACE_ALPHAS[rng.random_range(0..LAPLACE_ALPHAS.len())];
        let mu = log_uniform(&mut rng, 0.1, 5.0);
        let lambda = log_uniform(&mut rng, 0.05, 20.0) * mu;
        let x = rng.random_range(0.0..1.0f64);
        let y = rng.random_range(0.0..1.0f64);
        let (a, b) = (x.min(y) * mu, x.max(y) * mu);
        if !(0.0 < a && a < b && b < mu) {
            continue;
        }
        grid.push(lpoint(alpha, lambda, mu, a, b));
    }
    grid
}

/// Intervals with `b > a > μ` and unrestricted width.
pub fn stated_domain_grid(seed: u64, n: usize) -> Vec<LaplacePoint> {
    let mut rng = seeded_rng(seed ^ 0x5354_4154);
    (0..n)
        .map(|_| {
            let alpha = LAPLACE_ALPHAS[rng.random_range(0..LAPLACE_ALPHAS.len())];
            let mu = log_uniform(&mut rng, 0.1, 5.0);
            let lambda = log_uniform(&mut rng, 0.05, 20.0) * mu;
            let a = mu * (1.0 + rng.random_range(1e-6..3.0));
            let b = a + mu * log_uniform(&mut rng, 1e-3, 10.0);
            lpoint(alpha, lambda, mu, a, b)
        })
        .collect()
}

/// Half left of 0, half right of μ.
pub fn laplace_zero_grid(seed: u64, n: usize) -> Vec<LaplacePoint> {
    let mut rng = seeded_rng(seed ^ 0x5a45_524f);
    (0..n)
        .map(|i| {
            let alpha = LAPLACE_ALPHAS[rng.random_range(0..LAPLACE_ALPHAS.len())];
            let mu = log_uniform(&mut rng, 0.1, 5.0);
            let lambda = log_uniform(&mut rng, 0.05, 20.0) * mu;
            let width = log_uniform(&mut rng, 1e-6, 20.0) * lambda;
            let gap = log_uniform(&mut rng, 1e-9, 5.0) * lambda;
            if i % 2 == 0 {
                lpoint(alpha, lambda, mu, -gap - width, -gap)
            } else {
                lpoint(alpha, lambda, mu, mu + gap, mu + gap + width)
            }
        })
        .collect()
}

pub const AB_GRID_SIZE: usize = 12_000;
pub const INEQUALITY_GRID_SIZE: usize = 1_200;
pub const ZERO_GRID_SIZE: usize = 600;

fn run_one(suite: Suite, seed: u64, forms: &ClosedForms, out: &mut Vec<PropertyReport>) -> Result<()> {
    match suite {
        Suite::GaussianAb => {
            out.push(check_theorem_ab(&gaussian_ab_grid(seed, AB_GRID_SIZE), forms)?);
            out.push(check_gaussian_bound(&gaussian_oracle_grid(), forms)?);
        }
        Suite::Jensen => out.push(check_jensen_bound(&jensen_grid(seed, INEQUALITY_GRID_SIZE))?),
        Suite::Slope => {
            out.push(check_slope_lemma(&slope_grid(seed, INEQUALITY_GRID_SIZE))?);
            out.push(check_slope_equality(&affine_slope_grid(seed, 200))?);
        }
        Suite::Case3 => {
            let grid = case3_grid(seed, INEQUALITY_GRID_SIZE);
            out.push(check_case3_bound(&grid, forms)?);
            out.push(check_t0_inequality(&grid, "t0-inequality-case3-domain", true)?);
            out.push(check_t0_inequality(&stated_domain_grid(seed, INEQUALITY_GRID_SIZE), "t0-inequality-stated-domain", false)?);
        }
        Suite::ClosedFormVsOracle => {
            out.push(check_gaussian_closed_form(&gaussian_oracle_grid(), forms, &OracleOptions::default())?);
            out.push(check_laplace_case3_closed_form(&case3_grid(seed, INEQUALITY_GRID_SIZE), forms)?);
            let (closed, oracle) = check_laplace_zero_cases(&laplace_zero_grid(seed, ZERO_GRID_SIZE))?;
            out.push(closed);
            out.push(oracle);
        }
        Suite::All => {
            for s in [Suite::GaussianAb, Suite::Jensen, Suite::Slope, Suite::Case3, Suite::ClosedFormVsOracle] {
                run_one(s, seed, forms, out)?;
            }
        }
    }
    Ok(())
}

pub fn run_suite(suite: Suite, seed: u64, forms: &ClosedForms) -> Result<SuiteReport> {
    let mut reports = Vec::new();
    run_one(suite, seed, forms, &mut reports)?;
    let passed = reports.iter().all(PropertyReport::passed);
    Ok(SuiteReport { suite, grid_seed: seed, passed, reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(gaussian_oracle_grid().len(), 2016);
        assert!(gaussian_ab_grid(1, AB_GRID_SIZE).len() >= 10_000);
        assert!(case3_grid(1, INEQUALITY_GRID_SIZE).len() >= 1000);
        assert!(affine_slope_grid(1, 200).len() > 150);
    }

    #[test]
    fn grids_are_seeded() {
        assert_eq!(case3_grid(5, 100), case3_grid(5, 100));
        assert_ne!(case3_grid(5, 100), case3_grid(6, 100));
    }

    #[test]
    fn suite_names_round_trip() {
        for name in Suite::NAMES {
            assert_eq!(name.parse::<Suite>().unwrap().name(), name);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn small_suites_pass() {
        for s in [Suite::Jensen, Suite::Slope] {
            let r = run_suite(s, DEFAULT_GRID_SEED, &ClosedForms::SHIPPED).unwrap();
            assert!(r.passed, "{:?}", r.reports.iter().filter(|p| !p.passed()).collect::<Vec<_>>());
        }
    }
}
