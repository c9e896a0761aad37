//! RDP to (ε, δ) for a single point and for a composed curve.

use truncdp::accountant::{best_epsilon, compose, default_alpha_grid, mechanism_curve, rdp_to_dp, RenyiOrder};
use truncdp::dist::Interval;
use truncdp::mechanism::{GaussianParams, MechanismParams};

fn main() -> truncdp::Result<()> {
    let eps = rdp_to_dp(1.0, RenyiOrder::new(10.0)?, 1e-5)?;
    println!("R=1 at alpha=10, delta=1e-5: epsilon={eps:.5}");

    let params = MechanismParams::Gaussian(GaussianParams::new(1.0, 4.0, Interval::new(-2.0, 3.0)?)?);
    let (curve, _) = mechanism_curve(&params, &default_alpha_grid())?;
    for steps in [1, 10, 100] {
        let composed = compose(&vec![curve.clone(); steps])?;
        let g = best_epsilon(&composed, 1e-5)?;
        println!("{steps:>3} releases: epsilon={:.4} (alpha={})", g.epsilon, g.realized_alpha.value());
    }
    Ok(())
}
