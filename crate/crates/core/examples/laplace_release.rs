//! Truncated Laplace releases, with the three interval geometries.

use truncdp::accountant::laplace_case;
use truncdp::dist::Interval;
use truncdp::mechanism::{laplace_release, seeded_rng, LaplaceParams, Sampler, DEFAULT_MAX_ATTEMPTS};

fn main() -> truncdp::Result<()> {
    let mut rng = seeded_rng(7);
    for (a, b) in [(-3.0, -1.0), (0.2, 0.8), (-1.0, 2.0)] {
        let interval = Interval::new(a, b)?;
        let params = LaplaceParams::new(1.0, 0.5, interval)?;
        let draws: Vec<f64> = (0..5)
            .map(|_| laplace_release(0.6, &params, &mut rng, DEFAULT_MAX_ATTEMPTS, Sampler::InverseCdf).map(|r| r.released_value))
            .collect::<truncdp::Result<_>>()?;
        println!("[{a}, {b}] case {}: {draws:.4?}", laplace_case(1.0, interval));
    }
    Ok(())
}
