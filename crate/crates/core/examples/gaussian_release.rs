//! Release a clipped query answer through the truncated Gaussian mechanism.

use truncdp::dist::Interval;
use truncdp::mechanism::{gaussian_release, seeded_rng, GaussianParams, Sampler, DEFAULT_MAX_ATTEMPTS};

fn main() -> truncdp::Result<()> {
    let params = GaussianParams::new(1.0, 1.5, Interval::new(-1.0, 2.0)?)?;
    let mut rng = seeded_rng(42);
    for y in [-0.3, 0.4, 5.0] {
        let inverse = gaussian_release(y, &params, &mut rng, DEFAULT_MAX_ATTEMPTS, Sampler::InverseCdf)?;
        let rejection = gaussian_release(y, &params, &mut rng, DEFAULT_MAX_ATTEMPTS, Sampler::RejectionLoop)?;
        println!(
            "y={y:5.2}  inverse-cdf={:+.6}  rejection={:+.6} ({} attempts)",
            inverse.released_value, rejection.released_value, rejection.attempts
        );
    }
    Ok(())
}
