//! Smallest σ and λ for a target budget.

use truncdp::calibrate::{calibrate, CalibrationTarget};
use truncdp::dist::Interval;
use truncdp::mechanism::MechanismKind;

fn main() -> truncdp::Result<()> {
    for (mechanism, a, b) in [
        (MechanismKind::Gaussian, -1e6, 1e6),
        (MechanismKind::Gaussian, -1.0, 2.0),
        (MechanismKind::Laplace, 0.2, 0.8),
        (MechanismKind::Laplace, 2.0, 3.0),
    ] {
        for steps in [1, 100] {
            let target =
                CalibrationTarget { epsilon: 2.0, delta: 1e-5, steps, mechanism, sensitivity: 1.0, interval: Interval::new(a, b)? };
            let c = calibrate(&target)?;
            println!(
                "{mechanism} [{a}, {b}] steps={steps:<3} parameter={:.6} epsilon={:.6} free={}",
                c.parameter, c.epsilon, c.free
            );
        }
    }
    Ok(())
}
