//! Truncated against untruncated RDP along the default order grid.

use truncdp::accountant::{account, default_alpha_grid, Direction};
use truncdp::dist::Interval;
use truncdp::mechanism::{GaussianParams, LaplaceParams, MechanismParams};

fn main() -> truncdp::Result<()> {
    let interval = Interval::new(-0.5, 1.5)?;
    let mechanisms = [
        MechanismParams::Gaussian(GaussianParams::new(1.0, 1.0, interval)?),
        MechanismParams::Laplace(LaplaceParams::new(1.0, 1.0, interval)?),
    ];
    let grid = default_alpha_grid();
    for params in mechanisms {
        let r = account(&params, &grid, 1e-5, Direction::SymmetricMax)?;
        println!("{} on [-0.5, 1.5]", params.kind());
        for i in (0..grid.len()).step_by(10) {
            println!("  alpha={:<5} rdp={:.6} untruncated={:.6} ({})", r.alpha_grid[i], r.rdp[i], r.rdp_untruncated[i], r.case_tags[i]);
        }
        println!("  epsilon={:.4} at delta=1e-5 (alpha={})", r.epsilon, r.realized_alpha);
    }
    Ok(())
}
