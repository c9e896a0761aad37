//! Append releases to a ledger file and read back the composed budget.

use truncdp::accountant::{best_epsilon, default_alpha_grid};
use truncdp::dist::Interval;
use truncdp::ledger::{record_releases, LedgerFile};
use truncdp::mechanism::{GaussianParams, LaplaceParams, MechanismParams};

fn main() -> truncdp::Result<()> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("ledger.json");
    let grid = default_alpha_grid();
    let gaussian = MechanismParams::Gaussian(GaussianParams::new(1.0, 2.0, Interval::new(-1.0, 2.0)?)?);
    let laplace = MechanismParams::Laplace(LaplaceParams::new(1.0, 1.0, Interval::new(0.1, 0.9)?)?);

    record_releases(&path, &gaussian, 3, &grid)?;
    record_releases(&path, &laplace, 2, &grid)?;

    let ledger = LedgerFile::load(&path)?;
    let g = best_epsilon(&ledger.composed, 1e-6)?;
    println!("{} entries on {} orders", ledger.entries.len(), ledger.alpha_grid.len());
    println!("composed epsilon={:.4} at delta=1e-6 (alpha={})", g.epsilon, g.realized_alpha.value());
    Ok(())
}
