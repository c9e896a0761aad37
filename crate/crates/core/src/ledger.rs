//! Persistent record of releases and their composed RDP curve.
//!
//! The α grid is fixed when the ledger is created; every appended entry is
//! evaluated on it. Writes go to a temporary file in the same directory which
//! is then renamed over the ledger, and concurrent writers are serialised by
//! an exclusive lock on a sidecar `<ledger>.lock` file.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::accountant::{compose, mechanism_curve, RdpCurve, RenyiOrder};
use crate::error::{Error, Result};
use crate::mechanism::{MechanismKind, MechanismParams};

pub const LEDGER_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub mechanism: MechanismKind,
    pub params: MechanismParams,
    pub rdp_points: RdpCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerFile {
    pub version: u32,
    pub alpha_grid: Vec<f64>,
    pub entries: Vec<LedgerEntry>,
    pub composed: RdpCurve,
}

impl LedgerFile {
    pub fn new(grid: &[RenyiOrder]) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyCurve);
        }
        let alpha_grid: Vec<f64> = grid.iter().map(|a| a.value()).collect();
        let composed = RdpCurve::from_points(alpha_grid.iter().map(|&a| (a, 0.0)))?;
        Ok(LedgerFile { version: LEDGER_VERSION, alpha_grid, entries: Vec::new(), composed })
    }

    pub fn grid(&self) -> Result<Vec<RenyiOrder>> {
        self.alpha_grid.iter().map(|&a| RenyiOrder::new(a)).collect()
    }

    /// Evaluates `params` on the ledger grid and adds it to the composition.
    pub fn append(&mut self, params: &MechanismParams, timestamp: u64) -> Result<&LedgerEntry> {
        let (curve, _) = mechanism_curve(params, &self.grid()?)?;
        self.composed = compose(&[self.composed.clone(), curve.clone()])?;
        self.entries.push(LedgerEntry { timestamp, mechanism: params.kind(), params: *params, rdp_points: curve });
        Ok(self.entries.last().expect("just pushed"))
    }

    /// Checks the version, the shared grid and the composed sum.
    pub fn check(&self) -> Result<()> {
        if self.version != LEDGER_VERSION {
            return Err(Error::Ledger(format!("unsupported ledger version {}", self.version)));
        }
        let grid = self.grid()?;
        if self.composed.alphas() != self.alpha_grid {
            return Err(Error::Ledger("composed curve is not on the ledger grid".into()));
        }
        let mut sum = vec![0.0; grid.len()];
        for (i, e) in self.entries.iter().enumerate() {
            if e.rdp_points.alphas() != self.alpha_grid {
                return Err(Error::Ledger(format!("entry {i} is not on the ledger grid")));
            }
            for (s, v) in sum.iter_mut().zip(e.rdp_points.rdp_values()) {
                *s += v;
            }
        }
        for (s, c) in sum.iter().zip(self.composed.rdp_values()) {
            if (s - c).abs() > 1e-9 * s.abs().max(1.0) {
                return Err(Error::Ledger(format!("composed value {c} differs from entry sum {s}")));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ledger: LedgerFile = serde_json::from_str(&text)?;
        ledger.check()?;
        Ok(ledger)
    }

    /// Atomic replace: a torn write leaves the previous file intact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(self)?;
        let dir = parent_dir(path);
        let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
        tmp.write_all(&bytes)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn lock_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".lock");
    path.with_file_name(name)
}

/// Exclusive handle on a ledger path; the lock is released on drop.
pub struct LedgerLock {
    _file: File,
}

impl LedgerLock {
    pub fn acquire(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).truncate(false).write(true).open(lock_path(path))?;
        file.lock()?;
        Ok(LedgerLock { _file: file })
    }
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Loads (or creates on `grid`) the ledger at `path`, appends one entry per
/// release, and writes it back, all under the lock.
pub fn record_releases(path: &Path, params: &MechanismParams, count: usize, grid: &[RenyiOrder]) -> Result<LedgerFile> {
    let _lock = LedgerLock::acquire(path)?;
    let mut ledger = if path.exists() { LedgerFile::load(path)? } else { LedgerFile::new(grid)? };
    let ts = now_unix();
    for _ in 0..count {
        ledger.append(params, ts)?;
    }
    ledger.save(path)?;
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accountant::default_alpha_grid;
    use crate::dist::Interval;
    use crate::mechanism::GaussianParams;

    fn gaussian() -> MechanismParams {
        MechanismParams::Gaussian(GaussianParams::new(1.0, 1.0, Interval::new(-2.0, 3.0).unwrap()).unwrap())
    }

    #[test]
    fn three_releases_compose_linearly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.json");
        let grid = default_alpha_grid();
        record_releases(&path, &gaussian(), 1, &grid).unwrap();
        record_releases(&path, &gaussian(), 2, &grid).unwrap();
        let ledger = LedgerFile::load(&path).unwrap();
        assert_eq!(ledger.entries.len(), 3);
        let (single, _) = mechanism_curve(&gaussian(), &grid).unwrap();
        for (c, s) in ledger.composed.rdp_values().iter().zip(single.rdp_values()) {
            assert!((c - 3.0 * s).abs() <= 1e-12 * c.max(1.0));
        }
    }

    #[test]
    fn grid_fixed_at_creation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.json");
        let small: Vec<RenyiOrder> = [2.0, 4.0].iter().map(|&a| RenyiOrder::new(a).unwrap()).collect();
        record_releases(&path, &gaussian(), 1, &small).unwrap();
        let ledger = record_releases(&path, &gaussian(), 1, &default_alpha_grid()).unwrap();
        assert_eq!(ledger.alpha_grid, vec![2.0, 4.0]);
        assert!(ledger.entries.iter().all(|e| e.rdp_points.len() == 2));
    }

    #[test]
    fn tampered_sum_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.json");
        let mut ledger = record_releases(&path, &gaussian(), 2, &default_alpha_grid()).unwrap();
        ledger.composed = ledger.composed.scaled(3);
        std::fs::write(&path, serde_json::to_vec(&ledger).unwrap()).unwrap();
        assert!(matches!(LedgerFile::load(&path), Err(Error::Ledger(_))));
    }

    #[test]
    fn crash_before_rename_keeps_old_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.json");
        record_releases(&path, &gaussian(), 1, &default_alpha_grid()).unwrap();
        let before = std::fs::read(&path).unwrap();
        {
            // Stage a write and drop it without persisting, as a crash would.
            let mut tmp = tempfile::NamedTempFile::new_in(dir.path()).unwrap();
            tmp.write_all(b"{\"version\": 1, \"alpha_grid\": [2.0").unwrap();
        }
        assert_eq!(std::fs::read(&path).unwrap(), before);
        assert!(LedgerFile::load(&path).is_ok());
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().starts_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
