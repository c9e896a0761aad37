pub mod accountant;
pub mod calibrate;
pub mod cli;
pub mod dist;
pub mod error;
pub mod ledger;
pub mod mechanism;
pub mod oracle;
pub mod quad;

pub use error::{Error, Result};
