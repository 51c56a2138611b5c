use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resource limits shared by every module.
///
/// All caps are configuration values; the defaults are sized for a laptop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Caps {
    /// Longest colorless chain that may be enumerated path by path.
    pub enumerate_colorless: usize,
    /// Longest colored chain that may be enumerated path by path.
    pub enumerate_colored: usize,
    /// Longest chain for exact-rational weight tables.
    pub exact_table: usize,
    /// Largest Hilbert-space dimension the ED module will assemble.
    pub ed_dimension: u64,
    /// Largest total dimension for the dense reduced-density-matrix oracle.
    pub rdm_dimension: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            enumerate_colorless: 16,
            enumerate_colored: 14,
            exact_table: 48,
            ed_dimension: 10_000_000,
            rdm_dimension: 30_000,
        }
    }
}

impl Caps {
    pub fn validate(&self) -> Result<()> {
        let all_positive = self.enumerate_colorless > 0
            && self.enumerate_colored > 0
            && self.exact_table > 0
            && self.ed_dimension > 0
            && self.rdm_dimension > 0;
        if all_positive {
            Ok(())
        } else {
            Err(Error::invalid("all caps must be positive"))
        }
    }
}
