// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::ceil_snapped;

/// Constants of the sketch sizing rule. `ams_constant` is meant to be
/// recalibrated with `fpdisj sketch-bench`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    pub ams_constant: f64,
    pub kmv_constant: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            ams_constant: 16.0,
            kmv_constant: 12.0,
        }
    }
}

/// Sketch sizes for a target `(eps, delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmplificationPlan {
    /// Median repetitions; always odd.
    pub rows: usize,
    /// Estimators averaged per row.
    pub cols: usize,
    /// KMV retained hashes.
    pub k: usize,
}

/// `rows = 2*ceil(18 ln(1/delta)) + 1`, `cols = ceil(C_ams / eps^2)`,
/// `k = ceil(C_kmv / eps^2)`.
pub fn amplification_plan(eps: f64, delta: f64, cfg: PlanConfig) -> Result<AmplificationPlan> {
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!(
            "amplification needs eps, delta in (0, 1), got {eps}, {delta}"
        )));
    }
    if !(cfg.ams_constant > 0.0 && cfg.kmv_constant > 0.0) {
        return Err(Error::invalid("plan constants must be positive"));
    }
    let rows = 2 * ceil_snapped(18.0 * (1.0 / delta).ln()) + 1;
    let cols = ceil_snapped(cfg.ams_constant / (eps * eps));
    let k = ceil_snapped(cfg.kmv_constant / (eps * eps)).max(2);
    Ok(AmplificationPlan {
        rows: rows as usize,
        cols: cols.max(1) as usize,
        k: k as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_sizes() {
        let cfg = PlanConfig::default();
        // F_p at eps/10 = 0.09, delta = 1/(20 * 4096)
        let fp = amplification_plan(0.09, 1.0 / 81920.0, cfg).unwrap();
        assert_eq!(fp.rows, 409);
        assert_eq!(fp.cols, 1976);
        let f0 = amplification_plan(0.09, 1.0 / 20.0, cfg).unwrap();
        assert_eq!(f0.rows, 109);
        assert_eq!(f0.k, 1482);
    }

    #[test]
    fn kmv_size_at_quarter_eps() {
        let plan = amplification_plan(0.025, 0.05, PlanConfig::default()).unwrap();
        assert_eq!(plan.k, 19200);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(amplification_plan(0.0, 0.1, PlanConfig::default()).is_err());
        assert!(amplification_plan(0.1, 1.0, PlanConfig::default()).is_err());
    }
}
