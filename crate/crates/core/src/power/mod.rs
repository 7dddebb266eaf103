//! Dynamic power allocation: power-level discretization, the per-group
//! Dinkelbach/KKT solver, the cross-group DP combination, and final network
//! solution selection.

mod dp;
mod group;

pub use dp::{
    dp_combine, select_solution, solve_allocation, AllocationTables, DpCell, Selection,
    UserAllocation, UserRole,
};
pub use group::{
    dinkelbach_iterate, solve_group, DinkelbachState, GroupChannel, GroupSolution, Infeasibility,
    SolverConfig, UserPath,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used when comparing power values against the level
/// grid; absorbs the rounding of budget differences.
pub(crate) fn power_tol(p_max: f64) -> f64 {
    1e-9 * p_max
}

/// The discretized power budget: levels t * p_max / T for t = 1..T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLevels {
    pub p_max: f64,
    pub levels: Vec<f64>,
}

impl PowerLevels {
    pub fn count(&self) -> usize {
        self.levels.len()
    }

    /// Greatest level <= p, or `None` when p falls below the first level
    /// (zero remaining budget).
    pub fn floor_to_level(&self, p: f64) -> Option<usize> {
        floor_to_level(p, self)
    }
}

/// Split `p_max` into T uniform levels.
pub fn discretize(p_max: f64, t: usize) -> Result<PowerLevels> {
    if t == 0 {
        return Err(Error::Config("power discretization needs T >= 1".into()));
    }
    if p_max <= 0.0 {
        return Err(Error::Config(format!("power budget must be positive (got {p_max})")));
    }
    let levels = (1..=t).map(|i| i as f64 * p_max / t as f64).collect();
    Ok(PowerLevels { p_max, levels })
}

/// Index of the greatest level <= p (within tolerance), or `None` below the
/// first level.
pub fn floor_to_level(p: f64, levels: &PowerLevels) -> Option<usize> {
    let tol = power_tol(levels.p_max);
    levels
        .levels
        .iter()
        .rposition(|&level| level <= p + tol)
}

/// Per-user and network QoS bounds plus the strong-user power cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoSBounds {
    /// Minimum per-user rate, bits/s/Hz.
    pub r_min: f64,
    /// Maximum per-user rate, bits/s/Hz.
    pub r_max: f64,
    /// Strong-user power cap P_s^T, watts.
    pub p_s_threshold: f64,
    /// Minimum network sum rate, bits/s/Hz.
    pub r_min_net: f64,
    /// Maximum network sum rate, bits/s/Hz (`None` = unbounded).
    pub r_max_net: Option<f64>,
}

impl QoSBounds {
    pub fn validate(&self, num_users: usize) -> Result<()> {
        if self.r_min < 0.0 || self.r_min > self.r_max {
            return Err(Error::Config(format!(
                "per-user rate bounds must satisfy 0 <= r_min <= r_max (got [{}, {}])",
                self.r_min, self.r_max
            )));
        }
        if self.p_s_threshold <= 0.0 {
            return Err(Error::Config("strong-user power cap must be positive".into()));
        }
        if self.r_min_net < 0.0 {
            return Err(Error::Config("network minimum rate must be nonnegative".into()));
        }
        if let Some(hi) = self.r_max_net {
            if hi < self.r_min_net || hi > num_users as f64 * self.r_max {
                return Err(Error::Config(format!(
                    "network rate bounds inconsistent: [{}, {hi}] with {num_users} users capped at {}",
                    self.r_min_net, self.r_max
                )));
            }
        }
        Ok(())
    }
}
