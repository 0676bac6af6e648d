//! MILP formulations of the packing problem.
//!
//! The decision variables per horizon step `t` are
//!
//! * `alloc[i][h][t]` — integer resource units given to VM `i` on host `h`,
//! * `used[h][t]` — whether host `h` is powered,
//! * `placed[i][h][t]` — whether VM `i` sits on host `h`,
//! * `migr[i][h][t]` — whether host `h` takes part in migrating VM `i`
//!   on the transition into step `t`.
//!
//! The throttling fraction `(demand - allocation) / capacity` is
//! substituted into the objective, leaving a `-throttle_cost/C` reward per
//! allocated unit plus a demand-dependent constant, so only the four
//! families above are materialized.
//!
//! Three flavors share the fixed constraint set (capacity, single
//! placement, placement support, migration budget and linearization, and
//! optional symmetry breaking) and differ in how the allocation-below-
//! demand restriction enters:
//!
//! * [`Flavor::Primary`] omits it entirely;
//! * [`Flavor::Soft`] folds `lambda * (alloc - forecast * placed)` into the
//!   objective;
//! * [`Flavor::Hard`] keeps `alloc <= forecast * placed` as constraint rows.

mod instance;
mod layout;
mod lp_format;
mod qp;

pub use instance::{BuildOptions, MilpInstance, Rel, Row, RowKind, StepProposal};
pub use layout::{VarFamily, VariableLayout};
pub use qp::{qp_relax, ForecastSensitivity, QpInstance};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which treatment the allocation-below-demand restriction receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Primary,
    Soft,
    Hard,
}

/// Lagrange multipliers weighting the softened demand-cap terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoftLambda {
    /// One multiplier for every `(vm, host, step)` triple.
    Uniform(f64),
    /// Dense per-entry multipliers, indexed `(t * n + i) * n + h`.
    PerEntry(Vec<f64>),
}

impl SoftLambda {
    /// Multiplier for VM `i`, host `h`, horizon step `t`.
    pub fn get(&self, i: usize, h: usize, t: usize, n_vms: usize) -> f64 {
        match self {
            SoftLambda::Uniform(v) => *v,
            SoftLambda::PerEntry(values) => values[(t * n_vms + i) * n_vms + h],
        }
    }

    fn min_value(&self) -> f64 {
        match self {
            SoftLambda::Uniform(v) => *v,
            SoftLambda::PerEntry(values) => values.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }
}

/// Cost model of the packing problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    /// Currency per powered host per timestep.
    pub host_cost: f64,
    /// Currency per completed migration. Each migration touches two hosts,
    /// so the objective carries `migration_cost / 2` per `migr` variable.
    pub migration_cost: f64,
    /// Currency per fully throttled resource unit.
    pub throttle_cost: f64,
    /// Resource units per host.
    pub capacity: u32,
    /// Migration budget per host per timestep.
    pub max_migrations: u32,
    /// Multipliers for the soft flavor.
    pub soft_multipliers: SoftLambda,
}

impl Default for CostConfig {
    /// Defaults sized so one host holds one to three sinusoidal VMs and
    /// throttling is strongly dispreferred: host 100, migration 10,
    /// throttle 1000, capacity 100, one migration per host per step, and
    /// uniform multipliers `throttle_cost / capacity`.
    fn default() -> Self {
        CostConfig {
            host_cost: 100.0,
            migration_cost: 10.0,
            throttle_cost: 1000.0,
            capacity: 100,
            max_migrations: 1,
            soft_multipliers: SoftLambda::Uniform(10.0),
        }
    }
}

impl CostConfig {
    /// Throttle cost per allocated unit, `throttle_cost / capacity`.
    pub fn throttle_rate(&self) -> f64 {
        self.throttle_cost / self.capacity as f64
    }

    /// Multiplier for VM `i`, host `h`, step `t` given `n_vms` VMs.
    pub fn lambda(&self, i: usize, h: usize, t: usize, n_vms: usize) -> f64 {
        self.soft_multipliers.get(i, h, t, n_vms)
    }

    pub fn validate(&self) -> Result<()> {
        if self.host_cost < 0.0 || self.migration_cost < 0.0 || self.throttle_cost < 0.0 {
            return Err(Error::config("costs must be non-negative"));
        }
        if self.capacity < 1 {
            return Err(Error::config("capacity must be at least 1"));
        }
        if self.soft_multipliers.min_value() < 0.0 {
            return Err(Error::config("soft multipliers must be non-negative"));
        }
        Ok(())
    }
}
