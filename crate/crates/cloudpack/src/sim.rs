//! The evaluation environment.
//!
//! The simulator applies a first-step packing decision against the true
//! next-step demand, injecting the disturbances the optimization problem
//! does not model: migration delays, arrivals and departures, and the rule
//! that a VM is never given more than its actual demand. Realized cost is
//! accrued per step (hosts powered, migrations completed, demand
//! throttled) and accumulated into an episode regret.

use crate::error::{Error, Result};
use crate::milp::{self, CostConfig, Flavor, StepProposal};
use crate::solve::{self, MilpStatus, SolverConfig};
use crate::trace::{apply_workload, DemandTrace, WorkloadSchedule};
use serde::{Deserialize, Serialize};

/// An in-flight migration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingMigration {
    pub vm: usize,
    pub from_host: usize,
    pub to_host: usize,
    pub remaining_delay: usize,
}

/// Ground-truth packing state: per-VM placement and applied allocation,
/// plus any migrations still waiting out their delay.
///
/// A VM sits on at most one host at a time; a VM mid-migration keeps its
/// pre-migration placement and allocation until the delay elapses.
#[derive(Debug, Clone, PartialEq)]
pub struct PackingState {
    placements: Vec<Option<usize>>,
    alloc: Vec<f64>,
    pending: Vec<PendingMigration>,
    timestep: usize,
}

impl PackingState {
    pub fn empty(n_vms: usize) -> Self {
        PackingState {
            placements: vec![None; n_vms],
            alloc: vec![0.0; n_vms],
            pending: Vec::new(),
            timestep: 0,
        }
    }

    pub fn at_timestep(n_vms: usize, timestep: usize) -> Self {
        let mut s = Self::empty(n_vms);
        s.timestep = timestep;
        s
    }

    pub fn n_vms(&self) -> usize {
        self.placements.len()
    }

    pub fn timestep(&self) -> usize {
        self.timestep
    }

    pub fn host_of(&self, vm: usize) -> Option<usize> {
        self.placements[vm]
    }

    pub fn alloc_of(&self, vm: usize) -> f64 {
        self.alloc[vm]
    }

    /// Applied allocation per VM, as a row vector.
    pub fn alloc_vector(&self) -> &[f64] {
        &self.alloc
    }

    /// Puts a VM on a host with a given allocation (test and heuristic
    /// construction; no cost accounting).
    pub fn place(&mut self, vm: usize, host: usize, alloc: f64) {
        self.placements[vm] = Some(host);
        self.alloc[vm] = alloc;
    }

    pub fn clear(&mut self, vm: usize) {
        self.placements[vm] = None;
        self.alloc[vm] = 0.0;
        self.pending.retain(|p| p.vm != vm);
    }

    pub fn pending(&self) -> &[PendingMigration] {
        &self.pending
    }

    pub fn is_mid_migration(&self, vm: usize) -> bool {
        self.pending.iter().any(|p| p.vm == vm)
    }

    /// Total applied allocation on a host.
    pub fn host_load(&self, host: usize) -> f64 {
        (0..self.n_vms())
            .filter(|&i| self.placements[i] == Some(host))
            .map(|i| self.alloc[i])
            .sum()
    }

    /// Hosts with positive applied allocation.
    pub fn powered_hosts(&self) -> usize {
        (0..self.n_vms()).filter(|&h| self.host_load(h) > 0.0).count()
    }

    /// Per-VM allocation row over hosts (the VM's allocation at its host).
    pub fn alloc_row(&self, vm: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.n_vms()];
        if let Some(h) = self.placements[vm] {
            row[h] = self.alloc[vm];
        }
        row
    }
}

/// Cost components of one simulated step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub host: f64,
    pub migration: f64,
    pub throttle: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.host + self.migration + self.throttle
    }
}

/// Result of advancing the simulator by one step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub realized_cost: f64,
    pub cost_breakdown: CostBreakdown,
    pub next_state: PackingState,
    /// Applied allocation per VM, the feature slice the forecaster sees.
    pub next_features: Vec<f64>,
}

/// Advances the packing state by one timestep.
///
/// `true_demand` is the demand realized at the step being entered; a VM
/// with zero demand is treated as departed. Requested placement changes
/// become migrations: immediate when `delay` is zero, otherwise queued,
/// during which the VM keeps its pre-migration placement and allocation
/// and ignores new proposals. Allocations are clipped so a VM never
/// receives more than its actual demand nor more than the remaining host
/// capacity, and the migration charge lands on the step the move
/// completes.
pub fn step(
    state: &PackingState,
    proposal: &StepProposal,
    true_demand: &[f64],
    delay: usize,
    costs: &CostConfig,
) -> Result<StepOutcome> {
    let n = state.n_vms();
    if proposal.placements.len() != n || proposal.alloc.len() != n || true_demand.len() != n {
        return Err(Error::contract("proposal/demand dimensions do not match state"));
    }
    if let Some(h) = proposal.placements.iter().flatten().find(|&&h| h >= n) {
        return Err(Error::contract(format!("proposal places a VM on out-of-range host {h}")));
    }

    let mut next = state.clone();
    next.timestep += 1;

    // Departures vacate immediately and cost nothing.
    for vm in 0..n {
        if true_demand[vm] <= 0.0 {
            next.clear(vm);
        }
    }

    // Placement intents. VMs already mid-delay ignore new proposals; a
    // placement change enters the pending queue with the full delay.
    for vm in 0..n {
        if true_demand[vm] <= 0.0 || next.is_mid_migration(vm) {
            continue;
        }
        match (next.placements[vm], proposal.placements[vm]) {
            (None, Some(target)) => {
                // Arrival: initial placement is not a migration.
                next.placements[vm] = Some(target);
            }
            (Some(current), Some(target)) if current != target => {
                next.pending.push(PendingMigration {
                    vm,
                    from_host: current,
                    to_host: target,
                    remaining_delay: delay,
                });
            }
            // A proposal that drops a placed VM keeps it where it is.
            _ => {}
        }
    }

    // The step spans one timestep of progress, so every pending migration
    // (including ones requested just now) ticks down; those reaching zero
    // land and are charged on this step. A request with delay d therefore
    // takes effect d steps after the decision, and delay 0 is immediate.
    let mut completed = 0usize;
    let mut still_pending = Vec::new();
    for p in &next.pending {
        let mut p = p.clone();
        p.remaining_delay = p.remaining_delay.saturating_sub(1);
        if p.remaining_delay == 0 {
            next.placements[p.vm] = Some(p.to_host);
            completed += 1;
        } else {
            still_pending.push(p);
        }
    }
    next.pending = still_pending;

    // Apply allocations: frozen VMs first (their pre-migration value wins),
    // then the rest in VM order, each clipped to demand and host headroom.
    let capacity = costs.capacity as f64;
    let mut filled = vec![0.0; n];
    let mut applied = vec![0.0; n];
    for vm in 0..n {
        if true_demand[vm] <= 0.0 || !next.is_mid_migration(vm) {
            continue;
        }
        if let Some(h) = next.placements[vm] {
            let a = state.alloc[vm].min(true_demand[vm]).min(capacity - filled[h]).max(0.0);
            applied[vm] = a;
            filled[h] += a;
        }
    }
    for vm in 0..n {
        if true_demand[vm] <= 0.0 || next.is_mid_migration(vm) {
            continue;
        }
        if let Some(h) = next.placements[vm] {
            let a = proposal.alloc[vm].min(true_demand[vm]).min(capacity - filled[h]).max(0.0);
            applied[vm] = a;
            filled[h] += a;
        }
    }
    next.alloc = applied.clone();

    let host_cost = costs.host_cost * next.powered_hosts() as f64;
    let migration_cost = costs.migration_cost * completed as f64;
    let throttle_cost: f64 = (0..n)
        .map(|vm| {
            let unmet = (true_demand[vm] - applied[vm]).max(0.0);
            costs.throttle_cost * unmet / capacity
        })
        .sum();

    let breakdown = CostBreakdown { host: host_cost, migration: migration_cost, throttle: throttle_cost };
    Ok(StepOutcome {
        realized_cost: breakdown.total(),
        cost_breakdown: breakdown,
        next_state: next,
        next_features: applied,
    })
}

/// What a policy sees when asked for a decision.
pub struct PolicyContext<'a> {
    pub trace: &'a DemandTrace,
    pub schedule: &'a WorkloadSchedule,
    pub state: &'a PackingState,
    /// Current timestep; the decision applies to `t + 1`.
    pub t: usize,
    pub costs: &'a CostConfig,
}

/// A decision-maker driving the simulator.
pub trait Policy {
    fn name(&self) -> String;
    fn propose(&mut self, ctx: &PolicyContext) -> Result<StepProposal>;
}

/// Where an MPC policy gets its demand forecast.
pub trait ForecastSource {
    /// Forecast for steps `t+1 ..= t+horizon`, one row per VM.
    fn forecast(&mut self, ctx: &PolicyContext, horizon: usize) -> Result<Vec<Vec<f64>>>;
    fn label(&self) -> String;
}

/// Reads the true future demand straight from the trace.
pub struct OracleForecast;

impl ForecastSource for OracleForecast {
    fn forecast(&mut self, ctx: &PolicyContext, horizon: usize) -> Result<Vec<Vec<f64>>> {
        let n = ctx.trace.n_vms();
        if ctx.t + horizon >= ctx.trace.len() {
            return Err(Error::contract("trace too short for oracle forecast"));
        }
        Ok((0..n)
            .map(|i| (1..=horizon).map(|s| ctx.trace.demand(i, ctx.t + s)).collect())
            .collect())
    }

    fn label(&self) -> String {
        "oracle".to_string()
    }
}

/// Receding-horizon controller: forecast, solve the flavor-matched MILP,
/// execute the first step.
pub struct MpcPolicy<F: ForecastSource> {
    pub source: F,
    pub flavor: Flavor,
    pub horizon: usize,
    pub costs: CostConfig,
    pub solver: SolverConfig,
    /// Movable-VM budget for the sparsification heuristic, if any.
    pub sparsify_budget: Option<usize>,
}

impl<F: ForecastSource> MpcPolicy<F> {
    pub fn new(source: F, flavor: Flavor, horizon: usize, costs: CostConfig) -> Self {
        MpcPolicy {
            source,
            flavor,
            horizon,
            costs,
            solver: SolverConfig::default(),
            sparsify_budget: None,
        }
    }
}

impl<F: ForecastSource> Policy for MpcPolicy<F> {
    fn name(&self) -> String {
        let flavor = match self.flavor {
            Flavor::Primary => "primary",
            Flavor::Soft => "soft",
            Flavor::Hard => "hard",
        };
        format!("mpc-{}-{flavor}-h{}", self.source.label(), self.horizon)
    }

    fn propose(&mut self, ctx: &PolicyContext) -> Result<StepProposal> {
        let forecast = self.source.forecast(ctx, self.horizon)?;
        let mut instance = milp::build_instance(self.flavor, &forecast, ctx.state, &self.costs)?;
        if let Some(budget) = self.sparsify_budget {
            instance = instance.sparsify(ctx.state, budget);
        }
        let solution = solve::solve_milp(&instance, &self.solver);
        match solution.status {
            MilpStatus::Optimal => instance.extract_first_step(&solution.values),
            MilpStatus::IterLimit if !solution.values.is_empty() => {
                instance.extract_first_step(&solution.values)
            }
            status => Err(Error::solver(format!("MILP solve failed: {status:?}"))),
        }
    }
}

/// One row of an episode log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub host_cost: f64,
    pub migration_cost: f64,
    pub throttle_cost: f64,
    pub realized_cost: f64,
    pub cumulative: f64,
}

/// Episode evaluation: per-step cost breakdowns and cumulative regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub policy: String,
    pub records: Vec<StepRecord>,
    pub cumulative_regret: f64,
    /// Populated when the policy failed mid-episode; records hold the
    /// partial run.
    pub failed: Option<String>,
}

impl EpisodeReport {
    /// CSV rendering: `t,host_cost,migration_cost,throttle_cost,cumulative`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,host_cost,migration_cost,throttle_cost,cumulative\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.t, r.host_cost, r.migration_cost, r.throttle_cost, r.cumulative
            ));
        }
        out
    }
}

/// Episode parameters.
#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    pub delay: usize,
    pub steps: usize,
    /// Timestep at which the episode starts; history before it is visible
    /// to the policy.
    pub start_t: usize,
    pub costs: CostConfig,
}

/// Runs a policy for `steps` steps, applying the workload schedule and
/// accumulating realized cost. Deterministic whenever the policy is.
pub fn run_episode(
    policy: &mut dyn Policy,
    trace: &DemandTrace,
    schedule: &WorkloadSchedule,
    cfg: &EpisodeConfig,
) -> Result<EpisodeReport> {
    let worked = apply_workload(trace, schedule)?;
    if cfg.start_t + cfg.steps >= worked.len() {
        return Err(Error::contract(format!(
            "episode needs {} steps from t={}, trace has {}",
            cfg.steps,
            cfg.start_t,
            worked.len()
        )));
    }
    let mut state = PackingState::at_timestep(worked.n_vms(), cfg.start_t);
    let mut records = Vec::with_capacity(cfg.steps);
    let mut cumulative = 0.0;
    let mut failed = None;

    for k in 0..cfg.steps {
        let t = cfg.start_t + k;
        let ctx = PolicyContext { trace: &worked, schedule, state: &state, t, costs: &cfg.costs };
        let proposal = match policy.propose(&ctx) {
            Ok(p) => p,
            Err(e) => {
                failed = Some(format!("step {t}: {e}"));
                break;
            }
        };
        let demand = worked.demands_at(t + 1);
        let outcome = step(&state, &proposal, &demand, cfg.delay, &cfg.costs)?;
        cumulative += outcome.realized_cost;
        records.push(StepRecord {
            t,
            host_cost: outcome.cost_breakdown.host,
            migration_cost: outcome.cost_breakdown.migration,
            throttle_cost: outcome.cost_breakdown.throttle,
            realized_cost: outcome.realized_cost,
            cumulative,
        });
        state = outcome.next_state;
    }

    Ok(EpisodeReport {
        policy: policy.name(),
        records,
        cumulative_regret: cumulative,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn costs() -> CostConfig {
        CostConfig::default()
    }

    #[test]
    fn steady_state_costs_hosts_only() {
        let mut state = PackingState::empty(2);
        state.place(0, 0, 50.0);
        state.place(1, 1, 70.0);
        let proposal = StepProposal {
            placements: vec![Some(0), Some(1)],
            alloc: vec![50.0, 70.0],
        };
        let outcome = step(&state, &proposal, &[50.0, 70.0], 0, &costs()).unwrap();
        assert_eq!(outcome.cost_breakdown.host, 200.0);
        assert_eq!(outcome.cost_breakdown.migration, 0.0);
        assert_eq!(outcome.cost_breakdown.throttle, 0.0);
        assert_eq!(outcome.realized_cost, 200.0);
    }

    #[test]
    fn throttle_charges_unmet_fraction() {
        let mut state = PackingState::empty(1);
        state.place(0, 0, 50.0);
        let proposal = StepProposal { placements: vec![Some(0)], alloc: vec![50.0] };
        let outcome = step(&state, &proposal, &[70.0], 0, &costs()).unwrap();
        // (70 - 50) / 100 * 1000 = 200
        assert!((outcome.cost_breakdown.throttle - 200.0).abs() < 1e-12);
    }

    #[test]
    fn migration_delay_freezes_allocation() {
        let mut state = PackingState::empty(2);
        state.place(0, 0, 40.0);
        state.place(1, 1, 30.0);
        // Proposal wants VM 0 on host 1 with a bigger allocation.
        let proposal = StepProposal {
            placements: vec![Some(1), Some(1)],
            alloc: vec![60.0, 30.0],
        };
        let demand = [60.0, 30.0];
        let o1 = step(&state, &proposal, &demand, 2, &costs()).unwrap();
        // Mid-delay: VM 0 still on host 0 at its pre-migration allocation.
        assert_eq!(o1.next_state.host_of(0), Some(0));
        assert_eq!(o1.next_state.alloc_of(0), 40.0);
        assert_eq!(o1.cost_breakdown.migration, 0.0);
        assert!(o1.next_state.is_mid_migration(0));

        let o2 = step(&o1.next_state, &proposal, &demand, 2, &costs()).unwrap();
        // Delay elapsed: the move lands and is charged now.
        assert_eq!(o2.next_state.host_of(0), Some(1));
        assert_eq!(o2.cost_breakdown.migration, 10.0);
        assert!(!o2.next_state.is_mid_migration(0));
        assert_eq!(o2.next_state.alloc_of(0), 60.0);
    }

    #[test]
    fn mid_delay_ignores_new_proposals() {
        let mut state = PackingState::empty(1);
        state.place(0, 0, 40.0);
        let to_b = StepProposal { placements: vec![Some(1)], alloc: vec![40.0] };
        let o1 = step(&state, &to_b, &[40.0], 3, &costs()).unwrap();
        // A new target mid-delay is ignored.
        let to_a = StepProposal { placements: vec![Some(0)], alloc: vec![40.0] };
        let o2 = step(&o1.next_state, &to_a, &[40.0], 3, &costs()).unwrap();
        assert_eq!(o2.next_state.pending().len(), 1);
        assert_eq!(o2.next_state.pending()[0].to_host, 1);
    }

    #[test]
    fn departure_frees_without_cost() {
        let mut state = PackingState::empty(2);
        state.place(0, 0, 50.0);
        state.place(1, 0, 30.0);
        let proposal = StepProposal {
            placements: vec![Some(0), Some(0)],
            alloc: vec![50.0, 30.0],
        };
        let outcome = step(&state, &proposal, &[50.0, 0.0], 0, &costs()).unwrap();
        assert_eq!(outcome.next_state.host_of(1), None);
        assert_eq!(outcome.cost_breakdown.migration, 0.0);
        assert_eq!(outcome.cost_breakdown.host, 100.0);
        // No throttle for the departed VM.
        assert_eq!(outcome.cost_breakdown.throttle, 0.0);
    }

    #[test]
    fn allocation_clipped_to_demand() {
        let mut state = PackingState::empty(1);
        state.place(0, 0, 80.0);
        let proposal = StepProposal { placements: vec![Some(0)], alloc: vec![80.0] };
        let outcome = step(&state, &proposal, &[55.5], 0, &costs()).unwrap();
        assert_eq!(outcome.next_state.alloc_of(0), 55.5);
        assert_eq!(outcome.cost_breakdown.throttle, 0.0);
    }

    #[test]
    fn capacity_conserved_under_migration_landing() {
        // VM 0 migrates into host 1 which the proposal has already filled.
        let mut state = PackingState::empty(2);
        state.place(0, 0, 60.0);
        state.place(1, 1, 80.0);
        let proposal = StepProposal {
            placements: vec![Some(1), Some(1)],
            alloc: vec![60.0, 80.0],
        };
        let o1 = step(&state, &proposal, &[60.0, 80.0], 2, &costs()).unwrap();
        let o2 = step(&o1.next_state, &proposal, &[60.0, 80.0], 2, &costs()).unwrap();
        assert_eq!(o2.next_state.host_of(0), Some(1));
        let load = o2.next_state.host_load(1);
        assert!(load <= 100.0 + 1e-9, "load {load}");
    }
}
