//! Assembly of packing MILP instances.

use super::layout::VariableLayout;
use super::{CostConfig, Flavor};
use crate::error::{Error, Result};
use crate::sim::PackingState;

/// Constraint sense. Greater-or-equal rows are stored negated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
}

/// Identifies what a constraint row encodes; used for exports, gradient
/// assembly, and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `sum_i alloc[i][h][t] - C * used[h][t] <= 0`
    Capacity { host: usize, t: usize },
    /// `sum_h placed[i][h][t] = 1`
    Placement { vm: usize, t: usize },
    /// `alloc[i][h][t] - C * placed[i][h][t] <= 0`
    Support { vm: usize, host: usize, t: usize },
    /// `sum_i migr[i][h][t] <= max_migrations`
    MigrBudget { host: usize, t: usize },
    /// `placed(prev) - placed(t) - migr(t) <= 0` (rhs-adjusted at the boundary)
    MigrUpper { vm: usize, host: usize, t: usize },
    /// `placed(t) - placed(prev) - migr(t) <= 0`
    MigrLower { vm: usize, host: usize, t: usize },
    /// `used[h+1][t] - used[h][t] <= 0`
    HostOrder { host: usize, t: usize },
    /// `alloc[i][h][t] - bound * placed[i][h][t] <= 0`, the
    /// forecast-parameterized demand cap (hard flavor only).
    DemandCap { vm: usize, host: usize, t: usize },
}

/// A sparse constraint row.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Rel,
    pub rhs: f64,
    pub kind: RowKind,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, c)| c * values[j]).sum()
    }
}

/// Options controlling instance assembly.
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Emit the host-ordering rows and the triangular placement fixing
    /// (`placed[i][h][t] = 0` for `h > i`).
    pub symmetry_breaking: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { symmetry_breaking: true }
    }
}

/// First-step decision extracted from a solved instance, ready to hand to
/// the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProposal {
    /// Proposed host per VM; `None` for VMs the proposal does not place.
    pub placements: Vec<Option<usize>>,
    /// Proposed allocation per VM (on its proposed host).
    pub alloc: Vec<f64>,
}

impl StepProposal {
    pub fn empty(n_vms: usize) -> Self {
        StepProposal { placements: vec![None; n_vms], alloc: vec![0.0; n_vms] }
    }
}

/// An assembled packing MILP.
///
/// `solve_objective` is what the solver minimizes (soft terms folded in at
/// the raw forecast); `cost_vector` is the flavor-independent cost part
/// used for regret evaluation. The reported objective value of a solution
/// is `solve_objective . v + objective_constant`, where the constant is
/// the substituted-throttle demand term at the forecast.
#[derive(Debug, Clone)]
pub struct MilpInstance {
    pub flavor: Flavor,
    pub layout: VariableLayout,
    pub costs: CostConfig,
    /// Raw forecast, indexed `vm * horizon + t`.
    pub forecast: Vec<f64>,
    /// Whether each VM is modeled (placed before, or positive forecast).
    pub active: Vec<bool>,
    /// Host each VM occupied before the horizon.
    pub prev_placed: Vec<Option<usize>>,
    pub solve_objective: Vec<f64>,
    pub cost_vector: Vec<f64>,
    pub objective_constant: f64,
    pub rows: Vec<Row>,
    /// Box bounds per variable; fixings are encoded as `lb == ub`.
    pub bounds: Vec<(f64, f64)>,
    /// Integrality marker per variable (all materialized families are
    /// integral in this formulation).
    pub integral: Vec<bool>,
    pub symmetry_breaking: bool,
}

/// Builds an instance with default options (symmetry breaking on).
pub fn build_instance(
    flavor: Flavor,
    forecast: &[Vec<f64>],
    prev_state: &PackingState,
    costs: &CostConfig,
) -> Result<MilpInstance> {
    build_instance_with(flavor, forecast, prev_state, costs, &BuildOptions::default())
}

/// Builds an instance of the requested flavor from an `n_vms x horizon`
/// forecast matrix and the packing state at the start of the horizon.
pub fn build_instance_with(
    flavor: Flavor,
    forecast: &[Vec<f64>],
    prev_state: &PackingState,
    costs: &CostConfig,
    options: &BuildOptions,
) -> Result<MilpInstance> {
    costs.validate()?;
    let n = forecast.len();
    if n == 0 {
        return Err(Error::config("forecast has no VMs"));
    }
    let horizon = forecast[0].len();
    if horizon == 0 {
        return Err(Error::config("forecast has no horizon steps"));
    }
    if forecast.iter().any(|row| row.len() != horizon) {
        return Err(Error::config("ragged forecast matrix"));
    }
    for row in forecast {
        for &y in row {
            if !y.is_finite() || y < 0.0 {
                return Err(Error::contract(format!("forecast entry {y} is negative or non-finite")));
            }
        }
    }
    if prev_state.n_vms() != n {
        return Err(Error::contract(format!(
            "previous state covers {} VMs, forecast {n}",
            prev_state.n_vms()
        )));
    }
    validate_prev_state(prev_state, costs)?;

    let layout = VariableLayout::new(n, horizon);
    let n_vars = layout.n_vars();
    let capacity = costs.capacity as f64;
    let throttle_rate = costs.throttle_rate();

    let flat_forecast: Vec<f64> = (0..n)
        .flat_map(|i| forecast[i].iter().cloned().collect::<Vec<_>>())
        .collect();
    let active: Vec<bool> = (0..n)
        .map(|i| prev_state.host_of(i).is_some() || forecast[i].iter().any(|&y| y > 0.0))
        .collect();
    let prev_placed: Vec<Option<usize>> = (0..n).map(|i| prev_state.host_of(i)).collect();

    // Flavor-independent costs: hosts, half-rate migrations, and the
    // allocation reward left by substituting the throttle fraction.
    let mut cost_vector = vec![0.0; n_vars];
    for t in 0..horizon {
        for h in 0..n {
            cost_vector[layout.used(h, t)] = costs.host_cost;
        }
        for i in 0..n {
            for h in 0..n {
                cost_vector[layout.migr(i, h, t)] = costs.migration_cost / 2.0;
                cost_vector[layout.alloc(i, h, t)] = -throttle_rate;
            }
        }
    }

    let mut solve_objective = cost_vector.clone();
    if flavor == Flavor::Soft {
        for t in 0..horizon {
            for i in 0..n {
                let y = flat_forecast[i * horizon + t];
                for h in 0..n {
                    let lambda = costs.lambda(i, h, t, n);
                    solve_objective[layout.alloc(i, h, t)] += lambda;
                    solve_objective[layout.placed(i, h, t)] -= lambda * y;
                }
            }
        }
    }

    let objective_constant = demand_constant_for(&flat_forecast, &active, horizon, throttle_rate);

    // Bounds: binaries in [0,1], allocations in [0, C]; inactive VMs and
    // symmetry-excluded placements are fixed at zero.
    let mut bounds = vec![(0.0, 1.0); n_vars];
    for t in 0..horizon {
        for i in 0..n {
            for h in 0..n {
                bounds[layout.alloc(i, h, t)] = (0.0, capacity);
            }
        }
    }
    for i in 0..n {
        if !active[i] {
            for t in 0..horizon {
                for h in 0..n {
                    bounds[layout.alloc(i, h, t)] = (0.0, 0.0);
                    bounds[layout.placed(i, h, t)] = (0.0, 0.0);
                    bounds[layout.migr(i, h, t)] = (0.0, 0.0);
                }
            }
        } else if options.symmetry_breaking {
            for h in (i + 1)..n {
                for t in 0..horizon {
                    bounds[layout.placed(i, h, t)] = (0.0, 0.0);
                }
            }
        }
    }

    let mut rows = Vec::new();
    for t in 0..horizon {
        // Capacity per host.
        for h in 0..n {
            let mut coeffs: Vec<(usize, f64)> =
                (0..n).filter(|&i| active[i]).map(|i| (layout.alloc(i, h, t), 1.0)).collect();
            coeffs.push((layout.used(h, t), -capacity));
            rows.push(Row { coeffs, rel: Rel::Le, rhs: 0.0, kind: RowKind::Capacity { host: h, t } });
        }
        // Single placement per active VM.
        for i in 0..n {
            if !active[i] {
                continue;
            }
            let coeffs = (0..n).map(|h| (layout.placed(i, h, t), 1.0)).collect();
            rows.push(Row { coeffs, rel: Rel::Eq, rhs: 1.0, kind: RowKind::Placement { vm: i, t } });
        }
        // Placement support: allocation only on the occupied host.
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for h in 0..n {
                rows.push(Row {
                    coeffs: vec![(layout.alloc(i, h, t), 1.0), (layout.placed(i, h, t), -capacity)],
                    rel: Rel::Le,
                    rhs: 0.0,
                    kind: RowKind::Support { vm: i, host: h, t },
                });
            }
        }
        // Migration budget per host.
        for h in 0..n {
            let coeffs = (0..n)
                .filter(|&i| active[i])
                .map(|i| (layout.migr(i, h, t), 1.0))
                .collect();
            rows.push(Row {
                coeffs,
                rel: Rel::Le,
                rhs: costs.max_migrations as f64,
                kind: RowKind::MigrBudget { host: h, t },
            });
        }
        // Migration linearization for the transition into step t. At the
        // boundary the previous placement is a constant; a VM with no
        // previous placement is an arrival and its first placement is not
        // a migration, so the rows are omitted.
        for i in 0..n {
            if !active[i] {
                continue;
            }
            if t == 0 {
                if let Some(prev_h) = prev_placed[i] {
                    for h in 0..n {
                        let prev = if h == prev_h { 1.0 } else { 0.0 };
                        rows.push(Row {
                            coeffs: vec![(layout.placed(i, h, 0), -1.0), (layout.migr(i, h, 0), -1.0)],
                            rel: Rel::Le,
                            rhs: -prev,
                            kind: RowKind::MigrUpper { vm: i, host: h, t: 0 },
                        });
                        rows.push(Row {
                            coeffs: vec![(layout.placed(i, h, 0), 1.0), (layout.migr(i, h, 0), -1.0)],
                            rel: Rel::Le,
                            rhs: prev,
                            kind: RowKind::MigrLower { vm: i, host: h, t: 0 },
                        });
                    }
                }
            } else {
                for h in 0..n {
                    rows.push(Row {
                        coeffs: vec![
                            (layout.placed(i, h, t - 1), 1.0),
                            (layout.placed(i, h, t), -1.0),
                            (layout.migr(i, h, t), -1.0),
                        ],
                        rel: Rel::Le,
                        rhs: 0.0,
                        kind: RowKind::MigrUpper { vm: i, host: h, t },
                    });
                    rows.push(Row {
                        coeffs: vec![
                            (layout.placed(i, h, t), 1.0),
                            (layout.placed(i, h, t - 1), -1.0),
                            (layout.migr(i, h, t), -1.0),
                        ],
                        rel: Rel::Le,
                        rhs: 0.0,
                        kind: RowKind::MigrLower { vm: i, host: h, t },
                    });
                }
            }
        }
        // Host ordering.
        if options.symmetry_breaking {
            for h in 0..n.saturating_sub(1) {
                rows.push(Row {
                    coeffs: vec![(layout.used(h + 1, t), 1.0), (layout.used(h, t), -1.0)],
                    rel: Rel::Le,
                    rhs: 0.0,
                    kind: RowKind::HostOrder { host: h, t },
                });
            }
        }
        // Demand caps (hard flavor). The bound is floored: with integral
        // allocations, alloc <= y is equivalent to alloc <= floor(y), and
        // the integral bound keeps the LP relaxation tight. The quadratic
        // relaxation regenerates these rows from the raw forecast.
        if flavor == Flavor::Hard {
            for i in 0..n {
                for h in 0..n {
                    let bound = flat_forecast[i * horizon + t].floor();
                    rows.push(Row {
                        coeffs: vec![(layout.alloc(i, h, t), 1.0), (layout.placed(i, h, t), -bound)],
                        rel: Rel::Le,
                        rhs: 0.0,
                        kind: RowKind::DemandCap { vm: i, host: h, t },
                    });
                }
            }
        }
    }

    Ok(MilpInstance {
        flavor,
        layout,
        costs: costs.clone(),
        forecast: flat_forecast,
        active,
        prev_placed,
        solve_objective,
        cost_vector,
        objective_constant,
        rows,
        bounds,
        integral: vec![true; n_vars],
        symmetry_breaking: options.symmetry_breaking,
    })
}

fn validate_prev_state(state: &PackingState, costs: &CostConfig) -> Result<()> {
    let n = state.n_vms();
    let mut loads = vec![0.0; n];
    for i in 0..n {
        match state.host_of(i) {
            Some(h) if h >= n => {
                return Err(Error::contract(format!("VM {i} placed on out-of-range host {h}")));
            }
            Some(h) => loads[h] += state.alloc_of(i),
            None => {
                if state.alloc_of(i) > 0.0 {
                    return Err(Error::contract(format!("VM {i} has allocation but no host")));
                }
            }
        }
    }
    let cap = costs.capacity as f64;
    if let Some((h, &load)) = loads.iter().enumerate().find(|&(_, &l)| l > cap + 1e-9) {
        return Err(Error::contract(format!("host {h} over capacity in previous state: {load}")));
    }
    Ok(())
}

fn demand_constant_for(flat: &[f64], active: &[bool], horizon: usize, throttle_rate: f64) -> f64 {
    let mut total = 0.0;
    for (i, &is_active) in active.iter().enumerate() {
        if !is_active {
            continue;
        }
        for t in 0..horizon {
            total += flat[i * horizon + t];
        }
    }
    throttle_rate * total
}

impl MilpInstance {
    pub fn n_vars(&self) -> usize {
        self.layout.n_vars()
    }

    pub fn n_vms(&self) -> usize {
        self.layout.n_vms
    }

    pub fn horizon(&self) -> usize {
        self.layout.horizon
    }

    pub fn forecast_at(&self, vm: usize, t: usize) -> f64 {
        self.forecast[vm * self.layout.horizon + t]
    }

    /// Objective value of a variable assignment, demand constant included.
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        dot(&self.solve_objective, values) + self.objective_constant
    }

    /// Flavor-independent decision cost `p . v` (no demand constant).
    pub fn decision_cost(&self, values: &[f64]) -> f64 {
        dot(&self.cost_vector, values)
    }

    /// Substituted-throttle demand constant evaluated at an arbitrary
    /// demand matrix (same shape as the forecast).
    pub fn demand_constant(&self, demand: &[Vec<f64>]) -> f64 {
        let flat: Vec<f64> = (0..self.n_vms())
            .flat_map(|i| demand[i].iter().cloned().collect::<Vec<_>>())
            .collect();
        demand_constant_for(&flat, &self.active, self.layout.horizon, self.costs.throttle_rate())
    }

    /// Soft demand-cap penalty `sum lambda * (alloc - y * placed)` at an
    /// arbitrary demand matrix.
    pub fn soft_penalty(&self, values: &[f64], demand: &[Vec<f64>]) -> f64 {
        let n = self.n_vms();
        let mut total = 0.0;
        for t in 0..self.layout.horizon {
            for i in 0..n {
                if !self.active[i] {
                    continue;
                }
                let y = demand[i][t];
                for h in 0..n {
                    let lambda = self.costs.lambda(i, h, t, n);
                    total += lambda
                        * (values[self.layout.alloc(i, h, t)]
                            - y * values[self.layout.placed(i, h, t)]);
                }
            }
        }
        total
    }

    /// Whether an assignment satisfies all rows, bounds, and (optionally)
    /// integrality within the given tolerance.
    pub fn is_feasible(&self, values: &[f64], tol: f64, check_integrality: bool) -> bool {
        if values.len() != self.n_vars() {
            return false;
        }
        for (j, &(lb, ub)) in self.bounds.iter().enumerate() {
            if values[j] < lb - tol || values[j] > ub + tol {
                return false;
            }
            if check_integrality && self.integral[j] && (values[j] - values[j].round()).abs() > tol {
                return false;
            }
        }
        for row in &self.rows {
            let activity = row.activity(values);
            match row.rel {
                Rel::Le => {
                    if activity > row.rhs + tol {
                        return false;
                    }
                }
                Rel::Eq => {
                    if (activity - row.rhs).abs() > tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// First-step cost of an assignment evaluated at the true next-step
    /// demand: hosts powered, migrations completed, and the signed
    /// throttle term.
    pub fn first_step_cost(&self, values: &[f64], true_next: &[f64]) -> f64 {
        let n = self.n_vms();
        let mut hosts = 0.0;
        let mut migrs = 0.0;
        for h in 0..n {
            hosts += values[self.layout.used(h, 0)].round();
            for i in 0..n {
                migrs += values[self.layout.migr(i, h, 0)].round();
            }
        }
        let mut throttle = 0.0;
        for i in 0..n {
            if !self.active[i] {
                continue;
            }
            let allocated: f64 = (0..n).map(|h| values[self.layout.alloc(i, h, 0)]).sum();
            throttle += (true_next[i] - allocated) * self.costs.throttle_rate();
        }
        self.costs.host_cost * hosts + self.costs.migration_cost / 2.0 * migrs + throttle
    }

    /// Extracts the first-step decision of an integral assignment.
    ///
    /// Errors if the assignment puts an active VM on more than one host.
    pub fn extract_first_step(&self, values: &[f64]) -> Result<StepProposal> {
        let n = self.n_vms();
        let mut proposal = StepProposal::empty(n);
        for i in 0..n {
            if !self.active[i] {
                continue;
            }
            let hosts: Vec<usize> =
                (0..n).filter(|&h| values[self.layout.placed(i, h, 0)] > 0.5).collect();
            if hosts.len() > 1 {
                return Err(Error::contract(format!("VM {i} placed on {} hosts", hosts.len())));
            }
            proposal.placements[i] = hosts.first().copied();
            proposal.alloc[i] =
                (0..n).map(|h| values[self.layout.alloc(i, h, 0)].round()).sum::<f64>();
        }
        Ok(proposal)
    }

    /// A cheap feasible assignment used to seed branch-and-bound: keep
    /// every previously placed VM where it is, first-fit the arrivals,
    /// hold placements constant over the horizon, and fill allocations
    /// greedily per host.
    pub fn heuristic_solution(&self) -> Option<Vec<f64>> {
        let n = self.n_vms();
        let horizon = self.layout.horizon;
        let capacity = self.costs.capacity as f64;

        let mut hosts: Vec<Option<usize>> = vec![None; n];
        let mut load = vec![0.0; n];
        for i in 0..n {
            if !self.active[i] {
                continue;
            }
            if let Some(h) = self.prev_placed[i] {
                hosts[i] = Some(h);
                load[h] += self.forecast_at(i, 0).ceil().min(capacity);
            }
        }
        for i in 0..n {
            if !self.active[i] || hosts[i].is_some() {
                continue;
            }
            let demand = self.forecast_at(i, 0).ceil().min(capacity);
            let allowed = if self.symmetry_breaking { i + 1 } else { n };
            let pick = (0..allowed)
                .find(|&h| load[h] + demand <= capacity)
                .or_else(|| {
                    (0..allowed).min_by(|&a, &b| load[a].partial_cmp(&load[b]).unwrap())
                })?;
            hosts[i] = Some(pick);
            load[pick] += demand;
        }

        let mut values = vec![0.0; self.n_vars()];
        for t in 0..horizon {
            for i in 0..n {
                if let Some(h) = hosts[i] {
                    values[self.layout.placed(i, h, t)] = 1.0;
                }
            }
            // Greedy fill, ascending VM index.
            let mut room = vec![capacity; n];
            for i in 0..n {
                if let Some(h) = hosts[i] {
                    let cap = match self.flavor {
                        Flavor::Hard => self.forecast_at(i, t).floor().min(capacity),
                        _ => capacity,
                    };
                    let amount = cap.min(room[h]).max(0.0);
                    values[self.layout.alloc(i, h, t)] = amount;
                    room[h] -= amount;
                }
            }
            let mut max_used: Option<usize> = None;
            for h in 0..n {
                if room[h] < capacity {
                    max_used = Some(h.max(max_used.unwrap_or(0)));
                }
            }
            if let Some(top) = max_used {
                if self.symmetry_breaking {
                    for h in 0..=top {
                        values[self.layout.used(h, t)] = 1.0;
                    }
                } else {
                    for h in 0..n {
                        if room[h] < capacity {
                            values[self.layout.used(h, t)] = 1.0;
                        }
                    }
                }
            }
        }

        if self.is_feasible(&values, 1e-9, true) {
            Some(values)
        } else {
            None
        }
    }

    /// Freezes the placements of every active VM that is neither newly
    /// arriving nor among the `movable_budget` lowest-indexed candidates,
    /// substituting its previous placement and zero migrations.
    /// Allocations stay free for all VMs.
    pub fn sparsify(&self, prev_state: &PackingState, movable_budget: usize) -> MilpInstance {
        let n = self.n_vms();
        let mut out = self.clone();
        let mut movable_left = movable_budget;
        for i in 0..n {
            if !self.active[i] {
                continue;
            }
            let prev = prev_state.host_of(i);
            if prev.is_none() {
                continue; // arrivals always packable
            }
            if movable_left > 0 {
                movable_left -= 1;
                continue;
            }
            let prev_h = prev.unwrap();
            for t in 0..self.layout.horizon {
                for h in 0..n {
                    let fixed = if h == prev_h { 1.0 } else { 0.0 };
                    let idx = self.layout.placed(i, h, t);
                    out.bounds[idx] = (fixed, fixed);
                    out.bounds[self.layout.migr(i, h, t)] = (0.0, 0.0);
                }
            }
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::SoftLambda;
    use crate::sim::PackingState;

    fn costs() -> CostConfig {
        CostConfig::default()
    }

    #[test]
    fn hard_flavor_has_one_cap_row_per_triple() {
        let prev = PackingState::empty(2);
        let inst =
            build_instance(Flavor::Hard, &[vec![60.0], vec![60.0]], &prev, &costs()).unwrap();
        let caps = inst
            .rows
            .iter()
            .filter(|r| matches!(r.kind, RowKind::DemandCap { .. }))
            .count();
        assert_eq!(caps, 4);
    }

    #[test]
    fn primary_and_soft_lack_cap_rows() {
        let prev = PackingState::empty(2);
        for flavor in [Flavor::Primary, Flavor::Soft] {
            let inst = build_instance(flavor, &[vec![60.0], vec![60.0]], &prev, &costs()).unwrap();
            assert!(!inst.rows.iter().any(|r| matches!(r.kind, RowKind::DemandCap { .. })));
        }
    }

    #[test]
    fn triangular_fixing_pins_high_hosts() {
        let prev = PackingState::empty(2);
        let inst =
            build_instance(Flavor::Primary, &[vec![50.0], vec![50.0]], &prev, &costs()).unwrap();
        // VM 1 (index 0) may only use host 1 (index 0).
        assert_eq!(inst.bounds[inst.layout.placed(0, 1, 0)], (0.0, 0.0));
        assert_ne!(inst.bounds[inst.layout.placed(1, 1, 0)], (0.0, 0.0));
    }

    #[test]
    fn soft_objective_differs_from_primary_by_penalty() {
        let prev = PackingState::empty(2);
        let forecast = vec![vec![60.0, 30.0], vec![45.5, 70.0]];
        let primary = build_instance(Flavor::Primary, &forecast, &prev, &costs()).unwrap();
        let soft = build_instance(Flavor::Soft, &forecast, &prev, &costs()).unwrap();
        // Any assignment will do; feasibility is irrelevant to the identity.
        let v: Vec<f64> =
            (0..primary.n_vars()).map(|j| ((j * 7919) % 11) as f64 / 3.0).collect();
        let lhs = soft.evaluate(&v) - primary.evaluate(&v);
        let rhs = soft.soft_penalty(&v, &forecast);
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn negative_forecast_rejected() {
        let prev = PackingState::empty(1);
        assert!(build_instance(Flavor::Hard, &[vec![-1.0]], &prev, &costs()).is_err());
    }

    #[test]
    fn inactive_vms_are_fixed_to_zero() {
        let prev = PackingState::empty(2);
        let inst =
            build_instance(Flavor::Hard, &[vec![0.0], vec![50.0]], &prev, &costs()).unwrap();
        assert!(!inst.active[0]);
        assert_eq!(inst.bounds[inst.layout.placed(0, 0, 0)], (0.0, 0.0));
        assert_eq!(inst.bounds[inst.layout.alloc(0, 0, 0)], (0.0, 0.0));
        // No placement row for the inactive VM.
        assert!(!inst
            .rows
            .iter()
            .any(|r| matches!(r.kind, RowKind::Placement { vm: 0, .. })));
    }

    #[test]
    fn boundary_rows_only_for_previously_placed() {
        let mut prev = PackingState::empty(2);
        prev.place(0, 0, 40.0);
        let inst =
            build_instance(Flavor::Primary, &[vec![50.0], vec![50.0]], &prev, &costs()).unwrap();
        let boundary: Vec<_> = inst
            .rows
            .iter()
            .filter(|r| matches!(r.kind, RowKind::MigrUpper { t: 0, .. }))
            .collect();
        assert_eq!(boundary.len(), 2); // VM 0 on each host; VM 1 arrives free
    }

    #[test]
    fn sparsify_budget_zero_freezes_placements() {
        let mut prev = PackingState::empty(3);
        prev.place(0, 0, 40.0);
        prev.place(1, 1, 40.0);
        let forecast = vec![vec![50.0], vec![50.0], vec![50.0]];
        let inst = build_instance(Flavor::Primary, &forecast, &prev, &costs()).unwrap();
        let sparse = inst.sparsify(&prev, 0);
        // VM 0 frozen to host 0.
        assert_eq!(sparse.bounds[inst.layout.placed(0, 0, 0)], (1.0, 1.0));
        assert_eq!(sparse.bounds[inst.layout.migr(0, 0, 0)], (0.0, 0.0));
        // VM 2 has no previous host: still free.
        assert_eq!(sparse.bounds[inst.layout.placed(2, 0, 0)], (0.0, 1.0));
        // Allocations stay free.
        assert_eq!(sparse.bounds[inst.layout.alloc(0, 0, 0)], (0.0, 100.0));
    }

    #[test]
    fn lambda_uniform_and_dense_agree_on_uniform_values() {
        let mut c = costs();
        c.soft_multipliers = SoftLambda::PerEntry(vec![10.0; 2 * 2 * 1]);
        let prev = PackingState::empty(2);
        let forecast = vec![vec![60.0], vec![60.0]];
        let dense = build_instance(Flavor::Soft, &forecast, &prev, &c).unwrap();
        let uniform = build_instance(Flavor::Soft, &forecast, &prev, &costs()).unwrap();
        assert_eq!(dense.solve_objective, uniform.solve_objective);
    }
}
