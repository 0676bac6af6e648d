//! Online packing heuristics: first-fit and best-fit.
//!
//! Both place each newly arriving VM once and never migrate it. When a
//! VM's demand later outgrows its host, the allocation is capped at the
//! host's residual capacity and throttling accrues.

use crate::error::Result;
use crate::milp::StepProposal;
use crate::sim::{PackingState, Policy, PolicyContext};

/// Places arrivals on the lowest-indexed host with enough residual, opening
/// a fresh host when none fits. Existing placements never change;
/// allocations are `min(demand, residual)`.
pub fn first_fit(state: &PackingState, demand: &[f64], capacity: u32) -> PackingState {
    pack(state, demand, capacity, Strategy::FirstFit)
}

/// Places arrivals on the host minimizing the post-placement residual
/// among those that fit (ties to the lowest index), opening a fresh host
/// when none fits.
pub fn best_fit(state: &PackingState, demand: &[f64], capacity: u32) -> PackingState {
    pack(state, demand, capacity, Strategy::BestFit)
}

#[derive(Clone, Copy)]
enum Strategy {
    FirstFit,
    BestFit,
}

fn pack(state: &PackingState, demand: &[f64], capacity: u32, strategy: Strategy) -> PackingState {
    let n = state.n_vms();
    let cap = capacity as f64;
    let mut next = state.clone();

    // Departures free their hosts.
    for vm in 0..n {
        if demand[vm] <= 0.0 {
            next.clear(vm);
        }
    }

    // Refresh allocations of already placed VMs, ascending VM index.
    let mut filled = vec![0.0; n];
    for vm in 0..n {
        if demand[vm] <= 0.0 {
            continue;
        }
        if let Some(h) = next.host_of(vm) {
            let amount = demand[vm].min(cap - filled[h]).max(0.0);
            next.place(vm, h, amount);
            filled[h] += amount;
        }
    }

    // Place arrivals.
    for vm in 0..n {
        if demand[vm] <= 0.0 || next.host_of(vm).is_some() {
            continue;
        }
        let fits: Vec<usize> = (0..n).filter(|&h| cap - filled[h] >= demand[vm]).collect();
        let host = match strategy {
            Strategy::FirstFit => fits.first().copied(),
            Strategy::BestFit => fits
                .into_iter()
                .min_by(|&a, &b| {
                    let ra = cap - filled[a] - demand[vm];
                    let rb = cap - filled[b] - demand[vm];
                    ra.partial_cmp(&rb).unwrap().then(a.cmp(&b))
                }),
        };
        let host = host
            // Nothing fits: open the lowest-indexed empty host, or fall
            // back to the emptiest one (demand above capacity throttles
            // no matter what).
            .or_else(|| (0..n).find(|&h| filled[h] == 0.0))
            .unwrap_or_else(|| {
                (0..n)
                    .min_by(|&a, &b| filled[a].partial_cmp(&filled[b]).unwrap())
                    .unwrap()
            });
        let amount = demand[vm].min(cap - filled[host]).max(0.0);
        next.place(vm, host, amount);
        filled[host] += amount;
    }
    next
}

/// First-fit as a simulator policy.
pub struct FirstFitPolicy;

/// Best-fit as a simulator policy.
pub struct BestFitPolicy;

fn proposal_from(state: &PackingState) -> StepProposal {
    let n = state.n_vms();
    StepProposal {
        placements: (0..n).map(|vm| state.host_of(vm)).collect(),
        alloc: (0..n).map(|vm| state.alloc_of(vm)).collect(),
    }
}

impl Policy for FirstFitPolicy {
    fn name(&self) -> String {
        "first-fit".to_string()
    }

    fn propose(&mut self, ctx: &PolicyContext) -> Result<StepProposal> {
        let demand = ctx.trace.demands_at(ctx.t + 1);
        Ok(proposal_from(&first_fit(ctx.state, &demand, ctx.costs.capacity)))
    }
}

impl Policy for BestFitPolicy {
    fn name(&self) -> String {
        "best-fit".to_string()
    }

    fn propose(&mut self, ctx: &PolicyContext) -> Result<StepProposal> {
        let demand = ctx.trace.demands_at(ctx.t + 1);
        Ok(proposal_from(&best_fit(ctx.state, &demand, ctx.costs.capacity)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two hosts with the given residuals (capacity 100), a fresh VM at
    /// index 2.
    fn state_with_residuals(r0: f64, r1: f64) -> PackingState {
        let mut s = PackingState::empty(3);
        s.place(0, 0, 100.0 - r0);
        s.place(1, 1, 100.0 - r1);
        s
    }

    #[test]
    fn first_fit_skips_full_hosts() {
        let s = state_with_residuals(30.0, 50.0);
        let d = [70.0, 50.0, 40.0];
        let next = first_fit(&s, &d, 100);
        assert_eq!(next.host_of(2), Some(1));
    }

    #[test]
    fn first_fit_takes_first_fitting_host() {
        let s = state_with_residuals(50.0, 45.0);
        let d = [50.0, 55.0, 40.0];
        let next = first_fit(&s, &d, 100);
        assert_eq!(next.host_of(2), Some(0));
    }

    #[test]
    fn first_fit_opens_new_host() {
        let s = PackingState::empty(1);
        let next = first_fit(&s, &[60.0], 100);
        assert_eq!(next.host_of(0), Some(0));
        assert_eq!(next.alloc_of(0), 60.0);
    }

    #[test]
    fn best_fit_minimizes_residual() {
        let s = state_with_residuals(50.0, 45.0);
        let d = [50.0, 55.0, 40.0];
        let next = best_fit(&s, &d, 100);
        // Post-placement residuals would be 10 vs 5; host 1 wins.
        assert_eq!(next.host_of(2), Some(1));
    }

    #[test]
    fn best_fit_single_fit_matches_first_fit() {
        let s = state_with_residuals(30.0, 50.0);
        let d = [70.0, 50.0, 40.0];
        assert_eq!(best_fit(&s, &d, 100).host_of(2), first_fit(&s, &d, 100).host_of(2));
    }

    #[test]
    fn existing_placements_never_move() {
        let s = state_with_residuals(50.0, 45.0);
        let d = [80.0, 55.0, 0.0];
        let next = first_fit(&s, &d, 100);
        assert_eq!(next.host_of(0), Some(0));
        assert_eq!(next.host_of(1), Some(1));
        // Demand above the old allocation grows into free capacity only.
        assert_eq!(next.alloc_of(0), 80.0);
    }

    #[test]
    fn residuals_stay_non_negative() {
        let mut s = PackingState::empty(4);
        let demands = [60.0, 70.0, 55.0, 80.0];
        s = first_fit(&s, &demands, 100);
        for h in 0..4 {
            assert!(s.host_load(h) <= 100.0);
        }
    }
}
