//! Variable index map for the packing MILP.

use serde::{Deserialize, Serialize};

/// Variable families, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarFamily {
    /// Integer allocation, `(vm, host, step)`.
    Alloc(usize, usize, usize),
    /// Binary host usage, `(host, step)`.
    Used(usize, usize),
    /// Binary placement, `(vm, host, step)`.
    Placed(usize, usize, usize),
    /// Binary migration participation, `(vm, host, step)`.
    Migr(usize, usize, usize),
}

/// Bijection between `(family, vm, host, step)` tuples and the flat
/// variable index range `0..n_vars`.
///
/// Storage is family-major, then step-major, then VM, then host, giving
/// `horizon * (3 n^2 + n)` materialized variables (the throttle fraction
/// is substituted away).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableLayout {
    pub n_vms: usize,
    pub horizon: usize,
}

impl VariableLayout {
    pub fn new(n_vms: usize, horizon: usize) -> Self {
        VariableLayout { n_vms, horizon }
    }

    pub fn n_vars(&self) -> usize {
        self.horizon * (3 * self.n_vms * self.n_vms + self.n_vms)
    }

    fn block(&self) -> usize {
        self.n_vms * self.n_vms * self.horizon
    }

    pub fn alloc(&self, vm: usize, host: usize, t: usize) -> usize {
        debug_assert!(vm < self.n_vms && host < self.n_vms && t < self.horizon);
        (t * self.n_vms + vm) * self.n_vms + host
    }

    pub fn used(&self, host: usize, t: usize) -> usize {
        debug_assert!(host < self.n_vms && t < self.horizon);
        self.block() + t * self.n_vms + host
    }

    pub fn placed(&self, vm: usize, host: usize, t: usize) -> usize {
        self.block() + self.n_vms * self.horizon + (t * self.n_vms + vm) * self.n_vms + host
    }

    pub fn migr(&self, vm: usize, host: usize, t: usize) -> usize {
        2 * self.block() + self.n_vms * self.horizon + (t * self.n_vms + vm) * self.n_vms + host
    }

    /// Inverse map: which family and coordinates a flat index denotes.
    pub fn family(&self, idx: usize) -> VarFamily {
        let n = self.n_vms;
        let block = self.block();
        let used_block = n * self.horizon;
        if idx < block {
            let t = idx / (n * n);
            let rem = idx % (n * n);
            VarFamily::Alloc(rem / n, rem % n, t)
        } else if idx < block + used_block {
            let rem = idx - block;
            VarFamily::Used(rem % n, rem / n)
        } else if idx < 2 * block + used_block {
            let rem = idx - block - used_block;
            let t = rem / (n * n);
            let rem = rem % (n * n);
            VarFamily::Placed(rem / n, rem % n, t)
        } else {
            let rem = idx - 2 * block - used_block;
            let t = rem / (n * n);
            let rem = rem % (n * n);
            VarFamily::Migr(rem / n, rem % n, t)
        }
    }

    /// Canonical 1-based variable name, e.g. `alloc_2_1_1`.
    pub fn name(&self, idx: usize) -> String {
        match self.family(idx) {
            VarFamily::Alloc(i, h, t) => format!("alloc_{}_{}_{}", i + 1, h + 1, t + 1),
            VarFamily::Used(h, t) => format!("used_{}_{}", h + 1, t + 1),
            VarFamily::Placed(i, h, t) => format!("placed_{}_{}_{}", i + 1, h + 1, t + 1),
            VarFamily::Migr(i, h, t) => format!("migr_{}_{}_{}", i + 1, h + 1, t + 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_vm_single_step_has_four_variables() {
        let layout = VariableLayout::new(1, 1);
        assert_eq!(layout.n_vars(), 4);
    }

    #[test]
    fn indices_are_a_bijection() {
        let layout = VariableLayout::new(3, 2);
        let n = layout.n_vars();
        assert_eq!(n, 2 * (27 + 3));
        let mut seen = vec![false; n];
        for t in 0..2 {
            for i in 0..3 {
                for h in 0..3 {
                    for idx in [layout.alloc(i, h, t), layout.placed(i, h, t), layout.migr(i, h, t)] {
                        assert!(!seen[idx]);
                        seen[idx] = true;
                    }
                }
            }
            for h in 0..3 {
                let idx = layout.used(h, t);
                assert!(!seen[idx]);
                seen[idx] = true;
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn family_roundtrip() {
        let layout = VariableLayout::new(3, 2);
        assert_eq!(layout.family(layout.alloc(2, 1, 1)), VarFamily::Alloc(2, 1, 1));
        assert_eq!(layout.family(layout.used(0, 1)), VarFamily::Used(0, 1));
        assert_eq!(layout.family(layout.placed(1, 2, 0)), VarFamily::Placed(1, 2, 0));
        assert_eq!(layout.family(layout.migr(0, 0, 1)), VarFamily::Migr(0, 0, 1));
        assert_eq!(layout.name(layout.alloc(1, 0, 0)), "alloc_2_1_1");
    }
}
