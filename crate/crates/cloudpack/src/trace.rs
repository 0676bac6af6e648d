//! Demand traces, synthetic datasets, and workload schedules.
//!
//! A [`DemandTrace`] holds a per-VM, per-timestep demand matrix plus the
//! covariate features the forecaster consumes. Synthetic traces follow the
//! sinusoidal families `55 + 25 sin(·)` at low, high, and mixed
//! frequencies; external traces load from CSV. A [`WorkloadSchedule`]
//! describes arrival and departure patterns and zeroes demand outside each
//! VM's active window.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Number of covariate features per VM per timestep: normalized time,
/// sine/cosine encodings at two periods, and a one-hot VM index bucket.
pub const N_COVARIATES: usize = 1 + 2 + 2 + VM_BUCKETS;

/// One-hot buckets for the VM index covariate.
pub const VM_BUCKETS: usize = 4;

const COVARIATE_PERIOD_SHORT: f64 = 24.0;
const COVARIATE_PERIOD_LONG: f64 = 100.0;

/// Matrix of per-VM, per-timestep demands with covariates.
///
/// Demands are stored VM-major and kept real-valued; integral rounding
/// happens only where the optimization model requires an integer bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandTrace {
    n_vms: usize,
    t_total: usize,
    demands: Vec<f64>,
    covariates: Vec<f64>,
    timestep_duration: String,
}

impl DemandTrace {
    /// Builds a trace from a VM-major demand matrix, generating the
    /// standard covariates.
    pub fn from_demands(
        demands: Vec<Vec<f64>>,
        timestep_duration: impl Into<String>,
    ) -> Result<Self> {
        let n_vms = demands.len();
        if n_vms == 0 {
            return Err(Error::config("trace needs at least one VM"));
        }
        let t_total = demands[0].len();
        if demands.iter().any(|row| row.len() != t_total) {
            return Err(Error::data("ragged demand matrix"));
        }
        let mut flat = Vec::with_capacity(n_vms * t_total);
        for row in &demands {
            for &d in row {
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::data(format!("demand {d} is not a non-negative real")));
                }
                flat.push(d);
            }
        }
        let covariates = build_covariates(n_vms, t_total);
        Ok(DemandTrace {
            n_vms,
            t_total,
            demands: flat,
            covariates,
            timestep_duration: timestep_duration.into(),
        })
    }

    pub fn n_vms(&self) -> usize {
        self.n_vms
    }

    pub fn len(&self) -> usize {
        self.t_total
    }

    pub fn is_empty(&self) -> bool {
        self.t_total == 0
    }

    /// Demand of VM `vm` at timestep `t`.
    pub fn demand(&self, vm: usize, t: usize) -> f64 {
        self.demands[vm * self.t_total + t]
    }

    /// Demands of all VMs at timestep `t`.
    pub fn demands_at(&self, t: usize) -> Vec<f64> {
        (0..self.n_vms).map(|i| self.demand(i, t)).collect()
    }

    /// Covariate feature slice for VM `vm` at timestep `t`.
    pub fn covariates_at(&self, vm: usize, t: usize) -> &[f64] {
        let base = (vm * self.t_total + t) * N_COVARIATES;
        &self.covariates[base..base + N_COVARIATES]
    }

    /// Unit label for one timestep; metadata only.
    pub fn timestep_duration(&self) -> &str {
        &self.timestep_duration
    }
}

fn build_covariates(n_vms: usize, t_total: usize) -> Vec<f64> {
    let mut cov = Vec::with_capacity(n_vms * t_total * N_COVARIATES);
    for vm in 0..n_vms {
        for t in 0..t_total {
            let tf = t as f64;
            cov.push(tf / t_total.max(1) as f64);
            let a = std::f64::consts::TAU * tf / COVARIATE_PERIOD_SHORT;
            cov.push(a.sin());
            cov.push(a.cos());
            let b = std::f64::consts::TAU * tf / COVARIATE_PERIOD_LONG;
            cov.push(b.sin());
            cov.push(b.cos());
            for bucket in 0..VM_BUCKETS {
                cov.push(if vm % VM_BUCKETS == bucket { 1.0 } else { 0.0 });
            }
        }
    }
    cov
}

/// Frequency family of the synthetic sinusoidal datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SineKind {
    /// `55 + 25 sin(i t / 100)`: demand drifts slowly.
    Low,
    /// `55 + 25 sin(100 i t)`: demand jumps every step.
    High,
    /// `55 + 25 sin(i t)`: intermediate.
    Mixed,
}

/// Generates a sinusoidal demand trace.
///
/// `i` is the 1-based VM index and `t` the 0-based timestep, so every VM
/// starts at 55.0 and stays within `[30, 80]`.
pub fn generate_sinusoidal(kind: SineKind, n_vms: usize, t_total: usize) -> Result<DemandTrace> {
    if n_vms < 1 || t_total < 1 {
        return Err(Error::config("sinusoidal trace needs n_vms >= 1 and t_total >= 1"));
    }
    let mut demands = Vec::with_capacity(n_vms);
    for vm in 0..n_vms {
        let i = (vm + 1) as f64;
        let row = (0..t_total)
            .map(|t| {
                let t = t as f64;
                let arg = match kind {
                    SineKind::Low => i * t / 100.0,
                    SineKind::High => 100.0 * i * t,
                    SineKind::Mixed => i * t,
                };
                55.0 + 25.0 * arg.sin()
            })
            .collect();
        demands.push(row);
    }
    DemandTrace::from_demands(demands, "12h")
}

/// Loads a demand trace from CSV: rows are timesteps, columns are VMs,
/// header optional. Missing values are an error, never imputed.
pub fn load_csv_trace(path: impl AsRef<Path>, n_vms: usize) -> Result<DemandTrace> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::data(format!("csv parse failure: {e}")))?;
        let mut row = Vec::with_capacity(record.len());
        let mut numeric = true;
        for cell in record.iter() {
            match cell.trim().parse::<f64>() {
                Ok(v) => row.push(v),
                Err(_) => {
                    numeric = false;
                    break;
                }
            }
        }
        if !numeric {
            // A non-numeric first row is treated as a header.
            if line == 0 {
                continue;
            }
            return Err(Error::data(format!("non-numeric cell in row {line}")));
        }
        if row.len() != n_vms {
            return Err(Error::data(format!(
                "row {line} has {} columns, expected {n_vms}",
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::data("csv trace is empty"));
    }
    // Transpose to VM-major.
    let t_total = rows.len();
    let demands: Vec<Vec<f64>> = (0..n_vms)
        .map(|vm| (0..t_total).map(|t| rows[t][vm]).collect())
        .collect();
    DemandTrace::from_demands(demands, "1min")
}

/// Arrival/departure pattern of VMs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadKind {
    /// All VMs arrive at the start.
    Burst,
    /// VMs arrive one at a time, spaced by `gradual_period` steps.
    Gradual,
    /// VMs arrive and depart periodically, staggered across VMs.
    Cyclic,
}

/// Per-VM activity windows derived from a workload kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSchedule {
    pub kind: WorkloadKind,
    /// First active timestep per VM.
    pub arrival_step: Vec<usize>,
    /// Last active timestep per VM; `None` means open-ended.
    pub departure_step: Vec<Option<usize>>,
    /// Steps between consecutive arrivals (gradual workloads).
    pub gradual_period: usize,
    /// Steps per stagger cycle (cyclic workloads).
    pub cyclic_period: usize,
}

impl WorkloadSchedule {
    /// All VMs active from the first step.
    pub fn burst(n_vms: usize) -> Self {
        WorkloadSchedule {
            kind: WorkloadKind::Burst,
            arrival_step: vec![0; n_vms],
            departure_step: vec![None; n_vms],
            gradual_period: 0,
            cyclic_period: 0,
        }
    }

    /// VM `i` (0-based) arrives at `i * period`; nobody departs.
    pub fn gradual(n_vms: usize, period: usize) -> Self {
        WorkloadSchedule {
            kind: WorkloadKind::Gradual,
            arrival_step: (0..n_vms).map(|i| i * period).collect(),
            departure_step: vec![None; n_vms],
            gradual_period: period,
            cyclic_period: 0,
        }
    }

    /// Each VM alternates active/inactive for `period / 2` steps each,
    /// with activation offsets staggered evenly across VMs.
    pub fn cyclic(n_vms: usize, period: usize) -> Self {
        let arrival_step = (0..n_vms).map(|i| (i * period) / n_vms.max(1)).collect();
        WorkloadSchedule {
            kind: WorkloadKind::Cyclic,
            arrival_step,
            departure_step: vec![None; n_vms],
            gradual_period: 0,
            cyclic_period: period,
        }
    }

    pub fn n_vms(&self) -> usize {
        self.arrival_step.len()
    }

    /// Whether VM `vm` is active at timestep `t`.
    pub fn active(&self, vm: usize, t: usize) -> bool {
        match self.kind {
            WorkloadKind::Burst => true,
            WorkloadKind::Gradual => {
                t >= self.arrival_step[vm]
                    && self.departure_step[vm].map_or(true, |dep| t <= dep)
            }
            WorkloadKind::Cyclic => {
                let period = self.cyclic_period.max(1);
                let offset = self.arrival_step[vm] % period;
                let phase = (t + period - offset) % period;
                phase < period / 2
            }
        }
    }

    /// Active mask for all VMs at timestep `t`.
    pub fn active_mask(&self, t: usize) -> Vec<bool> {
        (0..self.n_vms()).map(|vm| self.active(vm, t)).collect()
    }
}

/// Zeroes demand outside each VM's active window; active-window demand is
/// unchanged. Idempotent, and a no-op for burst schedules.
pub fn apply_workload(trace: &DemandTrace, schedule: &WorkloadSchedule) -> Result<DemandTrace> {
    if schedule.n_vms() != trace.n_vms() {
        return Err(Error::config(format!(
            "schedule covers {} VMs, trace has {}",
            schedule.n_vms(),
            trace.n_vms()
        )));
    }
    let mut out = trace.clone();
    for vm in 0..trace.n_vms() {
        for t in 0..trace.len() {
            if !schedule.active(vm, t) {
                out.demands[vm * out.t_total + t] = 0.0;
            }
        }
    }
    Ok(out)
}

/// Dataset selection for the experiment harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DatasetSpec {
    MixedSine { n_vms: usize, horizon_total: usize },
    HighFreqSine { n_vms: usize, horizon_total: usize },
    LowFreqSine { n_vms: usize, horizon_total: usize },
    Csv { n_vms: usize, horizon_total: usize, csv_path: PathBuf },
}

impl DatasetSpec {
    pub fn n_vms(&self) -> usize {
        match self {
            DatasetSpec::MixedSine { n_vms, .. }
            | DatasetSpec::HighFreqSine { n_vms, .. }
            | DatasetSpec::LowFreqSine { n_vms, .. }
            | DatasetSpec::Csv { n_vms, .. } => *n_vms,
        }
    }

    pub fn horizon_total(&self) -> usize {
        match self {
            DatasetSpec::MixedSine { horizon_total, .. }
            | DatasetSpec::HighFreqSine { horizon_total, .. }
            | DatasetSpec::LowFreqSine { horizon_total, .. }
            | DatasetSpec::Csv { horizon_total, .. } => *horizon_total,
        }
    }

    /// Materializes the trace this spec describes.
    pub fn load(&self) -> Result<DemandTrace> {
        if self.n_vms() < 1 || self.horizon_total() < 2 {
            return Err(Error::config("dataset needs n_vms >= 1 and horizon_total >= 2"));
        }
        match self {
            DatasetSpec::MixedSine { n_vms, horizon_total } => {
                generate_sinusoidal(SineKind::Mixed, *n_vms, *horizon_total)
            }
            DatasetSpec::HighFreqSine { n_vms, horizon_total } => {
                generate_sinusoidal(SineKind::High, *n_vms, *horizon_total)
            }
            DatasetSpec::LowFreqSine { n_vms, horizon_total } => {
                generate_sinusoidal(SineKind::Low, *n_vms, *horizon_total)
            }
            DatasetSpec::Csv { n_vms, horizon_total, csv_path } => {
                let trace = load_csv_trace(csv_path, *n_vms)?;
                if trace.len() < *horizon_total {
                    return Err(Error::data(format!(
                        "csv trace has {} steps, config asks for {horizon_total}",
                        trace.len()
                    )));
                }
                Ok(trace)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sinusoid_starts_at_center() {
        let mixed = generate_sinusoidal(SineKind::Mixed, 2, 4).unwrap();
        assert_relative_eq!(mixed.demand(0, 0), 55.0);
        let low = generate_sinusoidal(SineKind::Low, 1, 1).unwrap();
        assert_relative_eq!(low.demand(0, 0), 55.0);
    }

    #[test]
    fn sinusoid_matches_formula() {
        // 55 + 25 sin(2 * 3) for the mixed family, second VM, t = 3.
        let mixed = generate_sinusoidal(SineKind::Mixed, 2, 4).unwrap();
        assert_relative_eq!(mixed.demand(1, 3), 48.014612545026854, epsilon = 1e-12);
    }

    #[test]
    fn sinusoid_within_amplitude_bounds() {
        for kind in [SineKind::Low, SineKind::High, SineKind::Mixed] {
            let trace = generate_sinusoidal(kind, 5, 200).unwrap();
            for vm in 0..5 {
                for t in 0..200 {
                    let d = trace.demand(vm, t);
                    assert!((30.0..=80.0).contains(&d), "{kind:?} vm {vm} t {t}: {d}");
                }
            }
        }
    }

    #[test]
    fn burst_leaves_trace_unchanged() {
        let trace = generate_sinusoidal(SineKind::Mixed, 3, 16).unwrap();
        let out = apply_workload(&trace, &WorkloadSchedule::burst(3)).unwrap();
        assert_eq!(out, trace);
    }

    #[test]
    fn gradual_zeroes_before_arrival() {
        let trace = generate_sinusoidal(SineKind::Mixed, 3, 16).unwrap();
        let schedule = WorkloadSchedule::gradual(3, 2);
        let out = apply_workload(&trace, &schedule).unwrap();
        // Third VM (1-based index 3) arrives at t = 4.
        for t in 0..4 {
            assert_eq!(out.demand(2, t), 0.0);
        }
        for t in 4..16 {
            assert_eq!(out.demand(2, t), trace.demand(2, t));
        }
    }

    #[test]
    fn cyclic_mask_repeats_and_staggers() {
        let schedule = WorkloadSchedule::cyclic(2, 10);
        for vm in 0..2 {
            for t in 0..30 {
                assert_eq!(schedule.active(vm, t), schedule.active(vm, t + 10));
            }
        }
        // Staggered: the two VMs are not synchronized.
        let mask0: Vec<bool> = (0..10).map(|t| schedule.active(0, t)).collect();
        let mask1: Vec<bool> = (0..10).map(|t| schedule.active(1, t)).collect();
        assert_ne!(mask0, mask1);
        // Half the cycle active.
        assert_eq!(mask0.iter().filter(|&&a| a).count(), 5);
    }

    #[test]
    fn apply_workload_is_idempotent() {
        let trace = generate_sinusoidal(SineKind::High, 4, 24).unwrap();
        let schedule = WorkloadSchedule::cyclic(4, 10);
        let once = apply_workload(&trace, &schedule).unwrap();
        let twice = apply_workload(&once, &schedule).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn csv_roundtrip_vm_major() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        std::fs::write(&path, "10,20\n30,40\n").unwrap();
        let trace = load_csv_trace(&path, 2).unwrap();
        assert_eq!(trace.n_vms(), 2);
        assert_eq!(trace.len(), 2);
        // Columns are VMs: VM 0 sees 10 then 30, VM 1 sees 20 then 40.
        assert_eq!(trace.demand(0, 0), 10.0);
        assert_eq!(trace.demand(0, 1), 30.0);
        assert_eq!(trace.demand(1, 0), 20.0);
        assert_eq!(trace.demand(1, 1), 40.0);
    }

    #[test]
    fn csv_rejects_empty_and_mismatched() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        assert!(load_csv_trace(&empty, 2).is_err());

        let wide = dir.path().join("wide.csv");
        std::fs::write(&wide, "1,2,3\n4,5,6\n").unwrap();
        assert!(load_csv_trace(&wide, 2).is_err());

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "1,2\n3,oops\n").unwrap();
        assert!(load_csv_trace(&bad, 2).is_err());
    }

    #[test]
    fn csv_skips_header_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("headed.csv");
        std::fs::write(&path, "vm_a,vm_b\n1,2\n").unwrap();
        let trace = load_csv_trace(&path, 2).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.demand(1, 0), 2.0);
    }

    #[test]
    fn covariates_have_fixed_width() {
        let trace = generate_sinusoidal(SineKind::Low, 2, 8).unwrap();
        assert_eq!(trace.covariates_at(0, 0).len(), N_COVARIATES);
        assert_eq!(trace.covariates_at(1, 7).len(), N_COVARIATES);
        // One-hot bucket occupies the tail.
        let tail = &trace.covariates_at(1, 3)[N_COVARIATES - VM_BUCKETS..];
        assert_eq!(tail.iter().sum::<f64>(), 1.0);
    }
}
