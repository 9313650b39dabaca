//! Seeded Monte Carlo experiments over a fixed sensing matrix.
//!
//! Trial `t` of every sweep point uses seed `base_seed + t` for both the
//! ground-truth state and the measurement noise, so rows are reproducible
//! and sweep points share their random states.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, fidelity, merge_groups, recovery_probability, TrialRecord};
use crate::sensing::SensingMatrix;
use crate::simulate::{depolarize, random_sparse_state, synthesize_measurements, StateVector};
use crate::solver::{OmpSolver, RecoveryResult, SolverOptions, SparseRecovery};

/// Everything needed to reproduce one simulate-and-recover run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub sparsity: usize,
    pub snr_db: Option<f64>,
    pub lambda: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub truth: StateVector,
    pub measurements: Vec<f64>,
    pub recovery: RecoveryResult,
    pub record: TrialRecord,
}

/// Draws a K-sparse state, depolarizes it, measures it and recovers it.
/// Fidelity is taken against the clean state, with degenerate groups merged.
pub fn run_trial(
    solver: &OmpSolver<'_>,
    matrix: &SensingMatrix,
    trial: TrialSpec,
) -> Result<TrialOutcome> {
    let truth = random_sparse_state(matrix.n_basis(), trial.sparsity, trial.seed)?;
    evaluate_state(solver, matrix, truth, trial)
}

/// As [`run_trial`] with a caller-supplied ground truth.
pub fn evaluate_state(
    solver: &OmpSolver<'_>,
    matrix: &SensingMatrix,
    truth: StateVector,
    trial: TrialSpec,
) -> Result<TrialOutcome> {
    let prepared = depolarize(&truth, trial.lambda)?;
    let mut gamma = synthesize_measurements(matrix, &prepared, trial.snr_db, trial.seed)?;
    gamma.depolarization = trial.lambda;
    let recovery = solver.recover(&gamma.values)?;
    let estimate = recovery.dense(matrix.n_basis());
    let f = fidelity(
        &merge_groups(truth.values(), solver.groups()),
        &merge_groups(&estimate, solver.groups()),
    )?;
    let record = TrialRecord {
        sparsity: trial.sparsity,
        snr_db: gamma.snr_db,
        lambda: trial.lambda,
        seed: trial.seed,
        fidelity: f,
        residual: recovery.final_rel_residual,
        iterations: recovery.iterations,
        success: f > metrics::SUCCESS_THRESHOLD,
    };
    Ok(TrialOutcome {
        truth,
        measurements: gamma.values,
        recovery,
        record,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "lowercase")]
pub enum SweepAxis {
    Sparsity(Vec<usize>),
    Snr(Vec<f64>),
}

impl SweepAxis {
    pub fn len(&self) -> usize {
        match self {
            Self::Sparsity(v) => v.len(),
            Self::Snr(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sparsity(_) => "sparsity",
            Self::Snr(_) => "snr_db",
        }
    }
}

/// A sweep over one axis with the other parameters held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub axis: SweepAxis,
    /// Fixed sparsity for SNR sweeps.
    pub sparsity: Option<usize>,
    /// Fixed SNR for sparsity sweeps; `None` is noiseless.
    pub snr_db: Option<f64>,
    pub lambda: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub threshold: f64,
    pub solver: SolverOptions,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be >= 1".into()));
        }
        let increasing = match &self.axis {
            SweepAxis::Sparsity(v) => !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]),
            SweepAxis::Snr(v) => !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]),
        };
        if !increasing {
            return Err(Error::InvalidArgument(
                "sweep values must be non-empty and strictly increasing".into(),
            ));
        }
        if matches!(self.axis, SweepAxis::Snr(_)) && self.sparsity.is_none() {
            return Err(Error::InvalidArgument(
                "an SNR sweep needs a fixed sparsity".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::DepolarizationOutOfRange(self.lambda));
        }
        self.solver.validate()
    }

    fn trial_specs(&self) -> Vec<(usize, TrialSpec)> {
        let mut out = Vec::with_capacity(self.axis.len() * self.trials);
        for point in 0..self.axis.len() {
            let (sparsity, snr_db) = match &self.axis {
                SweepAxis::Sparsity(v) => (v[point], self.snr_db),
                SweepAxis::Snr(v) => (self.sparsity.unwrap_or(1), Some(v[point])),
            };
            for t in 0..self.trials {
                let seed = self.base_seed.wrapping_add(t as u64);
                out.push((
                    point,
                    TrialSpec {
                        sparsity,
                        snr_db,
                        lambda: self.lambda,
                        seed,
                    },
                ));
            }
        }
        out
    }
}

/// Aggregate over the trials of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub sparsity: usize,
    pub snr_db: Option<f64>,
    pub lambda: f64,
    pub trials: usize,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
    pub recovery_probability: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: &'static str,
    pub rows: Vec<SweepRow>,
    /// Sorted by (sweep point, seed).
    pub records: Vec<TrialRecord>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "axis,K,snr_db,lambda,trials,mean_fidelity,std_fidelity,recovery_probability"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.axis,
                r.sparsity,
                metrics::format_snr(r.snr_db),
                r.lambda,
                r.trials,
                r.mean_fidelity,
                r.std_fidelity,
                r.recovery_probability
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs every (point, trial) pair in parallel and aggregates per point.
pub fn run_sweep(plan: &ExperimentPlan, matrix: &SensingMatrix) -> Result<SweepResult> {
    plan.validate()?;
    let solver = OmpSolver::new(matrix, plan.solver)?;
    run_sweep_with(plan, matrix, &solver)
}

/// [`run_sweep`] reusing an existing solver.
pub fn run_sweep_with(
    plan: &ExperimentPlan,
    matrix: &SensingMatrix,
    solver: &OmpSolver<'_>,
) -> Result<SweepResult> {
    plan.validate()?;
    let specs = plan.trial_specs();
    let mut records: Vec<(usize, TrialRecord)> = specs
        .par_iter()
        .map(|&(point, spec)| run_trial(solver, matrix, spec).map(|o| (point, o.record)))
        .collect::<Result<_>>()?;
    records.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.seed.cmp(&b.1.seed)));

    let mut rows = Vec::with_capacity(plan.axis.len());
    for point in 0..plan.axis.len() {
        let chunk: Vec<TrialRecord> = records
            .iter()
            .filter(|(p, _)| *p == point)
            .map(|(_, r)| r.clone())
            .collect();
        let fidelities: Vec<f64> = chunk.iter().map(|r| r.fidelity).collect();
        let (mean, std) = metrics::mean_std(&fidelities);
        let value = match &plan.axis {
            SweepAxis::Sparsity(v) => v[point] as f64,
            SweepAxis::Snr(v) => v[point],
        };
        rows.push(SweepRow {
            value,
            sparsity: chunk[0].sparsity,
            snr_db: chunk[0].snr_db,
            lambda: plan.lambda,
            trials: chunk.len(),
            mean_fidelity: mean,
            std_fidelity: std,
            recovery_probability: recovery_probability(&chunk, plan.threshold)?,
        });
    }
    Ok(SweepResult {
        axis: plan.axis.name(),
        rows,
        records: records.into_iter().map(|(_, r)| r).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::fock_basis;
    use crate::lattice::LatticeSpec;
    use crate::sensing::build_sensing_matrix;

    fn plan(axis: SweepAxis) -> ExperimentPlan {
        ExperimentPlan {
            axis,
            sparsity: Some(2),
            snr_db: None,
            lambda: 0.0,
            trials: 5,
            base_seed: 100,
            threshold: 0.95,
            solver: SolverOptions::default(),
        }
    }

    #[test]
    fn plan_validation() {
        assert!(plan(SweepAxis::Sparsity(vec![1, 2, 3])).validate().is_ok());
        assert!(plan(SweepAxis::Sparsity(vec![2, 2])).validate().is_err());
        assert!(plan(SweepAxis::Sparsity(vec![])).validate().is_err());
        assert!(plan(SweepAxis::Snr(vec![40.0, 30.0])).validate().is_err());
        assert!(ExperimentPlan {
            trials: 0,
            ..plan(SweepAxis::Sparsity(vec![1]))
        }
        .validate()
        .is_err());
        assert!(ExperimentPlan {
            sparsity: None,
            ..plan(SweepAxis::Snr(vec![30.0]))
        }
        .validate()
        .is_err());
    }

    #[test]
    fn sweep_is_deterministic() {
        let spec = LatticeSpec::new(8, 1.0, 0.0, 2.5).unwrap();
        let m = build_sensing_matrix(&spec, &fock_basis(8, 3).unwrap(), 2).unwrap();
        let p = plan(SweepAxis::Snr(vec![30.0, 40.0]));
        let a = run_sweep(&p, &m).unwrap();
        let b = run_sweep(&p, &m).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.rows.len(), 2);
        assert_eq!(a.records.len(), 10);
        let seeds: Vec<u64> = a.records.iter().map(|r| r.seed).collect();
        assert_eq!(
            seeds,
            vec![100, 101, 102, 103, 104, 100, 101, 102, 103, 104]
        );
        let text = String::from_utf8(ca).unwrap();
        assert!(text.starts_with("axis,K,snr_db,lambda,trials,mean_fidelity,std_fidelity,recovery_probability\nsnr_db,2,30,0,5,"));
    }
}
