use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use qst_core::basis::{Basis, BasisDescriptor};
use qst_core::harness::{run_sweep_with, ExperimentPlan, SweepAxis};
use qst_core::lattice::{bessel_reference, impulse_response, propagator, LatticeSpec};
use qst_core::metrics::{fidelity, merge_groups, write_records_csv, TrialRecord};
use qst_core::sensing::{
    build_sensing_matrix, degenerate_column_groups, read_cache, write_cache, CoincidenceIndex,
    SensingMatrix,
};
use qst_core::simulate::{
    depolarize, random_sparse_state, read_measurements_csv, synthesize_measurements,
    write_measurements_csv, StateFile,
};
use qst_core::solver::{OmpSolver, RecoveryResult, SolverOptions, SparseRecovery};

use crate::cli::*;
use crate::Failure;

const DEGENERACY_TOL: f64 = 1e-10;

/// Written by `simulate`, read back by `recover` for scoring.
#[derive(Debug, Serialize, Deserialize)]
struct RunFile {
    state: StateFile,
    sparsity: usize,
    snr_db: Option<f64>,
    lambda: f64,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct RecoverReport<'a> {
    basis: BasisDescriptor,
    labels: Vec<String>,
    #[serde(flatten)]
    recovery: &'a RecoveryResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    fidelity: Option<f64>,
}

fn lattice_spec(a: &LatticeArgs) -> Result<LatticeSpec, Failure> {
    let z = match a.cz {
        Some(cz) if a.coupling != 0.0 => cz / a.coupling,
        Some(_) => return Err(Failure::usage("--cz needs a nonzero --coupling")),
        None => a.z,
    };
    Ok(LatticeSpec::new(a.waveguides, a.coupling, a.beta, z)?)
}

fn basis_descriptor(a: &BasisArgs, n_waveguides: usize) -> BasisDescriptor {
    match a.basis {
        BasisChoice::Fock => BasisDescriptor::fock(n_waveguides, a.photons),
        BasisChoice::Entangled => {
            BasisDescriptor::entangled(n_waveguides, a.photons, a.pair.0, a.pair.1)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))
}

fn load_matrix(path: &Path) -> Result<SensingMatrix, Failure> {
    read_cache(open(path)?).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    serde_json::from_reader(open(path)?)
        .map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn check_basis(
    expected: &BasisDescriptor,
    found: &BasisDescriptor,
    what: &Path,
) -> Result<(), Failure> {
    if expected == found {
        return Ok(());
    }
    Err(Failure::data(format!(
        "basis mismatch: matrix uses {}, {} uses {}",
        serde_json::to_string(expected).unwrap_or_default(),
        what.display(),
        serde_json::to_string(found).unwrap_or_default()
    )))
}

fn build(spec: &LatticeSpec, basis: &Basis, order: usize) -> Result<SensingMatrix, Failure> {
    let err = propagator(spec)?.unitarity_error();
    if !(err < 1e-10) {
        return Err(Failure::numerical(format!(
            "propagator unitarity error {err:e} exceeds 1e-10"
        )));
    }
    Ok(build_sensing_matrix(spec, basis, order)?)
}

fn solver_options(a: &SolverArgs) -> SolverOptions {
    SolverOptions {
        max_support: a.max_support,
        rel_residual_tol: a.rel_residual_tol,
        min_coefficient: a.min_coefficient,
        enforce_unit_sum: !a.no_renormalize,
        refine: !a.no_refine,
        ..SolverOptions::default()
    }
}

pub fn build_matrix(a: &BuildMatrixArgs) -> Result<(), Failure> {
    let spec = lattice_spec(&a.lattice)?;
    let basis = basis_descriptor(&a.basis, spec.n_waveguides).build()?;
    let m = build(&spec, &basis, a.basis.order)?;
    let mut out = create(&a.output)?;
    write_cache(&m, &mut out)?;
    let groups = degenerate_column_groups(&m, DEGENERACY_TOL);
    println!(
        "{}x{} sensing matrix written to {}",
        m.n_measurements(),
        m.n_basis(),
        a.output.display()
    );
    println!("degenerate groups: {}", groups.len());
    for g in &groups {
        let members: Vec<String> = g
            .iter()
            .map(|&j| format!("{j} {}", basis.elements()[j]))
            .collect();
        println!("  {}", members.join(" | "));
    }
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let m = load_matrix(&a.matrix)?;
    let truth = match (&a.state, a.sparsity) {
        (Some(path), _) => {
            let file: StateFile = read_json(path)?;
            check_basis(m.basis(), &file.basis, path)?;
            file.to_state(m.n_basis())?
        }
        (None, Some(k)) => random_sparse_state(m.n_basis(), k, a.seed)?,
        (None, None) => return Err(Failure::usage("either --state or --sparsity is required")),
    };
    let prepared = depolarize(&truth, a.lambda)?;
    let gamma = synthesize_measurements(&m, &prepared, a.snr_db, a.seed)?;
    let index = CoincidenceIndex::new(m.spec().n_waveguides, m.order())?;
    let mut out = create(&a.measurements)?;
    write_measurements_csv(&index, &gamma.values, &mut out)?;
    let run = RunFile {
        sparsity: truth.support().len(),
        state: truth.to_sparse(*m.basis()),
        snr_db: gamma.snr_db,
        lambda: a.lambda,
        seed: a.seed,
    };
    let mut out = create(&a.truth)?;
    serde_json::to_writer_pretty(&mut out, &run).map_err(qst_core::Error::from)?;
    writeln!(out)?;
    out.flush()?;
    println!(
        "{} coincidences written to {} (K={}, lambda={}, snr_db={})",
        gamma.values.len(),
        a.measurements.display(),
        run.sparsity,
        a.lambda,
        gamma.snr_db.map_or("inf".to_string(), |s| s.to_string())
    );
    Ok(())
}

pub fn recover(a: &RecoverArgs) -> Result<(), Failure> {
    let m = load_matrix(&a.matrix)?;
    let run: Option<RunFile> = a.truth.as_deref().map(read_json).transpose()?;
    if let (Some(run), Some(path)) = (&run, &a.truth) {
        check_basis(m.basis(), &run.state.basis, path)?;
    }
    let index = CoincidenceIndex::new(m.spec().n_waveguides, m.order())?;
    let gamma = read_measurements_csv(&index, open(&a.measurements)?)
        .map_err(|e| Failure::data(format!("{}: {e}", a.measurements.display())))?;
    let solver = OmpSolver::new(&m, solver_options(&a.solver))?;
    let result = solver.recover(&gamma)?;
    let basis = m.basis().build()?;
    let fid = match &run {
        Some(run) => {
            let truth = run.state.to_state(m.n_basis())?;
            let groups = solver.groups();
            Some(fidelity(
                &merge_groups(truth.values(), groups),
                &merge_groups(&result.dense(m.n_basis()), groups),
            )?)
        }
        None => None,
    };
    let report = RecoverReport {
        basis: *m.basis(),
        labels: result
            .support
            .iter()
            .map(|&j| basis.elements()[j].to_string())
            .collect(),
        recovery: &result,
        fidelity: fid,
    };
    let json = serde_json::to_string_pretty(&report).map_err(qst_core::Error::from)?;
    match &a.output {
        Some(path) => {
            let mut out = create(path)?;
            writeln!(out, "{json}")?;
            out.flush()?;
        }
        None => println!("{json}"),
    }
    if let (Some(run), Some(f)) = (&run, fid) {
        let record = TrialRecord {
            sparsity: run.sparsity,
            snr_db: run.snr_db,
            lambda: run.lambda,
            seed: run.seed,
            fidelity: f,
            residual: result.final_rel_residual,
            iterations: result.iterations,
            success: f > a.threshold,
        };
        eprintln!("fidelity {f}");
        if let Some(path) = &a.record {
            let fresh = fs::metadata(path).map_or(true, |m| m.len() == 0);
            let mut out = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))?;
            if fresh {
                writeln!(out, "{}", TrialRecord::CSV_HEADER)?;
            }
            writeln!(out, "{}", record.csv_row())?;
        }
    }
    Ok(())
}

/// Comma-separated values; `a..b` expands to the inclusive integer range.
fn parse_values(text: &str) -> Result<Vec<f64>, Failure> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((lo, hi)) = item.split_once("..") {
            let parse = |s: &str| {
                s.trim()
                    .parse::<i64>()
                    .map_err(|_| Failure::usage(format!("bad range {item:?}")))
            };
            let (lo, hi) = (parse(lo)?, parse(hi)?);
            out.extend((lo..=hi).map(|v| v as f64));
        } else {
            out.push(
                item.parse()
                    .map_err(|_| Failure::usage(format!("bad sweep value {item:?}")))?,
            );
        }
    }
    Ok(out)
}

pub fn sweep(a: &SweepArgs) -> Result<(), Failure> {
    let m = match &a.matrix {
        Some(path) => load_matrix(path)?,
        None => {
            let spec = lattice_spec(&a.lattice)?;
            let basis = basis_descriptor(&a.basis, spec.n_waveguides).build()?;
            build(&spec, &basis, a.basis.order)?
        }
    };
    let values = parse_values(&a.values)?;
    let axis = match a.axis {
        AxisChoice::Sparsity => {
            let ks = values
                .iter()
                .map(|&v| {
                    if v >= 1.0 && v.fract() == 0.0 {
                        Ok(v as usize)
                    } else {
                        Err(Failure::usage(format!(
                            "sparsity must be a positive integer, got {v}"
                        )))
                    }
                })
                .collect::<Result<_, _>>()?;
            SweepAxis::Sparsity(ks)
        }
        AxisChoice::Snr => SweepAxis::Snr(values),
    };
    let plan = ExperimentPlan {
        axis,
        sparsity: a.sparsity,
        snr_db: a.snr_db,
        lambda: a.lambda,
        trials: a.trials,
        base_seed: a.base_seed,
        threshold: a.threshold,
        solver: solver_options(&a.solver),
    };
    plan.validate()?;
    let solver = OmpSolver::new(&m, plan.solver)?;
    let result = run_sweep_with(&plan, &m, &solver)?;
    let mut out = create(&a.output)?;
    result.write_csv(&mut out)?;
    if let Some(path) = &a.records {
        write_records_csv(&result.records, create(path)?)?;
    }
    for row in &result.rows {
        println!(
            "{}={}: mean fidelity {:.4} +/- {:.4}, recovery probability {:.2}",
            result.axis, row.value, row.mean_fidelity, row.std_fidelity, row.recovery_probability
        );
    }
    Ok(())
}

pub fn impulse(a: &ImpulseArgs) -> Result<(), Failure> {
    let spec = lattice_spec(&a.lattice)?;
    let input = a.input.unwrap_or(spec.n_waveguides.div_ceil(2));
    let p = impulse_response(&spec, input)?;
    let reference = if a.bessel {
        Some(bessel_reference(&spec, input)?)
    } else {
        None
    };
    let mut out: Box<dyn Write> = match &a.output {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    writeln!(
        out,
        "waveguide,probability{}",
        if a.bessel { ",bessel" } else { "" }
    )?;
    for (n, v) in p.iter().enumerate() {
        match &reference {
            Some(r) => writeln!(out, "{},{v},{}", n + 1, r[n])?,
            None => writeln!(out, "{},{v}", n + 1)?,
        }
    }
    out.flush()?;
    Ok(())
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::data(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_values_expand_ranges() {
        assert_eq!(parse_values("1..3, 7").unwrap(), vec![1.0, 2.0, 3.0, 7.0]);
        assert_eq!(parse_values("30,35.5").unwrap(), vec![30.0, 35.5]);
        assert!(parse_values("a..3").is_err());
    }
}
