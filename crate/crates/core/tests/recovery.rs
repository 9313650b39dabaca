use qst_core::basis::{entangled_basis, entangled_slots, fock_basis};
use qst_core::harness::{run_trial, TrialSpec};
use qst_core::lattice::LatticeSpec;
use qst_core::sensing::{
    build_sensing_matrix, read_cache, write_cache, CoincidenceIndex, SensingMatrix,
};
use qst_core::simulate::{
    random_sparse_state, read_measurements_csv, synthesize_measurements, write_measurements_csv,
    StateVector,
};
use qst_core::solver::{OmpSolver, SolverOptions, SparseRecovery};

fn default_matrix() -> SensingMatrix {
    let spec = LatticeSpec::new(20, 1.0, 0.0, 2.5).unwrap();
    build_sensing_matrix(&spec, &fock_basis(20, 3).unwrap(), 2).unwrap()
}

#[test]
fn noiseless_small_sparsity_is_exact() {
    let m = default_matrix();
    let solver = OmpSolver::new(&m, SolverOptions::default()).unwrap();
    for k in 1..=5 {
        let exact = (0..200)
            .filter(|&seed| {
                let t = TrialSpec {
                    sparsity: k,
                    snr_db: None,
                    lambda: 0.0,
                    seed,
                };
                run_trial(&solver, &m, t).unwrap().record.fidelity > 0.999
            })
            .count();
        assert!(exact >= 190, "K={k}: {exact}/200 exact");
    }
}

#[test]
fn csv_round_trip_gives_identical_recovery() {
    let m = default_matrix();
    let p = random_sparse_state(m.n_basis(), 6, 42).unwrap();
    let gamma = synthesize_measurements(&m, &p, Some(35.0), 42).unwrap();
    let index = CoincidenceIndex::new(20, 2).unwrap();
    let mut buf = Vec::new();
    write_measurements_csv(&index, &gamma.values, &mut buf).unwrap();
    let back = read_measurements_csv(&index, buf.as_slice()).unwrap();
    assert_eq!(back, gamma.values);
    let solver = OmpSolver::new(&m, SolverOptions::default()).unwrap();
    assert_eq!(
        solver.recover(&back).unwrap(),
        solver.recover(&gamma.values).unwrap()
    );
}

#[test]
fn cache_round_trip_is_bit_exact() {
    let m = default_matrix();
    let mut bytes = Vec::new();
    write_cache(&m, &mut bytes).unwrap();
    let back = read_cache(bytes.as_slice()).unwrap();
    assert_eq!(back.data(), m.data());
    let mut again = Vec::new();
    write_cache(&back, &mut again).unwrap();
    assert_eq!(bytes, again);
}

#[test]
fn degenerate_pair_mass_lands_on_the_group() {
    let spec = LatticeSpec::new(20, 1.0, 0.0, 2.5).unwrap();
    let basis = entangled_basis(20, 3, 3, 8).unwrap();
    let m = build_sensing_matrix(&spec, &basis, 2).unwrap();
    let (psi, perp) = entangled_slots(&basis).unwrap();
    let solver = OmpSolver::new(&m, SolverOptions::default()).unwrap();
    for target in [psi, perp] {
        let mut p = vec![0.0; m.n_basis()];
        p[target] = 1.0;
        let gamma = synthesize_measurements(&m, &StateVector::new(p).unwrap(), None, 0).unwrap();
        let r = solver.recover(&gamma.values).unwrap();
        let group: f64 = r
            .support
            .iter()
            .zip(&r.coefficients)
            .filter(|(j, _)| [psi, perp].contains(j))
            .map(|(_, c)| c)
            .sum();
        assert!((group - 1.0).abs() < 1e-6);
        assert_eq!(
            r.degenerate_groups_touched,
            vec![vec![psi.min(perp), psi.max(perp)]]
        );
    }
}
