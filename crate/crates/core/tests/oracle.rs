mod common;

use qst_core::basis::{entangled_basis, fock_basis, Basis};
use qst_core::lattice::{impulse_response, LatticeSpec};
use qst_core::sensing::{build_sensing_matrix, CoincidenceIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_instance(rng: &mut ChaCha8Rng) -> (LatticeSpec, Basis, usize) {
    let nw = rng.gen_range(2..=6);
    let spec = LatticeSpec::new(
        nw,
        rng.gen_range(0.2..2.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(0.1..3.0),
    )
    .unwrap();
    let basis = if rng.gen_bool(0.5) {
        let a = rng.gen_range(1..=nw);
        let b = loop {
            let b = rng.gen_range(1..=nw);
            if b != a {
                break b;
            }
        };
        entangled_basis(nw, 3, a, b).unwrap()
    } else {
        fock_basis(nw, 3).unwrap()
    };
    (spec, basis, rng.gen_range(1..=3))
}

#[test]
fn columns_match_operator_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let (spec, basis, order) = random_instance(&mut rng);
        let m = build_sensing_matrix(&spec, &basis, order).unwrap();
        let index = CoincidenceIndex::new(spec.n_waveguides, order).unwrap();
        for (j, element) in basis.elements().iter().enumerate() {
            let terms: Vec<_> = element
                .terms()
                .iter()
                .map(|(c, f)| (*c, f.occupations().to_vec()))
                .collect();
            let expected = common::operator_column(
                spec.n_waveguides,
                spec.coupling,
                spec.beta,
                spec.z,
                &terms,
                index.entries(),
            );
            for (a, b) in m.column(j).iter().zip(&expected) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    assert!(worst < 1e-10, "max deviation {worst:e}");
}

#[test]
fn first_order_marginal_of_pair_correlations() {
    // Σ_q' Γ(q, q') over ordered pairs equals (N − 1)·Γ(q).
    let spec = LatticeSpec::new(7, 0.8, 0.3, 1.7).unwrap();
    let basis = entangled_basis(7, 3, 2, 5).unwrap();
    let single = build_sensing_matrix(&spec, &basis, 1).unwrap();
    let pairs = build_sensing_matrix(&spec, &basis, 2).unwrap();
    let index = CoincidenceIndex::new(7, 2).unwrap();
    for j in 0..basis.len() {
        for q in 0..7 {
            let total: f64 = (0..7)
                .map(|r| {
                    let mut key = [q, r];
                    key.sort_unstable();
                    pairs.column(j)[index.index_of(&key).unwrap()]
                })
                .sum();
            assert!((total - 2.0 * single.column(j)[q]).abs() < 1e-12);
        }
    }
}

#[test]
fn impulse_response_matches_bessel_far_from_edges() {
    let spec = LatticeSpec::new(61, 1.0, 0.0, 2.0).unwrap();
    let p = impulse_response(&spec, 31).unwrap();
    for (n, &v) in p.iter().enumerate() {
        let j = common::bessel_j((n as i64 - 30).unsigned_abs() as u32, 2.0 * spec.cz());
        assert!(
            (v - j * j).abs() < 1e-9,
            "waveguide {}: {v} vs {}",
            n + 1,
            j * j
        );
    }
}

#[test]
fn bessel_series_reference_values() {
    // Tabulated J0(1), J1(2.5), J5(4).
    assert!((common::bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
    assert!((common::bessel_j(1, 2.5) - 0.497_094_102_464_274_1).abs() < 1e-15);
    assert!((common::bessel_j(5, 4.0) - 0.132_086_656_047_098_3).abs() < 1e-15);
}

#[test]
fn operator_oracle_hong_ou_mandel() {
    // Two photons in adjacent guides at Cz = π/4 never leave in separate guides.
    let z = std::f64::consts::FRAC_PI_4;
    let gamma = common::operator_column(2, 1.0, 0.0, z, &[(1.0.into(), vec![1, 1])], &[vec![0, 1]]);
    assert!(gamma[0].abs() < 1e-14);
}
