use std::f64::consts::SQRT_2;
use std::sync::Arc;

use iontangle_core::linalg::{self, cre};
use iontangle_core::model::level::{E, G, R};
use iontangle_core::model::*;
use iontangle_core::observables::*;
use iontangle_core::qop::{DensityMatrix, HilbertSpace, Ket, Operator};
use proptest::prelude::*;

fn qubit_state(space: &Arc<HilbertSpace>, probs: [f64; 2]) -> DensityMatrix {
    DensityMatrix::diagonal(space, &[probs[0], probs[1], 0.0]).unwrap()
}

fn ion(label: &str) -> Arc<HilbertSpace> {
    Arc::new(HilbertSpace::new([(label, 3)]).unwrap())
}

fn mixed_qubits(space: &Arc<HilbertSpace>) -> DensityMatrix {
    let mut rho = Operator::zeros(space);
    for (a, b) in [(G, G), (G, E), (E, G), (E, E)] {
        rho = rho + two_ion_ket(space, a, b).unwrap().projector().scaled(0.25);
    }
    DensityMatrix::from_operator(rho).unwrap()
}

#[test]
fn bell_states_are_orthonormal_and_antisymmetric() {
    let space = internal_space();
    let s = bell_state(BellKind::S, &space).unwrap();
    let t = bell_state(BellKind::T, &space).unwrap();
    assert!((s.norm() - 1.0).abs() < 1e-15);
    assert!(linalg::cabs(s.inner(&t)) < 1e-15);
    let swapped: Vec<_> = (0..9).map(|k| s.amplitudes()[(k % 3) * 3 + k / 3]).collect();
    let swapped = Ket::new(space.clone(), swapped).unwrap();
    assert!(swapped.max_abs_diff(&s.scaled(cre(-1.0))) < 1e-15);
    assert!(bell_state(BellKind::S, &single_ion_space()).is_err());
}

#[test]
fn populations_of_product_and_mixed_states() {
    let full = full_space(2).unwrap();
    let s = bell_state(BellKind::S, &internal_space()).unwrap();
    let phonons = Arc::new(HilbertSpace::new([("mode1", 2), ("mode2", 2)]).unwrap());
    let rho = DensityMatrix::pure(&s).unwrap().kron(&DensityMatrix::diagonal(&phonons, &[0.4, 0.3, 0.2, 0.1]).unwrap()).unwrap();
    assert_eq!(*rho.space().as_ref(), *full.as_ref());
    assert!((population(&rho, &s).unwrap() - 1.0).abs() < 1e-14);

    let mixed = mixed_qubits(&internal_space());
    for t in Target::ALL {
        let p = population(&mixed, &t.ket(&internal_space()).unwrap()).unwrap();
        assert!((p - 0.25).abs() < 1e-15, "{}", t.name());
    }
    let unnormalized = s.scaled(cre(2.0));
    assert!(population(&mixed, &unnormalized).is_err());
}

#[test]
fn population_observables_match_direct_populations() {
    let space = full_space(2).unwrap();
    let obs = population_observables(&space).unwrap();
    let names: Vec<&str> = obs.iter().map(|o| o.0.as_str()).collect();
    assert_eq!(names, ["P_S", "P_T", "P_ee", "P_gg"]);
    let rho = DensityMatrix::maximally_mixed(&space);
    for ((_, op), t) in obs.iter().zip(Target::ALL) {
        let direct = population(&rho, &t.ket(&internal_space()).unwrap()).unwrap();
        assert!((rho.expectation(op).re - direct).abs() < 1e-14);
    }
}

#[test]
fn chsh_algebra() {
    let space = internal_space();
    let o = chsh_operator(&space).unwrap();
    assert!(o.hermiticity_defect() < 1e-15);
    let singlet = DensityMatrix::pure(&bell_state(BellKind::S, &space).unwrap()).unwrap();
    assert!((chsh_correlation(&singlet).unwrap() - 2.0 * SQRT_2).abs() < 1e-12);
    assert!(chsh_correlation(&mixed_qubits(&space)).unwrap().abs() < 1e-12);
    let gg = two_ion_ket(&space, G, G).unwrap();
    assert!(linalg::cabs(gg.expectation(&o)) < 1e-15);
    let (values, _) = linalg::hermitian_eigen(o.data()).unwrap();
    assert!(values.iter().all(|v| v.abs() <= 2.0 * SQRT_2 + 1e-12));
    assert!((values.last().unwrap() - 2.0 * SQRT_2).abs() < 1e-12);
}

#[test]
fn embedded_paulis_square_to_the_qubit_projector() {
    for p in [Pauli::X, Pauli::Y, Pauli::Z] {
        let m = qubit_pauli(3, p);
        let sq = &m * &m;
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j && i != R { 1.0 } else { 0.0 };
                assert!(linalg::cabs(sq[(i, j)] - cre(expected)) < 1e-15);
            }
        }
    }
}

#[test]
fn chsh_ignores_phonon_factors_of_product_states() {
    let s = DensityMatrix::pure(&bell_state(BellKind::S, &internal_space()).unwrap()).unwrap();
    let phonons = Arc::new(HilbertSpace::new([("mode1", 2), ("mode2", 3)]).unwrap());
    let thermal = DensityMatrix::diagonal(&phonons, &[0.3, 0.1, 0.1, 0.2, 0.2, 0.1]).unwrap();
    let joint = s.kron(&thermal).unwrap();
    assert!((chsh_correlation(&joint).unwrap() - chsh_correlation(&s).unwrap()).abs() < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn separable_states_obey_the_classical_bound(
        a in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 1..5),
    ) {
        let total: f64 = a.iter().map(|x| x.0).sum::<f64>().max(1e-12);
        let mut acc = Operator::zeros(&internal_space());
        for (w, p1, p2) in &a {
            let r1 = qubit_state(&ion("ion1"), [*p1, 1.0 - p1]);
            let r2 = qubit_state(&ion("ion2"), [*p2, 1.0 - p2]);
            let prod = r1.kron(&r2).unwrap();
            acc = acc + prod.as_operator().scaled(w / total);
        }
        if total > 1e-9 {
            let rho = DensityMatrix::from_operator(acc).unwrap();
            prop_assert!(chsh_correlation(&rho).unwrap().abs() <= 2.0 + 1e-10);
        }
    }

    #[test]
    fn populations_with_r_projectors_sum_to_one(v in prop::collection::vec(-1.0f64..1.0, 162)) {
        let space = internal_space();
        let a = faer::Mat::from_fn(9, 9, |i, j| faer::c64::new(v[2 * (9 * i + j)], v[2 * (9 * i + j) + 1]));
        let p = &a * a.adjoint();
        let tr: f64 = (0..9).map(|k| p[(k, k)].re).sum();
        let rho = DensityMatrix::new(space.clone(), faer::Mat::from_fn(9, 9, |i, j| p[(i, j)] / tr)).unwrap();
        let mut total: f64 = Target::ALL.iter().map(|t| population(&rho, &t.ket(&space).unwrap()).unwrap()).sum();
        for (a, b) in [(R, R), (R, G), (G, R), (R, E), (E, R)] {
            total += population(&rho, &two_ion_ket(&space, a, b).unwrap()).unwrap();
        }
        prop_assert!((total - 1.0).abs() < 1e-9);
    }
}
