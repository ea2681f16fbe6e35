use faer::Mat;
use iontangle_core::dynamics::lindblad_rhs;
use iontangle_core::linalg::{cabs, cre, I};
use iontangle_core::model::level::{A, E, G, R};
use iontangle_core::model::*;
use iontangle_core::reduction::*;
use iontangle_core::{c64, khz};
use proptest::prelude::*;

const GAMMA: f64 = 10.0;

fn random_state(v: &[f64]) -> Mat<c64> {
    let a = Mat::from_fn(4, 4, |i, j| c64::new(v[2 * (4 * i + j)], v[2 * (4 * i + j) + 1]));
    let p = &a * a.adjoint();
    let tr: f64 = (0..4).map(|k| p[(k, k)].re).sum();
    Mat::from_fn(4, 4, |i, j| p[(i, j)] / tr)
}

#[test]
fn ground_state_is_dark() {
    let d = obe_rhs(&SingleIonObeState::basis(G), 1.0, GAMMA);
    assert!(d.rho.iter().flatten().all(|z| *z == cre(0.0)));
}

#[test]
fn driven_level_starts_the_coherence() {
    let omega = 1.7;
    let d = obe_rhs(&SingleIonObeState::basis(R), omega, GAMMA);
    assert!(cabs(d.get(A, R) + I * (omega / 2.0)) < 1e-15);
    assert!(cabs(d.get(R, A) - I * (omega / 2.0)) < 1e-15);
    assert_eq!(d.get(R, R), cre(0.0));
    assert_eq!(d.get(A, A), cre(0.0));
    assert_eq!(d.population_sum(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bloch_equations_match_the_generic_master_equation(
        v in prop::collection::vec(-1.0f64..1.0, 32),
        omega in 0.1f64..3.0,
        gamma in 0.5f64..20.0,
    ) {
        let rho = random_state(&v);
        let p = SystemParams { omega_b: omega, gamma, gamma_eff_override: None, ..SystemParams::default() };
        let space = single_ion_space();
        let h = single_ion_drive(&p, &space).unwrap();
        let d = build_dissipators(&p, DissipatorKind::SingleIonFull, &space).unwrap();
        let generic = lindblad_rhs(&h, &d, rho.as_ref());
        let obe = obe_rhs(&SingleIonObeState::from_matrix(&rho).unwrap(), omega, gamma);
        for k in 0..4 {
            for l in 0..4 {
                prop_assert!(cabs(generic[(k, l)] - obe.get(k, l)) < 1e-12);
            }
        }
        prop_assert!(obe.population_sum().abs() < 1e-14);
    }

    #[test]
    fn eliminated_elements_stationarize_the_fast_row(
        rr in 0.0f64..1.0,
        re in (-0.5f64..0.5, -0.5f64..0.5),
        rg in (-0.5f64..0.5, -0.5f64..0.5),
        omega in 0.1f64..3.0,
        gamma in 0.5f64..20.0,
    ) {
        let (re, rg) = (c64::new(re.0, re.1), c64::new(rg.0, rg.1));
        let (aa, ar, ae, ag) = eliminated_elements(cre(rr), re, rg, omega, gamma).unwrap();
        let mut s = SingleIonObeState::zero();
        s.rho[R][R] = cre(rr);
        s.rho[R][E] = re;
        s.rho[E][R] = re.conj();
        s.rho[R][G] = rg;
        s.rho[G][R] = rg.conj();
        s.rho[A][A] = aa;
        s.rho[A][R] = ar;
        s.rho[R][A] = ar.conj();
        s.rho[A][E] = ae;
        s.rho[E][A] = ae.conj();
        s.rho[A][G] = ag;
        s.rho[G][A] = ag.conj();
        let d = obe_rhs(&s, omega, gamma);
        for l in [A, R, E, G] {
            prop_assert!(cabs(d.get(A, l)) < 1e-12);
        }
    }
}

#[test]
fn eliminated_elements_closed_forms() {
    let (aa, ar, ae, ag) = eliminated_elements(cre(1.0), cre(0.0), cre(0.0), 2.0, 2.0).unwrap();
    assert!(cabs(aa - cre(0.5)) < 1e-15);
    assert!(cabs(ar + I * 0.5) < 1e-15);
    assert_eq!((ae, ag), (cre(0.0), cre(0.0)));
    let zero = eliminated_elements(cre(0.0), cre(0.0), cre(0.0), 2.0, 2.0).unwrap();
    assert_eq!(zero, (cre(0.0), cre(0.0), cre(0.0), cre(0.0)));
    assert!(eliminated_elements(cre(1.0), cre(0.0), cre(0.0), 1.0, 0.0).is_err());
}

#[test]
fn effective_rate_values() {
    let rate = effective_decay_rate(khz(200.0), khz(100_000.0)).unwrap();
    assert!((rate / khz(0.4) - 1.0).abs() < 1e-12);
    assert_eq!(effective_decay_rate(0.0, 1.0).unwrap(), 0.0);
    assert!(effective_decay_rate(1.0, 0.0).is_err());
}

#[test]
fn elimination_error_shrinks_with_the_decay_ratio() {
    let omega = 1.0;
    let mut last = f64::INFINITY;
    let mut peaks = Vec::new();
    for ratio in [2.0, 5.0, 10.0, 40.0] {
        let gamma = ratio * omega;
        let c = compare_full_effective(omega, gamma, 5.0 * gamma / (omega * omega)).unwrap();
        assert!(c.max_deviation < last);
        last = c.max_deviation;
        peaks.push(c.peak_rho_aa);
    }
    assert!(peaks.windows(2).all(|w| w[1] < w[0]));
    assert!(*peaks.last().unwrap() < 1e-3);
}

#[test]
fn fitted_rate_recovers_exponential() {
    let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
    let y: Vec<f64> = t.iter().map(|t| 0.3 * (-0.7 * t).exp()).collect();
    assert!((fit_decay_rate(&t, &y, 0.0) - 0.7).abs() < 1e-12);
    assert!(fit_decay_rate(&t[..1], &y[..1], 0.0).is_nan());
}

#[test]
fn branching_dissipator_follows_the_four_level_ion() {
    let omega = 1.0;
    let gamma = 10.0;
    let dev = compare_branching(omega, gamma, 0.94, 0.06, 5.0 * gamma).unwrap();
    assert!(dev < 0.02, "{dev}");
    assert!(compare_branching(omega, gamma, 0.9, 0.2, 1.0).is_err());
}
