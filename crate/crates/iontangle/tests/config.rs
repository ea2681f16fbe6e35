use iontangle::config::{describe_params, Overrides};
use iontangle::{RunError, ScenarioConfig};
use iontangle_core::khz;
use iontangle_core::model::SystemParams;

fn resolve(json: &str) -> Result<SystemParams, RunError> {
    ScenarioConfig::from_json(json)?.param_overrides()?.resolve(&SystemParams::default())
}

#[test]
fn unknown_keys_are_rejected() {
    for bad in [
        r#"{"scenario": "table1", "colour": 1}"#,
        r#"{"options": {"t_end": 3}}"#,
        r#"{"grid": [{"name": "nbar_th", "values": [0], "step": 1}]}"#,
    ] {
        let e = ScenarioConfig::from_json(bad).unwrap_err();
        assert_eq!(e.exit_code(), 1, "{bad}");
    }
    let e = resolve(r#"{"params": {"nu_khz": 2000}}"#).unwrap_err();
    assert!(e.to_string().contains("unknown parameter `nu_khz`"));
}

#[test]
fn frequencies_are_read_as_khz_over_two_pi() {
    let p = resolve(r#"{"params": {"nu_over_2pi_khz": 4000, "kappa1_over_2pi_khz": 1.0, "phi_rad": 0.25, "n_cut": 4}}"#).unwrap();
    assert!((p.nu - khz(4000.0)).abs() < 1e-9);
    assert!((p.kappa1 - khz(1.0)).abs() < 1e-12);
    assert_eq!((p.phi, p.n_cut), (0.25, 4));
}

#[test]
fn microwave_follows_lambda_unless_given() {
    let p = resolve(r#"{"params": {"nu_over_2pi_khz": 4000}}"#).unwrap();
    let lambda = p.derive().unwrap().lambda;
    assert!((p.omega_mw + 2.0 * lambda).abs() < 1e-15);
    let q = resolve(r#"{"params": {"nu_over_2pi_khz": 4000, "omega_mw_over_2pi_khz": 0.5}}"#).unwrap();
    assert!((q.omega_mw - khz(0.5)).abs() < 1e-15);
}

#[test]
fn null_effective_rate_derives_it_from_the_drive() {
    let p = resolve(r#"{"params": {"gamma_eff_over_2pi_khz": null, "omega_b_over_2pi_khz": 40, "gamma_over_2pi_khz": 20000}}"#).unwrap();
    assert_eq!(p.gamma_eff_override, None);
    let expected = khz(40.0) * khz(40.0) / khz(20000.0);
    assert!((p.derive().unwrap().gamma_eff - expected).abs() < 1e-12);
    assert!(resolve(r#"{"params": {"eta": null}}"#).is_err());
    assert!(resolve(r#"{"params": {"eta": "0.1"}}"#).is_err());
}

#[test]
fn relative_keys_apply_after_absolute_ones() {
    let mut o = Overrides::default();
    o.push("kappa_over_g", Some(0.01)).unwrap();
    o.push("gamma_eff_over_g", Some(0.02)).unwrap();
    o.push("omega_a_over_2pi_khz", Some(100.0)).unwrap();
    let p = o.resolve(&SystemParams::default()).unwrap();
    let g = p.eta * p.omega_a / 2.0;
    assert!((g - 0.1 * khz(100.0) / 2.0).abs() < 1e-12);
    assert!((p.kappa1 - 0.01 * g).abs() < 1e-12);
    assert!((p.kappa2 - 0.001 * g).abs() < 1e-12);
    assert!((p.gamma_eff_override.unwrap() - 0.02 * g).abs() < 1e-12);

    let q = Overrides::default().with("gamma_cd_over_gamma_eff", 0.4).unwrap().resolve(&SystemParams::default()).unwrap();
    assert!((q.gamma_cd - 0.4 * khz(0.2)).abs() < 1e-12);
    let r = Overrides::default().with("gamma_r_over_lambda", 0.1).unwrap().resolve(&SystemParams::default()).unwrap();
    assert!((r.gamma_r - 0.1 * r.derive().unwrap().lambda.abs()).abs() < 1e-15);
}

#[test]
fn invalid_values_are_configuration_errors() {
    for bad in [
        r#"{"params": {"n_cut": 2.5}}"#,
        r#"{"params": {"n_cut": 0}}"#,
        r#"{"params": {"kappa1_over_2pi_khz": -1}}"#,
        r#"{"params": {"p_s": 0.5}}"#,
    ] {
        assert_eq!(resolve(bad).unwrap_err().exit_code(), 1, "{bad}");
    }
}

#[test]
fn described_params_round_trip_through_overrides() {
    let p = resolve(r#"{"params": {"nu_over_2pi_khz": 3000, "nbar_th": 0.5, "kappa2_over_2pi_khz": 0.1}}"#).unwrap();
    let v = describe_params(&p);
    let mut o = Overrides::default();
    for key in ["nu_over_2pi_khz", "nbar_th", "kappa2_over_2pi_khz", "omega_a_over_2pi_khz", "eta"] {
        o.push(key, v[key].as_f64()).unwrap();
    }
    let q = o.resolve(&SystemParams::default()).unwrap();
    assert!((q.nu - p.nu).abs() < 1e-9 && (q.kappa2 - p.kappa2).abs() < 1e-12 && q.nbar_th == p.nbar_th);
    assert!(v["derived"]["lambda_rad_per_ms"].as_f64().unwrap() < 0.0);
}
