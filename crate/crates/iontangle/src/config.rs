//! JSON run configuration.
//!
//! Frequencies and rates are given as `value/2π` in kHz, matching the way the
//! physical parameters are usually quoted. Everything is converted to rad/ms
//! on resolution.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use iontangle_core::model::SystemParams;
use iontangle_core::{khz, to_khz};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::RunError;

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Scenario name; optional when the name is given on the command line.
    #[serde(default)]
    pub scenario: Option<String>,
    /// Parameter overrides keyed by the names in [`PARAM_KEYS`] and
    /// [`RELATIVE_KEYS`].
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    /// Grid axes in iteration order, the last axis varying fastest.
    #[serde(default)]
    pub grid: Vec<Axis>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub options: RunOptions,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: &str, values: impl Into<Vec<f64>>) -> Self {
        Self { name: name.to_string(), values: values.into() }
    }
}

/// Scenario controls. Each scenario reads the ones that apply to it and
/// falls back to its own default for the rest.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    /// Total evolution time in ms.
    pub t_end_ms: Option<f64>,
    /// Number of recorded time points including t = 0.
    pub samples: Option<usize>,
    /// Split-step size in ms for full-model evolution.
    pub split_step_ms: Option<f64>,
    /// Re-run a representative point at refined resolution.
    pub convergence_check: Option<bool>,
    /// For fig3: also run at half the split step and record the gap.
    pub split_gap_check: Option<bool>,
    /// `plain` or `branching` engineered decay (steady, sweep, evolve).
    pub engineered: Option<String>,
    /// `effective` or `full` (evolve).
    pub model: Option<String>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(format!("invalid configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            RunError::Config(msg) => RunError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn param_overrides(&self) -> Result<Overrides, RunError> {
        let mut o = Overrides::default();
        for (k, v) in &self.params {
            let value = match v {
                Value::Null => None,
                Value::Number(n) => Some(n.as_f64().unwrap()),
                other => return Err(RunError::Config(format!("parameter `{k}` must be a number or null, got {other}"))),
            };
            o.push(k, value)?;
        }
        Ok(o)
    }
}

/// Absolute parameter keys with their units.
pub const PARAM_KEYS: &[(&str, &str)] = &[
    ("nu_over_2pi_khz", "kHz"),
    ("eta", "1"),
    ("omega_a_over_2pi_khz", "kHz"),
    ("omega_b_over_2pi_khz", "kHz"),
    ("omega_mw_over_2pi_khz", "kHz"),
    ("gamma_over_2pi_khz", "kHz"),
    ("gamma_r_over_2pi_khz", "kHz"),
    ("gamma_eff_over_2pi_khz", "kHz"),
    ("kappa1_over_2pi_khz", "kHz"),
    ("kappa2_over_2pi_khz", "kHz"),
    ("nbar_th", "1"),
    ("gamma_cd_over_2pi_khz", "kHz"),
    ("phi_rad", "rad"),
    ("n_cut", "1"),
    ("p_s", "1"),
    ("p_d", "1"),
];

/// Keys expressed relative to derived quantities; applied after all absolute
/// keys. `kappa_over_g` sets κ₁ = κ and κ₂ = κ/10.
pub const RELATIVE_KEYS: &[(&str, &str)] = &[
    ("gamma_eff_over_g", "1"),
    ("kappa_over_g", "1"),
    ("gamma_cd_over_gamma_eff", "1"),
    ("gamma_r_over_lambda", "1"),
];

pub fn unit_of(key: &str) -> Option<&'static str> {
    PARAM_KEYS.iter().chain(RELATIVE_KEYS).find(|(k, _)| *k == key).map(|(_, u)| *u)
}

/// Ordered parameter assignments. `None` is only meaningful for
/// `gamma_eff_over_2pi_khz` and means "derive γ_eff = Ω_b²/γ".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    entries: Vec<(String, Option<f64>)>,
}

impl Overrides {
    pub fn push(&mut self, key: &str, value: Option<f64>) -> Result<(), RunError> {
        if unit_of(key).is_none() {
            return Err(RunError::Config(format!("unknown parameter `{key}`")));
        }
        if value.is_none() && key != "gamma_eff_over_2pi_khz" {
            return Err(RunError::Config(format!("parameter `{key}` cannot be null")));
        }
        if let Some(v) = value {
            if !v.is_finite() {
                return Err(RunError::Config(format!("parameter `{key}` must be finite")));
            }
        }
        self.entries.retain(|(k, _)| k != key);
        self.entries.push((key.to_string(), value));
        Ok(())
    }

    pub fn with(mut self, key: &str, value: f64) -> Result<Self, RunError> {
        self.push(key, Some(value))?;
        Ok(self)
    }

    pub fn extend(&mut self, other: &Overrides) {
        for (k, v) in &other.entries {
            self.entries.retain(|(e, _)| e != k);
            self.entries.push((k.clone(), *v));
        }
    }

    pub fn get(&self, key: &str) -> Option<Option<f64>> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// Applies the overrides to `base`, relative keys last, then locks
    /// Ω_mw = −2λ unless it was given explicitly, and validates.
    pub fn resolve(&self, base: &SystemParams) -> Result<SystemParams, RunError> {
        let mut p = base.clone();
        for (k, v) in &self.entries {
            if PARAM_KEYS.iter().any(|(key, _)| key == k) {
                set_absolute(&mut p, k, *v)?;
            }
        }
        for (k, v) in &self.entries {
            if RELATIVE_KEYS.iter().any(|(key, _)| key == k) {
                let d = p.derive()?;
                let v = v.unwrap();
                match k.as_str() {
                    "gamma_eff_over_g" => p.gamma_eff_override = Some(v * d.g),
                    "kappa_over_g" => {
                        p.kappa1 = v * d.g;
                        p.kappa2 = v * d.g / 10.0;
                    }
                    "gamma_cd_over_gamma_eff" => p.gamma_cd = v * d.gamma_eff,
                    "gamma_r_over_lambda" => p.gamma_r = v * d.lambda.abs(),
                    _ => unreachable!(),
                }
            }
        }
        if self.get("omega_mw_over_2pi_khz").is_none() {
            p.lock_microwave();
        }
        p.validate()?;
        Ok(p)
    }
}

fn set_absolute(p: &mut SystemParams, key: &str, value: Option<f64>) -> Result<(), RunError> {
    if key == "gamma_eff_over_2pi_khz" {
        p.gamma_eff_override = value.map(khz);
        return Ok(());
    }
    let v = value.unwrap();
    match key {
        "nu_over_2pi_khz" => p.nu = khz(v),
        "eta" => p.eta = v,
        "omega_a_over_2pi_khz" => p.omega_a = khz(v),
        "omega_b_over_2pi_khz" => p.omega_b = khz(v),
        "omega_mw_over_2pi_khz" => p.omega_mw = khz(v),
        "gamma_over_2pi_khz" => p.gamma = khz(v),
        "gamma_r_over_2pi_khz" => p.gamma_r = khz(v),
        "kappa1_over_2pi_khz" => p.kappa1 = khz(v),
        "kappa2_over_2pi_khz" => p.kappa2 = khz(v),
        "nbar_th" => p.nbar_th = v,
        "gamma_cd_over_2pi_khz" => p.gamma_cd = khz(v),
        "phi_rad" => p.phi = v,
        "n_cut" => {
            if v < 1.0 || v.fract() != 0.0 {
                return Err(RunError::Config(format!("n_cut must be a positive integer, got {v}")));
            }
            p.n_cut = v as usize;
        }
        "p_s" => p.p_s = v,
        "p_d" => p.p_d = v,
        _ => unreachable!(),
    }
    Ok(())
}

/// Parameters in the file's units plus the derived quantities, for metadata.
pub fn describe_params(p: &SystemParams) -> Value {
    let mut v = json!({
        "nu_over_2pi_khz": to_khz(p.nu),
        "eta": p.eta,
        "omega_a_over_2pi_khz": to_khz(p.omega_a),
        "omega_b_over_2pi_khz": to_khz(p.omega_b),
        "omega_mw_over_2pi_khz": to_khz(p.omega_mw),
        "gamma_over_2pi_khz": to_khz(p.gamma),
        "gamma_r_over_2pi_khz": to_khz(p.gamma_r),
        "gamma_eff_over_2pi_khz": p.gamma_eff_override.map(to_khz),
        "kappa1_over_2pi_khz": to_khz(p.kappa1),
        "kappa2_over_2pi_khz": to_khz(p.kappa2),
        "nbar_th": p.nbar_th,
        "gamma_cd_over_2pi_khz": to_khz(p.gamma_cd),
        "phi_rad": p.phi,
        "n_cut": p.n_cut,
        "p_s": p.p_s,
        "p_d": p.p_d,
    });
    if let Ok(d) = p.derive() {
        v["derived"] = json!({
            "lambda_rad_per_ms": d.lambda,
            "g_rad_per_ms": d.g,
            "gamma_eff_rad_per_ms": d.gamma_eff,
            "nu_modes_rad_per_ms": d.nu_modes,
        });
    }
    v
}
