use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    ModelDocument, ModelError, ModelSpec, ProductionDoc, ShockDoc, UtilityDoc, WeightDoc,
    DEFAULT_SHOCK_NODES,
};

/// Default lognormal volatility; the location is set for a unit-mean law.
const DEFAULT_SHOCK_SIGMA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    /// `x' = y^theta * z`, power felicity.
    Multiplicative,
    /// `x' = eta * y + z` for `y > 0`, power felicity.
    Additive,
}

impl PresetName {
    pub fn as_str(&self) -> &'static str {
        match self {
            PresetName::Multiplicative => "multiplicative",
            PresetName::Additive => "additive",
        }
    }

    /// Upper end of the state grid used for this preset.
    pub fn default_x_max(&self) -> f64 {
        match self {
            PresetName::Multiplicative => 10.0,
            PresetName::Additive => 40.0,
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multiplicative" => Ok(PresetName::Multiplicative),
            "additive" => Ok(PresetName::Additive),
            other => Err(ModelError::UnknownParameter(format!("preset {other}"))),
        }
    }
}

/// Parameter keys accepted by [`make_preset`].
pub const PRESET_KEYS: &[&str] = &[
    "theta",
    "eta",
    "sigma",
    "beta",
    "gamma",
    "r",
    "shock.mu",
    "shock.sigma",
    "shock.nodes",
];

/// Model document of a built-in preset with parameter overrides applied.
pub fn preset_document(
    name: PresetName,
    overrides: &BTreeMap<String, f64>,
) -> Result<ModelDocument, ModelError> {
    if let Some(bad) = overrides.keys().find(|k| !PRESET_KEYS.contains(&k.as_str())) {
        return Err(ModelError::UnknownParameter(bad.clone()));
    }
    let get = |k: &str, default: f64| overrides.get(k).copied().unwrap_or(default);
    let production = match name {
        PresetName::Multiplicative => {
            if overrides.contains_key("eta") {
                return Err(ModelError::UnknownParameter("eta".into()));
            }
            ProductionDoc::Multiplicative {
                theta: get("theta", 0.5),
            }
        }
        PresetName::Additive => {
            if overrides.contains_key("theta") {
                return Err(ModelError::UnknownParameter("theta".into()));
            }
            ProductionDoc::Additive { eta: get("eta", 0.9) }
        }
    };
    let shock_sigma = get("shock.sigma", DEFAULT_SHOCK_SIGMA);
    let nodes = get("shock.nodes", DEFAULT_SHOCK_NODES as f64);
    if !(nodes >= 1.0 && nodes.fract() == 0.0) {
        return Err(ModelError::InvalidShock(format!("node count {nodes} must be a positive integer")));
    }
    Ok(ModelDocument {
        utility: UtilityDoc::Power {
            sigma: get("sigma", 0.5),
        },
        production,
        shock: ShockDoc::Lognormal {
            mu: get("shock.mu", -0.5 * shock_sigma * shock_sigma),
            sigma: shock_sigma,
            nodes: nodes as usize,
        },
        beta: get("beta", 0.95),
        gamma: get("gamma", 1.0),
        weight: WeightDoc {
            r: overrides.get("r").copied(),
            ..WeightDoc::default()
        },
        alpha: None,
    })
}

/// Built-in preset as a validated [`ModelSpec`].
pub fn make_preset(
    name: PresetName,
    overrides: &BTreeMap<String, f64>,
) -> Result<ModelSpec, ModelError> {
    preset_document(name, overrides)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WeightFunction;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn multiplicative_defaults_contract() {
        let spec = make_preset(PresetName::Multiplicative, &BTreeMap::new()).unwrap();
        assert!(spec.modulus() < 1.0);
        assert_eq!(*spec.weight(), WeightFunction::Shifted { r: 10.0, sigma: 0.5 });
        assert!((spec.shock().mean() - 1.0).abs() < 5e-3);
    }

    #[test]
    fn additive_contracting_growth_accepts_user_shift() {
        let spec = make_preset(PresetName::Additive, &params(&[("eta", 0.9), ("r", 25.0)])).unwrap();
        let zbar = spec.shock().mean();
        assert!(((1.0 + zbar / 25.0).powf(0.5) - spec.alpha()).abs() < 1e-15);
        assert!(spec.modulus() < 1.0);
    }

    #[test]
    fn additive_expanding_growth_uses_eta_power() {
        let spec = make_preset(PresetName::Additive, &params(&[("eta", 1.02)])).unwrap();
        assert!((spec.alpha() - 1.02_f64.sqrt()).abs() < 1e-15);
        assert!((spec.alpha() - 1.009_950_494).abs() < 1e-9);
        assert!((spec.modulus() - 0.959_452_969).abs() < 1e-8);
    }

    #[test]
    fn additive_without_contraction_weight_fails() {
        let err = make_preset(
            PresetName::Additive,
            &params(&[("eta", 2.0), ("sigma", 0.9), ("beta", 0.9)]),
        )
        .unwrap_err();
        assert_eq!(err.code(), "no_contraction_weight");
    }

    #[test]
    fn override_keys_are_restricted() {
        assert!(make_preset(PresetName::Multiplicative, &params(&[("delta", 0.1)])).is_err());
        assert!(make_preset(PresetName::Multiplicative, &params(&[("eta", 1.0)])).is_err());
        assert!("bogus".parse::<PresetName>().is_err());
    }
}
