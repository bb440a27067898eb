//! JSON model-spec document.
//!
//! ```json
//! {"utility":{"family":"power","sigma":0.5},
//!  "production":{"family":"multiplicative","theta":0.5},
//!  "shock":{"family":"lognormal","mu":-0.045,"sigma":0.3,"nodes":128},
//!  "beta":0.95, "gamma":1.0, "weight":{"r":10.0}}
//! ```
//!
//! Unknown keys are rejected. A missing `weight.r` is chosen automatically so
//! that `alpha * beta < 1`.

use serde::{Deserialize, Serialize};

use super::{
    DiscreteShock, ModelError, ModelParts, ModelSpec, ProductionSpec, TabulatedUtility,
    UtilitySpec, WeightFunction, DEFAULT_SHOCK_NODES,
};

fn default_nodes() -> usize {
    DEFAULT_SHOCK_NODES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilityDoc {
    Power {
        sigma: f64,
    },
    Tabulated {
        points: Vec<f64>,
        values: Vec<f64>,
        derivs: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProductionDoc {
    Multiplicative { theta: f64 },
    Additive { eta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShockDoc {
    Lognormal {
        mu: f64,
        sigma: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    Uniform {
        low: f64,
        high: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    TwoPoint {
        low: f64,
        high: f64,
        p_low: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    Explicit {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
    Degenerate {
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightFamilyDoc {
    #[default]
    Power,
    Constant,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightDoc {
    #[serde(default)]
    pub family: WeightFamilyDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Exponent; defaults to the utility exponent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub utility: UtilityDoc,
    pub production: ProductionDoc,
    pub shock: ShockDoc,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default)]
    pub weight: WeightDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl ShockDoc {
    pub fn build(&self) -> Result<DiscreteShock, ModelError> {
        match self {
            ShockDoc::Lognormal { mu, sigma, nodes } => DiscreteShock::lognormal(*mu, *sigma, *nodes),
            ShockDoc::Uniform { low, high, nodes } => DiscreteShock::uniform(*low, *high, *nodes),
            ShockDoc::TwoPoint {
                low,
                high,
                p_low,
                nodes,
            } => DiscreteShock::two_point(*low, *high, *p_low, *nodes),
            ShockDoc::Explicit { values, probs } => DiscreteShock::explicit(values.clone(), probs.clone()),
            ShockDoc::Degenerate { value } => DiscreteShock::degenerate(*value),
        }
    }
}

impl ModelDocument {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Document(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model document serializes")
    }

    pub fn build(&self) -> Result<ModelSpec, ModelError> {
        let utility = match &self.utility {
            UtilityDoc::Power { sigma } => UtilitySpec::power(*sigma)?,
            UtilityDoc::Tabulated {
                points,
                values,
                derivs,
            } => UtilitySpec::Tabulated(TabulatedUtility::new(
                points.clone(),
                values.clone(),
                derivs.clone(),
            )?),
        };
        let production = match &self.production {
            ProductionDoc::Multiplicative { theta } => ProductionSpec::multiplicative(*theta)?,
            ProductionDoc::Additive { eta } => ProductionSpec::additive(*eta)?,
        };
        let shock = self.shock.build()?;
        let weight = match self.weight.family {
            WeightFamilyDoc::Constant => WeightFunction::Constant,
            WeightFamilyDoc::Power => {
                let sigma = self
                    .weight
                    .sigma
                    .or(utility.exponent())
                    .ok_or_else(|| ModelError::InvalidWeight("weight exponent required".into()))?;
                let r = match self.weight.r {
                    Some(r) => r,
                    None => auto_shift(&production, shock.mean(), sigma, self.beta)?,
                };
                WeightFunction::shifted(r, sigma)?
            }
        };
        ModelSpec::new(ModelParts {
            utility,
            production,
            shock,
            beta: self.beta,
            gamma: self.gamma,
            weight,
            alpha: self.alpha,
        })
    }
}

/// Smallest round shift `r >= 1` giving a contraction for the built-in technologies.
pub(crate) fn auto_shift(
    production: &ProductionSpec,
    zbar: f64,
    sigma: f64,
    beta: f64,
) -> Result<f64, ModelError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(ModelError::DiscountOutOfRange(beta));
    }
    // (1 + c/r)^sigma * beta < 1  <=>  r > c / (beta^(-1/sigma) - 1)
    let threshold = |c: f64| c / (beta.powf(-1.0 / sigma) - 1.0);
    let round_up = |r: f64| (1.05 * r).ceil().max(1.0);
    match production {
        ProductionSpec::Multiplicative { theta } => {
            Ok(round_up(threshold(zbar.powf(1.0 / (1.0 - theta)))))
        }
        ProductionSpec::Additive { eta } if *eta > 1.0 => {
            if beta * eta.powf(sigma) >= 1.0 {
                return Err(ModelError::NoContractionWeight(format!(
                    "beta * eta^sigma = {:.4} >= 1",
                    beta * eta.powf(sigma)
                )));
            }
            Ok(round_up((zbar / (eta - 1.0)).max(1.0)))
        }
        ProductionSpec::Additive { .. } => Ok(round_up(threshold(zbar))),
        ProductionSpec::Custom(_) => Err(ModelError::AlphaUnavailable),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{"utility":{"family":"power","sigma":0.5},
        "production":{"family":"multiplicative","theta":0.5},
        "shock":{"family":"lognormal","mu":-0.045,"sigma":0.3,"nodes":128},
        "beta":0.95, "gamma":1.0, "weight":{"r":10.0}}"#;

    #[test]
    fn parses_reference_document() {
        let doc = ModelDocument::from_json(SAMPLE).unwrap();
        assert_eq!(doc.weight.r, Some(10.0));
        let spec = doc.build().unwrap();
        assert_eq!(spec.shock().len(), 128);
        assert!(spec.modulus() < 1.0);
    }

    #[test]
    fn rejects_unknown_keys_everywhere() {
        let top = SAMPLE.replace("\"gamma\":1.0", "\"gamma\":1.0, \"extra\":1");
        assert!(ModelDocument::from_json(&top).is_err());
        let nested = SAMPLE.replace("\"theta\":0.5", "\"theta\":0.5, \"tfp\":2");
        assert!(ModelDocument::from_json(&nested).is_err());
        let weight = SAMPLE.replace("\"r\":10.0", "\"r\":10.0, \"q\":1");
        assert!(ModelDocument::from_json(&weight).is_err());
    }

    #[test]
    fn document_round_trips_through_json() {
        let doc = ModelDocument::from_json(SAMPLE).unwrap();
        assert_eq!(ModelDocument::from_json(&doc.to_json()).unwrap(), doc);
    }

    #[test]
    fn auto_shift_satisfies_contraction() {
        let f = ProductionSpec::multiplicative(0.5).unwrap();
        let r = auto_shift(&f, 1.0, 0.5, 0.95).unwrap();
        assert_eq!(r, 10.0);
        let g = ProductionSpec::additive(1.02).unwrap();
        let r = auto_shift(&g, 1.0, 0.5, 0.95).unwrap();
        assert!(r > 50.0);
        let h = ProductionSpec::additive(2.0).unwrap();
        assert_eq!(
            auto_shift(&h, 1.0, 0.9, 0.9).unwrap_err().code(),
            "no_contraction_weight"
        );
    }
}
