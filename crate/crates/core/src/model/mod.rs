//! Model primitives: felicity, technology, shock quadrature, weight function
//! and the numerical checks of the standing assumptions.

mod document;
mod presets;
mod production;
mod shock;
mod spec;
mod utility;
mod validate;
mod weight;

pub use document::{ModelDocument, ProductionDoc, ShockDoc, UtilityDoc, WeightDoc, WeightFamilyDoc};
pub use presets::{make_preset, preset_document, PresetName};
pub use production::{CustomProduction, ProductionSpec};
pub use shock::{DiscreteShock, ShockProvenance, DEFAULT_SHOCK_NODES};
pub use spec::{AlphaSource, ModelParts, ModelSpec};
pub use utility::{TabulatedUtility, UtilitySpec};
pub use validate::{validate, AssumptionCheck, ValidationReport};
pub use weight::WeightFunction;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("discount factor out of range: beta={0} must lie in (0, 1)")]
    DiscountOutOfRange(f64),
    #[error("risk coefficient must be positive, got gamma={0}")]
    NonPositiveRisk(f64),
    #[error("empty shock support")]
    EmptyShockSupport,
    #[error("contraction modulus alpha*beta = {alpha}*{beta} is not below 1")]
    NoContraction { alpha: f64, beta: f64 },
    #[error("no contraction weight exists for these parameters ({0})")]
    NoContractionWeight(String),
    #[error("no closed-form growth bound; supply alpha or estimate it on a grid")]
    AlphaUnavailable,
    #[error("invalid utility: {0}")]
    InvalidUtility(String),
    #[error("invalid production: {0}")]
    InvalidProduction(String),
    #[error("invalid shock: {0}")]
    InvalidShock(String),
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("model document: {0}")]
    Document(String),
}

impl ModelError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::DiscountOutOfRange(_) => "discount_out_of_range",
            ModelError::NonPositiveRisk(_) => "risk_coefficient_non_positive",
            ModelError::EmptyShockSupport => "empty_shock_support",
            ModelError::NoContraction { .. } => "no_contraction",
            ModelError::NoContractionWeight(_) => "no_contraction_weight",
            ModelError::AlphaUnavailable => "alpha_unavailable",
            ModelError::InvalidUtility(_) => "invalid_utility",
            ModelError::InvalidProduction(_) => "invalid_production",
            ModelError::InvalidShock(_) => "invalid_shock",
            ModelError::InvalidWeight(_) => "invalid_weight",
            ModelError::InvalidGrid(_) => "invalid_grid",
            ModelError::UnknownParameter(_) => "unknown_parameter",
            ModelError::Document(_) => "model_document",
        }
    }
}
