use super::{DiscreteShock, ModelError, ProductionSpec, UtilitySpec, WeightFunction};
use crate::bellman::Grid;

/// Where the growth-bound constant `alpha` came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSource {
    ClosedForm,
    GridEstimate,
    Supplied,
}

/// Raw ingredients of a model; turned into a [`ModelSpec`] by [`ModelSpec::new`].
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub utility: UtilitySpec,
    pub production: ProductionSpec,
    pub shock: DiscreteShock,
    pub beta: f64,
    pub gamma: f64,
    pub weight: WeightFunction,
    /// `None` selects the closed form when the production/weight pair has one.
    pub alpha: Option<f64>,
}

impl ModelParts {
    /// Closed-form growth bound for the built-in production families.
    pub fn closed_form_alpha(&self) -> Option<f64> {
        let zbar = self.shock.mean();
        match (&self.production, self.weight) {
            (_, WeightFunction::Constant) => Some(1.0),
            (ProductionSpec::Multiplicative { theta }, WeightFunction::Shifted { r, sigma }) => {
                Some((1.0 + zbar.powf(1.0 / (1.0 - theta)) / r).powf(sigma))
            }
            // s(x) = (eta x + zbar + r)/(x + r) is monotone, so its sup is at 0 or infinity.
            (ProductionSpec::Additive { eta }, WeightFunction::Shifted { r, sigma }) => {
                Some((1.0 + zbar / r).max(*eta).powf(sigma))
            }
            (ProductionSpec::Custom(_), WeightFunction::Shifted { .. }) => None,
        }
    }

    /// `max_x sup_{y <= x} E[w(f(y, z))] / w(x)` over grid nodes.
    pub fn estimate_alpha(&self, grid: &Grid) -> f64 {
        let mut running = 0.0_f64;
        let mut worst = 0.0_f64;
        for &x in grid.nodes() {
            running = running.max(expected_weight(&self.production, &self.shock, &self.weight, x));
            worst = worst.max(running / self.weight.eval(x));
        }
        worst
    }
}

pub(crate) fn expected_weight(
    production: &ProductionSpec,
    shock: &DiscreteShock,
    weight: &WeightFunction,
    y: f64,
) -> f64 {
    shock
        .nodes()
        .iter()
        .zip(shock.probs())
        .map(|(&z, p)| p * weight.eval(production.value(y, z)))
        .sum()
}

/// A validated, immutable model.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    utility: UtilitySpec,
    production: ProductionSpec,
    shock: DiscreteShock,
    beta: f64,
    gamma: f64,
    weight: WeightFunction,
    alpha: f64,
    alpha_source: AlphaSource,
}

impl ModelSpec {
    pub fn new(parts: ModelParts) -> Result<Self, ModelError> {
        check_scalars(parts.beta, parts.gamma)?;
        if parts.shock.is_empty() {
            return Err(ModelError::EmptyShockSupport);
        }
        let (alpha, alpha_source) = match parts.alpha {
            Some(a) => (a, AlphaSource::Supplied),
            None => (
                parts.closed_form_alpha().ok_or(ModelError::AlphaUnavailable)?,
                AlphaSource::ClosedForm,
            ),
        };
        Self::finish(parts, alpha, alpha_source)
    }

    /// Like [`ModelSpec::new`] but estimates `alpha` on `grid` when no closed form exists.
    pub fn with_grid_alpha(parts: ModelParts, grid: &Grid) -> Result<Self, ModelError> {
        if parts.alpha.is_some() || parts.closed_form_alpha().is_some() {
            return Self::new(parts);
        }
        check_scalars(parts.beta, parts.gamma)?;
        let alpha = parts.estimate_alpha(grid);
        Self::finish(parts, alpha, AlphaSource::GridEstimate)
    }

    fn finish(parts: ModelParts, alpha: f64, alpha_source: AlphaSource) -> Result<Self, ModelError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ModelError::InvalidWeight(format!("growth bound alpha={alpha} invalid")));
        }
        if alpha * parts.beta >= 1.0 {
            return Err(ModelError::NoContraction {
                alpha,
                beta: parts.beta,
            });
        }
        Ok(Self {
            utility: parts.utility,
            production: parts.production,
            shock: parts.shock,
            beta: parts.beta,
            gamma: parts.gamma,
            weight: parts.weight,
            alpha,
            alpha_source,
        })
    }

    /// Parts of this spec, for building variants.
    pub fn to_parts(&self) -> ModelParts {
        ModelParts {
            utility: self.utility.clone(),
            production: self.production.clone(),
            shock: self.shock.clone(),
            beta: self.beta,
            gamma: self.gamma,
            weight: self.weight,
            alpha: match self.alpha_source {
                AlphaSource::ClosedForm => None,
                _ => Some(self.alpha),
            },
        }
    }

    /// Same model with a different risk coefficient.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self, ModelError> {
        check_scalars(self.beta, gamma)?;
        let mut out = self.clone();
        out.gamma = gamma;
        Ok(out)
    }

    /// Same model with a different shock law (alpha recomputed when closed-form).
    pub fn with_shock(&self, shock: DiscreteShock) -> Result<Self, ModelError> {
        let mut parts = self.to_parts();
        parts.shock = shock;
        Self::new(parts)
    }

    pub fn utility(&self) -> &UtilitySpec {
        &self.utility
    }
    pub fn production(&self) -> &ProductionSpec {
        &self.production
    }
    pub fn shock(&self) -> &DiscreteShock {
        &self.shock
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn weight(&self) -> &WeightFunction {
        &self.weight
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn alpha_source(&self) -> AlphaSource {
        self.alpha_source
    }

    /// Contraction modulus `alpha * beta`.
    pub fn modulus(&self) -> f64 {
        self.alpha * self.beta
    }

    /// Tightest `d` with `u(x) <= d w(x)` on the grid nodes.
    pub fn utility_bound(&self, grid: &Grid) -> f64 {
        grid.nodes()
            .iter()
            .map(|&x| self.utility.value(x) / self.weight.eval(x))
            .fold(0.0, f64::max)
    }

    /// `d / (1 - alpha beta)`: coefficient of the value-function envelope `V <= c w`.
    pub fn value_bound_coef(&self, grid: &Grid) -> f64 {
        self.utility_bound(grid) / (1.0 - self.modulus())
    }
}

fn check_scalars(beta: f64, gamma: f64) -> Result<(), ModelError> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(ModelError::DiscountOutOfRange(beta));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(ModelError::NonPositiveRisk(gamma));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CustomProduction;

    fn parts(beta: f64, gamma: f64) -> ModelParts {
        ModelParts {
            utility: UtilitySpec::power(0.5).unwrap(),
            production: ProductionSpec::multiplicative(0.5).unwrap(),
            shock: DiscreteShock::two_point(0.5, 1.5, 0.5, 2).unwrap(),
            beta,
            gamma,
            weight: WeightFunction::shifted(10.0, 0.5).unwrap(),
            alpha: None,
        }
    }

    #[test]
    fn example_one_alpha_is_root_of_one_point_one() {
        let spec = ModelSpec::new(parts(0.95, 1.0)).unwrap();
        assert!((spec.alpha() - 1.1_f64.sqrt()).abs() < 1e-15);
        assert!((spec.alpha() - 1.048_808_848).abs() < 1e-9);
        assert!((spec.modulus() - 0.996_368_405_6).abs() < 1e-9);
    }

    #[test]
    fn scalar_errors_are_distinct() {
        assert_eq!(
            ModelSpec::new(parts(1.0, 1.0)).unwrap_err().code(),
            "discount_out_of_range"
        );
        assert_eq!(
            ModelSpec::new(parts(0.95, 0.0)).unwrap_err().code(),
            "risk_coefficient_non_positive"
        );
        let mut p = parts(0.95, 1.0);
        p.weight = WeightFunction::shifted(1.0, 0.5).unwrap();
        assert_eq!(ModelSpec::new(p).unwrap_err().code(), "no_contraction");
    }

    #[test]
    fn custom_production_needs_alpha_or_grid() {
        let mut p = parts(0.9, 1.0);
        p.production = ProductionSpec::Custom(CustomProduction::new(
            "sqrt",
            |y: f64, z| y.sqrt() * z,
            |y: f64, z| 0.5 * z / y.sqrt(),
        ));
        assert_eq!(ModelSpec::new(p.clone()).unwrap_err().code(), "alpha_unavailable");
        let grid = Grid::uniform(64, 10.0).unwrap();
        let spec = ModelSpec::with_grid_alpha(p.clone(), &grid).unwrap();
        assert_eq!(spec.alpha_source(), AlphaSource::GridEstimate);
        // Grid estimate of the same technology stays below its closed form.
        let closed = parts(0.9, 1.0).closed_form_alpha().unwrap();
        assert!(spec.alpha() <= closed + 1e-12);
        assert!(spec.alpha() > 1.0);
    }
}
