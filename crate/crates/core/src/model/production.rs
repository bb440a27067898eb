use std::fmt;
use std::sync::Arc;

use super::ModelError;

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// User-supplied production `f(y, z)` with its partial derivative in `y`.
#[derive(Clone)]
pub struct CustomProduction {
    pub label: String,
    f: ScalarFn,
    df: ScalarFn,
}

impl CustomProduction {
    pub fn new<F, D>(label: impl Into<String>, f: F, df: D) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            f: Arc::new(f),
            df: Arc::new(df),
        }
    }
}

impl fmt::Debug for CustomProduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomProduction")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

/// Next-period income as a function of investment `y` and shock `z`.
#[derive(Debug, Clone)]
pub enum ProductionSpec {
    /// `f(y, z) = y^theta * z`.
    Multiplicative { theta: f64 },
    /// `f(y, z) = eta * y + z` for `y > 0`, and `f(0, z) = 0`.
    Additive { eta: f64 },
    Custom(CustomProduction),
}

impl ProductionSpec {
    pub fn multiplicative(theta: f64) -> Result<Self, ModelError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(ModelError::InvalidProduction(format!(
                "multiplicative exponent {theta} outside (0, 1)"
            )));
        }
        Ok(ProductionSpec::Multiplicative { theta })
    }

    pub fn additive(eta: f64) -> Result<Self, ModelError> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(ModelError::InvalidProduction(format!(
                "growth rate {eta} must be positive"
            )));
        }
        Ok(ProductionSpec::Additive { eta })
    }

    #[inline]
    pub fn value(&self, y: f64, z: f64) -> f64 {
        match self {
            ProductionSpec::Multiplicative { theta } => {
                if y <= 0.0 {
                    0.0
                } else {
                    y.powf(*theta) * z
                }
            }
            ProductionSpec::Additive { eta } => {
                if y > 0.0 {
                    eta * y + z
                } else {
                    0.0
                }
            }
            ProductionSpec::Custom(c) => (c.f)(y, z),
        }
    }

    /// Partial derivative in investment.
    #[inline]
    pub fn deriv(&self, y: f64, z: f64) -> f64 {
        match self {
            ProductionSpec::Multiplicative { theta } => {
                if y <= 0.0 {
                    f64::INFINITY
                } else {
                    theta * y.powf(theta - 1.0) * z
                }
            }
            ProductionSpec::Additive { eta } => *eta,
            ProductionSpec::Custom(c) => (c.df)(y, z),
        }
    }

    /// Writes `f(y, z_i)` for every shock node into `out`.
    #[inline]
    pub fn next_states(&self, y: f64, nodes: &[f64], out: &mut [f64]) {
        debug_assert_eq!(nodes.len(), out.len());
        match self {
            ProductionSpec::Multiplicative { theta } => {
                let scale = if y <= 0.0 { 0.0 } else { y.powf(*theta) };
                for (o, z) in out.iter_mut().zip(nodes) {
                    *o = scale * z;
                }
            }
            ProductionSpec::Additive { eta } => {
                for (o, z) in out.iter_mut().zip(nodes) {
                    *o = if y > 0.0 { eta * y + z } else { 0.0 };
                }
            }
            ProductionSpec::Custom(c) => {
                for (o, &z) in out.iter_mut().zip(nodes) {
                    *o = (c.f)(y, z);
                }
            }
        }
    }

    /// The additive family jumps at `y = 0`; continuity is only required on `(0, inf)`.
    pub fn continuous_at_zero(&self) -> bool {
        !matches!(self, ProductionSpec::Additive { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additive_is_zero_without_investment() {
        let f = ProductionSpec::additive(1.02).unwrap();
        assert_eq!(f.value(0.0, 3.0), 0.0);
        assert_eq!(f.value(1.0, 3.0), 4.02);
        assert_eq!(f.deriv(0.5, 3.0), 1.02);
    }

    #[test]
    fn next_states_agree_with_pointwise_values() {
        let nodes = [0.5, 1.0, 2.0];
        let mut out = [0.0; 3];
        for f in [
            ProductionSpec::multiplicative(0.4).unwrap(),
            ProductionSpec::additive(0.9).unwrap(),
            ProductionSpec::Custom(CustomProduction::new("lin", |y, z| y * z, |_, z| z)),
        ] {
            for y in [0.0, 0.3, 2.0] {
                f.next_states(y, &nodes, &mut out);
                for (o, &z) in out.iter().zip(&nodes) {
                    assert_eq!(*o, f.value(y, z));
                }
            }
        }
    }

    #[test]
    fn multiplicative_derivative_matches_finite_differences() {
        let f = ProductionSpec::multiplicative(0.5).unwrap();
        for y in [0.01, 0.3, 4.0] {
            let h = y * 1e-6;
            let fd = (f.value(y + h, 1.3) - f.value(y - h, 1.3)) / (2.0 * h);
            assert!((fd - f.deriv(y, 1.3)).abs() / fd < 1e-7);
        }
    }
}
