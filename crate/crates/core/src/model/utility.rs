use serde::{Deserialize, Serialize};

use super::ModelError;

/// Felicity function `u` of current consumption.
#[derive(Debug, Clone, PartialEq)]
pub enum UtilitySpec {
    /// `u(a) = a^sigma`, `sigma` in (0, 1).
    Power { sigma: f64 },
    /// Tabulated values and derivatives, linearly interpolated.
    Tabulated(TabulatedUtility),
}

/// Tabulated felicity. `points[0]` must be 0 with `values[0] == 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedUtility {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl TabulatedUtility {
    pub fn new(points: Vec<f64>, values: Vec<f64>, derivs: Vec<f64>) -> Result<Self, ModelError> {
        let bad = |why: &str| ModelError::InvalidUtility(why.to_string());
        if points.len() < 2 || points.len() != values.len() || points.len() != derivs.len() {
            return Err(bad("tabulation needs at least two aligned points"));
        }
        if points[0] != 0.0 || values[0] != 0.0 {
            return Err(bad("tabulation must start at u(0) = 0"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("tabulation points must be strictly increasing"));
        }
        if values.iter().chain(&derivs).any(|v| !v.is_finite()) {
            return Err(bad("tabulated values must be finite"));
        }
        if derivs.iter().any(|&d| d <= 0.0) {
            return Err(bad("tabulated derivative must be positive"));
        }
        Ok(Self { points, values, derivs })
    }

    fn locate(&self, a: f64) -> (usize, f64) {
        let n = self.points.len();
        let k = self.points.partition_point(|&p| p <= a).clamp(1, n - 1) - 1;
        let t = (a - self.points[k]) / (self.points[k + 1] - self.points[k]);
        (k, t)
    }

    fn value(&self, a: f64) -> f64 {
        let last = self.points.len() - 1;
        if a >= self.points[last] {
            return self.values[last] + self.derivs[last] * (a - self.points[last]);
        }
        let (k, t) = self.locate(a);
        self.values[k] + t * (self.values[k + 1] - self.values[k])
    }

    fn deriv(&self, a: f64) -> f64 {
        let last = self.points.len() - 1;
        if a >= self.points[last] {
            return self.derivs[last];
        }
        let (k, t) = self.locate(a);
        self.derivs[k] + t * (self.derivs[k + 1] - self.derivs[k])
    }
}

impl UtilitySpec {
    pub fn power(sigma: f64) -> Result<Self, ModelError> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(ModelError::InvalidUtility(format!(
                "power exponent {sigma} outside (0, 1)"
            )));
        }
        Ok(UtilitySpec::Power { sigma })
    }

    #[inline]
    pub fn value(&self, a: f64) -> f64 {
        match self {
            UtilitySpec::Power { sigma } => {
                if a <= 0.0 {
                    0.0
                } else {
                    a.powf(*sigma)
                }
            }
            UtilitySpec::Tabulated(t) => t.value(a.max(0.0)),
        }
    }

    /// Marginal utility; `+inf` at zero for the power family.
    #[inline]
    pub fn deriv(&self, a: f64) -> f64 {
        match self {
            UtilitySpec::Power { sigma } => {
                if a <= 0.0 {
                    f64::INFINITY
                } else {
                    sigma * a.powf(sigma - 1.0)
                }
            }
            UtilitySpec::Tabulated(t) => t.deriv(a.max(0.0)),
        }
    }

    /// Exponent shared with the weight function, when the family has one.
    pub fn exponent(&self) -> Option<f64> {
        match self {
            UtilitySpec::Power { sigma } => Some(*sigma),
            UtilitySpec::Tabulated(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_derivative_matches_central_differences() {
        let u = UtilitySpec::power(0.5).unwrap();
        let mut a = 1e-3;
        while a <= 10.0 {
            let h = a * 1e-5;
            let fd = (u.value(a + h) - u.value(a - h)) / (2.0 * h);
            let rel = (fd - u.deriv(a)).abs() / u.deriv(a);
            assert!(rel < 1e-6, "a={a} rel={rel}");
            a *= 1.7;
        }
    }

    #[test]
    fn power_is_inada_at_zero() {
        let u = UtilitySpec::power(0.3).unwrap();
        assert_eq!(u.value(0.0), 0.0);
        assert!(u.deriv(1e-12) > 1e6);
        assert!(u.deriv(0.0).is_infinite());
    }

    #[test]
    fn rejects_exponent_out_of_range() {
        assert!(UtilitySpec::power(1.0).is_err());
        assert!(UtilitySpec::power(0.0).is_err());
    }

    #[test]
    fn tabulated_interpolates_and_extends() {
        let t = TabulatedUtility::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.5], vec![1.5, 0.7, 0.4])
            .unwrap();
        let u = UtilitySpec::Tabulated(t);
        assert!((u.value(0.5) - 0.5).abs() < 1e-15);
        assert!((u.value(3.0) - 1.9).abs() < 1e-15);
        assert!((u.deriv(1.5) - 0.55).abs() < 1e-15);
        assert!(TabulatedUtility::new(vec![0.5, 1.0], vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
    }
}
