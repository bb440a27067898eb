use serde::{Deserialize, Serialize};

use super::ModelError;

/// Weight `w` of the weighted sup-norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WeightFunction {
    /// `w(x) = (r + x)^sigma` with `r >= 1`.
    Shifted { r: f64, sigma: f64 },
    /// `w = 1`, for bounded state spaces.
    Constant,
}

impl WeightFunction {
    pub fn shifted(r: f64, sigma: f64) -> Result<Self, ModelError> {
        if !(r >= 1.0 && r.is_finite()) {
            return Err(ModelError::InvalidWeight(format!("shift r={r} must be at least 1")));
        }
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(ModelError::InvalidWeight(format!(
                "weight exponent {sigma} outside (0, 1]"
            )));
        }
        Ok(WeightFunction::Shifted { r, sigma })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            WeightFunction::Shifted { r, sigma } => (r + x.max(0.0)).powf(sigma),
            WeightFunction::Constant => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_is_at_least_one_and_non_decreasing() {
        let w = WeightFunction::shifted(1.0, 0.5).unwrap();
        let mut prev = w.eval(0.0);
        assert!(prev >= 1.0);
        for k in 1..200 {
            let v = w.eval(k as f64 * 0.37);
            assert!(v >= prev);
            prev = v;
        }
        assert_eq!(WeightFunction::Constant.eval(1e9), 1.0);
        assert!(WeightFunction::shifted(0.5, 0.5).is_err());
    }
}
