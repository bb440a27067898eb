//! Entropic certainty equivalent over a discrete shock law.
//!
//! `rho(v) = -(1/gamma) ln sum_i p_i exp(-gamma v_i)`, evaluated as
//! `m - (1/gamma) ln(1 + sum_i p_i expm1(-gamma (v_i - m)))` with `m = min v`.
//! Every exponent is non-positive after the shift, so nothing overflows, and the
//! `ln_1p`/`expm1` pair keeps full precision as `gamma -> 0`.

use serde::Serialize;
use thiserror::Error;

use crate::model::ModelSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("empty outcome vector")]
    Empty,
    #[error("outcome/probability length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("non-finite input at index {0}")]
    NotFinite(usize),
    #[error("risk coefficient must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("probabilities sum to {0}")]
    NotNormalized(f64),
    #[error("`{0}` is not non-increasing at index {1}")]
    NotMonotone(&'static str, usize),
}

impl RiskError {
    pub fn code(&self) -> &'static str {
        match self {
            RiskError::Empty => "empty_outcomes",
            RiskError::LengthMismatch(..) => "length_mismatch",
            RiskError::NotFinite(_) => "not_finite",
            RiskError::NonPositiveGamma(_) => "risk_coefficient_non_positive",
            RiskError::NotNormalized(_) => "probabilities_not_normalized",
            RiskError::NotMonotone(..) => "not_monotone",
        }
    }
}

/// How continuation values are aggregated over the shock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Aggregator {
    Entropic { gamma: f64 },
    /// Expected value: the risk-neutral baseline.
    Expected,
}

impl Aggregator {
    #[inline]
    pub fn aggregate(&self, values: &[f64], probs: &[f64]) -> f64 {
        match *self {
            Aggregator::Entropic { gamma } => entropic_unchecked(values, probs, gamma),
            Aggregator::Expected => mean_unchecked(values, probs),
        }
    }
}

fn check_inputs(values: &[f64], probs: &[f64]) -> Result<(), RiskError> {
    if values.is_empty() {
        return Err(RiskError::Empty);
    }
    if values.len() != probs.len() {
        return Err(RiskError::LengthMismatch(values.len(), probs.len()));
    }
    if let Some(i) = values.iter().chain(probs).position(|v| !v.is_finite()) {
        return Err(RiskError::NotFinite(i % values.len()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(RiskError::NotNormalized(total));
    }
    Ok(())
}

#[inline]
pub(crate) fn mean_unchecked(values: &[f64], probs: &[f64]) -> f64 {
    values.iter().zip(probs).map(|(v, p)| v * p).sum()
}

#[inline]
pub(crate) fn entropic_unchecked(values: &[f64], probs: &[f64], gamma: f64) -> f64 {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = values
        .iter()
        .zip(probs)
        .map(|(v, p)| p * (-gamma * (v - m)).exp_m1())
        .sum();
    let rho = m - s.ln_1p() / gamma;
    // Clamp rounding excursions back into [min v, E v].
    rho.clamp(m, mean_unchecked(values, probs).max(m))
}

/// Entropic certainty equivalent `-(1/gamma) ln E exp(-gamma v)`.
pub fn certainty_equivalent(values: &[f64], probs: &[f64], gamma: f64) -> Result<f64, RiskError> {
    check_inputs(values, probs)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(RiskError::NonPositiveGamma(gamma));
    }
    Ok(entropic_unchecked(values, probs, gamma))
}

pub fn expected_value(values: &[f64], probs: &[f64]) -> Result<f64, RiskError> {
    check_inputs(values, probs)?;
    Ok(mean_unchecked(values, probs))
}

/// Second-order approximation `E v - (gamma/2) Var v`.
pub fn taylor_approx(values: &[f64], probs: &[f64], gamma: f64) -> Result<f64, RiskError> {
    check_inputs(values, probs)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(RiskError::NonPositiveGamma(gamma));
    }
    let mean = mean_unchecked(values, probs);
    let var: f64 = values
        .iter()
        .zip(probs)
        .map(|(v, p)| p * (v - mean) * (v - mean))
        .sum();
    Ok(mean - 0.5 * gamma * var)
}

/// Normalized exponential tilt `p_i e^{-gamma v_i} / sum_j p_j e^{-gamma v_j}`.
pub fn tilted_weights(values: &[f64], probs: &[f64], gamma: f64, out: &mut [f64]) {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut total = 0.0;
    for ((o, v), p) in out.iter_mut().zip(values).zip(probs) {
        *o = p * (-gamma * (v - m)).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssociationCheck {
    pub holds: bool,
    /// `E[hg] - E[h]E[g]`.
    pub gap: f64,
}

/// `E[h g] >= E[h] E[g]` for `h`, `g` non-increasing in the (sorted) underlying variable.
pub fn association_lower_bound_check(
    h: &[f64],
    g: &[f64],
    probs: &[f64],
) -> Result<AssociationCheck, RiskError> {
    check_inputs(h, probs)?;
    check_inputs(g, probs)?;
    for (name, v) in [("h", h), ("g", g)] {
        if let Some(i) = v.windows(2).position(|w| w[1] > w[0]) {
            return Err(RiskError::NotMonotone(name, i + 1));
        }
    }
    let eh = mean_unchecked(h, probs);
    let eg = mean_unchecked(g, probs);
    let ehg: f64 = h.iter().zip(g).zip(probs).map(|((a, b), p)| a * b * p).sum();
    let gap = ehg - eh * eg;
    Ok(AssociationCheck {
        holds: gap >= -1e-12,
        gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubadditivityCheck {
    pub holds: bool,
    /// `rho(g1) + rho(g2) - rho(g1 + g2)` after composing with `f(y, .)`.
    pub slack: f64,
}

/// Certainty equivalent of `g(f(y, z))` under the model's shock.
pub fn composed_certainty_equivalent(g: impl Fn(f64) -> f64, y: f64, model: &ModelSpec) -> f64 {
    let shock = model.shock();
    let vals: Vec<f64> = shock
        .nodes()
        .iter()
        .map(|&z| g(model.production().value(y, z)))
        .collect();
    entropic_unchecked(&vals, shock.probs(), model.gamma())
}

/// `rho(g1 + g2) <= rho(g1) + rho(g2)` for non-decreasing `g1`, `g2` composed with `f(y, .)`.
pub fn subadditivity_check(
    g1: impl Fn(f64) -> f64,
    g2: impl Fn(f64) -> f64,
    y: f64,
    model: &ModelSpec,
) -> SubadditivityCheck {
    let both = composed_certainty_equivalent(|x| g1(x) + g2(x), y, model);
    let a = composed_certainty_equivalent(&g1, y, model);
    let b = composed_certainty_equivalent(&g2, y, model);
    let slack = a + b - both;
    let scale = a.abs() + b.abs();
    SubadditivityCheck {
        holds: slack >= -1e-12 * scale.max(1.0),
        slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn naive(values: &[f64], probs: &[f64], gamma: f64) -> f64 {
        let s: f64 = values.iter().zip(probs).map(|(v, p)| p * (-gamma * v).exp()).sum();
        -s.ln() / gamma
    }

    #[test]
    fn constant_outcome_is_its_own_equivalent() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(certainty_equivalent(&[1.7, 1.7, 1.7], &p, 3.0).unwrap(), 1.7);
        assert_eq!(taylor_approx(&[2.0, 2.0, 2.0], &p, 0.4).unwrap(), 2.0);
        assert_eq!(expected_value(&[2.0, 2.0, 2.0], &p).unwrap(), 2.0);
    }

    #[test]
    fn two_point_hand_value() {
        let rho = certainty_equivalent(&[0.0, 1.0], &[0.5, 0.5], 1.0).unwrap();
        let hand = -(0.5 * (1.0 + (-1.0_f64).exp())).ln();
        assert_relative_eq!(rho, hand, max_relative = 1e-15);
        assert!((rho - 0.379_885_493_0).abs() < 1e-10);
    }

    #[test]
    fn risk_neutral_limit() {
        let rho = certainty_equivalent(&[0.0, 1.0], &[0.5, 0.5], 1e-8).unwrap();
        assert!((rho - 0.5).abs() < 1e-6);
        assert_eq!(expected_value(&[0.0, 1.0], &[0.5, 0.5]).unwrap(), 0.5);
    }

    #[test]
    fn taylor_hand_value() {
        let t = taylor_approx(&[0.0, 1.0], &[0.5, 0.5], 0.01).unwrap();
        assert!((t - 0.498_75).abs() < 1e-15);
        let rho = certainty_equivalent(&[0.0, 1.0], &[0.5, 0.5], 0.01).unwrap();
        assert!((rho - t).abs() < 1e-5);
    }

    #[test]
    fn large_gamma_does_not_underflow() {
        let rho = certainty_equivalent(&[800.0, 900.0], &[0.5, 0.5], 5.0).unwrap();
        assert!(rho.is_finite());
        assert!((rho - (800.0 + 2.0_f64.ln() / 5.0)).abs() < 1e-9);
    }

    #[test]
    fn input_errors() {
        assert_eq!(certainty_equivalent(&[], &[], 1.0).unwrap_err(), RiskError::Empty);
        assert_eq!(
            certainty_equivalent(&[f64::NAN], &[1.0], 1.0).unwrap_err().code(),
            "not_finite"
        );
        assert!(certainty_equivalent(&[1.0], &[1.0], 0.0).is_err());
        assert!(expected_value(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn not_positively_homogeneous() {
        let p = [0.5, 0.5];
        let v = [0.0, 1.0];
        let doubled = certainty_equivalent(&[0.0, 2.0], &p, 1.0).unwrap();
        let scaled = 2.0 * certainty_equivalent(&v, &p, 1.0).unwrap();
        assert!((doubled - scaled).abs() > 1e-3);
    }

    #[test]
    fn association_indicator_on_four_points() {
        // h = g = 1{X <= median} on uniform X in {1,2,3,4}
        let ind = [1.0, 1.0, 0.0, 0.0];
        let p = [0.25; 4];
        let c = association_lower_bound_check(&ind, &ind, &p).unwrap();
        // Brute force: E[h g] = P(X<=2) = 0.5, E[h]E[g] = 0.25.
        let mut ehg = 0.0;
        let mut eh = 0.0;
        for k in 0..4 {
            ehg += 0.25 * ind[k] * ind[k];
            eh += 0.25 * ind[k];
        }
        assert!((c.gap - (ehg - eh * eh)).abs() < 1e-15);
        assert!((c.gap - 0.25).abs() < 1e-15);
        assert!(c.holds);
    }

    #[test]
    fn association_constant_h_has_zero_gap() {
        let c = association_lower_bound_check(&[3.0; 3], &[2.0, 1.0, -1.0], &[0.2, 0.3, 0.5]).unwrap();
        assert!(c.gap.abs() < 1e-15);
    }

    #[test]
    fn association_rejects_increasing_input() {
        let e = association_lower_bound_check(&[1.0, 2.0], &[1.0, 0.0], &[0.5, 0.5]).unwrap_err();
        assert_eq!(e, RiskError::NotMonotone("h", 1));
    }

    #[test]
    fn tilted_weights_are_a_distribution() {
        let mut out = [0.0; 4];
        tilted_weights(&[0.0, 3.0, 40.0, 1.0], &[0.1, 0.2, 0.3, 0.4], 2.0, &mut out);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(out[0] > out[3] && out[3] > out[1]);
    }

    fn outcomes() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..10).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..10.0, n),
                prop::collection::vec(0.05f64..1.0, n),
            )
                .prop_map(|(v, w)| {
                    let s: f64 = w.iter().sum();
                    (v, w.iter().map(|x| x / s).collect())
                })
        })
    }

    proptest! {
        #[test]
        fn stabilized_matches_naive((v, p) in outcomes(), gamma in 0.01f64..3.0) {
            prop_assume!(gamma * v.iter().cloned().fold(0.0, f64::max) <= 30.0);
            let a = certainty_equivalent(&v, &p, gamma).unwrap();
            let b = naive(&v, &p, gamma);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-3));
        }

        #[test]
        fn bounded_by_min_and_mean((v, p) in outcomes(), gamma in 0.001f64..20.0) {
            let rho = certainty_equivalent(&v, &p, gamma).unwrap();
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let mean = expected_value(&v, &p).unwrap();
            prop_assert!(rho >= lo && rho <= mean + 1e-12);
        }

        #[test]
        fn monotone_and_concave((v, p) in outcomes(), bump in 0.0f64..2.0, lambda in 0.0f64..1.0) {
            let up: Vec<f64> = v.iter().enumerate().map(|(i, x)| x + bump * (i % 2) as f64).collect();
            let a = certainty_equivalent(&v, &p, 1.5).unwrap();
            let b = certainty_equivalent(&up, &p, 1.5).unwrap();
            prop_assert!(a <= b + 1e-12);
            let mix: Vec<f64> = v.iter().zip(&up).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect();
            let m = certainty_equivalent(&mix, &p, 1.5).unwrap();
            prop_assert!(m >= lambda * a + (1.0 - lambda) * b - 1e-12);
        }
    }
}
